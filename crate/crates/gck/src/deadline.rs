use std::time::{Duration, Instant};

use gck_core::Cancel;

/// Wall-clock limit shared by all stages of one run.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    pub fn none() -> Self {
        Self { end: None }
    }

    pub fn after(limit: Duration) -> Self {
        Self {
            end: Some(Instant::now() + limit),
        }
    }

    pub fn from_secs(secs: Option<f64>) -> Self {
        match secs {
            Some(s) => Self::after(Duration::from_secs_f64(s.max(0.0))),
            None => Self::none(),
        }
    }
}

impl Cancel for Deadline {
    fn is_cancelled(&self) -> bool {
        self.end.is_some_and(|end| Instant::now() >= end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expires() {
        assert!(!Deadline::none().is_cancelled());
        assert!(Deadline::after(Duration::ZERO).is_cancelled());
        assert!(!Deadline::after(Duration::from_secs(3600)).is_cancelled());
    }
}
