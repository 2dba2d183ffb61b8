//! Cooperative interruption for long-running stages.
//!
//! Core code has no clock. Callers that need a deadline implement [`Cancel`]
//! and the expensive loops poll it between work units.

use crate::{Error, Result};

pub trait Cancel: Sync {
    fn is_cancelled(&self) -> bool;

    fn check(&self) -> Result<()> {
        if self.is_cancelled() {
            Err(Error::Interrupted)
        } else {
            Ok(())
        }
    }
}

/// Never cancels.
#[derive(Debug, Clone, Copy, Default)]
pub struct Never;

impl Cancel for Never {
    #[inline]
    fn is_cancelled(&self) -> bool {
        false
    }
}

impl<C: Cancel + ?Sized> Cancel for &C {
    fn is_cancelled(&self) -> bool {
        (**self).is_cancelled()
    }
}
