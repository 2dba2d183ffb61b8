use std::fmt;
use std::path::Path;

/// Broad failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Runtime => 4,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub struct Error {
    pub kind: ErrorKind,
    /// Pipeline stage that failed, if any.
    pub stage: Option<&'static str>,
    pub message: String,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stage {
            Some(stage) => write!(f, "stage `{stage}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, message)
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Runtime, message)
    }

    fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            stage: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Attaches a stage name unless one is already set.
    pub fn in_stage(mut self, stage: &'static str) -> Self {
        self.stage.get_or_insert(stage);
        self
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        let kind = if err.kind() == std::io::ErrorKind::NotFound {
            ErrorKind::Config
        } else {
            ErrorKind::Data
        };
        Self::new(kind, format!("{}: {err}", path.display()))
    }

    pub fn at_line(path: &Path, line: usize, message: impl fmt::Display) -> Self {
        Self::data(format!("{}:{line}: {message}", path.display()))
    }
}

impl From<gck_core::Error> for Error {
    fn from(e: gck_core::Error) -> Self {
        use gck_core::Error as E;
        let kind = match &e {
            E::InvalidParameter(_) => ErrorKind::Config,
            E::NodeOutOfRange { .. }
            | E::ContractViolation(_)
            | E::Shape(_)
            | E::EmptyInput(_)
            | E::Data(_)
            | E::Corrupt(_) => ErrorKind::Data,
            E::Degenerate(_) | E::Diverged { .. } | E::Interrupted => ErrorKind::Runtime,
        };
        let message = match e {
            E::Interrupted => "timed out".to_string(),
            other => other.to_string(),
        };
        Self::new(kind, message)
    }
}

/// Runs `f` and tags any failure with `stage`.
pub fn stage<T, E: Into<Error>>(name: &'static str, f: impl FnOnce() -> Result<T, E>) -> Result<T> {
    f().map_err(|e| e.into().in_stage(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_kind() {
        let e: Error = gck_core::Error::InvalidParameter("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: Error = gck_core::Error::Data("x".into()).into();
        assert_eq!(e.exit_code(), 3);
        let e: Error = gck_core::Error::Interrupted.into();
        assert_eq!(e.exit_code(), 4);
    }

    #[test]
    fn stage_name_is_kept() {
        let r: Result<()> = stage("centrality", || Err(gck_core::Error::Interrupted));
        let e = r.unwrap_err();
        assert_eq!(e.to_string(), "stage `centrality`: timed out");
        assert_eq!(e.in_stage("other").stage, Some("centrality"));
    }
}
