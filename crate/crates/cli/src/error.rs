use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Io,
    Config,
    Admissibility,
    Runtime,
}

impl FailureKind {
    pub fn exit_code(&self) -> i32 {
        match self {
            FailureKind::Io => 1,
            FailureKind::Config => 2,
            FailureKind::Admissibility => 3,
            FailureKind::Runtime => 4,
        }
    }
}

/// A pipeline failure tagged with the stage it happened in.
#[derive(Debug, thiserror::Error)]
pub struct CliError {
    pub stage: &'static str,
    pub kind: FailureKind,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.stage, self.message)
    }
}

impl CliError {
    pub fn config(stage: &'static str, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind: FailureKind::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Classifies a library error raised during `stage`.
    pub fn from_core(stage: &'static str, err: asyncopt::Error) -> Self {
        use asyncopt::Error as E;
        let kind = match &err {
            E::Io(_) => FailureKind::Io,
            E::Inadmissible { .. } => FailureKind::Admissibility,
            E::InvalidParameter(_)
            | E::DimensionMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::NonSeparable
            | E::MissingConstant(_)
            | E::ConfigurationMismatch(_)
            | E::EmptyBatch(_)
            | E::Parse { .. }
            | E::Csv(_)
            | E::DelaysTooShort { .. } => FailureKind::Config,
            _ => FailureKind::Runtime,
        };
        Self {
            stage,
            kind,
            message: err.to_string(),
        }
    }

    pub fn io(stage: &'static str, err: std::io::Error) -> Self {
        Self {
            stage,
            kind: FailureKind::Io,
            message: err.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> Stage<T> for asyncopt::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}

impl<T> Stage<T> for std::io::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::io(stage, e))
    }
}
