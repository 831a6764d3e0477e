use std::fmt;

/// CLI failure classes mapped onto exit codes: validation errors exit 2,
/// I/O errors exit 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn validation(e: impl fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn io(e: impl fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Classify a core sensor I/O error: raw I/O failures exit 3, everything
/// else (bad magic, truncation, schema violations) is a validation failure.
pub fn from_sensor(e: voxfuse_core::sensorio::SensorIoError) -> CliError {
    match e {
        voxfuse_core::sensorio::SensorIoError::Io(inner) => CliError::io(inner),
        other => CliError::validation(other),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
