use std::fmt;

use fdm_core::FdmError;

/// Exit status 2 for usage and validation problems, 3 for failures inside
/// the pipeline.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Pipeline(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Pipeline(m) => f.write_str(m),
        }
    }
}

/// Errors from parameter checks made before any computation.
pub fn invalid(e: FdmError) -> CliError {
    CliError::Usage(e.to_string())
}

/// Errors raised while the pipeline runs.
pub fn failed(e: FdmError) -> CliError {
    CliError::Pipeline(e.to_string())
}

/// Output files that cannot be written.
pub fn io(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Pipeline(format!("cannot write {}: {e}", path.display()))
}
