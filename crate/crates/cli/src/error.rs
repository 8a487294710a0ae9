use std::fmt;

/// Failure of a subcommand, classified by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input (exit 2).
    Input(String),
    /// Data too degenerate to fit (exit 3).
    Degenerate(String),
    /// Numerical breakdown inside the solver (exit 4).
    Numeric(String),
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Degenerate(m) => write!(f, "degenerate data: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<smooth_ntf::Error> for CliError {
    fn from(e: smooth_ntf::Error) -> Self {
        use smooth_ntf::Error as E;
        let message = e.to_string();
        match e {
            E::DegenerateSite { .. } | E::GridTooCoarse(_) => CliError::Degenerate(message),
            E::NotPositiveDefinite | E::NonFinite { .. } => CliError::Numeric(message),
            _ => CliError::Input(message),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        match e.position() {
            Some(pos) => CliError::Input(format!("line {}: {e}", pos.line())),
            None => CliError::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
