use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] infoloss::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("writing output: {0}")]
    Output(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        use infoloss::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::InvalidParameter(_)
                | E::InvalidInterval { .. }
                | E::UnknownFunction(_)
                | E::UnknownDensity(_)
                | E::ConstantPolynomial,
            ) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
