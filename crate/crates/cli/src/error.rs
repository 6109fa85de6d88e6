use thiserror::Error;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] tnkf::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        use tnkf::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::ResourceLimit { .. } => EXIT_USAGE,
                E::NumericalFailure(_) | E::CovarianceCollapse { .. } => EXIT_NUMERICAL,
                E::Data { .. }
                | E::Corrupt(_)
                | E::UnsupportedVersion { .. }
                | E::StaleInputs { .. }
                | E::Io(_)
                | E::Csv(_) => EXIT_DATA,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
