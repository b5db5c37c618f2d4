use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] drocc_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot: {0}")]
    Snapshot(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 0 success, 2 configuration, 3 numeric divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use drocc_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Snapshot(_) => 4,
            CliError::Core(e) => match e {
                E::Divergence { .. } | E::NonFinite(_) => 3,
                E::Io(_) | E::Parse { .. } | E::MissingColumn { .. } => 4,
                E::InvalidConfig(_) | E::ShapeMismatch { .. } | E::EmptyData(_) | E::UndefinedMetric(_) => 2,
            },
        }
    }
}
