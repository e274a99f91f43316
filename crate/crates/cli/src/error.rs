use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bnls::BnlsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: checksum mismatch (manifest {expected}, file {actual})")]
    Checksum { path: PathBuf, expected: String, actual: String },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
