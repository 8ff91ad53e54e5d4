use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },
    #[error("{path}: invalid manifest: {err}")]
    Manifest { path: PathBuf, err: serde_json::Error },
    #[error("{path}: format version {found}, this build reads version {expected}")]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: expected a '{expected}' directory, found '{found}'")]
    Kind { path: PathBuf, expected: String, found: String },
    #[error("{path}: {expected} bytes expected from the manifest shape, file has {found}")]
    Length { path: PathBuf, expected: u64, found: u64 },
    #[error("{path}: CRC32 {found:08x} does not match the manifest value {expected:08x}")]
    Checksum { path: PathBuf, expected: u32, found: u32 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] dino_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |err| Error::Io { path, err }
}
