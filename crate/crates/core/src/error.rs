use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("clip is empty")]
    EmptyClip,
    #[error("clip too short: {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("wrong sample rate: expected {expected} Hz, got {got} Hz")]
    WrongRate { expected: u32, got: u32 },
    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(u32, u32),

    #[error("FFT size {0} is not a power of two")]
    BadFftSize(usize),
    #[error("signal is empty")]
    EmptySignal,
    #[error("inconsistent spectrogram geometry: {0}")]
    InconsistentGeometry(String),
    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite input")]
    NonFiniteInput,

    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("class {0} never occurs in the calibration data")]
    MissingClass(usize),

    #[error("bad magic bytes in model file")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    VersionMismatch(u16),
    #[error("corrupted model file: {0}")]
    ShapeCorruption(String),

    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("class index {index} out of range for {classes} classes")]
    BadIndex { index: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,

    #[error("invalid feature file: {0}")]
    BadFeatureFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True when the error means the input bytes were unreadable, as opposed
    /// to a well-formed input that violates a precondition.
    pub fn is_format_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedWav(_)
                | Error::UnsupportedEncoding(_)
                | Error::BadMagic
                | Error::VersionMismatch(_)
                | Error::ShapeCorruption(_)
                | Error::BadFeatureFile(_)
        )
    }
}
