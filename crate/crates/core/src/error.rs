use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModemError>;

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("frequency {freq_hz} Hz is at or above the Nyquist limit of {nyquist_hz} Hz")]
    NyquistViolation { freq_hz: f64, nyquist_hz: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("incompatible signals: {0}")]
    IncompatibleSignals(String),

    #[error("no clock carrier detected in any frame")]
    NoClock,

    #[error("sync not found: correlation peak {peak:.4} below confidence floor {floor:.4}")]
    SyncNotFound { peak: f64, floor: f64 },

    #[error("invalid payload: {0}")]
    InvalidPayload(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt WAV file: {0}")]
    CorruptFile(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ModemError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        ModemError::Config(msg.into())
    }
}
