use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: need d >= 2")]
    InvalidDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("level index {index} out of range for d = {d}")]
    LevelOutOfRange { index: usize, d: usize },
    #[error("degenerate spectrum: tone at {tone_mhz} MHz is resonant with spectator transition {lower}->{upper}")]
    DegenerateSpectrum {
        lower: usize,
        upper: usize,
        tone_mhz: f64,
    },
    #[error("invalid hyperfine constants: {0}")]
    InvalidConstants(String),
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("pulse table parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
