use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },

    #[error("invalid STFT configuration: {0}")]
    InvalidStftConfig(String),

    #[error("frame dimension mismatch: expected {expected} bins, got {got}")]
    FrameMismatch { expected: usize, got: usize },

    #[error("stretch out of supported range: {0} (|log2 factor| must be <= 2)")]
    StretchOutOfRange(f64),

    #[error("shift out of supported range: {0} cents (|cents| must be <= 1200)")]
    ShiftOutOfRange(f64),

    #[error("empty audio")]
    EmptyAudio,

    #[error("cannot flatten unvoiced audio")]
    Unvoiced,

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    SampleRateMismatch(u32, u32),

    #[error("no zero-crossing within 10 ms of sample {0}")]
    NoZeroCrossing(usize),

    #[error("invalid sampling spec: {0}")]
    InvalidSpec(String),

    #[error("invalid breakpoint function: {0}")]
    InvalidBreakpoints(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid stimulus set: {0}")]
    InvalidStimulus(String),

    #[error("render failed on trial {trial}: {source}")]
    Render {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {0} already answered")]
    AlreadyAnswered(usize),

    #[error("trial {index} out of range (session has {n_trials} trials)")]
    TrialOutOfRange { index: usize, n_trials: usize },

    #[error("trial {got} is not the current trial (expected {expected})")]
    NotCurrentTrial { expected: usize, got: usize },

    #[error("session is complete")]
    SessionComplete,

    #[error("choice {0:?} is not one of the session's option labels")]
    InvalidChoice(String),

    #[error("unknown session {0:?}")]
    UnknownSession(String),

    #[error("degenerate response set: option {0:?} has no responses")]
    DegenerateResponses(String),

    #[error("zero kernel: both option means are identically zero")]
    ZeroKernel,

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("missing profile for session {session:?} trial {trial}")]
    MissingProfile { session: String, trial: usize },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
