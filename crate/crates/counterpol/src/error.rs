use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid action {got} for discrete action space of size {n}")]
    InvalidAction { got: usize, n: usize },
    #[error("action kind does not match the environment's action space")]
    ActionKindMismatch,
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("observation has length {got}, expected {expected}")]
    ObsDimMismatch { got: usize, expected: usize },
    #[error("non-finite observation")]
    NonFiniteObs,
    #[error("policy architectures do not match")]
    ArchMismatch,
    #[error("distribution head types do not match")]
    HeadMismatch,
    #[error("parameter vector has length {got}, arch implies {expected}")]
    ParamLenMismatch { got: usize, expected: usize },
    #[error("index {index} out of range for trajectory of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite gradient encountered during optimization")]
    NonFiniteGradient,
    #[error("unknown environment id {0:?} (valid: cartpole, acrobot, pendulum)")]
    UnknownEnv(String),
    #[error("checkpoint format version {0} not recognized")]
    VersionMismatch(u32),
    #[error("checkpoint parse error: {0}")]
    CheckpointParse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
