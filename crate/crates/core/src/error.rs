use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: invalid argument: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("backward root must be a scalar, got shape {0:?}")]
    RootNotScalar(Vec<usize>),
    #[error("node {0} is not on this tape")]
    NotOnTape(usize),
    #[error("non-finite gradient component at index {index}")]
    NonFiniteGradient { index: usize },
    #[error("rollout diverged at step {step}: {source}")]
    Rollout {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("robots {i} and {j} are coincident")]
    CoincidentRobots { i: usize, j: usize },
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("training diverged at step {step} (horizon {horizon}): loss is not finite")]
    TrainingDiverged { step: usize, horizon: usize },
    #[error("dataset too short: horizon {required} requested, trajectories hold {available}")]
    DatasetTooShort { required: usize, available: usize },
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument { op, msg: msg.into() }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ Error::Rollout { .. } => e,
            e => Error::Rollout { step, source: Box::new(e) },
        }
    }
}
