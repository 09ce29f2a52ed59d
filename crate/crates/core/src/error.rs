use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown constellation label `{0}`")]
    UnknownConstellation(String),

    #[error("pulse span of {span} symbols holds only {fraction:.5} of the pulse energy (need 0.999)")]
    PulseSpanTooShort { span: usize, fraction: f64 },

    #[error("sample rate {sample_rate:.4} does not exceed occupied bandwidth {bandwidth:.4} with guard {guard}")]
    SampleRateInsufficient {
        sample_rate: f64,
        bandwidth: f64,
        guard: f64,
    },

    #[error("buffer of {len} samples is shorter than the {needed} required for the requested resolution")]
    BufferTooShort { len: usize, needed: usize },

    #[error("HPA input amplitude {amplitude:.6} is outside the characteristic table (max {max:.6})")]
    AmplitudeOutOfRange { amplitude: f64, max: f64 },

    #[error("invalid AM/AM-AM/PM table: {0}")]
    InvalidTable(String),

    #[error("signal has zero power")]
    ZeroPower,

    #[error("predistorter diverged at tuple {tuple:?}: |x'| = {magnitude:.4} exceeds {limit:.4}")]
    PredistorterDiverged {
        tuple: Vec<usize>,
        magnitude: f64,
        limit: f64,
    },

    #[error("ill-conditioned kernel fit (condition number {condition:.3e}); use a longer probe")]
    IllConditioned { condition: f64 },

    #[error("probe of {len} symbols is too short; need at least {needed}")]
    ProbeTooShort { len: usize, needed: usize },

    #[error("front end timing mismatch: {0}")]
    TimingMismatch(String),

    #[error("trellis with {states} states exceeds the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },

    #[error("target response lag 0 is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),

    #[error("non-finite likelihood in block {block}")]
    NonFiniteLikelihood { block: usize },

    #[error("grid axis `{axis}` has {len} points; interpolation needs 1 or at least 3")]
    GridTooSmall { axis: &'static str, len: usize },

    #[error("SNR grids of the compared runs do not intersect")]
    DisjointSnrGrids,

    #[error("config error: {0}")]
    Config(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
