use thiserror::Error;

/// Errors raised by the pricing, tree and calibration layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty support set")]
    EmptySupport,

    #[error("invalid support set: {0}")]
    InvalidSupport(String),

    #[error("node {0} is a leaf; conditional supports live on non-leaf nodes")]
    LeafNode(usize),

    #[error("empty family of random variables")]
    EmptyFamily,

    #[error("invalid scenario tree: {0}")]
    InvalidTree(String),

    #[error("tree parse error at line {line}: {msg}")]
    TreeParse { line: usize, msg: String },

    #[error("AIP violated{}: k_d={k_down}, k_u={k_up} (need k_d in [0,1], k_u >= 1)", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    AipViolated {
        step: Option<usize>,
        k_down: f64,
        k_up: f64,
    },

    #[error("current price {y} outside [{lower}, {upper}]; one-step pricing requires AIP at the node")]
    PriceOutsideSupport { y: f64, lower: f64, upper: f64 },

    #[error("payoff is not flagged convex; use the scenario-tree LP for general payoffs")]
    NonConvexPayoff,

    #[error("no affine majorant of the payoff exists on this support")]
    NoAffineMajorant,

    #[error("asymptotic slope did not stabilise: {0}")]
    SlopeEstimation(String),

    #[error("invalid payoff spec `{0}` (expected call:K, put:K, linear:a,b or zero)")]
    PayoffSpec(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("lattice too large: {steps} inhomogeneous steps (limit {limit})")]
    LatticeTooLarge { steps: usize, limit: usize },

    #[error("LP exceeds size limit: {leaves} leaves (limit {limit})")]
    LpTooLarge { leaves: usize, limit: usize },

    #[error("csv error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("invalid price series: {0}")]
    InvalidSeries(String),

    #[error("window of {window} episodes does not fit: only {available} available")]
    WindowTooLarge { window: usize, available: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("episode has {got} closes, expected {want}")]
    EpisodeLength { got: usize, want: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
