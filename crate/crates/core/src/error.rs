use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("marginal totals differ: {mu} vs {nu}")]
    InfeasibleMarginals { mu: String, nu: String },
    #[error("no coupling with finite cost exists")]
    NoFinitePlan,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("support pair ({0}, {1}) has infinite cost")]
    InfiniteCostInSupport(usize, usize),
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(String),
    #[error("reference plan charges infinite-cost pair ({0}, {1})")]
    InfiniteCostOnPi0Support(usize, usize),
    #[error("no qualifying prime for level {level} below search cap {cap}")]
    SearchCapExceeded { level: usize, cap: u64 },
    #[error("tower has depth {have}, level {need} requested")]
    TowerTooShallow { have: usize, need: usize },
    #[error("growth too small: {0}")]
    GrowthTooSmall(String),
    #[error("pair ({0}, {1}) lies on two graphs with different costs")]
    GraphOverlapInconsistency(usize, usize),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
