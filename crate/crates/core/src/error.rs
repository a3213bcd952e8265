use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("offspring distribution is not critical (mean {mean})")]
    NotCritical { mean: f64 },

    #[error("x and y coincide; no neighbour points toward y")]
    SameVertex,

    #[error("{0} overflows the representable range")]
    Overflow(String),

    #[error("simulation needs about {required} bytes, budget is {budget}")]
    MemoryBudget { required: u64, budget: u64 },

    #[error("radius {r} exceeds the census limit {limit}")]
    CensusLimit { r: u32, limit: u32 },

    #[error("event cap of {cap} exceeded")]
    EventCap { cap: u64 },

    #[error("frozen configuration has {0} particles at the old target")]
    NonEmptyTarget(u128),

    #[error("Euler summation did not converge (error estimate {estimate:e}); partial sums {partial_sums:?}")]
    NonConvergence {
        estimate: f64,
        partial_sums: Vec<f64>,
    },

    #[error("only {accepted} accepted samples, need at least {needed}")]
    TooFewAccepted { accepted: u64, needed: u64 },

    #[error("no usable samples: {0}")]
    NoSamples(String),

    #[error("strict-exact mode refused an approximate sampling path")]
    ApproximationRefused,

    #[error("parse error: {0}")]
    Parse(String),
}
