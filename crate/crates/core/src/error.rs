use thiserror::Error;

/// Errors produced by the offloading analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OffloadError {
    #[error("latency budget {latency} s leaves no transmission window (execution + downlink = {busy} s)")]
    LatencyInfeasible { latency: f64, busy: f64 },

    #[error("distance must be strictly positive, got {0}")]
    InvalidDistance(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("total power {required} W exceeds the budget {budget} W")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("grid oracle needs {work} work units, budget is {budget}")]
    OracleTooLarge { work: u128, budget: u128 },

    #[error("deployment contains no access points")]
    EmptyDeployment,

    #[error("auto-sized region would hold {expected:.0} points on average, above the cap {cap}")]
    RegionTooSmall { expected: f64, cap: usize },

    #[error("no density below {lambda_max} points/m^2 satisfies the coverage condition")]
    BracketingFailed { lambda_max: f64 },

    #[error("every link is blocked with probability one")]
    DegenerateAllBlocked,

    #[error("could not bracket the water level")]
    BisectionNoBracket,

    #[error("no power allocation reaches the average rate within the budget")]
    Infeasible,

    #[error("exhaustive enumeration over {0} blocks exceeds the supported size")]
    TooManyBlocks(usize),

    #[error("code too large for exhaustive enumeration: {0}")]
    CodeTooLarge(String),

    #[error("even a single link has outage {outage} above the target {target}")]
    OutageUnreachable { outage: f64, target: f64 },

    #[error("no code rate on the grid meets the outage target {target}")]
    NoFeasibleRate { target: f64 },
}

pub type Result<T> = std::result::Result<T, OffloadError>;
