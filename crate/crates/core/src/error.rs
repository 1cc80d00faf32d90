use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sigma must be strictly positive on [0, T_max] (lower bound {lower_bound})")]
    NonPositiveSigma { lower_bound: f64 },

    #[error("jump measure violates the summability condition: integral of (y ^ 1) nu(dy) is not finite")]
    PermanentConditionViolated,

    #[error("jump measure violates the square-root condition: integral of (sqrt(y) ^ 1) nu(dy) is not finite (small-jump index {rho})")]
    RestrictiveConditionViolated { rho: f64 },

    #[error("integrand is not integrable against nu near 0: {0}")]
    NonIntegrable(String),

    #[error("truncation level must be positive, got {0}")]
    InvalidDelta(f64),

    #[error("degenerate time interval: need s < t, got s = {s}, t = {t}")]
    DegenerateInterval { s: f64, t: f64 },

    #[error("intermediate time u = {u} must lie strictly inside (s, t) = ({s}, {t})")]
    DegenerateIntermediate { s: f64, u: f64, t: f64 },

    #[error("time {t} is outside the horizon [0, {t_max}]")]
    OutsideHorizon { t: f64, t_max: f64 },

    #[error("thinning bound violated: rate {rate} exceeds bound {bound} at time {time}")]
    BoundViolated { rate: f64, bound: f64, time: f64 },

    #[error("at least 2 samples are required, got {0}")]
    InsufficientSamples(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),
}
