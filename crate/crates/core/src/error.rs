use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{quantity} is outside its domain at {value} (allowed: {allowed})")]
    Domain {
        quantity: &'static str,
        value: f64,
        allowed: &'static str,
    },

    #[error("the sub-characteristic condition is violated on several disjoint intervals: {0:?}")]
    MultipleViolationIntervals(Vec<(f64, f64)>),

    #[error("sonic density {rho_s} satisfies the sub-characteristic condition, no jamiton exists")]
    NoJamiton { rho_s: f64 },

    #[error("could not bracket a root of {what}: {detail}")]
    BracketFailure { what: &'static str, detail: String },

    #[error("v_minus = {v_minus} is below the sonic point v_s = {v_s}")]
    BelowSonic { v_minus: f64, v_s: f64 },

    #[error("v_minus = {v_minus} is at or beyond the maximal jamiton v_M = {v_m}")]
    BeyondMaximal { v_minus: f64, v_m: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("CFL violation: dt = {dt} gives Courant number {courant} > {limit}")]
    Cfl { dt: f64, courant: f64, limit: f64 },

    #[error("loss of admissibility in cell {cell} at t = {t}: rho = {rho}, y = {y}")]
    Positivity {
        cell: usize,
        t: f64,
        rho: f64,
        y: f64,
    },

    #[error("density {rho} is at or below the floor {floor}")]
    DensityFloor { rho: f64, floor: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("expected a single jamiton, found {0} jumps")]
    JumpCount(usize),

    #[error("jamitons are not compatible: v_minus = {0} vs {1}")]
    Incompatible(f64, f64),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("{0}")]
    Config(String),
}
