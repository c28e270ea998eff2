use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative constant: {name} = {value}")]
    NegativeConstant { name: &'static str, value: f64 },
    #[error("invalid mass: {name} = {value}")]
    NonpositiveMass { name: &'static str, value: f64 },
    #[error("theta must be -1 or +1, got {0}")]
    BadTheta(f64),
    #[error("grid too coarse: n = {0} (need n >= 8)")]
    TooCoarse(usize),
    #[error("density is identically zero")]
    ZeroDensity,
    #[error("density is negative at node {index} (value {value})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("potential does not vanish at r = 1 (value {0})")]
    BoundaryValue(f64),
    #[error("field has {got} values, grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("radius {0} outside (0, 1]")]
    BadRadius(f64),
    #[error("mass {mass} is at or above the critical mass {critical}")]
    Supercritical { mass: f64, critical: f64 },
    #[error("solver diverged after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("residual oscillates at minimum damping {damping} (residual {residual:e})")]
    Oscillation { damping: f64, residual: f64 },
    #[error("gamma = 0 passed to the w-minimizer")]
    GammaZero,
    #[error("invalid solver options: {0}")]
    BadOptions(&'static str),
    #[error("t = {t} is at or past the blow-down time {t_blow}")]
    AtBlowdown { t: f64, t_blow: f64 },
    #[error("standing hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("matching relation has no root in the bracket")]
    NoRoot,
    #[error("monotonicity lost: v_r = {v_r:e} > 0 at r = {r}")]
    MonotonicityLost { r: f64, v_r: f64 },
    #[error("need at least {needed} psi values, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("invalid blow-down family: {0}")]
    BadFamily(&'static str),
    #[error("step rejected: {0}")]
    StepRejected(&'static str),
    #[error("gradient representation degenerate: |beta^2 + alpha*gamma*theta| = {0:e}")]
    DegenerateQuadraticForm(f64),
    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    Stalled { t: f64, dt: f64 },
    #[error("unsupported flow configuration (delta1, delta2, epsilon) = ({0}, {1}, {2})")]
    BadFlowConfig(f64, f64, f64),
    #[error("missing field: {0}")]
    MissingField(&'static str),
    #[error("interaction matrix is not symmetric")]
    AsymmetricMatrix,
    #[error("empty index set")]
    EmptySubset,
    #[error("quadratic has no real root (discriminant {0:e})")]
    NoRealRoot(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
