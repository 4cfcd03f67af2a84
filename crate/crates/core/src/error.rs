use num_complex::Complex64 as C64;

use crate::model::Diagnostic;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid problem: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("operation requires a 2x2 system")]
    NotTwoByTwo,
    #[error("lambda = {lambda} outside the trust region: |Im(b_{index} lambda)| = {value} > {bound}")]
    TrustRegion { lambda: C64, index: usize, value: f64, bound: f64 },
    #[error("step size underflow at x = {x}")]
    StepUnderflow { x: f64 },
    #[error("step budget exhausted at x = {x}")]
    MaxSteps { x: f64 },
    #[error("sampled function lives on a different grid")]
    GridMismatch,
    #[error("lambda = {lambda} is (numerically) an eigenvalue")]
    NotInResolventSet { lambda: C64 },
    #[error("contour passes too close to a zero: min |Delta| = {min:e} below {threshold:e}")]
    BoundaryTooClose { min: f64, threshold: f64 },
    #[error("winding number {value} is not an integer")]
    NonIntegerWinding { value: f64 },
    #[error("zero count not conserved under subdivision")]
    CountMismatch,
    #[error("rank-one representation unavailable: {0}")]
    RepresentationUnavailable(String),
    #[error("boundary conditions define the same operator")]
    IdenticalOperators,
    #[error("operation requires b_1/b_2 to be non-real")]
    RealWeightRatio,
    #[error("boundary conditions are not in the required canonical form: {0}")]
    NotCanonical(String),
    #[error("problems differ in B or Q")]
    MismatchedSystems,
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;
