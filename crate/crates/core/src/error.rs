use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero: R(q) = 0 at q = {q} (only possible when H = 0)")]
    CoefficientSingular { q: num_complex::Complex64 },

    #[error("R*(q) = q^2 - conj(q)^2 vanishes at q = {q}; Q* is not well defined there")]
    QstarUndefined { q: num_complex::Complex64 },

    #[error("antiholomorphic point: g_z = 0 (field is degenerate there)")]
    AntiholomorphicPoint,

    #[error("degenerate input: A3 = 0")]
    DegenerateA3,

    #[error("geodesic speed drift {drift:.3e} exceeds tolerance {tol:.3e}; reduce dt")]
    GeodesicDrift { drift: f64, tol: f64 },

    #[error("field has no grid structure; operation requires a rectangular grid")]
    NotAGrid,

    #[error("integrability failure: relative plaquette defect {defect:.3e} exceeds {tol:.3e}")]
    IntegrabilityFailure { defect: f64, tol: f64 },

    #[error("solver did not converge after {iters} iterations (max |H_v - H| = {hdev:.3e})")]
    NonConvergence { iters: usize, hdev: f64 },

    #[error("degenerate triangle: aspect quality {quality:.3e} below gate {gate:.3e}")]
    DegenerateTriangle { quality: f64, gate: f64 },

    #[error("degenerate vertex star: zero vertex area at vertex {vertex}")]
    DegenerateStar { vertex: usize },

    #[error("eigensolver did not converge after {iters} iterations (residual {residual:.3e})")]
    EigenNonConvergence { iters: usize, residual: f64 },

    #[error("Gauss map is not an orientation-preserving local diffeomorphism: Jacobian {jac:.3e} at vertex {vertex}")]
    GaussJacobianNotPositive { vertex: usize, jac: f64 },

    #[error("interpolation query out of table support (dual chart has no samples)")]
    InterpolationOutOfSupport,

    #[error("continuation broke at H = {h}: {source}")]
    ContinuationBreak {
        h: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("mesh is not a closed surface: {0}")]
    NotClosed(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
