use thiserror::Error;

/// Failures raised by the numerical routines.
///
/// Every variant that reports a violated invariant carries the magnitude that
/// tripped it, so callers can print the residual directly.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not antisymmetric: max |M + Mᵀ| = {defect:.3e}")]
    NotAntisymmetric { defect: f64 },

    #[error("matrix is not anti-hermitian: max |M + M†| = {defect:.3e}")]
    NotAntiHermitian { defect: f64 },

    #[error("unphysical correlation matrix: largest singular value exceeds 1 by {excess:.3e}")]
    Unphysical { excess: f64 },

    #[error("reality constraint Γ(-k) = Γ(k)* violated by {defect:.3e} at k index {k_index}")]
    Reality { k_index: usize, defect: f64 },

    #[error("not translation invariant: block at distance {distance} deviates by {defect:.3e}")]
    TranslationBroken { distance: usize, defect: f64 },

    #[error("channel is not CPTP: max eigenvalue of ΛᵀΛ exceeds 1 by {excess:.3e}")]
    NotCptp { excess: f64 },

    #[error("preserved eigenvector violates A v = 0: residual {residual:.3e} (tol_unit too loose?)")]
    LemmaViolation { residual: f64 },

    #[error("mode classification failed: {0}")]
    Classification(String),

    #[error("classification unstable: {count} exceptional momenta on a grid of {grid}")]
    ClassificationUnstable { count: usize, grid: usize },

    #[error("fixed-point residual {residual:.3e} exceeds tolerance")]
    FixedPoint { residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("tensor is not isometric: {0}")]
    NotIsometric(String),

    #[error("spectral gap closes at q = ({qx:.4}, {qy:.4}): gap {gap:.3e}")]
    GapClosure { qx: f64, qy: f64, gap: f64 },

    #[error("projector invalid: {0}")]
    Projector(String),

    #[error("ambiguous jump of {jump:.4} in Tr P_A at q index {index}")]
    AmbiguousJump { index: usize, jump: f64 },

    #[error("dense oracle limit exceeded: {0}")]
    OracleLimit(String),

    #[error("gates in step {step} do not commute: residual {residual:.3e}")]
    NonCommuting { step: usize, residual: f64 },

    #[error("linear algebra backend failure: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
