//! Gaussian fermion channels and the isometric tensor network states they
//! prepare.
//!
//! The crate is organised bottom-up:
//!
//! * [`majorana`]: correlation matrices, entanglement spectra, Fourier blocks.
//! * [`channel`]: real-space channels, preserved/dissipative modes, steady states.
//! * [`momentum`]: translation-invariant channels per momentum, bulk spectra
//!   and their continuity analysis.
//! * [`isotns`]: Gaussian isometric tensors, channel extraction and light-like
//!   contraction.
//! * [`models`]: the p+ip superconductor and the Kitaev chain.
//! * [`topology`]: Chern number, edge-mode count, quasi-diagonality.
//! * [`oracle`]: a tiny dense simulator of sequential qudit circuits.

pub mod branches;
pub mod channel;
pub mod error;
pub mod isotns;
pub mod linalg;
pub mod majorana;
pub mod models;
pub mod momentum;
pub mod oracle;
pub mod sampling;
pub mod topology;

pub use channel::{
    decompose_modes, steady_state, validate_channel, ConvergenceFit, GaussianChannel,
    ModeDecomposition, ValidationReport,
};
pub use error::{Error, Result};
pub use majorana::{
    entanglement_spectrum, fourier_blocks, many_body_spectrum, CorrelationMatrix,
    EntanglementSpectrum, MomentumCorrelation,
};
pub use num_complex::Complex64 as c64;
