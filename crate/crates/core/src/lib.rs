//! Time-frequency energy concentration with the Gaussian window.
//!
//! The short-time Fourier transform with window `φ(x) = 2^{1/4} e^{-πx²}` is,
//! up to a phase and a Gaussian weight, the Bargmann transform into the Fock
//! space `F²(ℂ)`. This crate works on both sides of that identity:
//!
//! * [`fock`]: finite monomial expansions `F = Σ c_k e_k`, coherent states and
//!   phase-space translations;
//! * [`gabor`]: sampled signals, the discretized STFT and the passage from a
//!   signal to its Fock coefficients;
//! * [`regions`] and [`quadrature`]: constructive subsets of the time-frequency
//!   plane and integration rules on them;
//! * [`localization`]: the localization operator `V* 1_Ω V` in the monomial
//!   basis, its spectrum and the concentration functionals;
//! * [`bounds`]: closed-form concentration and uncertainty bounds in any
//!   dimension;
//! * [`rearrange`]: distribution function, decreasing rearrangement and
//!   super-level integrals of `|F|² e^{-π|z|²}`;
//! * [`metaplectic`]: the SL(2,ℝ) action on signals and the symplectic
//!   covariance of STFT magnitudes;
//! * [`io`]: the text file formats for coefficients, signals and regions.

pub mod bounds;
pub mod error;
pub mod fock;
pub mod gabor;
pub mod io;
pub mod localization;
pub mod metaplectic;
pub mod quadrature;
pub mod rearrange;
pub mod regions;

pub use error::{Error, Result};
pub use fock::{CoherentParams, FockCoefficients, PhasePoint};
pub use regions::Region;

pub use num_complex::Complex64;
