//! Zak-OTFS delay-Doppler pulse shaping and link simulation.
//!
//! The crate is organized around the delay-Doppler (DD) torus: a frame is a
//! quasi-periodic function on a fundamental domain of delay period `tau_p` and
//! Doppler period `nu_p` (`tau_p * nu_p = 1`), carrying `M x N` information
//! symbols on the lattice `(k/B, l/T)`. Modules:
//!
//! - [`grid`]: lattice and oversampled-grid geometry.
//! - [`ddcore`]: quasi-periodic signals, twisted convolution (lattice and
//!   quadrature forms), delay-Doppler shifts, and the Zak transform pair.
//! - [`filters`]: the six pulse-shaping filters (sinc, RRC, Gaussian,
//!   Gaussian-sinc, IOTA-Gaussian, IOTA-PSWF), matched filtering, and
//!   localization diagnostics.
//! - [`channel`]: Veh-A scattering channels, effective-channel computation,
//!   and the `MN x MN` input-output matrix.
//! - [`txrx`]: QAM mapping, the vectorized link, MMSE detection, and
//!   pilot-based channel estimation.
//! - [`sim`]: deterministic Monte-Carlo harness for BER / NMSE / ESD studies.
//! - [`linalg`]: thin wrappers over the system BLAS/LAPACK.

pub mod channel;
pub mod ddcore;
pub mod filters;
pub mod grid;
pub mod linalg;
pub mod sim;
pub mod txrx;

use num_complex::Complex64;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum ZakError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// `e^{i x}`.
#[inline]
pub(crate) fn cis(x: f64) -> Complex64 {
    Complex64::new(x.cos(), x.sin())
}

/// `e^{2 pi i t}` for `t` in turns; the workhorse phase unit of the crate.
#[inline]
pub(crate) fn cis_turns(t: f64) -> Complex64 {
    cis(std::f64::consts::TAU * t)
}
