//! Wavenumber-domain channel model for multi-user holographic MIMO surfaces.
//!
//! The crate models a downlink in which a large planar transmit surface
//! serves several multi-antenna planar receivers. Instead of drawing the
//! space-domain channel directly, the propagating field over each aperture
//! is expanded on a truncated 2-D Fourier (plane-wave) basis: a planar array
//! of `n_h x n_v` elements spaced `Δ` wavelengths apart supports only the
//! integer spatial harmonics inside a lattice ellipse, so the channel is a
//! small random matrix in the wavenumber domain, mapped to antenna space by
//! semi-unitary harmonic matrices.
//!
//! Module layout:
//! - [`geometry`]: planar arrays, lattice-ellipse enumeration, harmonic matrices
//! - [`spectrum`]: isotropic-scattering variance assigned to each harmonic
//! - [`channel`]: random channel realizations and receive-correlation spectra
//! - [`dump`]: binary export of channel realizations (`HCH1` container)
//! - [`precoding`]: effective channel, MRT / ZF / MMSE precoders
//! - [`rate`]: per-stream SINR, Monte Carlo spectral efficiency, closed-form
//!   ZF rate and its calibration checks
//!
//! All lengths are expressed in wavelengths, so the free-space wavenumber is
//! `κ = 2π` throughout and the noise variance defaults to one.

pub mod channel;
pub mod dump;
pub mod geometry;
pub mod precoding;
pub mod rate;
pub mod spectrum;

mod quad;

use std::path::PathBuf;

use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type Cx = nalgebra::Complex<f64>;

/// Free-space wavenumber `κ = 2π/λ` with lengths measured in wavelengths.
pub const WAVENUMBER: f64 = std::f64::consts::TAU;

/// Errors reported by the model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),
    #[error(
        "harmonic index ({m_x}, {m_y}) lies outside the lattice ellipse of a \
         {l_x:.4}λ x {l_y:.4}λ aperture"
    )]
    IndexOutsideEllipse { m_x: i32, m_y: i32, l_x: f64, l_y: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("phase vector entry {index} has modulus {modulus:.6e}; expected unit modulus")]
    NonUnitPhase { index: usize, modulus: f64 },
    #[error(
        "singular effective channel: Gram matrix of {streams} streams over {columns} transmit \
         harmonics has condition number {condition:.3e}"
    )]
    SingularChannel { streams: usize, columns: usize, condition: f64 },
    #[error("stream {stream} has a zero effective-channel row; matched filter undefined")]
    DegenerateChannel { stream: usize },
    #[error("infeasible configuration: {streams} streams exceed {columns} transmit harmonics")]
    Infeasible { streams: usize, columns: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed channel dump in {path}: {reason}")]
    MalformedDump { path: PathBuf, reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ModelError>;
