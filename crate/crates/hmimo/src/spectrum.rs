//! Isotropic-scattering power assigned to each supported harmonic.
//!
//! Under isotropic scattering the angular power density over the propagation
//! disk `k_x² + k_y² ≤ κ²` is proportional to `(κ² − k_x² − k_y²)^{-1/2}`
//! (the Jacobian of the hemisphere projection). Each harmonic `(m_x, m_y)`
//! owns the wavenumber cell of width `2π/L` centered on its lattice point
//! `(2π m_x / L_x, 2π m_y / L_y)`; its variance is the fraction of the disk
//! mass inside that cell. Because every in-ellipse lattice point lies inside
//! the closed disk, centered cells always intersect it and no supported
//! harmonic carries zero power.
//!
//! Truncating to the lattice ellipse discards a sliver of rim mass, so the
//! per-side profiles are renormalized to sum to one: the average element then
//! has unit gain and `Σ_{ij} σ_{ij}² = N_r N_s` holds exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::WavenumberBasis;
use crate::quad::{disk_density_fraction, Rect};
use crate::{ModelError, Result, WAVENUMBER};

/// Wavenumber cell of harmonic `(m_x, m_y)` for aperture `(l_x, l_y)`:
/// the rectangle of width `2π/L` per axis centered on the lattice point.
fn harmonic_cell(m_x: i32, m_y: i32, l_x: f64, l_y: f64) -> Rect {
    let (cx, cy) = (WAVENUMBER * f64::from(m_x) / l_x, WAVENUMBER * f64::from(m_y) / l_y);
    let (hx, hy) = (PI / l_x, PI / l_y);
    Rect { a: cx - hx, b: cx + hx, c: cy - hy, d: cy + hy }
}

/// Unnormalized variance of one harmonic: the fraction of the isotropic
/// spectral mass falling in its wavenumber cell, `I(cell ∩ disk) / (2πκ)`.
/// Always in `[0, 1]`; exactly zero for cells that miss the disk.
pub fn cell_variance(m_x: i32, m_y: i32, l_x: f64, l_y: f64) -> f64 {
    assert!(l_x > 0.0 && l_y > 0.0, "aperture lengths must be positive");
    disk_density_fraction(harmonic_cell(m_x, m_y, l_x, l_y))
}

/// Monte Carlo reference for [`cell_variance`]: draw directions uniformly on
/// the upper hemisphere (area measure) and count how often the transverse
/// wavenumber lands in the cell. Returns the estimate and its standard error.
/// Deliberately shares no code with the quadrature path; intended for
/// validation, not production use.
pub fn hemisphere_cell_fraction(
    m_x: i32,
    m_y: i32,
    l_x: f64,
    l_y: f64,
    samples: u64,
    seed: u64,
) -> (f64, f64) {
    assert!(samples > 1);
    let cell = harmonic_cell(m_x, m_y, l_x, l_y);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        // Uniform area on the hemisphere: z uniform in [0, 1], azimuth uniform.
        let z: f64 = rng.random();
        let phi: f64 = rng.random_range(0.0..(2.0 * PI));
        let rho = WAVENUMBER * (1.0 - z * z).max(0.0).sqrt();
        let (kx, ky) = (rho * phi.cos(), rho * phi.sin());
        if kx >= cell.a && kx <= cell.b && ky >= cell.c && ky <= cell.d {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    let std_err = (p * (1.0 - p) / samples as f64).sqrt();
    (p, std_err)
}

/// Per-harmonic variances of one transmit/receive pair, plus the coupling
/// standard deviations `σ_{ij} = √(N_r N_s · rx_var[i] · tx_var[j])`.
#[derive(Debug, Clone)]
pub struct SpectralVariance {
    /// Transmit-side variance per harmonic (renormalized, sums to one).
    pub tx_var: Vec<f64>,
    /// Receive-side variance per harmonic (renormalized, sums to one).
    pub rx_var: Vec<f64>,
    /// `n_r x n_s` standard deviations of the wavenumber-domain entries.
    pub sigma: DMatrix<f64>,
    /// Transmit element count `N_s`.
    pub tx_elements: usize,
    /// Receive element count `N_r`.
    pub rx_elements: usize,
}

impl SpectralVariance {
    /// Receive harmonic count `n_r`.
    pub fn rx_harmonics(&self) -> usize {
        self.rx_var.len()
    }

    /// Transmit harmonic count `n_s`.
    pub fn tx_harmonics(&self) -> usize {
        self.tx_var.len()
    }

    /// Average transmit variance; equals `1/n_s` under the normalization.
    pub fn average_tx_variance(&self) -> f64 {
        self.tx_var.iter().sum::<f64>() / self.tx_var.len() as f64
    }

    /// Synthetic flat profile (every harmonic carries `1/n` of the power);
    /// used for calibration against closed-form random-matrix results.
    pub fn uniform(n_r: usize, n_s: usize, rx_elements: usize, tx_elements: usize) -> Self {
        let rx_var = vec![1.0 / n_r as f64; n_r];
        let tx_var = vec![1.0 / n_s as f64; n_s];
        let sigma = coupling_sigma(&rx_var, &tx_var, rx_elements, tx_elements);
        Self { tx_var, rx_var, sigma, tx_elements, rx_elements }
    }
}

fn coupling_sigma(rx_var: &[f64], tx_var: &[f64], rx_elements: usize, tx_elements: usize) -> DMatrix<f64> {
    let scale = (rx_elements * tx_elements) as f64;
    DMatrix::from_fn(rx_var.len(), tx_var.len(), |i, j| (scale * rx_var[i] * tx_var[j]).sqrt())
}

fn side_variances(basis: &WavenumberBasis, side: &str) -> Result<Vec<f64>> {
    let (l_x, l_y) = basis.geometry.aperture();
    let raw: Vec<f64> =
        basis.indices.iter().map(|&(mx, my)| cell_variance(mx, my, l_x, l_y)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(ModelError::DegenerateSpectrum(format!(
            "{side} side carries no propagating power over its {} harmonics",
            raw.len()
        )));
    }
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Variance profile of one user: integrate the isotropic density over every
/// cell of both apertures, renormalize each side to unit sum and form the
/// coupling matrix `σ`.
pub fn build_spectral_variance(tx: &WavenumberBasis, rx: &WavenumberBasis) -> Result<SpectralVariance> {
    let tx_var = side_variances(tx, "transmit")?;
    let rx_var = side_variances(rx, "receive")?;
    let sigma = coupling_sigma(&rx_var, &tx_var, rx.elements(), tx.elements());
    Ok(SpectralVariance {
        tx_var,
        rx_var,
        sigma,
        tx_elements: tx.elements(),
        rx_elements: rx.elements(),
    })
}

// ---------------------------------------------------------------------------
