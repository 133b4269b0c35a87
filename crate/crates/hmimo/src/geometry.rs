//! Planar array geometry and the truncated Fourier plane-wave basis.
//!
//! A uniform planar array with `n_h x n_v` elements spaced `Δ` wavelengths
//! apart spans an aperture `L_x = n_h Δ`, `L_y = n_v Δ`. Only plane waves
//! whose transverse wavenumber lies inside the disk of radius `κ = 2π`
//! propagate, so the field sampled by the array is described by the integer
//! harmonics `(m_x, m_y)` with `(m_x/L_x)² + (m_y/L_y)² ≤ 1`. Each harmonic
//! contributes one column to a semi-unitary matrix `U`; for spacings below
//! half a wavelength the columns are distinct 2-D DFT vectors and `UᴴU = I`
//! holds to machine precision.

use nalgebra::DMatrix;

use crate::{Cx, ModelError, Result, WAVENUMBER};

/// Relative slack on the ellipse inclusion test so that indices lying
/// exactly on the boundary (grazing plane waves) survive rounding.
const ELLIPSE_SLACK: f64 = 1e-12;

/// Which end of the link an array serves; fixes the sign of the harmonic
/// phase (`e^{-j·}` on transmit, `e^{+j·}` on receive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Transmit,
    Receive,
}

/// Uniform planar array in the x-y plane. All lengths are in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    /// Elements along x.
    pub n_h: usize,
    /// Elements along y.
    pub n_v: usize,
    /// Element spacing Δ/λ (same in both directions).
    pub spacing: f64,
    /// Offset of element (0, 0) from the coordinate origin.
    pub origin_offset: [f64; 3],
}

impl ArrayGeometry {
    /// Array at the origin. Requires at least one element per axis and a
    /// strictly positive, finite spacing.
    pub fn new(n_h: usize, n_v: usize, spacing: f64) -> Result<Self> {
        Self::with_offset(n_h, n_v, spacing, [0.0; 3])
    }

    /// Array with an explicit offset of its first element.
    pub fn with_offset(n_h: usize, n_v: usize, spacing: f64, origin_offset: [f64; 3]) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(ModelError::InvalidGeometry(format!(
                "element grid must be nonempty, got {n_h} x {n_v}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(ModelError::InvalidGeometry(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        if origin_offset.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::InvalidGeometry("origin offset must be finite".into()));
        }
        Ok(Self { n_h, n_v, spacing, origin_offset })
    }

    /// Total number of elements `N = n_h · n_v`.
    pub fn elements(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Aperture lengths `(L_x, L_y) = (n_h Δ, n_v Δ)` in wavelengths.
    pub fn aperture(&self) -> (f64, f64) {
        (self.n_h as f64 * self.spacing, self.n_v as f64 * self.spacing)
    }

    /// Element positions in row-major order: element `j` sits at
    /// `((j mod n_h) Δ, (j div n_h) Δ, 0)` plus the origin offset.
    pub fn positions(&self) -> Vec<[f64; 3]> {
        let [ox, oy, oz] = self.origin_offset;
        (0..self.elements())
            .map(|j| {
                let ix = (j % self.n_h) as f64;
                let iy = (j / self.n_h) as f64;
                [ix * self.spacing + ox, iy * self.spacing + oy, oz]
            })
            .collect()
    }
}

/// Normalized ellipse coordinate `(m_x/L_x)² + (m_y/L_y)²` for one index.
fn ellipse_radius2(m_x: i32, m_y: i32, l_x: f64, l_y: f64) -> f64 {
    let sx = f64::from(m_x) / l_x;
    let sy = f64::from(m_y) / l_y;
    sx * sx + sy * sy
}

/// All integer harmonics supported by the aperture, i.e. the lattice points
/// with `(m_x/L_x)² + (m_y/L_y)² ≤ 1`, in lexicographic `(m_x, m_y)` order.
/// The set is never empty: `(0, 0)` is present for any aperture.
pub fn enumerate_lattice_ellipse(geometry: &ArrayGeometry) -> Vec<(i32, i32)> {
    let (l_x, l_y) = geometry.aperture();
    let bound_x = l_x.floor() as i32;
    let bound_y = l_y.floor() as i32;
    let mut indices = Vec::new();
    for m_x in -bound_x..=bound_x {
        for m_y in -bound_y..=bound_y {
            if ellipse_radius2(m_x, m_y, l_x, l_y) <= 1.0 + ELLIPSE_SLACK {
                indices.push((m_x, m_y));
            }
        }
    }
    indices
}

/// Longitudinal wavenumber `γ = √(κ² − (2πm_x/L_x)² − (2πm_y/L_y)²)` of a
/// supported harmonic. Real and nonnegative inside the lattice ellipse;
/// exactly zero for grazing (boundary) harmonics.
pub fn z_wavenumber(m_x: i32, m_y: i32, geometry: &ArrayGeometry) -> Result<f64> {
    let (l_x, l_y) = geometry.aperture();
    let r2 = ellipse_radius2(m_x, m_y, l_x, l_y);
    if r2 > 1.0 + ELLIPSE_SLACK {
        return Err(ModelError::IndexOutsideEllipse { m_x, m_y, l_x, l_y });
    }
    Ok(WAVENUMBER * (1.0 - r2).max(0.0).sqrt())
}

/// Truncated plane-wave basis of one array: the harmonic index list together
/// with the `N x n` matrix whose columns are the sampled harmonics.
#[derive(Debug, Clone)]
pub struct WavenumberBasis {
    pub geometry: ArrayGeometry,
    pub side: Side,
    /// Harmonic indices in lexicographic order; one per column.
    pub indices: Vec<(i32, i32)>,
    /// `N x n` harmonic matrix with unit-norm columns.
    pub matrix: DMatrix<Cx>,
}

impl WavenumberBasis {
    /// Number of array elements `N` (rows).
    pub fn elements(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of supported harmonics `n` (columns).
    pub fn harmonics(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Build the harmonic matrix of an array. Element `j` of the column for
/// harmonic `(m_x, m_y)` is
/// `exp(±i(2π m_x x_j / L_x + 2π m_y y_j / L_y + γ z_j)) / √N`,
/// with `-` on transmit and `+` on receive. Column order matches
/// [`enumerate_lattice_ellipse`]; the build is deterministic, so repeated
/// calls return bit-identical matrices.
pub fn build_harmonic_matrix(geometry: &ArrayGeometry, side: Side) -> WavenumberBasis {
    let indices = enumerate_lattice_ellipse(geometry);
    let positions = geometry.positions();
    let (l_x, l_y) = geometry.aperture();
    let n = geometry.elements();
    let scale = 1.0 / (n as f64).sqrt();
    let sign = match side {
        Side::Transmit => -1.0,
        Side::Receive => 1.0,
    };

    let mut matrix = DMatrix::zeros(n, indices.len());
    for (col, &(m_x, m_y)) in indices.iter().enumerate() {
        let gamma = z_wavenumber(m_x, m_y, geometry)
            .expect("enumerated index must lie inside the lattice ellipse");
        for (row, &[x, y, z]) in positions.iter().enumerate() {
            let phase = WAVENUMBER * (f64::from(m_x) * x / l_x + f64::from(m_y) * y / l_y)
                + gamma * z;
            matrix[(row, col)] = Cx::from_polar(scale, sign * phase);
        }
    }
    WavenumberBasis { geometry: geometry.clone(), side, indices, matrix }
}

// ---------------------------------------------------------------------------
