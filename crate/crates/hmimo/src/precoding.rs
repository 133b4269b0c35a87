//! Effective wavenumber-domain channel and linear precoders.
//!
//! With a surface phase configuration `Φ = diag(φ)` the transmitter sees the
//! effective channel `H̃_a = H_a U_sᴴ Φ` (`K x N_s`, `K = M·n_r` streams).
//! Precoders are normalized per column ("vector" normalization): column `i`
//! of the precoding matrix is `f_i / (√D ‖f_i‖)` where the power denominator
//! `D` splits the budget over all `K` streams by default, or over the
//! per-user stream count when the per-user variant is selected. Either way
//! `trace(V Vᴴ) = 1` requires the total-stream split; the per-user variant
//! exists for side-by-side comparison with per-user power accounting.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{phase_rng, ChannelRealization};
use crate::geometry::WavenumberBasis;
use crate::{Cx, ModelError, Result};

/// Gram matrices whose condition number exceeds this are reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Tolerance on `| |φ_k| − 1 |` when validating phase vectors.
const PHASE_TOLERANCE: f64 = 1e-9;

/// Linear precoding scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Mrt,
    Zf,
    Mmse,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Mrt => "mrt",
            Scheme::Zf => "zf",
            Scheme::Mmse => "mmse",
        }
    }
}

/// Column normalization method (only vector normalization is defined).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Vector,
}

/// How the power budget is split across precoder columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StreamNorm {
    /// Split over all `K = M·n_r` streams; satisfies `trace(V Vᴴ) = 1`.
    #[default]
    TotalK,
    /// Split over the per-user stream count `n_r` (literal single-user form);
    /// `trace(V Vᴴ) = M` under this variant.
    PerUser,
}

impl StreamNorm {
    /// Power denominator for a system with `streams` total streams across
    /// `users` users.
    pub fn denominator(&self, streams: usize, users: usize) -> f64 {
        match self {
            StreamNorm::TotalK => streams as f64,
            StreamNorm::PerUser => streams as f64 / users as f64,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StreamNorm::TotalK => "total-k",
            StreamNorm::PerUser => "per-user",
        }
    }
}

/// Stream bookkeeping: `users · per_user` rows of the effective channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLayout {
    pub users: usize,
    pub per_user: usize,
}

impl StreamLayout {
    pub fn streams(&self) -> usize {
        self.users * self.per_user
    }
}

/// Effective channel `H̃_a = H_a U_sᴴ Φ` seen by the precoder.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `K x N_s` effective channel matrix.
    pub matrix: DMatrix<Cx>,
    /// Unit-modulus phase configuration applied per transmit element.
    pub phase: Vec<Cx>,
    pub layout: StreamLayout,
}

/// All-ones phase configuration (surface acts as a plain aperture).
pub fn unit_phase(n: usize) -> Vec<Cx> {
    vec![Cx::new(1.0, 0.0); n]
}

/// Seeded uniform-random unit-modulus phase configuration; `trial` selects
/// the substream so sweeps can redraw phases per trial reproducibly.
pub fn random_unit_phase(n: usize, seed: u64, trial: u64) -> Vec<Cx> {
    let mut rng = phase_rng(seed, trial);
    (0..n)
        .map(|_| Cx::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Build the effective channel for one realization. Requires every user to
/// contribute the same stream count and `φ` to have one unit-modulus entry
/// per transmit element.
pub fn effective_channel(
    realization: &ChannelRealization,
    tx_basis: &WavenumberBasis,
    phase: &[Cx],
) -> Result<EffectiveChannel> {
    let users = realization.users();
    let per_user = realization.per_user_wavenumber[0].nrows();
    if realization.per_user_wavenumber.iter().any(|h| h.nrows() != per_user) {
        return Err(ModelError::DimensionMismatch(
            "effective channel requires a uniform per-user stream count".into(),
        ));
    }
    effective_from_stacked(
        &realization.stacked_wavenumber,
        tx_basis,
        phase,
        StreamLayout { users, per_user },
    )
}

/// Effective channel from an already-stacked wavenumber matrix.
pub fn effective_from_stacked(
    stacked: &DMatrix<Cx>,
    tx_basis: &WavenumberBasis,
    phase: &[Cx],
    layout: StreamLayout,
) -> Result<EffectiveChannel> {
    if stacked.ncols() != tx_basis.harmonics() {
        return Err(ModelError::DimensionMismatch(format!(
            "stacked channel has {} transmit harmonics, basis has {}",
            stacked.ncols(),
            tx_basis.harmonics()
        )));
    }
    if stacked.nrows() != layout.streams() {
        return Err(ModelError::DimensionMismatch(format!(
            "stacked channel has {} rows, layout expects {}",
            stacked.nrows(),
            layout.streams()
        )));
    }
    if phase.len() != tx_basis.elements() {
        return Err(ModelError::DimensionMismatch(format!(
            "phase vector has {} entries, surface has {} elements",
            phase.len(),
            tx_basis.elements()
        )));
    }
    for (index, p) in phase.iter().enumerate() {
        let modulus = p.norm();
        if (modulus - 1.0).abs() > PHASE_TOLERANCE {
            return Err(ModelError::NonUnitPhase { index, modulus });
        }
    }
    let mut matrix = stacked * tx_basis.matrix.adjoint();
    for (mut col, p) in matrix.column_iter_mut().zip(phase) {
        col *= *p;
    }
    Ok(EffectiveChannel { matrix, phase: phase.to_vec(), layout })
}

/// Precoding matrix with its provenance.
#[derive(Debug, Clone)]
pub struct Precoder {
    /// `N_s x K` precoding matrix.
    pub matrix: DMatrix<Cx>,
    pub scheme: Scheme,
    pub normalization: Normalization,
    pub stream_norm: StreamNorm,
}

/// Hermitian eigen-factorization of the stream Gram matrix `H̃ H̃ᴴ`, shared
/// by the ZF and MMSE solves so singularity is judged once.
struct GramFactor {
    vectors: DMatrix<Cx>,
    values: Vec<f64>,
}

impl GramFactor {
    fn new(h: &DMatrix<Cx>) -> Self {
        let gram = h * h.adjoint();
        let eig = gram.symmetric_eigen();
        GramFactor { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().copied().collect() }
    }

    /// Condition number after adding `shift ≥ 0` to the spectrum.
    fn condition(&self, shift: f64) -> f64 {
        let max = self.values.iter().fold(0.0f64, |a, &v| a.max(v + shift));
        let min = self.values.iter().fold(f64::INFINITY, |a, &v| a.min(v + shift));
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// `(Gram + shift·I)^{-1} · rhs` through the factorization.
    fn solve(&self, rhs: &DMatrix<Cx>, shift: f64) -> DMatrix<Cx> {
        let mut projected = self.vectors.adjoint() * rhs;
        for (row, &v) in self.values.iter().enumerate() {
            let inv = Cx::new(1.0 / (v + shift), 0.0);
            for col in 0..projected.ncols() {
                projected[(row, col)] *= inv;
            }
        }
        &self.vectors * projected
    }
}

/// Scale each column `f_i` to `f_i / (√D ‖f_i‖)`.
fn vector_normalize(mut f: DMatrix<Cx>, denom: f64) -> Result<DMatrix<Cx>> {
    let scale = denom.sqrt();
    for (stream, mut col) in f.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(ModelError::DegenerateChannel { stream });
        }
        col /= Cx::new(scale * norm, 0.0);
    }
    Ok(f)
}

/// Maximum-ratio transmission: column `i` is the conjugated stream row.
pub fn mrt_precoder(channel: &EffectiveChannel, stream_norm: StreamNorm) -> Result<Precoder> {
    let matrix = vector_normalize(
        channel.matrix.adjoint(),
        stream_norm.denominator(channel.layout.streams(), channel.layout.users),
    )?;
    Ok(Precoder { matrix, scheme: Scheme::Mrt, normalization: Normalization::Vector, stream_norm })
}

/// Zero-forcing: `F = H̃ᴴ (H̃ H̃ᴴ)^{-1}`, then vector normalization. Requires
/// at least as many transmit harmonics as streams and a well-conditioned
/// Gram matrix.
pub fn zf_precoder(channel: &EffectiveChannel, stream_norm: StreamNorm) -> Result<Precoder> {
    let (k, n_s) = channel.matrix.shape();
    if k > n_s {
        return Err(ModelError::Infeasible { streams: k, columns: n_s });
    }
    let factor = GramFactor::new(&channel.matrix);
    let condition = factor.condition(0.0);
    if condition > CONDITION_LIMIT {
        return Err(ModelError::SingularChannel { streams: k, columns: n_s, condition });
    }
    let f = factor.solve(&channel.matrix, 0.0).adjoint();
    let matrix = vector_normalize(
        f,
        stream_norm.denominator(channel.layout.streams(), channel.layout.users),
    )?;
    Ok(Precoder { matrix, scheme: Scheme::Zf, normalization: Normalization::Vector, stream_norm })
}

/// Regularized (MMSE) precoding: `F = H̃ᴴ (H̃ H̃ᴴ + (K σ_w² / p_u) I)^{-1}`,
/// then vector normalization.
pub fn mmse_precoder(
    channel: &EffectiveChannel,
    stream_norm: StreamNorm,
    p_u: f64,
    sigma_w2: f64,
) -> Result<Precoder> {
    if !(p_u > 0.0) || !(sigma_w2 > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "mmse precoder needs positive power and noise variance, got p_u = {p_u}, σ_w² = {sigma_w2}"
        )));
    }
    let (k, n_s) = channel.matrix.shape();
    if k > n_s {
        return Err(ModelError::Infeasible { streams: k, columns: n_s });
    }
    let shift = k as f64 * sigma_w2 / p_u;
    let factor = GramFactor::new(&channel.matrix);
    let condition = factor.condition(shift);
    if condition > CONDITION_LIMIT {
        return Err(ModelError::SingularChannel { streams: k, columns: n_s, condition });
    }
    let f = factor.solve(&channel.matrix, shift).adjoint();
    let matrix = vector_normalize(
        f,
        stream_norm.denominator(channel.layout.streams(), channel.layout.users),
    )?;
    Ok(Precoder { matrix, scheme: Scheme::Mmse, normalization: Normalization::Vector, stream_norm })
}

// ---------------------------------------------------------------------------
