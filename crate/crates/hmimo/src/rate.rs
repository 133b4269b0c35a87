//! Spectral-efficiency evaluation: per-stream SINR, Monte Carlo sweeps over
//! an SNR grid, and the closed-form zero-forcing rate.
//!
//! Transmit symbols carry power `p` per stream, receiver noise is CN(0, σ_w²)
//! per stream, and the gain matrix is `G = H̃ V`. Stream `k` decodes its own
//! entry against the interference from every other column:
//!
//! ```text
//! SINR_k = p |G_kk|² / (p Σ_{j≠k} |G_kj|² + σ_w²)
//! ```
//!
//! Sweeps are trial-parallel but deterministic: each trial draws from its own
//! counter-derived substream, partial results are collected in trial order,
//! and the reduction is sequential compensated summation, so the output is
//! bit-identical for any worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::assemble_multiuser_channel;
use crate::geometry::{build_harmonic_matrix, ArrayGeometry, Side, WavenumberBasis};
use crate::precoding::{
    effective_channel, mmse_precoder, mrt_precoder, random_unit_phase, unit_phase, zf_precoder,
    EffectiveChannel, Precoder, Scheme, StreamNorm,
};
use crate::spectrum::{build_spectral_variance, SpectralVariance};
use crate::{Cx, ModelError, Result};

/// Phase configuration policy for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMode {
    /// Identity surface: every element applies phase 1.
    #[default]
    AllOnes,
    /// Fresh uniform unit-modulus phases each trial (seeded substream).
    RandomPerTrial,
}

/// Monte Carlo sweep options.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub n_trials: usize,
    pub seed: u64,
    pub stream_norm: StreamNorm,
    pub phase: PhaseMode,
    /// Receiver noise variance σ_w²; the SNR grid fixes `p = σ_w²·10^(dB/10)`.
    pub sigma_w2: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_trials: 200,
            seed: 0,
            stream_norm: StreamNorm::TotalK,
            phase: PhaseMode::AllOnes,
            sigma_w2: 1.0,
        }
    }
}

/// Aggregated sweep output for one scheme at one SNR point.
#[derive(Debug, Clone)]
pub struct SeResult {
    pub scheme: Scheme,
    pub snr_db: f64,
    /// Mean per-stream rate `E{log₂(1 + SINR_k)}` in bit/s/Hz.
    pub per_stream_rate: Vec<f64>,
    /// Mean sum rate over all streams.
    pub sum_rate: f64,
    /// Standard error of the sum rate across trials.
    pub std_error: f64,
    pub n_trials: usize,
}

/// Multi-user system description: one transmit surface, `M` receive surfaces
/// with identical geometry, and the per-user coupling variances.
#[derive(Debug, Clone)]
pub struct MultiUserModel {
    pub tx_basis: WavenumberBasis,
    pub rx_bases: Vec<WavenumberBasis>,
    pub variances: Vec<SpectralVariance>,
}

impl MultiUserModel {
    /// All users share the same receive geometry and scattering statistics.
    pub fn homogeneous(tx: &ArrayGeometry, rx: &ArrayGeometry, users: usize) -> Result<Self> {
        if users == 0 {
            return Err(ModelError::InvalidParameter("a model needs at least one user".into()));
        }
        let tx_basis = build_harmonic_matrix(tx, Side::Transmit);
        let rx_basis = build_harmonic_matrix(rx, Side::Receive);
        let variance = build_spectral_variance(&tx_basis, &rx_basis)?;
        Ok(MultiUserModel {
            tx_basis,
            rx_bases: vec![rx_basis; users],
            variances: vec![variance; users],
        })
    }

    pub fn users(&self) -> usize {
        self.rx_bases.len()
    }

    /// Total stream count `K = Σ_m n_r^(m)`.
    pub fn streams(&self) -> usize {
        self.variances.iter().map(|v| v.rx_harmonics()).sum()
    }

    /// Transmit harmonic count `n_s`.
    pub fn tx_harmonics(&self) -> usize {
        self.tx_basis.harmonics()
    }
}

// ---------------------------------------------------------------------------
// SINR and rate
// ---------------------------------------------------------------------------

/// Per-stream SINR for one realization under a given precoder.
pub fn per_stream_sinr(
    channel: &EffectiveChannel,
    precoder: &Precoder,
    p: f64,
    sigma_w2: f64,
) -> Vec<f64> {
    let gain = &channel.matrix * &precoder.matrix;
    sinr_from_gain(&gain, p, sigma_w2)
}

/// SINR straight from the gain matrix `G = H̃ V`.
fn sinr_from_gain(gain: &DMatrix<Cx>, p: f64, sigma_w2: f64) -> Vec<f64> {
    let k = gain.nrows();
    (0..k)
        .map(|i| {
            let mut interference = 0.0;
            for j in 0..k {
                if j != i {
                    interference += gain[(i, j)].norm_sqr();
                }
            }
            p * gain[(i, i)].norm_sqr() / (p * interference + sigma_w2)
        })
        .collect()
}

fn rate_from_sinr(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Compensated (Kahan) accumulator for order-stable reductions.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo sweep
// ---------------------------------------------------------------------------

/// Per-stream rates for every SNR point of a single trial.
fn trial_rates(
    model: &MultiUserModel,
    scheme: Scheme,
    powers: &[f64],
    opts: &SweepOptions,
    trial: u64,
) -> Result<Vec<Vec<f64>>> {
    let realization = assemble_multiuser_channel(
        &model.variances,
        &model.tx_basis,
        &model.rx_bases,
        opts.seed,
        trial,
    )?;
    let phase = match opts.phase {
        PhaseMode::AllOnes => unit_phase(model.tx_basis.elements()),
        PhaseMode::RandomPerTrial => {
            random_unit_phase(model.tx_basis.elements(), opts.seed, trial)
        }
    };
    let channel = effective_channel(&realization, &model.tx_basis, &phase)?;
    // MRT and ZF do not depend on the operating point: solve once and reuse
    // the gain matrix across the whole grid.
    let fixed = match scheme {
        Scheme::Mrt => Some(mrt_precoder(&channel, opts.stream_norm)?),
        Scheme::Zf => Some(zf_precoder(&channel, opts.stream_norm)?),
        Scheme::Mmse => None,
    };
    let fixed_gain = fixed.map(|pre| &channel.matrix * &pre.matrix);
    powers
        .iter()
        .map(|&p| {
            let sinr = match &fixed_gain {
                Some(gain) => sinr_from_gain(gain, p, opts.sigma_w2),
                None => {
                    let pre = mmse_precoder(&channel, opts.stream_norm, p, opts.sigma_w2)?;
                    per_stream_sinr(&channel, &pre, p, opts.sigma_w2)
                }
            };
            Ok(sinr.into_iter().map(rate_from_sinr).collect())
        })
        .collect()
}

/// Monte Carlo spectral efficiency of one scheme over an SNR grid.
///
/// Returns one [`SeResult`] per grid point, in grid order. The reduction is
/// deterministic for a fixed seed regardless of thread count.
pub fn monte_carlo_se(
    model: &MultiUserModel,
    scheme: Scheme,
    snr_grid_db: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SeResult>> {
    if opts.n_trials == 0 {
        return Err(ModelError::InvalidParameter("a sweep needs at least one trial".into()));
    }
    if !(opts.sigma_w2 > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "noise variance must be positive, got {}",
            opts.sigma_w2
        )));
    }
    let k = model.streams();
    let n_s = model.tx_harmonics();
    if matches!(scheme, Scheme::Zf | Scheme::Mmse) && k > n_s {
        return Err(ModelError::Infeasible { streams: k, columns: n_s });
    }
    let powers: Vec<f64> =
        snr_grid_db.iter().map(|db| opts.sigma_w2 * 10f64.powf(db / 10.0)).collect();

    // Trial-ordered collection keeps the reduction independent of the rayon
    // pool size.
    let per_trial: Vec<Vec<Vec<f64>>> = (0..opts.n_trials as u64)
        .into_par_iter()
        .map(|trial| trial_rates(model, scheme, &powers, opts, trial))
        .collect::<Result<Vec<_>>>()?;

    let n = opts.n_trials;
    let mut results = Vec::with_capacity(powers.len());
    for (s, &snr_db) in snr_grid_db.iter().enumerate() {
        let mut stream_sums = vec![Kahan::default(); k];
        let mut trial_totals = Vec::with_capacity(n);
        for rates in &per_trial {
            let mut total = Kahan::default();
            for (acc, &r) in stream_sums.iter_mut().zip(&rates[s]) {
                acc.add(r);
                total.add(r);
            }
            trial_totals.push(total.value());
        }
        let per_stream_rate: Vec<f64> =
            stream_sums.iter().map(|acc| acc.value() / n as f64).collect();
        let mut mean = Kahan::default();
        for &t in &trial_totals {
            mean.add(t);
        }
        let sum_rate = mean.value() / n as f64;
        let std_error = if n > 1 {
            let mut var = Kahan::default();
            for &t in &trial_totals {
                var.add((t - sum_rate) * (t - sum_rate));
            }
            (var.value() / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        results.push(SeResult {
            scheme,
            snr_db,
            per_stream_rate,
            sum_rate,
            std_error,
            n_trials: n,
        });
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// Closed-form zero-forcing rate
// ---------------------------------------------------------------------------

/// Effective per-stream channel gains `β_i = 1 / [(H H̃ᴴ)⁻¹]_ii` computed
/// through the Hermitian eigen-factorization of the Gram matrix.
pub fn zf_beta(stacked: &DMatrix<Cx>) -> Result<Vec<f64>> {
    let (k, n_s) = stacked.shape();
    if k > n_s {
        return Err(ModelError::Infeasible { streams: k, columns: n_s });
    }
    let gram = stacked * stacked.adjoint();
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if !(min > 0.0) || max / min > crate::precoding::CONDITION_LIMIT {
        return Err(ModelError::SingularChannel {
            streams: k,
            columns: n_s,
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    Ok((0..k)
        .map(|i| {
            let mut inv_ii = 0.0;
            for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
                inv_ii += eig.eigenvectors[(i, j)].norm_sqr() / lambda;
            }
            1.0 / inv_ii
        })
        .collect())
}

/// Closed-form zero-forcing per-stream rates.
///
/// For `K` total streams over transmit harmonics with per-entry variance
/// `σ_ij² = N_r N_s · v_i · u_j`, the mean effective gain of stream `i` is
/// `(n_s − K + 1) · N_r N_s · v_i · ū` with `ū` the average transmit-side
/// variance (exact when the transmit profile is uniform), giving
///
/// ```text
/// R_i = log₂(1 + p (n_s − K + 1) N_r N_s v_i ū / (K σ_w²))
/// ```
pub fn theoretical_zf_rate(
    variance: &SpectralVariance,
    users: usize,
    p: f64,
    sigma_w2: f64,
) -> Result<Vec<f64>> {
    if users == 0 {
        return Err(ModelError::InvalidParameter("a model needs at least one user".into()));
    }
    if !(p > 0.0) || !(sigma_w2 > 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "closed-form rate needs positive power and noise variance, got p = {p}, σ_w² = {sigma_w2}"
        )));
    }
    let n_r = variance.rx_harmonics();
    let n_s = variance.tx_harmonics();
    let k = users * n_r;
    if k > n_s {
        return Err(ModelError::Infeasible { streams: k, columns: n_s });
    }
    let elements = (variance.rx_elements * variance.tx_elements) as f64;
    let diversity = (n_s - k + 1) as f64;
    let u_bar = variance.average_tx_variance();
    Ok(variance
        .rx_var
        .iter()
        .map(|&v| rate_from_sinr(p / (k as f64 * sigma_w2) * diversity * elements * v * u_bar))
        .collect())
}

/// Monte Carlo check of the mean effective gain against its closed form.
#[derive(Debug, Clone)]
pub struct BetaCheckReport {
    /// Sample mean of the first stream's effective gain `β₁`.
    pub sample_mean: f64,
    /// Closed-form prediction `(n_s − K + 1) · N_r N_s · v_1 · ū`.
    pub predicted: f64,
    /// Standard error of the sample mean.
    pub std_error: f64,
    pub n_trials: usize,
}

impl BetaCheckReport {
    pub fn relative_gap(&self) -> f64 {
        (self.sample_mean - self.predicted).abs() / self.predicted
    }
}

/// Estimate `E{β₁}` by Monte Carlo and compare with the closed form used by
/// [`theoretical_zf_rate`].
pub fn expected_beta_check(
    model: &MultiUserModel,
    n_trials: usize,
    seed: u64,
) -> Result<BetaCheckReport> {
    if n_trials == 0 {
        return Err(ModelError::InvalidParameter("a check needs at least one trial".into()));
    }
    let samples: Vec<f64> = (0..n_trials as u64)
        .into_par_iter()
        .map(|trial| {
            let realization = assemble_multiuser_channel(
                &model.variances,
                &model.tx_basis,
                &model.rx_bases,
                seed,
                trial,
            )?;
            Ok(zf_beta(&realization.stacked_wavenumber)?[0])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = Kahan::default();
    for &b in &samples {
        mean.add(b);
    }
    let sample_mean = mean.value() / n_trials as f64;
    let std_error = if n_trials > 1 {
        let mut var = Kahan::default();
        for &b in &samples {
            var.add((b - sample_mean) * (b - sample_mean));
        }
        (var.value() / ((n_trials - 1) as f64 * n_trials as f64)).sqrt()
    } else {
        0.0
    };
    let v = &model.variances[0];
    let k = model.streams();
    let predicted = (v.tx_harmonics() - k + 1) as f64
        * (v.rx_elements * v.tx_elements) as f64
        * v.rx_var[0]
        * v.average_tx_variance();
    Ok(BetaCheckReport { sample_mean, predicted, std_error, n_trials })
}

// ---------------------------------------------------------------------------
