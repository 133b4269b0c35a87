//! Random channel realizations and receive-side correlation.
//!
//! The wavenumber-domain channel of user `m` is an `n_r x n_s` matrix with
//! independent entries `σ_{ij}·w`, `w ~ CN(0, 1)`. The space-domain channel
//! follows as `H = U_r H_a U_sᴴ`, and the per-user blocks stack user-major
//! into the `M·N_r x N_s` multi-user matrix. Every `(trial, user)` pair owns
//! its own counter-derived RNG substream, so realizations are reproducible
//! and independent of scheduling or worker count.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::geometry::WavenumberBasis;
use crate::spectrum::SpectralVariance;
use crate::{Cx, ModelError, Result};

/// Substream tag for channel entries; further tags keep other random draws
/// (e.g. random phase configurations) out of the channel streams.
const STREAM_CHANNEL: u64 = 0;
const STREAM_PHASE: u64 = 1;

/// Users per trial are limited so the (trial, user) pair packs into the
/// 64-bit ChaCha stream counter.
pub const MAX_USERS: usize = 1 << 16;

/// Deterministic RNG for one `(trial, user)` channel substream.
pub fn channel_rng(seed: u64, trial: u64, user: usize) -> ChaCha12Rng {
    assert!(user < MAX_USERS, "user index exceeds substream capacity");
    assert!(trial < 1 << 45, "trial index exceeds substream capacity");
    substream(seed, STREAM_CHANNEL, (trial << 16) | user as u64)
}

/// Deterministic RNG for auxiliary per-trial draws (phase configurations).
pub fn phase_rng(seed: u64, trial: u64) -> ChaCha12Rng {
    substream(seed, STREAM_PHASE, trial)
}

fn substream(seed: u64, tag: u64, counter: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((tag << 61) | counter);
    rng
}

/// Standard complex Gaussian `CN(0, 1)`: real and imaginary parts are
/// independent `N(0, 1/2)`.
fn standard_complex<R: Rng>(rng: &mut R) -> Cx {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cx::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
}

/// Draw one wavenumber-domain realization `H_a` with entries `σ_{ij} · w_{ij}`,
/// `w_{ij} ~ CN(0, 1)`, consumed from `rng` in row-major order.
pub fn sample_wavenumber_channel<R: Rng>(sv: &SpectralVariance, rng: &mut R) -> DMatrix<Cx> {
    let (n_r, n_s) = sv.sigma.shape();
    let mut h = DMatrix::zeros(n_r, n_s);
    for i in 0..n_r {
        for j in 0..n_s {
            h[(i, j)] = standard_complex(rng) * sv.sigma[(i, j)];
        }
    }
    h
}

/// Stack per-user wavenumber channels user-major for one trial, drawing each
/// user from its own substream. All users must share the transmit harmonic
/// count; receive harmonic counts may differ.
pub fn draw_stacked_wavenumber(
    variances: &[SpectralVariance],
    seed: u64,
    trial: u64,
) -> Result<DMatrix<Cx>> {
    if variances.is_empty() {
        return Err(ModelError::InvalidParameter("at least one user required".into()));
    }
    let n_s = variances[0].tx_harmonics();
    if variances.iter().any(|sv| sv.tx_harmonics() != n_s) {
        return Err(ModelError::DimensionMismatch(
            "all users must share the transmit harmonic set".into(),
        ));
    }
    let k: usize = variances.iter().map(|sv| sv.rx_harmonics()).sum();
    let mut stacked = DMatrix::zeros(k, n_s);
    let mut row = 0;
    for (user, sv) in variances.iter().enumerate() {
        let mut rng = channel_rng(seed, trial, user);
        let block = sample_wavenumber_channel(sv, &mut rng);
        stacked.view_mut((row, 0), (sv.rx_harmonics(), n_s)).copy_from(&block);
        row += sv.rx_harmonics();
    }
    Ok(stacked)
}

/// One multi-user channel draw in both domains.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Per-user wavenumber channels `H_a^{(m)}`, each `n_r x n_s`.
    pub per_user_wavenumber: Vec<DMatrix<Cx>>,
    /// User-major stack of the wavenumber channels, `K x n_s`.
    pub stacked_wavenumber: DMatrix<Cx>,
    /// User-major stack of the space-domain channels, `M·N_r x N_s`.
    pub stacked_space: DMatrix<Cx>,
    /// Master seed the substreams were derived from.
    pub seed: u64,
    /// Trial counter within that seed.
    pub trial_index: u64,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.per_user_wavenumber.len()
    }
}

/// Assemble the channels of all users for one trial: draw `H_a^{(m)}` from
/// the per-user substream, lift to space domain via `U_r^{(m)} H_a^{(m)} U_sᴴ`
/// and stack user-major.
pub fn assemble_multiuser_channel(
    variances: &[SpectralVariance],
    tx_basis: &WavenumberBasis,
    rx_bases: &[WavenumberBasis],
    seed: u64,
    trial: u64,
) -> Result<ChannelRealization> {
    if variances.len() != rx_bases.len() || variances.is_empty() {
        return Err(ModelError::DimensionMismatch(format!(
            "need matching nonempty user lists, got {} variance profiles and {} receive bases",
            variances.len(),
            rx_bases.len()
        )));
    }
    let n_s = tx_basis.harmonics();
    let n_elems_r: usize = rx_bases.iter().map(|b| b.elements()).sum();
    for (user, (sv, rx)) in variances.iter().zip(rx_bases).enumerate() {
        if sv.tx_harmonics() != n_s {
            return Err(ModelError::DimensionMismatch(format!(
                "user {user}: variance profile has {} transmit harmonics, basis has {n_s}",
                sv.tx_harmonics()
            )));
        }
        if sv.rx_harmonics() != rx.harmonics() || sv.rx_elements != rx.elements() {
            return Err(ModelError::DimensionMismatch(format!(
                "user {user}: variance profile does not match its receive basis"
            )));
        }
        if sv.tx_elements != tx_basis.elements() {
            return Err(ModelError::DimensionMismatch(format!(
                "user {user}: variance profile assumes {} transmit elements, basis has {}",
                sv.tx_elements,
                tx_basis.elements()
            )));
        }
    }

    let tx_adjoint = tx_basis.matrix.adjoint();
    let mut per_user = Vec::with_capacity(variances.len());
    let mut stacked_wavenumber =
        DMatrix::zeros(variances.iter().map(|sv| sv.rx_harmonics()).sum(), n_s);
    let mut stacked_space = DMatrix::zeros(n_elems_r, tx_basis.elements());
    let (mut wrow, mut srow) = (0, 0);
    for (user, (sv, rx)) in variances.iter().zip(rx_bases).enumerate() {
        let mut rng = channel_rng(seed, trial, user);
        let h_a = sample_wavenumber_channel(sv, &mut rng);
        let h_space = &rx.matrix * &h_a * &tx_adjoint;
        stacked_wavenumber.view_mut((wrow, 0), h_a.shape()).copy_from(&h_a);
        stacked_space.view_mut((srow, 0), h_space.shape()).copy_from(&h_space);
        wrow += h_a.nrows();
        srow += h_space.nrows();
        per_user.push(h_a);
    }
    Ok(ChannelRealization {
        per_user_wavenumber: per_user,
        stacked_wavenumber,
        stacked_space,
        seed,
        trial_index: trial,
    })
}

/// Eigenvalue spectrum of the receive spatial correlation
/// `R = U_r diag(N_r · rx_var) U_rᴴ` (so that `trace(R) = N_r`).
#[derive(Debug, Clone)]
pub struct CorrelationSpectrum {
    /// All `N_r` eigenvalues, descending; at most `n_r` are nonzero.
    pub eigenvalues: Vec<f64>,
    /// Human-readable geometry tag (grid and spacing).
    pub label: String,
}

impl CorrelationSpectrum {
    /// Number of eigenvalues above `threshold · max`.
    pub fn count_above(&self, threshold: f64) -> usize {
        let cut = threshold * self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues.iter().filter(|&&v| v > cut).count()
    }

    /// Flat reference spectrum of an i.i.d. channel (all eigenvalues one).
    pub fn iid_reference(n_r: usize) -> Self {
        Self { eigenvalues: vec![1.0; n_r], label: "iid".into() }
    }
}

/// Closed-form correlation spectrum. Because `U_r` has orthonormal columns
/// the nonzero eigenvalues are `N_r · rx_var[i]`, padded with `N_r − n_r`
/// zeros. The one exception is an exactly-half-wavelength grid, where the
/// grazing harmonics `±(n/2, 0)`/`±(0, n/2)` sample to the same column; such
/// alias groups merge into a single eigenvalue carrying the summed power.
pub fn receive_correlation_spectrum(
    sv: &SpectralVariance,
    rx_basis: &WavenumberBasis,
) -> Result<CorrelationSpectrum> {
    if sv.rx_harmonics() != rx_basis.harmonics() || sv.rx_elements != rx_basis.elements() {
        return Err(ModelError::DimensionMismatch(
            "variance profile does not match the receive basis".into(),
        ));
    }
    let n_r_elems = rx_basis.elements();
    let (n_h, n_v) = (rx_basis.geometry.n_h as i32, rx_basis.geometry.n_v as i32);
    let mut groups: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    for (&(mx, my), &v) in rx_basis.indices.iter().zip(&sv.rx_var) {
        *groups.entry((mx.rem_euclid(n_h), my.rem_euclid(n_v))).or_insert(0.0) +=
            n_r_elems as f64 * v;
    }
    let mut eigenvalues: Vec<f64> = groups.into_values().collect();
    eigenvalues.resize(n_r_elems, 0.0);
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let g = &rx_basis.geometry;
    Ok(CorrelationSpectrum {
        eigenvalues,
        label: format!("{}x{}@{:.6}", g.n_h, g.n_v, g.spacing),
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_harmonic_matrix, ArrayGeometry, Side};
    use crate::spectrum::build_spectral_variance;
    use approx::assert_relative_eq;

    fn small_model() -> (WavenumberBasis, WavenumberBasis, SpectralVariance) {
        let tx = build_harmonic_matrix(&ArrayGeometry::new(5, 5, 0.4).unwrap(), Side::Transmit);
        let rx = build_harmonic_matrix(&ArrayGeometry::new(3, 3, 0.4).unwrap(), Side::Receive);
        let sv = build_spectral_variance(&tx, &rx).unwrap();
        (tx, rx, sv)
    }

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a: Vec<u64> = channel_rng(7, 3, 1).random_iter().take(4).collect();
        let b: Vec<u64> = channel_rng(7, 3, 1).random_iter().take(4).collect();
        assert_eq!(a, b);
        let c: Vec<u64> = channel_rng(7, 3, 2).random_iter().take(4).collect();
        let d: Vec<u64> = channel_rng(7, 4, 1).random_iter().take(4).collect();
        assert_ne!(a, c);
        assert_ne!(a, d);
        let p: Vec<u64> = phase_rng(7, 3).random_iter().take(4).collect();
        assert_ne!(a, p, "phase draws must not reuse channel substreams");
    }

    #[test]
    fn sampling_respects_sigma_profile() {
        let (_, _, sv) = small_model();
        let trials = 4000;
        let mut second_moment = DMatrix::zeros(sv.rx_harmonics(), sv.tx_harmonics());
        for t in 0..trials {
            let mut rng = channel_rng(11, t, 0);
            let h = sample_wavenumber_channel(&sv, &mut rng);
            second_moment += h.map(|z| z.norm_sqr());
        }
        second_moment /= trials as f64;
        for i in 0..sv.rx_harmonics() {
            for j in 0..sv.tx_harmonics() {
                let var = sv.sigma[(i, j)] * sv.sigma[(i, j)];
                assert!(
                    (second_moment[(i, j)] - var).abs() < 0.1 * var,
                    "entry ({i}, {j}) second moment off: {} vs {var}",
                    second_moment[(i, j)]
                );
            }
        }
    }

    #[test]
    fn distinct_entries_are_uncorrelated() {
        let (_, _, sv) = small_model();
        let trials = 10_000;
        let (mut e01, mut e0_10) = (Cx::new(0.0, 0.0), Cx::new(0.0, 0.0));
        let (mut p0, mut p1, mut p2) = (0.0, 0.0, 0.0);
        for t in 0..trials {
            let mut rng = channel_rng(12, t, 0);
            let h = sample_wavenumber_channel(&sv, &mut rng);
            e01 += h[(0, 0)] * h[(0, 1)].conj();
            e0_10 += h[(0, 0)] * h[(1, 0)].conj();
            p0 += h[(0, 0)].norm_sqr();
            p1 += h[(0, 1)].norm_sqr();
            p2 += h[(1, 0)].norm_sqr();
        }
        let c01 = e01.norm() / (p0 * p1).sqrt();
        let c0_10 = e0_10.norm() / (p0 * p2).sqrt();
        assert!(c01 < 0.05, "normalized correlation {c01} too large");
        assert!(c0_10 < 0.05, "normalized correlation {c0_10} too large");
    }

    #[test]
    fn assembly_is_reproducible_and_consistent_with_stacking() {
        let (tx, rx, sv) = small_model();
        let svs = vec![sv.clone(), sv.clone()];
        let bases = vec![rx.clone(), rx.clone()];
        let r1 = assemble_multiuser_channel(&svs, &tx, &bases, 99, 5).unwrap();
        let r2 = assemble_multiuser_channel(&svs, &tx, &bases, 99, 5).unwrap();
        assert!(r1.stacked_space.iter().zip(r2.stacked_space.iter()).all(|(a, b)| a == b));
        // The light-weight stacked draw must reproduce the assembled stack.
        let stacked = draw_stacked_wavenumber(&svs, 99, 5).unwrap();
        assert!(stacked.iter().zip(r1.stacked_wavenumber.iter()).all(|(a, b)| a == b));
        assert_eq!(r1.users(), 2);
        assert_eq!(r1.stacked_space.shape(), (18, 25));
    }

    #[test]
    fn frobenius_isometry_per_user_and_stacked() {
        let (tx, rx, sv) = small_model();
        let svs = vec![sv.clone(), sv.clone(), sv];
        let bases = vec![rx.clone(), rx.clone(), rx];
        let r = assemble_multiuser_channel(&svs, &tx, &bases, 3, 0).unwrap();
        let mut wavenumber_total = 0.0;
        for (m, h_a) in r.per_user_wavenumber.iter().enumerate() {
            let space = r.stacked_space.view((m * 9, 0), (9, 25));
            assert_relative_eq!(space.norm(), h_a.norm(), epsilon = 1e-9);
            wavenumber_total += h_a.norm_squared();
        }
        assert_relative_eq!(r.stacked_space.norm(), wavenumber_total.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn single_user_reduces_to_single_block() {
        let (tx, rx, sv) = small_model();
        let r = assemble_multiuser_channel(
            &[sv.clone()],
            &tx,
            std::slice::from_ref(&rx),
            17,
            2,
        )
        .unwrap();
        assert_eq!(r.stacked_wavenumber, r.per_user_wavenumber[0]);
        let direct = &rx.matrix * &r.per_user_wavenumber[0] * tx.matrix.adjoint();
        assert!(direct.iter().zip(r.stacked_space.iter()).all(|(a, b)| a == b));
    }

    #[test]
    fn assembly_rejects_mismatched_users() {
        let (tx, rx, sv) = small_model();
        let err = assemble_multiuser_channel(&[sv.clone(), sv], &tx, std::slice::from_ref(&rx), 0, 0);
        assert!(matches!(err, Err(ModelError::DimensionMismatch(_))));
    }

    #[test]
    fn correlation_spectrum_matches_dense_eigensolver() {
        let (_, rx, sv) = small_model();
        let spec = receive_correlation_spectrum(&sv, &rx).unwrap();
        assert_eq!(spec.eigenvalues.len(), 9);
        assert_relative_eq!(spec.eigenvalues.iter().sum::<f64>(), 9.0, epsilon = 1e-6);
        // Dense route: form R explicitly and diagonalize.
        let scaled = DMatrix::from_fn(rx.harmonics(), rx.harmonics(), |i, j| {
            if i == j { Cx::new(9.0 * sv.rx_var[i], 0.0) } else { Cx::new(0.0, 0.0) }
        });
        let r = &rx.matrix * scaled * rx.matrix.adjoint();
        let mut dense: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in spec.eigenvalues.iter().zip(&dense) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn correlation_spectrum_merges_grazing_aliases() {
        // 4x4 at exactly λ/2: (±2, 0) and (0, ±2) alias pairwise, so the
        // closed form must merge them to match a dense eigendecomposition.
        let g = ArrayGeometry::new(4, 4, 0.5).unwrap();
        let rx = build_harmonic_matrix(&g, Side::Receive);
        let tx = build_harmonic_matrix(&ArrayGeometry::new(5, 5, 0.4).unwrap(), Side::Transmit);
        let sv = build_spectral_variance(&tx, &rx).unwrap();
        let spec = receive_correlation_spectrum(&sv, &rx).unwrap();
        assert_relative_eq!(spec.eigenvalues.iter().sum::<f64>(), 16.0, epsilon = 1e-6);
        let nonzero = spec.eigenvalues.iter().filter(|&&v| v > 1e-12).count();
        assert_eq!(nonzero, 11, "13 harmonics minus two alias merges");

        let mut diag = DMatrix::zeros(13, 13);
        for i in 0..13 {
            diag[(i, i)] = Cx::new(16.0 * sv.rx_var[i], 0.0);
        }
        let r = &rx.matrix * diag * rx.matrix.adjoint();
        let mut dense: Vec<f64> = r.symmetric_eigen().eigenvalues.iter().copied().collect();
        dense.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in spec.eigenvalues.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8, "alias-merged spectrum deviates: {a} vs {b}");
        }
    }

    #[test]
    fn smaller_spacing_concentrates_the_spectrum() {
        // Fixed element count, shrinking spacing: fewer harmonics above 1% of
        // the peak, i.e. steeper decay (the correlated-aperture signature).
        let tx = build_harmonic_matrix(&ArrayGeometry::new(10, 10, 0.5).unwrap(), Side::Transmit);
        let mut counts = Vec::new();
        for spacing in [1.0 / 6.0, 1.0 / 3.0, 0.5] {
            let rx = build_harmonic_matrix(&ArrayGeometry::new(24, 24, spacing).unwrap(), Side::Receive);
            let sv = build_spectral_variance(&tx, &rx).unwrap();
            let spec = receive_correlation_spectrum(&sv, &rx).unwrap();
            counts.push(spec.count_above(0.01));
        }
        assert!(counts[0] < counts[1] && counts[1] < counts[2], "counts {counts:?}");
        assert!(counts[2] < 576, "even λ/2 must stay far from the flat spectrum");
    }

    #[test]
    fn iid_reference_is_flat() {
        let r = CorrelationSpectrum::iid_reference(8);
        assert_eq!(r.eigenvalues, vec![1.0; 8]);
        assert_eq!(r.count_above(0.01), 8);
    }
}
