//! End-to-end model checks through the public API: domain isometry, rate
//! identities, determinism under different thread pools, and the qualitative
//! correlation-spectrum behavior at full array scale.

use hmimo::channel::{assemble_multiuser_channel, receive_correlation_spectrum};
use hmimo::geometry::{build_harmonic_matrix, ArrayGeometry, Side};
use hmimo::precoding::{
    effective_channel, random_unit_phase, zf_precoder, Scheme, StreamNorm,
};
use hmimo::rate::{
    monte_carlo_se, per_stream_sinr, zf_beta, MultiUserModel, SweepOptions,
};
use hmimo::spectrum::build_spectral_variance;

// ---------------------------------------------------------------------------

#[test]
fn stacked_channel_preserves_frobenius_norm_end_to_end() {
    // Strictly sub-half-wavelength grids on both sides: the harmonic bases
    // are exactly semi-unitary, so the space-domain channel has the same
    // Frobenius norm as its wavenumber-domain source, per user and stacked.
    let tx = build_harmonic_matrix(&ArrayGeometry::new(10, 10, 0.45).unwrap(), Side::Transmit);
    let rx = build_harmonic_matrix(&ArrayGeometry::new(4, 4, 0.45).unwrap(), Side::Receive);
    let sv = build_spectral_variance(&tx, &rx).unwrap();
    let users = 3;
    let real = assemble_multiuser_channel(
        &vec![sv.clone(); users],
        &tx,
        &vec![rx.clone(); users],
        2024,
        5,
    )
    .unwrap();
    let stacked_wn: f64 = real.per_user_wavenumber.iter().map(|h| h.norm_squared()).sum();
    let stacked_sp = real.stacked_space.norm_squared();
    assert!(
        (stacked_wn - stacked_sp).abs() <= 1e-9 * stacked_wn,
        "stacked norms diverge: {stacked_wn} vs {stacked_sp}"
    );
    for (u, h) in real.per_user_wavenumber.iter().enumerate() {
        let rows = rx.elements();
        let block = real.stacked_space.rows(u * rows, rows).norm_squared();
        let source = h.norm_squared();
        assert!(
            (block - source).abs() <= 1e-9 * source,
            "user {u} norms diverge: {source} vs {block}"
        );
    }
}

#[test]
fn zf_rates_follow_the_effective_gain_route_under_random_phases() {
    // SINR_i = p β_i / (K σ_w²) must hold for any unit-modulus surface
    // configuration, with β_i computed from the wavenumber matrix alone.
    let tx_geo = ArrayGeometry::new(8, 8, 0.45).unwrap();
    let rx_geo = ArrayGeometry::new(2, 2, 0.45).unwrap();
    let tx = build_harmonic_matrix(&tx_geo, Side::Transmit);
    let rx = build_harmonic_matrix(&rx_geo, Side::Receive);
    let sv = build_spectral_variance(&tx, &rx).unwrap();
    let users = 5;
    let real = assemble_multiuser_channel(
        &vec![sv.clone(); users],
        &tx,
        &vec![rx.clone(); users],
        99,
        3,
    )
    .unwrap();
    let beta = zf_beta(&real.stacked_wavenumber).unwrap();
    let k = beta.len() as f64;
    let p = 3.0;
    for trial in 0..6 {
        let phase = random_unit_phase(tx.elements(), 1234, trial);
        let ch = effective_channel(&real, &tx, &phase).unwrap();
        let pre = zf_precoder(&ch, StreamNorm::TotalK).unwrap();
        let sinr = per_stream_sinr(&ch, &pre, p, 1.0);
        for (i, (s, b)) in sinr.iter().zip(&beta).enumerate() {
            let expect = p * b / k;
            assert!(
                (s - expect).abs() <= 1e-9 * expect,
                "trial {trial} stream {i}: SINR {s} vs β route {expect}"
            );
        }
    }
}

#[test]
fn sweeps_are_bit_identical_across_thread_pools() {
    let tx = ArrayGeometry::new(6, 6, 0.4).unwrap();
    let rx = ArrayGeometry::new(2, 2, 0.45).unwrap();
    let model = MultiUserModel::homogeneous(&tx, &rx, 3).unwrap();
    let opts = SweepOptions { n_trials: 40, seed: 7, ..SweepOptions::default() };
    let grid = [-10.0, 0.0, 10.0, 20.0];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            [Scheme::Mrt, Scheme::Zf, Scheme::Mmse]
                .map(|s| monte_carlo_se(&model, s, &grid, &opts).unwrap())
        })
    };
    let single = run(1);
    let quad = run(4);
    for (a, b) in single.iter().flatten().zip(quad.iter().flatten()) {
        assert_eq!(a.sum_rate.to_bits(), b.sum_rate.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        for (x, y) in a.per_stream_rate.iter().zip(&b.per_stream_rate) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn channel_energy_and_rank_stay_within_model_bounds() {
    let tx_geo = ArrayGeometry::new(10, 10, 0.5).unwrap();
    let rx_geo = ArrayGeometry::new(4, 4, 0.5).unwrap();
    let tx = build_harmonic_matrix(&tx_geo, Side::Transmit);
    let rx = build_harmonic_matrix(&rx_geo, Side::Receive);
    let sv = build_spectral_variance(&tx, &rx).unwrap();
    let users = 3;
    let n_r = sv.rx_harmonics();
    let n_s = sv.tx_harmonics();
    let rank_cap = (users * n_r).min(n_s);
    let trials = 100;
    let mut energy = 0.0;
    for trial in 0..trials {
        let real = assemble_multiuser_channel(
            &vec![sv.clone(); users],
            &tx,
            &vec![rx.clone(); users],
            31,
            trial,
        )
        .unwrap();
        energy += real.stacked_space.norm_squared();
        let svd = real.stacked_space.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();
        assert!(
            rank <= rank_cap,
            "trial {trial}: rank {rank} exceeds min(M·n_r, n_s) = {rank_cap}"
        );
    }
    let normalizer = (users * rx_geo.elements() * tx_geo.elements()) as f64;
    let mean = energy / (trials as f64 * normalizer);
    assert!(
        (0.9..=1.1).contains(&mean),
        "mean ‖H‖_F²/(M N_r N_s) = {mean} is outside [0.9, 1.1]"
    );
}

#[test]
fn correlation_decays_steeper_for_denser_arrays_at_full_scale() {
    // 576-element receiver at three spacings: the number of eigenvalues
    // above 1% of the peak must grow strictly with the spacing, and no
    // configuration is anywhere near the flat uncorrelated spectrum.
    let mut counts = Vec::new();
    for &spacing in &[1.0 / 6.0, 1.0 / 3.0, 0.5] {
        let geo = ArrayGeometry::new(24, 24, spacing).unwrap();
        let tx = build_harmonic_matrix(&ArrayGeometry::new(8, 8, 1.0 / 3.0).unwrap(), Side::Transmit);
        let rx = build_harmonic_matrix(&geo, Side::Receive);
        let sv = build_spectral_variance(&tx, &rx).unwrap();
        let spectrum = receive_correlation_spectrum(&sv, &rx).unwrap();
        assert_eq!(spectrum.eigenvalues.len(), geo.elements());
        let peak = spectrum.eigenvalues[0];
        counts.push(spectrum.count_above(0.01 * peak));
        // Total receive power is preserved: trace(R) = N_r.
        let trace: f64 = spectrum.eigenvalues.iter().sum();
        assert!(
            (trace - geo.elements() as f64).abs() < 1e-6,
            "trace(R) = {trace}, expected {}",
            geo.elements()
        );
        // Far from i.i.d.: the flat reference has all 576 eigenvalues at 1.
        assert!(spectrum.count_above(0.01 * peak) < geo.elements());
    }
    assert!(
        counts[0] < counts[1] && counts[1] < counts[2],
        "counts above 1% of peak must increase with spacing: {counts:?}"
    );
}
