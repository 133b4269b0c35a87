//! Experiment runners: correlation spectra, spectral-efficiency sweeps,
//! closed-form-versus-simulation comparisons, and channel dumps.
//!
//! Every CSV starts with a `# config_hash=… seed=…` comment and carries the
//! hash in its rows where the schema calls for it, so artifacts are
//! self-identifying. All Monte Carlo work reduces deterministically: output
//! bytes depend only on the effective config, never on the worker count.

use std::path::{Path, PathBuf};

use hmimo::channel::{assemble_multiuser_channel, receive_correlation_spectrum};
use hmimo::dump::{write_dump, DumpHeader, DumpRecord};
use hmimo::geometry::{build_harmonic_matrix, ArrayGeometry, Side};
use hmimo::precoding::Scheme;
use hmimo::rate::{monte_carlo_se, theoretical_zf_rate, MultiUserModel, SweepOptions};
use hmimo::spectrum::build_spectral_variance;

use crate::config::{Result, SimConfig, SimError};
use crate::plot::{render_csv_plot, PlotSpec};

/// Noise variance σ_w²; the SNR grid then fixes the per-stream power.
const SIGMA_W2: f64 = 1.0;

fn geometry(n_h: usize, n_v: usize, spacing: f64) -> Result<ArrayGeometry> {
    ArrayGeometry::new(n_h, n_v, spacing).map_err(SimError::from)
}

fn tx_geometry(cfg: &SimConfig) -> Result<ArrayGeometry> {
    geometry(cfg.tx_n_h, cfg.tx_n_v, cfg.tx_spacing_wl)
}

fn rx_geometry(cfg: &SimConfig) -> Result<ArrayGeometry> {
    geometry(cfg.rx_n_h, cfg.rx_n_v, cfg.rx_spacing_wl)
}

fn sweep_options(cfg: &SimConfig) -> Result<SweepOptions> {
    Ok(SweepOptions {
        n_trials: cfg.n_trials,
        seed: cfg.seed,
        stream_norm: cfg.stream_norm()?,
        phase: cfg.phase_mode()?,
        sigma_w2: SIGMA_W2,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
}

/// Short significand for labels and file suffixes.
fn sig6(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

// ---------------------------------------------------------------------------
// eig-spectrum
// ---------------------------------------------------------------------------

/// Receive-correlation eigenvalue spectra, one curve per receive spacing plus
/// the flat i.i.d. reference at 1.
pub fn run_eig_spectrum(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let tx = build_harmonic_matrix(&tx_geometry(cfg)?, Side::Transmit);
    let spacings =
        cfg.sweep_rx_spacing_wl.clone().unwrap_or_else(|| vec![cfg.rx_spacing_wl]);
    let mut rows = String::new();
    let mut rx_elements = 0;
    for &spacing in &spacings {
        let rx_geo = geometry(cfg.rx_n_h, cfg.rx_n_v, spacing)?;
        rx_elements = rx_geo.elements();
        let rx = build_harmonic_matrix(&rx_geo, Side::Receive);
        let sv = build_spectral_variance(&tx, &rx).map_err(SimError::from)?;
        let spectrum = receive_correlation_spectrum(&sv, &rx).map_err(SimError::from)?;
        for (index, value) in spectrum.eigenvalues.iter().enumerate() {
            rows.push_str(&format!("{spacing},{index},{value}\n"));
        }
    }
    for index in 0..rx_elements {
        rows.push_str(&format!("iid,{index},1\n"));
    }
    let csv_path = out_dir.join("eig_spectrum.csv");
    let contents = format!(
        "# config_hash={hash} seed={}\nspacing,index,eigenvalue\n{rows}",
        cfg.seed
    );
    write_file(&csv_path, &contents)?;
    announce(&csv_path);
    let svg_path = out_dir.join("eig_spectrum.svg");
    render_csv_plot(
        &csv_path,
        &svg_path,
        &PlotSpec {
            title: "Receive correlation eigenvalues (descending)",
            x_col: "index",
            y_col: "eigenvalue",
            curve_col: "spacing",
            x_label: "eigenvalue index",
            y_label: "eigenvalue (log10)",
            log_y: true,
        },
    )?;
    announce(&svg_path);
    Ok(vec![csv_path, svg_path])
}

// ---------------------------------------------------------------------------
// se-sweep
// ---------------------------------------------------------------------------

/// Streams-vs-harmonics feasibility for the nulling schemes.
fn feasible(scheme: Scheme, streams: usize, harmonics: usize) -> bool {
    matches!(scheme, Scheme::Mrt) || streams <= harmonics
}

fn se_rows(
    model: &MultiUserModel,
    schemes: &[Scheme],
    cfg: &SimConfig,
    hash: &str,
    label: &str,
) -> Result<String> {
    let opts = sweep_options(cfg)?;
    let mut rows = String::new();
    let streams = model.streams();
    let harmonics = model.tx_harmonics();
    for &scheme in schemes {
        if !feasible(scheme, streams, harmonics) {
            eprintln!(
                "warning: skipping {} for {label}: {streams} streams exceed {harmonics} \
                 transmit harmonics",
                scheme.label()
            );
            continue;
        }
        let results =
            monte_carlo_se(model, scheme, &cfg.snr_grid_db, &opts).map_err(SimError::from)?;
        for r in results {
            rows.push_str(&format!(
                "{},{},{},{},{},{hash}\n",
                scheme.label(),
                r.snr_db,
                r.sum_rate,
                r.std_error,
                r.n_trials
            ));
        }
    }
    Ok(rows)
}

/// Monte Carlo spectral-efficiency sweep; one CSV (plus plot) per receive
/// size when `sweep_rx_size` is set.
pub fn run_se_sweep(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let schemes = cfg.requested_schemes();
    let tx_geo = tx_geometry(cfg)?;
    let variants: Vec<(String, usize, usize)> = match &cfg.sweep_rx_size {
        Some(sizes) => sizes
            .iter()
            .map(|s| (format!("_rx{}x{}", s[0], s[1]), s[0], s[1]))
            .collect(),
        None => vec![(String::new(), cfg.rx_n_h, cfg.rx_n_v)],
    };
    let mut artifacts = Vec::new();
    for (suffix, n_h, n_v) in variants {
        let rx_geo = geometry(n_h, n_v, cfg.rx_spacing_wl)?;
        let model =
            MultiUserModel::homogeneous(&tx_geo, &rx_geo, cfg.users).map_err(SimError::from)?;
        let label = format!("receive grid {n_h}x{n_v}");
        let rows = se_rows(&model, &schemes, cfg, &hash, &label)?;
        if rows.is_empty() {
            eprintln!("warning: no feasible scheme for {label}; skipping its output");
            continue;
        }
        let csv_path = out_dir.join(format!("se_sweep{suffix}.csv"));
        let contents = format!(
            "# config_hash={hash} seed={}\nscheme,snr_db,sum_rate,std_error,n_trials,config_hash\n{rows}",
            cfg.seed
        );
        write_file(&csv_path, &contents)?;
        announce(&csv_path);
        let svg_path = out_dir.join(format!("se_sweep{suffix}.svg"));
        render_csv_plot(
            &csv_path,
            &svg_path,
            &PlotSpec {
                title: &format!("Spectral efficiency, receive grid {n_h}x{n_v}"),
                x_col: "snr_db",
                y_col: "sum_rate",
                curve_col: "scheme",
                x_label: "SNR (dB)",
                y_label: "sum rate (bit/s/Hz)",
                log_y: false,
            },
        )?;
        announce(&svg_path);
        artifacts.push(csv_path);
        artifacts.push(svg_path);
    }
    if artifacts.is_empty() {
        return Err(SimError::Infeasible(
            "every requested scheme/variant combination exceeds the transmit harmonic budget"
                .into(),
        ));
    }
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// theory-vs-sim
// ---------------------------------------------------------------------------

/// Monte Carlo ZF against the closed-form ZF rate (with optional MMSE
/// benchmark); one CSV (plus plot) per swept transmit size or spacing.
pub fn run_theory_vs_sim(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let hash = cfg.hash();
    let schemes = cfg.requested_schemes();
    let variants: Vec<(String, usize, usize, f64)> = if let Some(sizes) = &cfg.sweep_tx_size {
        sizes
            .iter()
            .map(|s| (format!("_tx{}x{}", s[0], s[1]), s[0], s[1], cfg.tx_spacing_wl))
            .collect()
    } else if let Some(spacings) = &cfg.sweep_tx_spacing_wl {
        spacings
            .iter()
            .map(|&d| {
                (format!("_ds{}", sig6(d).replace('.', "p")), cfg.tx_n_h, cfg.tx_n_v, d)
            })
            .collect()
    } else {
        vec![(String::new(), cfg.tx_n_h, cfg.tx_n_v, cfg.tx_spacing_wl)]
    };
    let opts = sweep_options(cfg)?;
    let mut artifacts = Vec::new();
    for (suffix, n_h, n_v, spacing) in variants {
        let tx_geo = geometry(n_h, n_v, spacing)?;
        let rx_geo = rx_geometry(cfg)?;
        let model =
            MultiUserModel::homogeneous(&tx_geo, &rx_geo, cfg.users).map_err(SimError::from)?;
        let streams = model.streams();
        let harmonics = model.tx_harmonics();
        let label = format!("transmit grid {n_h}x{n_v} at {} wavelengths", sig6(spacing));
        if streams > harmonics {
            eprintln!(
                "warning: skipping {label}: {streams} streams exceed {harmonics} transmit \
                 harmonics"
            );
            continue;
        }
        let zf = monte_carlo_se(&model, Scheme::Zf, &cfg.snr_grid_db, &opts)
            .map_err(SimError::from)?;
        let mut rows = String::new();
        for r in &zf {
            rows.push_str(&format!(
                "zf,{},{},{},{},{hash},\n",
                r.snr_db, r.sum_rate, r.std_error, r.n_trials
            ));
        }
        for r in &zf {
            let p = SIGMA_W2 * 10f64.powf(r.snr_db / 10.0);
            let per_user = theoretical_zf_rate(&model.variances[0], cfg.users, p, SIGMA_W2)
                .map_err(SimError::from)?;
            let theory: f64 = per_user.iter().sum::<f64>() * cfg.users as f64;
            let gap = (theory - r.sum_rate).abs() / r.sum_rate;
            rows.push_str(&format!("zf-theory,{},{theory},0,0,{hash},{gap}\n", r.snr_db));
        }
        if schemes.contains(&Scheme::Mmse) {
            let mmse = monte_carlo_se(&model, Scheme::Mmse, &cfg.snr_grid_db, &opts)
                .map_err(SimError::from)?;
            for r in &mmse {
                rows.push_str(&format!(
                    "mmse,{},{},{},{},{hash},\n",
                    r.snr_db, r.sum_rate, r.std_error, r.n_trials
                ));
            }
        }
        let csv_path = out_dir.join(format!("theory_vs_sim{suffix}.csv"));
        let contents = format!(
            "# config_hash={hash} seed={}\nscheme,snr_db,sum_rate,std_error,n_trials,config_hash,rel_gap\n{rows}",
            cfg.seed
        );
        write_file(&csv_path, &contents)?;
        announce(&csv_path);
        let svg_path = out_dir.join(format!("theory_vs_sim{suffix}.svg"));
        render_csv_plot(
            &csv_path,
            &svg_path,
            &PlotSpec {
                title: &format!("ZF: simulation vs closed form, {label}"),
                x_col: "snr_db",
                y_col: "sum_rate",
                curve_col: "scheme",
                x_label: "SNR (dB)",
                y_label: "sum rate (bit/s/Hz)",
                log_y: false,
            },
        )?;
        announce(&svg_path);
        artifacts.push(csv_path);
        artifacts.push(svg_path);
    }
    if artifacts.is_empty() {
        return Err(SimError::Infeasible(
            "every transmit variant exceeds the harmonic budget for the requested stream load"
                .into(),
        ));
    }
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// channel-dump
// ---------------------------------------------------------------------------

/// Draw realizations and write them to the binary container.
pub fn run_channel_dump(cfg: &SimConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let tx_geo = tx_geometry(cfg)?;
    let rx_geo = rx_geometry(cfg)?;
    let model =
        MultiUserModel::homogeneous(&tx_geo, &rx_geo, cfg.users).map_err(SimError::from)?;
    let count = cfg.dump_records.unwrap_or(4);
    let mut records = Vec::with_capacity(count as usize);
    for trial in 0..count {
        let real = assemble_multiuser_channel(
            &model.variances,
            &model.tx_basis,
            &model.rx_bases,
            cfg.seed,
            trial,
        )
        .map_err(SimError::from)?;
        records.push(DumpRecord::from_realization(&real));
    }
    let header = DumpHeader {
        users: cfg.users as u32,
        rx_elements: rx_geo.elements() as u32,
        tx_elements: tx_geo.elements() as u32,
        rx_harmonics: model.variances[0].rx_harmonics() as u32,
        tx_harmonics: model.variances[0].tx_harmonics() as u32,
        records: count,
        seed: cfg.seed,
    };
    let path = out_dir.join("channels.hch1");
    write_dump(&path, &header, &records).map_err(SimError::from)?;
    announce(&path);
    Ok(vec![path])
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use hmimo::dump::read_dump;

    fn desk_cfg() -> SimConfig {
        SimConfig::from_toml(
            "tx_n_h = 6\ntx_n_v = 6\ntx_spacing_wl = 0.4\n\
             rx_n_h = 2\nrx_n_v = 2\nrx_spacing_wl = 0.45\n\
             users = 2\nn_trials = 6\nseed = 3\nsnr_grid_db = [0.0, 10.0]\n",
        )
        .unwrap()
    }

    fn temp_out(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("hmimo_runner_{tag}_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn eig_spectrum_emits_curves_and_reference() {
        let out = temp_out("eig");
        let mut cfg = desk_cfg();
        cfg.rx_n_h = 4;
        cfg.rx_n_v = 4;
        cfg.sweep_rx_spacing_wl = Some(vec![0.25, 0.5]);
        let artifacts = run_eig_spectrum(&cfg, &out).unwrap();
        let text = std::fs::read_to_string(&artifacts[0]).unwrap();
        assert!(text.starts_with(&format!("# config_hash={} seed=3\n", cfg.hash())));
        assert!(text.contains("spacing,index,eigenvalue"));
        // 16 eigenvalues per spacing plus 16 reference rows.
        assert_eq!(text.lines().filter(|l| l.starts_with("0.25,")).count(), 16);
        assert_eq!(text.lines().filter(|l| l.starts_with("0.5,")).count(), 16);
        assert_eq!(text.lines().filter(|l| l.starts_with("iid,")).count(), 16);
        assert!(text.lines().any(|l| l == "iid,0,1"));
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn se_sweep_writes_one_file_per_variant() {
        let out = temp_out("se");
        let mut cfg = desk_cfg();
        cfg.sweep_rx_size = Some(vec![[2, 2], [2, 1]]);
        let artifacts = run_se_sweep(&cfg, &out).unwrap();
        let names: Vec<String> = artifacts
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"se_sweep_rx2x2.csv".to_string()));
        assert!(names.contains(&"se_sweep_rx2x1.csv".to_string()));
        assert!(names.contains(&"se_sweep_rx2x2.svg".to_string()));
        let text = std::fs::read_to_string(&artifacts[0]).unwrap();
        // Three schemes at two SNR points.
        assert_eq!(text.lines().count(), 2 + 6);
        assert!(text.contains(&cfg.hash()));
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn se_sweep_reports_infeasible_when_nothing_runs() {
        let out = temp_out("se_inf");
        let mut cfg = desk_cfg();
        // 2x2 transmit surface at 0.4 wavelengths: a single harmonic.
        cfg.tx_n_h = 2;
        cfg.tx_n_v = 2;
        cfg.schemes = vec!["zf".into()];
        let err = run_se_sweep(&cfg, &out).unwrap_err();
        assert_eq!(err.category(), "infeasible");
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn theory_vs_sim_reports_the_gap_column() {
        let out = temp_out("theory");
        let mut cfg = desk_cfg();
        cfg.schemes = vec!["zf".into(), "mmse".into()];
        cfg.n_trials = 30;
        let artifacts = run_theory_vs_sim(&cfg, &out).unwrap();
        let text = std::fs::read_to_string(&artifacts[0]).unwrap();
        assert!(text.contains("scheme,snr_db,sum_rate,std_error,n_trials,config_hash,rel_gap"));
        let theory_rows: Vec<&str> =
            text.lines().filter(|l| l.starts_with("zf-theory,")).collect();
        assert_eq!(theory_rows.len(), 2);
        for row in theory_rows {
            let gap: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
            assert!(gap.is_finite() && gap >= 0.0);
        }
        assert_eq!(text.lines().filter(|l| l.starts_with("mmse,")).count(), 2);
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn tighter_transmit_pitch_loses_rate() {
        // Same element count at a quarter versus a half wavelength: the
        // smaller aperture supports fewer harmonics and a lower ZF rate.
        let out = temp_out("spacing");
        let mut cfg = desk_cfg();
        cfg.tx_n_h = 10;
        cfg.tx_n_v = 10;
        cfg.tx_spacing_wl = 0.5;
        cfg.rx_spacing_wl = 0.5;
        cfg.users = 3;
        cfg.schemes = vec!["zf".into()];
        cfg.n_trials = 20;
        cfg.snr_grid_db = vec![10.0];
        cfg.sweep_tx_spacing_wl = Some(vec![0.25, 0.5]);
        let artifacts = run_theory_vs_sim(&cfg, &out).unwrap();
        let zf_rate = |name: &str| -> f64 {
            let path = artifacts.iter().find(|p| p.ends_with(name)).unwrap();
            let text = std::fs::read_to_string(path).unwrap();
            let row = text.lines().find(|l| l.starts_with("zf,")).unwrap();
            row.split(',').nth(2).unwrap().parse().unwrap()
        };
        let (tight, half) = (zf_rate("theory_vs_sim_ds0p25.csv"), zf_rate("theory_vs_sim_ds0p5.csv"));
        assert!(
            tight < half,
            "quarter-wavelength pitch ({tight}) should fall below half ({half})"
        );
        std::fs::remove_dir_all(&out).ok();
    }

    #[test]
    fn channel_dump_round_trips() {
        let out = temp_out("dump");
        let mut cfg = desk_cfg();
        cfg.dump_records = Some(3);
        let artifacts = run_channel_dump(&cfg, &out).unwrap();
        let (header, records) = read_dump(&artifacts[0]).unwrap();
        assert_eq!(header.records, 3);
        assert_eq!(header.users, 2);
        assert_eq!(header.tx_elements, 36);
        assert_eq!(records.len(), 3);
        assert_eq!(
            std::fs::metadata(&artifacts[0]).unwrap().len(),
            header.file_len()
        );
        std::fs::remove_dir_all(&out).ok();
    }
}
