//! Black-box checks of the command-line contract: exit codes, the
//! machine-readable `error-category:` stderr line, and artifact shapes.

use std::io::Write;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmimo-sim")).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn rejects_invalid_config_with_code_2() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        "tx_n_h = 4\ntx_n_v = 4\ntx_spacing_wl = 0.7\n\
         rx_n_h = 2\nrx_n_v = 2\nrx_spacing_wl = 0.45\nusers = 1\n"
    )
    .unwrap();
    let out = run(&["se-sweep", "--config", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("error-category: config"), "stderr was: {err}");
    assert!(err.contains("tx_spacing_wl"), "stderr was: {err}");
}

#[test]
fn rejects_unknown_preset_with_code_2() {
    let out = run(&["se-sweep", "--preset", "fig9-desk"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("error-category: config"));
}

#[test]
fn requires_exactly_one_config_source() {
    let out = run(&["se-sweep"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_of(&out);
    assert!(err.contains("error-category: config"), "stderr was: {err}");
    assert!(err.contains("--config"), "stderr was: {err}");
}

#[test]
fn reports_infeasible_stream_load_with_code_3() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    // A 2x2 transmit surface at 0.4 wavelengths offers a single harmonic;
    // two single-harmonic users make zero-forcing infeasible.
    write!(
        file,
        "tx_n_h = 2\ntx_n_v = 2\ntx_spacing_wl = 0.4\n\
         rx_n_h = 2\nrx_n_v = 2\nrx_spacing_wl = 0.45\nusers = 2\n\
         n_trials = 4\nschemes = [\"zf\"]\n"
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "se-sweep",
        "--config",
        file.path().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("error-category: infeasible"));
}

#[test]
fn channel_dump_writes_the_advertised_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["channel-dump", "--preset", "dump-desk", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let path = dir.path().join("channels.hch1");
    let (header, records) = hmimo::dump::read_dump(&path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), header.file_len());
    assert_eq!(records.len() as u64, header.records);
    assert_eq!(header.seed, 7);
}

#[test]
fn presets_subcommand_lists_every_preset() {
    let out = run(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    for (name, _) in hmimo_sim::config::PRESETS {
        assert!(text.contains(name), "preset {name} missing from listing");
    }
}

#[test]
fn seed_override_changes_the_config_hash_and_artifact() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let base = ["eig-spectrum", "--preset", "fig2-desk", "--out"];
    let out_a = run(&[&base[..], &[dir_a.path().to_str().unwrap()]].concat());
    let out_b =
        run(&[&base[..], &[dir_b.path().to_str().unwrap(), "--seed", "1234"]].concat());
    assert!(out_a.status.success() && out_b.status.success());
    let head = |d: &tempfile::TempDir| {
        std::fs::read_to_string(d.path().join("eig_spectrum.csv"))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    let (a, b) = (head(&dir_a), head(&dir_b));
    assert!(a.contains("seed=42"), "first line was: {a}");
    assert!(b.contains("seed=1234"), "first line was: {b}");
    assert_ne!(a, b);
}
