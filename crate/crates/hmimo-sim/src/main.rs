//! Command-line front end: pick an experiment, point it at a config or a
//! built-in preset, and collect CSV/SVG/binary artifacts in the output
//! directory. Exit codes: 0 ok, 2 config, 3 infeasible, 4 numerical, 5 io;
//! failures also print a machine-readable `error-category:` line on stderr.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use hmimo_sim::config::{preset, Result, SimConfig, SimError, PRESETS};
use hmimo_sim::runner;

#[derive(Parser)]
#[command(name = "hmimo-sim", version, about = "Wavenumber-domain holographic MIMO simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config (exactly one of --config/--preset).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in preset name (see the `presets` subcommand).
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Override the master seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override the Monte Carlo trial count.
    #[arg(long, global = true, value_name = "N")]
    trials: Option<usize>,
    /// Directory for emitted artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker thread count (default: all cores; results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue spectra of the receive spatial correlation.
    EigSpectrum,
    /// Monte Carlo spectral-efficiency sweep over the SNR grid.
    SeSweep,
    /// Zero-forcing simulation against its closed-form rate.
    TheoryVsSim,
    /// Write raw channel realizations to a binary dump.
    ChannelDump,
    /// List the built-in presets.
    Presets,
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
            SimConfig::from_toml(&text)?
        }
        (None, Some(name)) => preset(name)?,
        _ => {
            return Err(SimError::Config(
                "pass exactly one of --config <PATH> or --preset <NAME>".into(),
            ))
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.n_trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list_presets() {
    println!("built-in presets:");
    for (name, text) in PRESETS {
        let summary = text
            .lines()
            .next()
            .filter(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim())
            .unwrap_or("");
        println!("  {name:<12} {summary}");
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Presets = cli.command {
        list_presets();
        return Ok(());
    }
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(cli)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| SimError::Io(format!("{}: {e}", cli.out.display())))?;
    println!(
        "config hash {}, seed {}, {} trials, output in {}",
        cfg.hash(),
        cfg.seed,
        cfg.n_trials,
        cli.out.display()
    );
    match cli.command {
        Command::EigSpectrum => runner::run_eig_spectrum(&cfg, &cli.out)?,
        Command::SeSweep => runner::run_se_sweep(&cfg, &cli.out)?,
        Command::TheoryVsSim => runner::run_theory_vs_sim(&cfg, &cli.out)?,
        Command::ChannelDump => runner::run_channel_dump(&cfg, &cli.out)?,
        Command::Presets => unreachable!("handled above"),
    };
    Ok(())
}

fn main() {
    // Die quietly on a closed pipe (`hmimo-sim presets | head`) instead of
    // panicking in println!, matching ordinary Unix tool behavior.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        eprintln!("error-category: {}", e.category());
        std::process::exit(e.exit_code());
    }
}
