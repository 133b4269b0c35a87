//! Flat key-value experiment configuration, validation, and hashing.
//!
//! Configs are TOML files with spacings expressed in fractions of the
//! wavelength (`*_spacing_wl`). Unknown keys are rejected to catch typos.
//! The canonical serialization of the effective config (after CLI overrides)
//! is hashed so every artifact can state exactly what produced it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hmimo::precoding::{Scheme, StreamNorm};
use hmimo::rate::PhaseMode;

/// Runner error with a machine-readable category.
#[derive(Debug)]
pub enum SimError {
    Config(String),
    Infeasible(String),
    Numerical(String),
    Io(String),
}

impl SimError {
    /// Stable category token for scripting against stderr.
    pub fn category(&self) -> &'static str {
        match self {
            SimError::Config(_) => "config",
            SimError::Infeasible(_) => "infeasible",
            SimError::Numerical(_) => "numerical",
            SimError::Io(_) => "io",
        }
    }

    /// Process exit code: 2 config, 3 infeasible, 4 numerical, 5 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Infeasible(_) => 3,
            SimError::Numerical(_) => 4,
            SimError::Io(_) => 5,
        }
    }
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::Config(m)
            | SimError::Infeasible(m)
            | SimError::Numerical(m)
            | SimError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<hmimo::ModelError> for SimError {
    fn from(e: hmimo::ModelError) -> Self {
        use hmimo::ModelError::*;
        match e {
            Infeasible { .. } => SimError::Infeasible(e.to_string()),
            SingularChannel { .. } | DegenerateChannel { .. } | DegenerateSpectrum(_) => {
                SimError::Numerical(e.to_string())
            }
            Io { .. } | MalformedDump { .. } => SimError::Io(e.to_string()),
            _ => SimError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

fn default_trials() -> usize {
    200
}

fn default_grid() -> Vec<f64> {
    (-2..=6).map(|k| 5.0 * k as f64).collect() // -10..30 dB in 5 dB steps
}

fn default_schemes() -> Vec<String> {
    vec!["mrt".into(), "zf".into(), "mmse".into()]
}

fn default_normalization() -> String {
    "total-k".into()
}

fn default_phase() -> String {
    "all-ones".into()
}

/// One experiment description. Field order defines the canonical TOML
/// serialization used for hashing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Transmit surface grid and element spacing (fraction of λ).
    pub tx_n_h: usize,
    pub tx_n_v: usize,
    pub tx_spacing_wl: f64,
    /// Per-user receive array grid and element spacing (fraction of λ).
    pub rx_n_h: usize,
    pub rx_n_v: usize,
    pub rx_spacing_wl: f64,
    /// Number of users.
    pub users: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub snr_grid_db: Vec<f64>,
    /// Any of "mrt", "zf", "mmse".
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    /// "total-k" (power split over all streams) or "per-user".
    #[serde(default = "default_normalization")]
    pub normalization: String,
    /// "all-ones" or "random-per-trial".
    #[serde(default = "default_phase")]
    pub phase: String,
    /// eig-spectrum: receive spacings to sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_rx_spacing_wl: Option<Vec<f64>>,
    /// se-sweep: receive grids `[n_h, n_v]` to sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_rx_size: Option<Vec<[usize; 2]>>,
    /// theory-vs-sim: transmit grids `[n_h, n_v]` to sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_tx_size: Option<Vec<[usize; 2]>>,
    /// theory-vs-sim: transmit spacings to sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_tx_spacing_wl: Option<Vec<f64>>,
    /// channel-dump: number of realizations to write.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_records: Option<u64>,
}

fn check_spacing(value: f64, what: &str) -> Result<()> {
    if !(value > 0.0 && value <= 0.5) {
        return Err(SimError::Config(format!(
            "{what} must lie in (0, 0.5] wavelengths, got {value}"
        )));
    }
    Ok(())
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| SimError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (n, what) in [
            (self.tx_n_h, "tx_n_h"),
            (self.tx_n_v, "tx_n_v"),
            (self.rx_n_h, "rx_n_h"),
            (self.rx_n_v, "rx_n_v"),
        ] {
            if n == 0 {
                return Err(SimError::Config(format!("{what} must be at least 1")));
            }
        }
        check_spacing(self.tx_spacing_wl, "tx_spacing_wl")?;
        check_spacing(self.rx_spacing_wl, "rx_spacing_wl")?;
        if self.users == 0 {
            return Err(SimError::Config("users must be at least 1".into()));
        }
        if self.n_trials == 0 {
            return Err(SimError::Config("n_trials must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(SimError::Config("snr_grid_db must not be empty".into()));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Config("snr_grid_db entries must be finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SimError::Config("snr_grid_db must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(SimError::Config("schemes must not be empty".into()));
        }
        for s in &self.schemes {
            parse_scheme(s)?;
        }
        self.stream_norm()?;
        self.phase_mode()?;
        if let Some(sweep) = &self.sweep_rx_spacing_wl {
            if sweep.is_empty() {
                return Err(SimError::Config("sweep_rx_spacing_wl must not be empty".into()));
            }
            for &s in sweep {
                check_spacing(s, "sweep_rx_spacing_wl entry")?;
            }
        }
        if let Some(sweep) = &self.sweep_tx_spacing_wl {
            if sweep.is_empty() {
                return Err(SimError::Config("sweep_tx_spacing_wl must not be empty".into()));
            }
            for &s in sweep {
                check_spacing(s, "sweep_tx_spacing_wl entry")?;
            }
        }
        for (sweep, what) in [
            (&self.sweep_rx_size, "sweep_rx_size"),
            (&self.sweep_tx_size, "sweep_tx_size"),
        ] {
            if let Some(sizes) = sweep {
                if sizes.is_empty() {
                    return Err(SimError::Config(format!("{what} must not be empty")));
                }
                if sizes.iter().any(|s| s[0] == 0 || s[1] == 0) {
                    return Err(SimError::Config(format!("{what} grids must be at least 1x1")));
                }
            }
        }
        if self.dump_records == Some(0) {
            return Err(SimError::Config("dump_records must be at least 1".into()));
        }
        Ok(())
    }

    pub fn requested_schemes(&self) -> Vec<Scheme> {
        self.schemes.iter().map(|s| parse_scheme(s).expect("validated")).collect()
    }

    pub fn stream_norm(&self) -> Result<StreamNorm> {
        match self.normalization.as_str() {
            "total-k" => Ok(StreamNorm::TotalK),
            "per-user" => Ok(StreamNorm::PerUser),
            other => Err(SimError::Config(format!(
                "normalization must be \"total-k\" or \"per-user\", got \"{other}\""
            ))),
        }
    }

    pub fn phase_mode(&self) -> Result<PhaseMode> {
        match self.phase.as_str() {
            "all-ones" => Ok(PhaseMode::AllOnes),
            "random-per-trial" => Ok(PhaseMode::RandomPerTrial),
            other => Err(SimError::Config(format!(
                "phase must be \"all-ones\" or \"random-per-trial\", got \"{other}\""
            ))),
        }
    }

    /// Canonical serialization: struct field order, normalized numerals.
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

fn parse_scheme(name: &str) -> Result<Scheme> {
    match name {
        "mrt" => Ok(Scheme::Mrt),
        "zf" => Ok(Scheme::Zf),
        "mmse" => Ok(Scheme::Mmse),
        other => Err(SimError::Config(format!(
            "unknown scheme \"{other}\" (expected mrt, zf, or mmse)"
        ))),
    }
}

/// Built-in experiment presets, compiled into the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig2-desk", include_str!("../presets/fig2-desk.toml")),
    ("fig2-paper", include_str!("../presets/fig2-paper.toml")),
    ("fig3-desk", include_str!("../presets/fig3-desk.toml")),
    ("fig3-paper", include_str!("../presets/fig3-paper.toml")),
    ("fig4-desk", include_str!("../presets/fig4-desk.toml")),
    ("fig4-paper", include_str!("../presets/fig4-paper.toml")),
    ("fig5-desk", include_str!("../presets/fig5-desk.toml")),
    ("fig5-paper", include_str!("../presets/fig5-paper.toml")),
    ("dump-desk", include_str!("../presets/dump-desk.toml")),
];

pub fn preset(name: &str) -> Result<SimConfig> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| SimConfig::from_toml(text))
        .unwrap_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Err(SimError::Config(format!(
                "unknown preset \"{name}\"; available: {}",
                names.join(", ")
            )))
        })
}

// ---------------------------------------------------------------------------
