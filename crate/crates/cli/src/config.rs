//! Config file schema, CLI overrides, and the resolved config that gets
//! echoed into every report.
//!
//! A run config is TOML with one block per concern:
//!
//! ```text
//! [model]    family = "three_halves", then one key per model parameter
//! [grid]     horizon (years), n or n_list, substeps (optional)
//! [mc]       paths, seed, scheme = "euler" | "exact"
//! [output]   dir, formats = ["csv", "json"], timestamps
//! [price]    annualize, force, dump_paths        (command options)
//! [converge] override_conditions
//! [tail]     fraction, statistic = "integrated_variance" | "pn"
//! ```
//!
//! Unknown sections and unknown keys are rejected with the offending key
//! named. Flag overrides (`--seed`, `--paths`, `--n`, `--out`,
//! `--format`, `--force`, `--annualize`) are applied after parsing; the
//! fully resolved config is hashed and embedded verbatim in outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use varswap::models::{build_model, ModelSpec};
use varswap::sde_sim::Scheme;

use crate::CliError;

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "VARSWAP_OUT";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelBlock,
    pub grid: GridBlock,
    pub mc: McBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub price: PriceBlock,
    #[serde(default)]
    pub converge: ConvergeBlock,
    #[serde(default)]
    pub tail: TailBlock,
}

/// Family tag plus a flat parameter map; key validation happens in
/// `build_model`, which names missing and unknown keys.
#[derive(Debug, Clone, Deserialize)]
pub struct ModelBlock {
    pub family: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub horizon: f64,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub paths: usize,
    pub seed: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_scheme() -> Scheme {
    Scheme::EulerFullTruncation
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
    pub formats: Option<Vec<Format>>,
    #[serde(default)]
    pub timestamps: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceBlock {
    #[serde(default)]
    pub annualize: bool,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub dump_paths: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeBlock {
    #[serde(default)]
    pub override_conditions: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailBlock {
    pub fraction: Option<f64>,
    pub statistic: Option<TailStatistic>,
}

impl Default for TailBlock {
    fn default() -> Self {
        TailBlock { fraction: None, statistic: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailStatistic {
    IntegratedVariance,
    Pn,
}

/// Flag overrides shared by the config-driven subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub n: Option<usize>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub force: bool,
    pub annualize: bool,
    pub timestamps: bool,
    pub fraction: Option<f64>,
    pub dump_paths: bool,
}

/// Fully resolved run configuration; serialized into every JSON report
/// and hashed into every CSV header.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub model: ModelSpec,
    pub horizon: f64,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub substeps: usize,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub out_dir: String,
    pub formats: Vec<Format>,
    pub timestamps: bool,
    pub annualize: bool,
    pub force: bool,
    pub override_conditions: bool,
    pub tail_fraction: f64,
    pub tail_statistic: TailStatistic,
    pub dump_paths: bool,
}

impl ResolvedConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    /// Hex SHA-256 prefix of the canonical serialized config.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(16);
        for b in digest.iter().take(8) {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }
}

pub fn load_raw(path: &Path) -> Result<RawConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

/// Parse, validate, and apply overrides.
pub fn resolve(
    command: &str,
    path: &Path,
    overrides: &Overrides,
) -> Result<ResolvedConfig, CliError> {
    let raw = load_raw(path)?;
    let model = build_model(&raw.model.family, &raw.model.params)
        .map_err(|e| CliError::Config(format!("model block: {e}")))?;

    let scheme = raw.mc.scheme;
    // Euler needs substeps to control discretization bias; exact schemes
    // sample transitions directly.
    let substeps = raw.grid.substeps.unwrap_or(match scheme {
        Scheme::EulerFullTruncation => 8,
        Scheme::ExactWhereAvailable => 1,
    });
    if substeps == 0 {
        return Err(CliError::Config("grid.substeps must be >= 1".into()));
    }
    if !(raw.grid.horizon.is_finite() && raw.grid.horizon > 0.0) {
        return Err(CliError::Config(format!(
            "grid.horizon must be > 0, got {}",
            raw.grid.horizon
        )));
    }

    let n = overrides.n.or(raw.grid.n);
    let n_list = raw.grid.n_list.clone();
    let paths = overrides.paths.unwrap_or(raw.mc.paths);
    if paths < 2 {
        return Err(CliError::Config("mc.paths must be >= 2".into()));
    }
    let seed = overrides.seed.unwrap_or(raw.mc.seed);

    let out_dir = overrides
        .out
        .clone()
        .map(|p| p.display().to_string())
        .or(raw.output.dir.clone())
        .or_else(|| std::env::var(OUT_DIR_ENV).ok())
        .unwrap_or_else(|| "varswap-out".into());
    let formats = overrides
        .formats
        .clone()
        .or(raw.output.formats.clone())
        .unwrap_or_else(|| vec![Format::Csv, Format::Json]);

    let fraction = overrides.fraction.or(raw.tail.fraction).unwrap_or(0.05);

    Ok(ResolvedConfig {
        command: command.to_string(),
        model,
        horizon: raw.grid.horizon,
        n,
        n_list,
        substeps,
        paths,
        seed,
        scheme,
        out_dir,
        formats,
        timestamps: overrides.timestamps || raw.output.timestamps,
        annualize: overrides.annualize || raw.price.annualize,
        force: overrides.force || raw.price.force,
        override_conditions: overrides.force || raw.converge.override_conditions,
        tail_fraction: fraction,
        tail_statistic: raw.tail.statistic.unwrap_or(TailStatistic::IntegratedVariance),
        dump_paths: overrides.dump_paths || raw.price.dump_paths,
    })
}
