//! Report writing: stable-order JSON with the resolved config embedded,
//! CSV with `# key=value` header comments. No timestamps unless opted in,
//! so outputs are byte-identical across reruns of the same config.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, ResolvedConfig};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    version: &'static str,
    config_hash: String,
    config: &'a ResolvedConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    unix_time: Option<u64>,
    #[serde(flatten)]
    body: T,
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn ensure_out_dir(config: &ResolvedConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&config.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create output dir {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn write_file(path: &Path, bytes: &str) -> Result<(), CliError> {
    std::fs::write(path, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Serialize a JSON report (pretty, struct-ordered keys) to `<stem>.json`.
pub fn write_json<T: Serialize>(
    config: &ResolvedConfig,
    stem: &str,
    body: T,
) -> Result<Option<PathBuf>, CliError> {
    if !config.wants(Format::Json) {
        return Ok(None);
    }
    let dir = ensure_out_dir(config)?;
    let report = Report {
        version: VERSION,
        config_hash: config.hash(),
        config,
        unix_time: config.timestamps.then(now_secs),
        body,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Config(format!("serialization failed: {e}")))?;
    let path = dir.join(format!("{stem}.json"));
    write_file(&path, &text)?;
    Ok(Some(path))
}

/// Standard comment lines for CSV headers.
pub fn csv_comments(config: &ResolvedConfig) -> Vec<String> {
    let mut lines = vec![
        format!("config_hash={}", config.hash()),
        format!("version={VERSION}"),
    ];
    if config.timestamps {
        lines.push(format!("unix_time={}", now_secs()));
    }
    lines
}

/// Write CSV content to `<stem>.csv` when the format is enabled.
pub fn write_csv(
    config: &ResolvedConfig,
    stem: &str,
    content: &str,
) -> Result<Option<PathBuf>, CliError> {
    if !config.wants(Format::Csv) {
        return Ok(None);
    }
    let dir = ensure_out_dir(config)?;
    let path = dir.join(format!("{stem}.csv"));
    write_file(&path, content)?;
    Ok(Some(path))
}

/// RFC-4180-style field quoting for the rare non-numeric field.
pub fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}
