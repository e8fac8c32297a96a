//! Output files: atomic writes, manifests and CSV helpers.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const CLI_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("run.out: cannot create `{}`: {e}", dir.display())))
}

/// Replaces `path` with `bytes` with no partially written state visible.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    aniso_ebm::data::atomic_write(path, bytes).map_err(|e| CliError::config(format!("cannot write `{}`: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest text: commented provenance lines followed by the resolved
/// config, so that `--config manifest.txt` replays the run.
pub fn manifest_text(command: &str, cfg: &RunConfig, inputs: &[(&str, &Path)]) -> Result<String, CliError> {
    let config = cfg.render();
    let mut out = String::new();
    out.push_str(&format!("# command = {command}\n"));
    out.push_str(&format!("# aniso_cli_version = {CLI_VERSION}\n"));
    out.push_str(&format!("# aniso_ebm_version = {}\n", aniso_ebm::VERSION));
    out.push_str(&format!("# seed = {}\n", cfg.seed));
    out.push_str(&format!("# config_sha256 = {}\n", sha256_hex(config.as_bytes())));
    for (name, path) in inputs {
        let bytes = fs::read(path).map_err(|e| CliError::config(format!("cannot read `{}`: {e}", path.display())))?;
        out.push_str(&format!("# {name}_sha256 = {}\n", sha256_hex(&bytes)));
    }
    out.push('\n');
    out.push_str(&config);
    Ok(out)
}

pub fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig, inputs: &[(&str, &Path)]) -> Result<PathBuf, CliError> {
    let path = dir.join("manifest.txt");
    write_atomic(&path, manifest_text(command, cfg, inputs)?.as_bytes())?;
    Ok(path)
}

/// `x0,x1,...` header plus one row per point.
pub fn points_csv(points: &[f64], dim: usize) -> String {
    let header: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in points.chunks_exact(dim) {
        let row: Vec<String> = p.iter().map(|v| format!("{v:.9e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Optional float cell: empty when absent.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

/// Makes free text safe for one CSV cell.
pub fn csv_text(s: &str) -> String {
    s.chars().map(|c| if matches!(c, ',' | '\n' | '\r' | '"') { ' ' } else { c }).collect()
}
