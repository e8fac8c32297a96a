use aniso_ebm::data::write_dataset;

use super::{generate, say};
use crate::artifacts::{ensure_dir, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

/// Writes `data.n` rows of the `data.kind` dataset to `<out>/data.csv`.
pub fn cmd_gen(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let ds = generate(cfg.data_kind, cfg.data_n, cfg.seed)?;
    ensure_dir(&cfg.out)?;
    let path = cfg.out.join("data.csv");
    write_dataset(&path, &ds).map_err(|e| CliError::config(format!("cannot write `{}`: {e}", path.display())))?;
    write_manifest(&cfg.out, "gen", cfg, &[("data", path.as_path())])?;
    say(quiet, format!("wrote {} {} rows to {}", ds.len(), cfg.data_kind, path.display()));
    Ok(())
}
