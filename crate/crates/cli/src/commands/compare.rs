use aniso_ebm::samplers::SamplerConfig;

use super::say;
use super::train::{train_into, CheckpointRow};
use crate::artifacts::{cell, csv_text, ensure_dir, write_atomic, write_manifest};
use crate::config::RunConfig;
use crate::error::CliError;

pub const COMPARE_HEADER: &str = "variant,status,iter,hist_kl,mmd,accept_rate,wall_ms,minibatch_digest";

fn table_row(variant: &str, status: &str, row: Option<&CheckpointRow>) -> String {
    match row {
        Some(r) => format!(
            "{variant},{status},{},{},{:.6e},{:.6},{:.3},{:016x}",
            r.iter,
            cell(r.hist_kl),
            r.mmd,
            r.accept_rate,
            r.wall_ms,
            r.minibatch_digest
        ),
        None => format!("{variant},{status},,,,,,"),
    }
}

/// Trains every variant with the shared seed into `<out>/<variant>/` and
/// writes `compare.csv`. Failed variants keep their partial rows.
pub fn cmd_compare(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    ensure_dir(&cfg.out)?;
    let inputs: Vec<(&str, &std::path::Path)> = cfg.data.iter().map(|p| ("data", p.as_path())).collect();
    write_manifest(&cfg.out, "compare", cfg, &inputs)?;
    let mut table = String::from(COMPARE_HEADER);
    table.push('\n');
    let mut failed = Vec::new();
    for &kind in &cfg.variants {
        let name = kind.name();
        let mut vcfg = cfg.clone();
        vcfg.sampler = SamplerConfig { kind, ..cfg.sampler.clone() };
        vcfg.out = cfg.out.join(name);
        let mut rows = Vec::new();
        let status = match train_into(&vcfg, &vcfg.out, quiet, name, &mut rows) {
            Ok(()) => "ok".to_string(),
            Err(e) => {
                say(quiet, format!("[{name}] failed: {}", e.status_line()));
                failed.push(name);
                format!("error code={} {}", e.code(), csv_text(&e.msg))
            }
        };
        if rows.is_empty() {
            table.push_str(&table_row(name, &status, None));
            table.push('\n');
        }
        for r in &rows {
            table.push_str(&table_row(name, &status, Some(r)));
            table.push('\n');
        }
    }
    write_atomic(&cfg.out.join("compare.csv"), table.as_bytes())?;
    say(quiet, table.trim_end());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::partial(format!("{} of {} variants failed: {}", failed.len(), cfg.variants.len(), failed.join(" "))))
    }
}
