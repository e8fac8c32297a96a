use aniso_ebm::diagnostics::fixtures::IdentityKernel;
use aniso_ebm::diagnostics::{
    drift_function, drift_probe, geometric_rate_fit, minorization_probe, DiagnosticsError, DriftSpec, MinorizationConfig, ProbeReport,
};
use aniso_ebm::energy::{AnalyticEnergy, EnergyModel};
use aniso_ebm::data::{DEFAULT_RING_RADII, DEFAULT_RING_WIDTH};
use aniso_ebm::quadrature::simpson;
use aniso_ebm::samplers::{Kernel, SamplerConfig, SamplerKernel};
use aniso_ebm::trainer::recipes::rings_target;

use super::{gmm_means, gmm_target, say, GMM_SIGMA};
use crate::artifacts::{ensure_dir, write_atomic, write_manifest};
use crate::config::{DiagnoseConfig, DiagnoseTarget, ProbeKernel, RunConfig};
use crate::error::CliError;

/// Radial quadrature panels for `π(|z|²)` on the rings target.
const RADIAL_PANELS: usize = 4096;
/// Minorization reference points per small-set axis.
const SMALL_SET_POINTS: usize = 9;

pub fn target_of(t: DiagnoseTarget) -> AnalyticEnergy {
    match t {
        DiagnoseTarget::Gauss => AnalyticEnergy::standard_gaussian(1),
        DiagnoseTarget::Gmm => gmm_target(),
        DiagnoseTarget::Rings => rings_target(),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn axis_point(dim: usize, axis: usize, r: f64) -> Vec<f64> {
    let mut z = vec![0.0; dim];
    z[axis] = r;
    z
}

/// Points at each radius along both directions of every axis.
pub fn drift_grid(d: &DiagnoseConfig, dim: usize) -> Vec<Vec<f64>> {
    linspace(d.grid_lo, d.grid_hi, d.grid_points)
        .into_iter()
        .flat_map(|r| (0..dim).flat_map(move |j| [axis_point(dim, j, r), axis_point(dim, j, -r)]))
        .collect()
}

/// Regular lattice points inside the small set.
pub fn small_set_grid(radius: f64, dim: usize) -> Vec<Vec<f64>> {
    let axis = linspace(-radius, radius, SMALL_SET_POINTS);
    let pts: Vec<Vec<f64>> = match dim {
        1 => axis.iter().map(|&x| vec![x]).collect(),
        _ => axis.iter().flat_map(|&x| axis.iter().map(move |&y| vec![x, y])).collect(),
    };
    pts.into_iter().filter(|z| z.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius).collect()
}

fn sq_norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// `π(|z|²)`: closed form for the Gaussian and mixture targets, radial
/// quadrature for the rotationally symmetric rings.
fn pi_sq_norm(target: &AnalyticEnergy, kind: DiagnoseTarget) -> f64 {
    let dim = target.dim() as f64;
    match kind {
        DiagnoseTarget::Gauss => dim,
        DiagnoseTarget::Gmm => {
            let means = gmm_means();
            means.iter().map(|m| sq_norm(m)).sum::<f64>() / means.len() as f64 + dim * GMM_SIGMA * GMM_SIGMA
        }
        DiagnoseTarget::Rings => {
            let r_max = DEFAULT_RING_RADII.iter().fold(0.0f64, |a, &b| a.max(b)) + 20.0 * DEFAULT_RING_WIDTH;
            let density = |r: f64| target.value(&[r, 0.0]).exp() * r;
            let mass = simpson(&density, 0.0, r_max, RADIAL_PANELS);
            simpson(&|r: f64| r * r * density(r), 0.0, r_max, RADIAL_PANELS) / mass
        }
    }
}

/// Probe errors that describe an inconclusive measurement rather than bad input.
fn inconclusive(e: DiagnosticsError) -> Result<String, CliError> {
    match e {
        DiagnosticsError::IncreaseSamples { .. } | DiagnosticsError::WindowTooLong { .. } => Ok(e.to_string()),
        DiagnosticsError::Divergence { point } => Err(CliError::divergence(format!("kernel diverged from grid point {point:?}"))),
        DiagnosticsError::Sampler(aniso_ebm::samplers::SamplerError::Divergence { chain, step }) => {
            Err(CliError::divergence(format!("chain {chain} diverged at transition {step}")))
        }
        other => Err(CliError::config(format!("diagnose: {other}"))),
    }
}

/// Runs the drift, minorization and rate probes and fills a report.
/// Returns the report and notes on probes left unset.
pub fn probe<K: Kernel + ?Sized>(
    kernel: &K,
    target: &AnalyticEnergy,
    kind: DiagnoseTarget,
    d: &DiagnoseConfig,
    seed: u64,
) -> Result<(ProbeReport, Vec<String>), CliError> {
    let dim = target.dim();
    let spec = DriftSpec::for_target(target, d.beta, d.small_set).map_err(|e| CliError::config(format!("diagnose.beta: {e}")))?;
    let grid = drift_grid(d, dim);
    let mut report = ProbeReport {
        grid_spec: format!(
            "|z| in [{};{}] x {} radii on {} axes; small set |z| <= {}; beta {}; mc {}",
            d.grid_lo, d.grid_hi, d.grid_points, dim, d.small_set, d.beta, d.mc_samples
        ),
        ..Default::default()
    };
    let mut notes = Vec::new();
    match drift_probe(kernel, &spec, target, &grid, d.mc_samples, seed) {
        Ok(est) => report = report.with_drift(&est),
        Err(e) => notes.push(format!("drift: {}", inconclusive(e)?)),
    }
    let mcfg = MinorizationConfig {
        box_half: d.small_set,
        ..MinorizationConfig::default()
    };
    match minorization_probe(kernel, d.small_set, &small_set_grid(d.small_set, dim), d.mc_samples, &mcfg, seed) {
        Ok(est) => report = report.with_minorization(&est),
        Err(e) => notes.push(format!("minorization: {}", inconclusive(e)?)),
    }
    let pi_u = pi_sq_norm(target, kind);
    let u = |z: &[f64]| sq_norm(z);
    let v = |z: &[f64]| drift_function(&spec, target, z).unwrap_or(f64::INFINITY);
    let starts = vec![axis_point(dim, 0, d.rate_start), axis_point(dim, 0, -d.rate_start)];
    match geometric_rate_fit(kernel, pi_u, &u, &v, &starts, d.k_max, d.mc_samples, seed) {
        Ok(fit) => {
            notes.push(format!("rate window k = {}..{}", fit.window.0, fit.window.1));
            report = report.with_rate(&fit);
        }
        Err(e) => notes.push(format!("rate: {}", inconclusive(e)?)),
    }
    Ok((report, notes))
}

fn summary(kernel: ProbeKernel, kind: DiagnoseTarget, r: &ProbeReport, notes: &[String]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    let drift_verdict = match (r.drift_mu, r.drift_mu_se) {
        (Some(mu), Some(se)) if mu + 2.0 * se < 1.0 => "contracts",
        (Some(_), Some(_)) => "does not contract",
        _ => "not run",
    };
    let mut s = format!("diagnose {kernel} on {kind}\n");
    s.push_str(&format!("  drift mu          {} (se {}; {drift_verdict})\n", f(r.drift_mu), f(r.drift_mu_se)));
    s.push_str(&format!("  drift delta       {}\n", f(r.drift_delta)));
    s.push_str(&format!("  minorization eps  {}\n", f(r.minorization_eps)));
    s.push_str(&format!("  rate rho          {} (e {}, R^2 {})\n", f(r.rate_rho), f(r.rate_e), f(r.fit_r2)));
    s.push_str(&format!("  grid              {}\n", r.grid_spec));
    for n in notes {
        s.push_str(&format!("  note: {n}\n"));
    }
    s
}

pub fn cmd_diagnose(cfg: &RunConfig, quiet: bool) -> Result<(), CliError> {
    let d = &cfg.diagnose;
    let target = target_of(d.target);
    let (report, notes) = match d.kernel {
        ProbeKernel::Identity => probe(&IdentityKernel { dim: target.dim() }, &target, d.target, d, cfg.seed)?,
        ProbeKernel::Sampler(kind) => {
            let scfg = SamplerConfig {
                kind,
                gamma: d.gamma,
                ..cfg.sampler.clone()
            };
            let kernel = SamplerKernel::new(&target, scfg).map_err(|e| CliError::config(format!("sampler section: {e}")))?;
            probe(&kernel, &target, d.target, d, cfg.seed)?
        }
    };
    ensure_dir(&cfg.out)?;
    write_manifest(&cfg.out, "diagnose", cfg, &[])?;
    write_atomic(&cfg.out.join("report.csv"), report.to_csv().as_bytes())?;
    say(quiet, summary(d.kernel, d.target, &report, &notes).trim_end());
    Ok(())
}
