//! `key = value` run configuration with `[section]` headers.
//!
//! Settings are applied in order: recipe defaults, then the config file,
//! then command-line overrides. Every key is `section.key`; unknown keys,
//! unparsable values and invalid combinations are rejected before any work
//! starts.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use aniso_ebm::trainer::recipes::{DataSpec, ModelSpec, Recipe, RecipeName, RINGS_EVAL_BINS, RINGS_EVAL_CHAINS};
use aniso_ebm::trainer::{LearningRate, TrainConfig};
use aniso_ebm::samplers::{SamplerConfig, SamplerKind};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeChoice {
    Named(RecipeName),
    /// Neural model on a user dataset, toy-rings hyperparameters otherwise.
    Custom,
}

impl RecipeChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Named(r) => r.as_str(),
            Self::Custom => "custom",
        }
    }

    pub fn base(self) -> Recipe {
        match self {
            Self::Named(r) => Recipe::get(r),
            Self::Custom => Recipe::get(RecipeName::ToyRings),
        }
    }
}

impl FromStr for RecipeChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "custom" => Ok(Self::Custom),
            other => other
                .parse::<RecipeName>()
                .map(Self::Named)
                .map_err(|_| format!("unknown recipe `{other}` (expected toy-rings|gauss-mean|custom)")),
        }
    }
}

/// Kernels the diagnose command can probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKernel {
    Sampler(SamplerKind),
    Identity,
}

impl FromStr for ProbeKernel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "identity" {
            return Ok(Self::Identity);
        }
        s.parse::<SamplerKind>()
            .map(Self::Sampler)
            .map_err(|_| format!("unknown kernel `{s}` (expected identity|stanley|ula|mala|rwmh|hmc|gd)"))
    }
}

impl std::fmt::Display for ProbeKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Sampler(k) => write!(f, "{k}"),
            Self::Identity => f.write_str("identity"),
        }
    }
}

/// Synthetic dataset drawn by `gen` and by recipes without a data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Rings,
    Gmm,
}

/// Analytic target probed by `diagnose`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnoseTarget {
    Gauss,
    Gmm,
    Rings,
}

macro_rules! named_enum {
    ($ty:ident { $($var:ident => $name:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($name => Ok(Self::$var),)+
                    other => Err(format!("unknown value `{other}` (expected {})", [$($name),+].join("|"))),
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self {
                    $(Self::$var => $name,)+
                })
            }
        }
    };
}

named_enum!(DataKind { Rings => "rings", Gmm => "gmm" });
named_enum!(DiagnoseTarget { Gauss => "gauss", Gmm => "gmm", Rings => "rings" });

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Fresh chains drawn at each checkpoint to score the model.
    pub chains: usize,
    /// Transitions per evaluation chain.
    pub steps: usize,
    pub bins: usize,
    /// Data rows and samples used for MMD.
    pub mmd_points: usize,
    pub mmd_bandwidth: f64,
    /// Side length in pixels of the PGM grids.
    pub grid_resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub checkpoint: Option<PathBuf>,
    pub chains: usize,
    /// Transitions recorded; zero writes the initial states only.
    pub steps: usize,
    pub init_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseConfig {
    pub target: DiagnoseTarget,
    pub kernel: ProbeKernel,
    /// Stepsize of the probed kernel, in place of `sampler.gamma`.
    pub gamma: f64,
    pub beta: f64,
    pub small_set: f64,
    pub mc_samples: usize,
    /// Drift grid: `grid_points` radii from `grid_lo` to `grid_hi`, both signs.
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub k_max: usize,
    pub rate_start: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub recipe: RecipeChoice,
    pub data: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
    pub data_kind: DataKind,
    /// Rows generated when no data file is given.
    pub data_n: usize,
    pub hidden: Vec<usize>,
    pub leak: f64,
    pub train: TrainConfig,
    pub resume: Option<PathBuf>,
    pub sampler: SamplerConfig,
    pub eval: EvalConfig,
    pub sample: SampleConfig,
    pub diagnose: DiagnoseConfig,
    pub variants: Vec<SamplerKind>,
}

/// Every accepted key, in rendering order.
pub const KEYS: &[&str] = &[
    "run.recipe",
    "run.data",
    "run.seed",
    "run.out",
    "data.kind",
    "data.n",
    "model.hidden",
    "model.leak",
    "train.t",
    "train.m",
    "train.n",
    "train.eta",
    "train.optimizer",
    "train.adam_beta1",
    "train.adam_beta2",
    "train.adam_eps",
    "train.init_policy",
    "train.init_std",
    "train.checkpoint_every",
    "train.resume",
    "sampler.kind",
    "sampler.th",
    "sampler.eps",
    "sampler.k",
    "sampler.refresh",
    "sampler.norm",
    "sampler.gamma",
    "sampler.anisotropic",
    "sampler.hmc_leapfrog",
    "sampler.hmc_step",
    "sampler.rwmh_sigma",
    "eval.chains",
    "eval.steps",
    "eval.bins",
    "eval.mmd_points",
    "eval.mmd_bandwidth",
    "eval.grid_resolution",
    "sample.checkpoint",
    "sample.chains",
    "sample.steps",
    "sample.init_std",
    "diagnose.target",
    "diagnose.kernel",
    "diagnose.gamma",
    "diagnose.beta",
    "diagnose.small_set",
    "diagnose.mc_samples",
    "diagnose.grid_lo",
    "diagnose.grid_hi",
    "diagnose.grid_points",
    "diagnose.k_max",
    "diagnose.rate_start",
    "compare.variants",
];

/// One `key = value` setting and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Parses config text into fully qualified settings.
pub fn parse_text(text: &str, source: &str) -> Result<Vec<Setting>, CliError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let origin = format!("{source}:{}", i + 1);
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(format!("{origin}: unterminated section header")))?
                .trim();
            if name.is_empty() || name.contains('.') {
                return Err(CliError::config(format!("{origin}: bad section name `{name}`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("{origin}: expected `key = value`")))?;
        let k = k.trim();
        let key = match (&section, k.contains('.')) {
            (_, true) => k.to_string(),
            (Some(s), false) => format!("{s}.{k}"),
            (None, false) => return Err(CliError::config(format!("{origin}: key `{k}` is outside any [section]"))),
        };
        out.push(Setting {
            key,
            value: v.trim().to_string(),
            origin,
        });
    }
    Ok(out)
}

/// Parses a `section.key=value` override.
pub fn parse_override(s: &str) -> Result<Setting, CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{s}` is not `section.key=value`")))?;
    Ok(Setting {
        key: k.trim().to_string(),
        value: v.trim().to_string(),
        origin: "command line".into(),
    })
}

fn parse<T: FromStr>(s: &Setting) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    s.value
        .parse::<T>()
        .map_err(|e| CliError::config(format!("{}: bad value `{}` for key {}: {e}", s.origin, s.value, s.key)))
}

fn parse_list<T: FromStr>(s: &Setting) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|e| CliError::config(format!("{}: bad list entry `{}` for key {}: {e}", s.origin, part.trim(), s.key)))
        })
        .collect()
}

fn opt_path(s: &Setting) -> Option<PathBuf> {
    (!s.value.is_empty()).then(|| PathBuf::from(&s.value))
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn defaults(recipe: RecipeChoice) -> Self {
        let base = recipe.base();
        let data_n = match &base.data {
            DataSpec::Rings { n, .. } | DataSpec::Gaussian { n, .. } => *n,
        };
        let (hidden, leak) = match &base.model {
            ModelSpec::Neural { hidden, leak, .. } => (hidden.clone(), *leak),
            ModelSpec::GaussMean { .. } => (vec![32, 32], aniso_ebm::energy::DEFAULT_LEAK),
        };
        let k = base.sampler.k;
        let init_std = base.train.init_std;
        Self {
            recipe,
            data: None,
            seed: 0,
            out: PathBuf::from("out"),
            data_kind: DataKind::Rings,
            data_n,
            hidden,
            leak,
            train: base.train,
            resume: None,
            sampler: base.sampler,
            eval: EvalConfig {
                chains: RINGS_EVAL_CHAINS,
                steps: k,
                bins: RINGS_EVAL_BINS,
                mmd_points: 500,
                mmd_bandwidth: 0.1,
                grid_resolution: 128,
            },
            sample: SampleConfig {
                checkpoint: None,
                chains: 64,
                steps: k,
                init_std,
            },
            diagnose: DiagnoseConfig {
                target: DiagnoseTarget::Gauss,
                kernel: ProbeKernel::Sampler(SamplerKind::Mala),
                gamma: 0.5,
                beta: 0.5,
                small_set: 1.0,
                mc_samples: 20_000,
                grid_lo: 2.0,
                grid_hi: 6.0,
                grid_points: 9,
                k_max: 30,
                rate_start: 3.0,
            },
            variants: vec![SamplerKind::Ula, SamplerKind::Stanley, SamplerKind::Rwmh, SamplerKind::Hmc, SamplerKind::Gd],
        }
    }

    /// Recipe defaults with `settings` applied in order, then validated.
    pub fn resolve(settings: &[Setting]) -> Result<Self, CliError> {
        let recipe = match settings.iter().rev().find(|s| s.key == "run.recipe") {
            Some(s) => parse::<RecipeChoice>(s)?,
            None => RecipeChoice::Named(RecipeName::ToyRings),
        };
        let mut cfg = Self::defaults(recipe);
        for s in settings {
            cfg.apply(s)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, s: &Setting) -> Result<(), CliError> {
        let t = &mut self.train;
        let sc = &mut self.sampler;
        match s.key.as_str() {
            "run.recipe" => self.recipe = parse(s)?,
            "run.data" => self.data = opt_path(s),
            "run.seed" => self.seed = parse(s)?,
            "run.out" => self.out = PathBuf::from(&s.value),
            "data.kind" => self.data_kind = parse(s)?,
            "data.n" => self.data_n = parse(s)?,
            "model.hidden" => self.hidden = parse_list(s)?,
            "model.leak" => self.leak = parse(s)?,
            "train.t" => t.t = parse(s)?,
            "train.m" => t.m = parse(s)?,
            "train.n" => t.n = parse(s)?,
            "train.eta" => {
                let v: Vec<f64> = parse_list(s)?;
                t.eta = if v.len() == 1 { LearningRate::Constant(v[0]) } else { LearningRate::List(v) };
            }
            "train.optimizer" => t.optimizer = parse(s)?,
            "train.adam_beta1" => t.adam.beta1 = parse(s)?,
            "train.adam_beta2" => t.adam.beta2 = parse(s)?,
            "train.adam_eps" => t.adam.eps = parse(s)?,
            "train.init_policy" => t.init_policy = parse(s)?,
            "train.init_std" => t.init_std = parse(s)?,
            "train.checkpoint_every" => t.checkpoint_every = parse(s)?,
            "train.resume" => self.resume = opt_path(s),
            "sampler.kind" => sc.kind = parse(s)?,
            "sampler.th" => sc.th = parse(s)?,
            "sampler.eps" => sc.eps = parse(s)?,
            "sampler.k" => sc.k = parse(s)?,
            "sampler.refresh" => sc.refresh = parse(s)?,
            "sampler.norm" => sc.norm = parse(s)?,
            "sampler.gamma" => sc.gamma = parse(s)?,
            "sampler.anisotropic" => sc.anisotropic = parse(s)?,
            "sampler.hmc_leapfrog" => sc.hmc_leapfrog = parse(s)?,
            "sampler.hmc_step" => sc.hmc_step = parse(s)?,
            "sampler.rwmh_sigma" => sc.rwmh_sigma = parse(s)?,
            "eval.chains" => self.eval.chains = parse(s)?,
            "eval.steps" => self.eval.steps = parse(s)?,
            "eval.bins" => self.eval.bins = parse(s)?,
            "eval.mmd_points" => self.eval.mmd_points = parse(s)?,
            "eval.mmd_bandwidth" => self.eval.mmd_bandwidth = parse(s)?,
            "eval.grid_resolution" => self.eval.grid_resolution = parse(s)?,
            "sample.checkpoint" => self.sample.checkpoint = opt_path(s),
            "sample.chains" => self.sample.chains = parse(s)?,
            "sample.steps" => self.sample.steps = parse(s)?,
            "sample.init_std" => self.sample.init_std = parse(s)?,
            "diagnose.target" => self.diagnose.target = parse(s)?,
            "diagnose.kernel" => self.diagnose.kernel = parse(s)?,
            "diagnose.gamma" => self.diagnose.gamma = parse(s)?,
            "diagnose.beta" => self.diagnose.beta = parse(s)?,
            "diagnose.small_set" => self.diagnose.small_set = parse(s)?,
            "diagnose.mc_samples" => self.diagnose.mc_samples = parse(s)?,
            "diagnose.grid_lo" => self.diagnose.grid_lo = parse(s)?,
            "diagnose.grid_hi" => self.diagnose.grid_hi = parse(s)?,
            "diagnose.grid_points" => self.diagnose.grid_points = parse(s)?,
            "diagnose.k_max" => self.diagnose.k_max = parse(s)?,
            "diagnose.rate_start" => self.diagnose.rate_start = parse(s)?,
            "compare.variants" => self.variants = parse_list(s)?,
            other => return Err(CliError::config(format!("{}: unknown config key `{other}`", s.origin))),
        }
        Ok(())
    }

    fn validate(&mut self) -> Result<(), CliError> {
        self.train.seed = self.seed;
        let bad = |key: &str, why: &str| Err(CliError::config(format!("invalid value for key {key}: {why}")));
        self.train
            .validate()
            .map_err(|e| CliError::config(format!("train section: {e}")))?;
        self.sampler
            .validate()
            .map_err(|e| CliError::config(format!("sampler section: {e}")))?;
        if self.recipe == RecipeChoice::Custom && self.data.is_none() {
            return bad("run.data", "the custom recipe needs a dataset path");
        }
        if self.data_n == 0 {
            return bad("data.n", "must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("model.hidden", "layer widths must be positive");
        }
        if !(self.leak >= 0.0 && self.leak < 1.0) {
            return bad("model.leak", "must lie in [0, 1)");
        }
        if self.eval.chains < 2 || self.eval.bins == 0 || self.eval.mmd_points < 2 || self.eval.grid_resolution == 0 {
            return bad("eval", "chains >= 2, bins >= 1, mmd_points >= 2 and grid_resolution >= 1 required");
        }
        if !(self.eval.mmd_bandwidth > 0.0) || !self.eval.mmd_bandwidth.is_finite() {
            return bad("eval.mmd_bandwidth", "must be positive");
        }
        if self.sample.chains == 0 {
            return bad("sample.chains", "must be at least 1");
        }
        if !(self.sample.init_std >= 0.0) || !self.sample.init_std.is_finite() {
            return bad("sample.init_std", "must be nonnegative");
        }
        let d = &self.diagnose;
        if !(d.gamma >= 0.0 && d.gamma.is_finite()) {
            return bad("diagnose.gamma", "must be nonnegative");
        }
        if !(d.beta > 0.0 && d.beta < 1.0) {
            return bad("diagnose.beta", "must lie in (0, 1)");
        }
        if !(d.small_set > 0.0) || d.mc_samples < 2 || d.k_max == 0 || d.grid_points == 0 {
            return bad("diagnose", "small_set > 0, mc_samples >= 2, k_max >= 1 and grid_points >= 1 required");
        }
        if !(d.grid_hi >= d.grid_lo && d.grid_lo > d.small_set) {
            return bad("diagnose.grid_lo", "drift grid must lie outside the small set with grid_lo <= grid_hi");
        }
        if self.variants.is_empty() {
            return bad("compare.variants", "list at least one sampler");
        }
        if (1..self.variants.len()).any(|i| self.variants[..i].contains(&self.variants[i])) {
            return bad("compare.variants", "samplers must be distinct");
        }
        Ok(())
    }

    /// Canonical text of every key, parseable by [`parse_text`].
    pub fn render(&self) -> String {
        let t = &self.train;
        let sc = &self.sampler;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let eta = match &t.eta {
            LearningRate::Constant(e) => e.to_string(),
            LearningRate::List(v) => join(v),
        };
        let values: Vec<String> = vec![
            self.recipe.as_str().into(),
            path(&self.data),
            self.seed.to_string(),
            self.out.display().to_string(),
            self.data_kind.to_string(),
            self.data_n.to_string(),
            join(&self.hidden),
            self.leak.to_string(),
            t.t.to_string(),
            t.m.to_string(),
            t.n.to_string(),
            eta,
            t.optimizer.to_string(),
            t.adam.beta1.to_string(),
            t.adam.beta2.to_string(),
            t.adam.eps.to_string(),
            t.init_policy.to_string(),
            t.init_std.to_string(),
            t.checkpoint_every.to_string(),
            path(&self.resume),
            sc.kind.to_string(),
            sc.th.to_string(),
            sc.eps.to_string(),
            sc.k.to_string(),
            sc.refresh.to_string(),
            sc.norm.to_string(),
            sc.gamma.to_string(),
            sc.anisotropic.to_string(),
            sc.hmc_leapfrog.to_string(),
            sc.hmc_step.to_string(),
            sc.rwmh_sigma.to_string(),
            self.eval.chains.to_string(),
            self.eval.steps.to_string(),
            self.eval.bins.to_string(),
            self.eval.mmd_points.to_string(),
            self.eval.mmd_bandwidth.to_string(),
            self.eval.grid_resolution.to_string(),
            path(&self.sample.checkpoint),
            self.sample.chains.to_string(),
            self.sample.steps.to_string(),
            self.sample.init_std.to_string(),
            self.diagnose.target.to_string(),
            self.diagnose.kernel.to_string(),
            self.diagnose.gamma.to_string(),
            self.diagnose.beta.to_string(),
            self.diagnose.small_set.to_string(),
            self.diagnose.mc_samples.to_string(),
            self.diagnose.grid_lo.to_string(),
            self.diagnose.grid_hi.to_string(),
            self.diagnose.grid_points.to_string(),
            self.diagnose.k_max.to_string(),
            self.diagnose.rate_start.to_string(),
            join(&self.variants),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        let mut section = "";
        for (key, value) in KEYS.iter().zip(values) {
            let (s, k) = key.split_once('.').expect("qualified key");
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let _ = writeln!(out, "{k} = {value}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aniso_ebm::trainer::Optimizer;

    fn resolve(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::resolve(&parse_text(text, "test")?)
    }

    #[test]
    fn sections_and_overrides() {
        let mut settings = parse_text("[train]\nT_unused_comment_free = 1\n", "f").unwrap();
        assert_eq!(settings[0].key, "train.T_unused_comment_free");
        settings = parse_text("# c\n[sampler]\nkind = ula\n; c\n[train]\nt = 5\neta = 0.1, 0.05\nsampler.k = 7\n", "f").unwrap();
        settings.push(parse_override("train.optimizer=sgd").unwrap());
        let cfg = RunConfig::resolve(&settings).unwrap();
        assert_eq!(cfg.sampler.kind, SamplerKind::Ula);
        assert_eq!(cfg.sampler.k, 7);
        assert_eq!(cfg.train.t, 5);
        assert_eq!(cfg.train.eta, LearningRate::List(vec![0.1, 0.05]));
        assert_eq!(cfg.train.optimizer, Optimizer::Sgd);
    }

    #[test]
    fn unknown_keys_and_bad_values_name_the_key() {
        let e = resolve("[train]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(e.msg.contains("train.learning_rate"), "{e}");
        let e = resolve("[sampler]\nth = -1\n").unwrap_err();
        assert!(e.msg.contains("th"), "{e}");
        let e = resolve("[train]\nm = many\n").unwrap_err();
        assert!(e.msg.contains("train.m") && e.msg.contains("test:2"), "{e}");
        let e = resolve("[run]\nrecipe = custom\n").unwrap_err();
        assert!(e.msg.contains("run.data"), "{e}");
        assert!(resolve("k = 1\n").is_err());
        assert!(resolve("[run\n").is_err());
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = resolve("[run]\nrecipe = gauss-mean\nseed = 9\n[train]\neta = 0.3,0.2\n[compare]\nvariants = mala,hmc\n[diagnose]\nkernel = identity\n").unwrap();
        let text = cfg.render();
        let back = resolve(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.render(), text);
        assert_eq!(text.lines().filter(|l| l.contains(" = ")).count(), KEYS.len());
    }

    #[test]
    fn recipe_defaults() {
        let rings = resolve("").unwrap();
        assert_eq!(rings.recipe, RecipeChoice::Named(RecipeName::ToyRings));
        assert_eq!((rings.sampler.k, rings.sampler.th, rings.train.init_std), (100, 0.01, 0.15));
        assert_eq!(rings.train.eta, LearningRate::Constant(1e-4));
        let gm = resolve("[run]\nrecipe = gauss-mean\n").unwrap();
        assert_eq!(gm.sampler.kind, SamplerKind::Mala);
        assert_eq!(gm.train.seed, 0);
        let seeded = resolve("[run]\nseed = 42\n").unwrap();
        assert_eq!(seeded.train.seed, 42);
    }
}
