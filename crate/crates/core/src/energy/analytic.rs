use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{EnergyError, EnergyModel};
use crate::params::ParamVector;
use crate::quadrature::adaptive_trapezoid;

/// Closed-form energy families used as sampler and diagnostic targets.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `f(x) = −‖x − m‖² / (2σ²)`; parameters: the mean `m`.
    Gaussian { sigma: f64 },
    /// `f(x) = log Σ_k w_k exp(−‖x − m_k‖² / (2σ²))`; parameters: the stacked means.
    Mixture { weights: Vec<f64>, sigma: f64 },
    /// `f(x) = −min_j (‖x‖ − r_j)² / (2w²)`; parameters: the radii.
    Rings { width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEnergy {
    shape: Shape,
    dim: usize,
    params: ParamVector,
    log_norm: Option<f64>,
}

impl AnalyticEnergy {
    pub fn gaussian(mean: Vec<f64>, sigma: f64) -> Result<Self, EnergyError> {
        if mean.is_empty() {
            return Err(EnergyError::Invalid("gaussian needs at least one dimension".into()));
        }
        check_positive("sigma", sigma)?;
        let dim = mean.len();
        let mut e = Self {
            shape: Shape::Gaussian { sigma },
            dim,
            params: ParamVector::from_segments(vec![("mean", mean)]),
            log_norm: None,
        };
        e.log_norm = Some(gaussian_log_norm(dim, sigma));
        Ok(e)
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(vec![0.0; dim.max(1)], 1.0).expect("valid standard gaussian")
    }

    pub fn mixture(means: Vec<Vec<f64>>, weights: Vec<f64>, sigma: f64) -> Result<Self, EnergyError> {
        check_positive("sigma", sigma)?;
        if means.is_empty() || means.len() != weights.len() {
            return Err(EnergyError::Invalid(format!(
                "mixture needs one weight per mean ({} means, {} weights)",
                means.len(),
                weights.len()
            )));
        }
        check_simplex(&weights)?;
        let dim = means[0].len();
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(EnergyError::Invalid("mixture means must share one nonzero dimension".into()));
        }
        Ok(Self {
            shape: Shape::Mixture { weights, sigma },
            dim,
            params: ParamVector::from_segments(vec![("means", means.concat())]),
            log_norm: Some(gaussian_log_norm(dim, sigma)),
        })
    }

    /// Concentric rings around the origin. `log Z` is computed by radial
    /// quadrature for `dim ∈ {1, 2}` and left unknown otherwise.
    pub fn rings(dim: usize, radii: Vec<f64>, width: f64) -> Result<Self, EnergyError> {
        check_positive("width", width)?;
        if dim == 0 || radii.is_empty() {
            return Err(EnergyError::Invalid("rings need a dimension and at least one radius".into()));
        }
        for &r in &radii {
            check_positive("radius", r)?;
        }
        let mut e = Self {
            shape: Shape::Rings { width },
            dim,
            params: ParamVector::from_segments(vec![("radii", radii)]),
            log_norm: None,
        };
        e.log_norm = e.rings_log_norm();
        Ok(e)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn log_norm(&self) -> Option<f64> {
        self.log_norm
    }

    /// `f(x) − log Z`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64, EnergyError> {
        let log_norm = self
            .log_norm
            .ok_or_else(|| EnergyError::Unsupported(format!("log normalizer unknown for {}-d {}", self.dim, self.kind_name())))?;
        Ok(self.eval(x)? - log_norm)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            Shape::Gaussian { .. } => "gaussian",
            Shape::Mixture { .. } => "mixture",
            Shape::Rings { .. } => "rings",
        }
    }

    fn radii(&self) -> &[f64] {
        self.params.values()
    }

    fn means(&self) -> impl Iterator<Item = &[f64]> {
        self.params.values().chunks(self.dim)
    }

    /// A global maximizer of `f`.
    pub fn mode(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Gaussian { .. } => self.params.values().to_vec(),
            Shape::Rings { .. } => {
                let mut x = vec![0.0; self.dim];
                x[0] = self.radii()[0];
                x
            }
            Shape::Mixture { sigma, .. } => {
                // Mean-shift from every component mean; largest f wins.
                let mut best = (f64::NEG_INFINITY, Vec::new());
                for start in self.means() {
                    let mut x = start.to_vec();
                    let mut g = vec![0.0; self.dim];
                    for _ in 0..500 {
                        self.value_and_grad_x(&x, &mut g);
                        let step: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                        for (xi, gi) in x.iter_mut().zip(&g) {
                            *xi += sigma * sigma * gi;
                        }
                        if step * sigma * sigma < 1e-14 {
                            break;
                        }
                    }
                    let v = self.value(&x);
                    if v > best.0 {
                        best = (v, x);
                    }
                }
                best.1
            }
        }
    }

    /// `sup_x f(x)`.
    pub fn max_value(&self) -> f64 {
        match self.shape {
            Shape::Gaussian { .. } | Shape::Rings { .. } => 0.0,
            Shape::Mixture { .. } => self.value(&self.mode()),
        }
    }

    /// Draws one exact sample from `exp(f)/Z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, EnergyError> {
        match &self.shape {
            Shape::Gaussian { sigma } => Ok(self
                .params
                .values()
                .iter()
                .map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()),
            Shape::Mixture { weights, sigma } => {
                let k = pick_weighted(weights, rng.random::<f64>());
                let mean = &self.params.values()[k * self.dim..(k + 1) * self.dim];
                Ok(mean.iter().map(|m| m + sigma * rng.sample::<f64, _>(StandardNormal)).collect())
            }
            Shape::Rings { .. } => Err(EnergyError::Unsupported("exact sampling of the rings density".into())),
        }
    }

    fn rings_log_norm(&self) -> Option<f64> {
        let Shape::Rings { width } = self.shape else {
            return None;
        };
        let surface = match self.dim {
            1 => 2.0,
            2 => 2.0 * PI,
            _ => return None,
        };
        let rmax = self.radii().iter().cloned().fold(0.0, f64::max) + 12.0 * width;
        let power = (self.dim - 1) as i32;
        let radial = |r: f64| r.powi(power) * (-self.nearest_ring(r).1 / (2.0 * width * width)).exp();
        let panels = ((rmax / width).ceil() as usize * 4).max(64);
        let z = surface * adaptive_trapezoid(&radial, 0.0, rmax, 1e-10, panels);
        Some(z.ln())
    }

    /// Index of the nearest ring (lowest index on ties) and the squared distance to it.
    fn nearest_ring(&self, r: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, &rj) in self.radii().iter().enumerate() {
            let d = (r - rj) * (r - rj);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }

    /// Key=value text form of the shape and parameters.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let mut out = format!("kind={}\ndim={}\n", self.kind_name(), self.dim);
        match &self.shape {
            Shape::Gaussian { sigma } => {
                out += &format!("sigma={sigma:?}\nmean={}\n", join(self.params.values()));
            }
            Shape::Mixture { weights, sigma } => {
                out += &format!("sigma={sigma:?}\nweights={}\nmeans={}\n", join(weights), join(self.params.values()));
            }
            Shape::Rings { width } => {
                out += &format!("width={width:?}\nradii={}\n", join(self.radii()));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, EnergyError> {
        let mut kv = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| EnergyError::Invalid(format!("expected key=value, got `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| EnergyError::Invalid(format!("missing key `{k}`")));
        let num = |k: &str| -> Result<f64, EnergyError> {
            get(k)?.parse().map_err(|_| EnergyError::Invalid(format!("bad number for `{k}`")))
        };
        let list = |k: &str| -> Result<Vec<f64>, EnergyError> {
            get(k)?
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| EnergyError::Invalid(format!("bad list for `{k}`"))))
                .collect()
        };
        let dim: usize = get("dim")?.parse().map_err(|_| EnergyError::Invalid("bad dim".into()))?;
        let model = match get("kind")?.as_str() {
            "gaussian" => Self::gaussian(list("mean")?, num("sigma")?)?,
            "mixture" => {
                let flat = list("means")?;
                if dim == 0 || flat.len() % dim != 0 {
                    return Err(EnergyError::Invalid("means length is not a multiple of dim".into()));
                }
                Self::mixture(flat.chunks(dim).map(<[f64]>::to_vec).collect(), list("weights")?, num("sigma")?)?
            }
            "rings" => Self::rings(dim, list("radii")?, num("width")?)?,
            other => return Err(EnergyError::Invalid(format!("unknown kind `{other}`"))),
        };
        if model.dim != dim {
            return Err(EnergyError::DimensionMismatch {
                expected: dim,
                actual: model.dim,
            });
        }
        Ok(model)
    }
}

impl EnergyModel for AnalyticEnergy {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn set_params(&mut self, theta: ParamVector) -> Result<(), EnergyError> {
        if theta.len() != self.params.len() {
            return Err(EnergyError::DimensionMismatch {
                expected: self.params.len(),
                actual: theta.len(),
            });
        }
        self.params = theta;
        if let Shape::Rings { .. } = self.shape {
            self.log_norm = self.rings_log_norm();
        }
        Ok(())
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(self.params.values()).map(|(a, m)| (a - m) * (a - m)).sum();
                -d2 / (2.0 * sigma * sigma)
            }
            Shape::Mixture { weights, sigma } => {
                let logs: Vec<f64> = self
                    .means()
                    .zip(weights)
                    .map(|(m, w)| w.ln() - sq_dist(x, m) / (2.0 * sigma * sigma))
                    .collect();
                log_sum_exp(&logs)
            }
            Shape::Rings { width } => {
                let (_, d2) = self.nearest_ring(norm(x));
                -d2 / (2.0 * width * width)
            }
        }
    }

    fn value_and_grad_x(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match &self.shape {
            Shape::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                for ((g, a), m) in grad.iter_mut().zip(x).zip(self.params.values()) {
                    *g = (m - a) / s2;
                }
                self.value(x)
            }
            Shape::Mixture { weights, sigma } => {
                let s2 = sigma * sigma;
                let logs: Vec<f64> = self
                    .means()
                    .zip(weights)
                    .map(|(m, w)| w.ln() - sq_dist(x, m) / (2.0 * s2))
                    .collect();
                let lse = log_sum_exp(&logs);
                grad.iter_mut().for_each(|g| *g = 0.0);
                for (m, l) in self.means().zip(&logs) {
                    let resp = (l - lse).exp();
                    for ((g, a), mi) in grad.iter_mut().zip(x).zip(m) {
                        *g += resp * (mi - a) / s2;
                    }
                }
                lse
            }
            Shape::Rings { width } => {
                let w2 = width * width;
                let r = norm(x);
                let (j, d2) = self.nearest_ring(r);
                let radial = -(r - self.radii()[j]) / w2;
                for (g, a) in grad.iter_mut().zip(x) {
                    *g = if r > 0.0 { radial * a / r } else { 0.0 };
                }
                -d2 / (2.0 * w2)
            }
        }
    }

    fn accumulate_grad_theta(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        match &self.shape {
            Shape::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                for ((o, a), m) in out.iter_mut().zip(x).zip(self.params.values()) {
                    *o += scale * (a - m) / s2;
                }
            }
            Shape::Mixture { weights, sigma } => {
                let s2 = sigma * sigma;
                let logs: Vec<f64> = self
                    .means()
                    .zip(weights)
                    .map(|(m, w)| w.ln() - sq_dist(x, m) / (2.0 * s2))
                    .collect();
                let lse = log_sum_exp(&logs);
                for (k, m) in self.means().enumerate() {
                    let resp = (logs[k] - lse).exp();
                    for (i, (a, mi)) in x.iter().zip(m).enumerate() {
                        out[k * self.dim + i] += scale * resp * (a - mi) / s2;
                    }
                }
            }
            Shape::Rings { width } => {
                let r = norm(x);
                let (j, _) = self.nearest_ring(r);
                out[j] += scale * (r - self.radii()[j]) / (width * width);
            }
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), EnergyError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(EnergyError::Invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

pub(crate) fn check_simplex(weights: &[f64]) -> Result<(), EnergyError> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(EnergyError::Invalid("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(EnergyError::Invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Index `k` with `Σ_{i<k} w_i ≤ u < Σ_{i≤k} w_i`; zero-weight entries are never chosen.
pub(crate) fn pick_weighted(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

fn gaussian_log_norm(dim: usize, sigma: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * PI * sigma * sigma).ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
