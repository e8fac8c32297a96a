use std::cell::RefCell;

use rand::Rng;

use super::{EnergyError, EnergyModel};
use crate::params::{ParamVector, Segment};

/// Fully-connected energy network with leaky-ReLU hidden layers and a scalar
/// linear output: `f_θ(x) = w_Lᵀ φ(W_{L−1} φ(… φ(W_0 x + b_0) …) + b_{L−1}) + b_L`.
///
/// Gradients in `x` and `θ` are computed by a hand-written backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralEnergy {
    widths: Vec<usize>,
    leak: f64,
    params: ParamVector,
    layers: Vec<Layer>,
}

/// Offsets of one layer into the parameter vector and the scratch buffers.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    weight: usize,
    bias: usize,
    /// Start of this layer's input block in the activation buffer.
    act: usize,
    /// Start of this layer's block in the pre-activation buffer.
    pre: usize,
}

#[derive(Default)]
struct Scratch {
    pre: Vec<f64>,
    act: Vec<f64>,
    delta: Vec<f64>,
    prev: Vec<f64>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

pub const DEFAULT_LEAK: f64 = 0.05;

impl NeuralEnergy {
    /// `hidden` lists the hidden-layer widths; the output layer (width 1) is implicit.
    pub fn zeros(input: usize, hidden: &[usize], leak: f64) -> Result<Self, EnergyError> {
        if input == 0 || hidden.contains(&0) {
            return Err(EnergyError::Invalid("layer widths must be positive".into()));
        }
        if !(leak > 0.0 && leak < 1.0) {
            return Err(EnergyError::Invalid(format!("leak must lie in (0, 1), got {leak}")));
        }
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut parts = Vec::new();
        for (l, w) in widths.windows(2).enumerate() {
            parts.push((format!("layer{l}.weight"), vec![0.0; w[0] * w[1]]));
            parts.push((format!("layer{l}.bias"), vec![0.0; w[1]]));
        }
        let params = ParamVector::from_segments(parts);
        let layout = params.layout();
        let (mut act, mut pre) = (0, 0);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let layer = Layer {
                    n_in: w[0],
                    n_out: w[1],
                    weight: layout[2 * l].start,
                    bias: layout[2 * l + 1].start,
                    act,
                    pre,
                };
                act += w[0];
                pre += w[1];
                layer
            })
            .collect();
        Ok(Self {
            widths,
            leak,
            params,
            layers,
        })
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for weights and biases.
    pub fn random<R: Rng + ?Sized>(input: usize, hidden: &[usize], leak: f64, rng: &mut R) -> Result<Self, EnergyError> {
        let mut net = Self::zeros(input, hidden, leak)?;
        let layout = net.params.layout().to_vec();
        let values = net.params.values_mut();
        for (l, w) in net.widths.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for seg in &layout[2 * l..2 * l + 2] {
                for v in &mut values[seg.range()] {
                    *v = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from a parameter vector whose layout follows the
    /// `layer{l}.weight` / `layer{l}.bias` convention.
    pub fn from_params(params: ParamVector, leak: f64) -> Result<Self, EnergyError> {
        let layout = params.layout();
        if layout.is_empty() || !layout.len().is_multiple_of(2) {
            return Err(EnergyError::Invalid("expected weight/bias segment pairs".into()));
        }
        let mut widths = Vec::new();
        for (l, pair) in layout.chunks(2).enumerate() {
            let (w, b): (&Segment, &Segment) = (&pair[0], &pair[1]);
            if w.name != format!("layer{l}.weight") || b.name != format!("layer{l}.bias") || b.len == 0 || w.len % b.len != 0 {
                return Err(EnergyError::Invalid(format!("unexpected segments `{}`, `{}`", w.name, b.name)));
            }
            let fan_in = w.len / b.len;
            match widths.last() {
                None => widths.push(fan_in),
                Some(&prev) if prev == fan_in => {}
                Some(&prev) => {
                    return Err(EnergyError::Invalid(format!("layer {l} expects {fan_in} inputs, previous layer has {prev}")));
                }
            }
            widths.push(b.len);
        }
        if widths.last() != Some(&1) {
            return Err(EnergyError::Invalid("final layer must have width 1".into()));
        }
        let hidden = &widths[1..widths.len() - 1];
        let mut net = Self::zeros(widths[0], hidden, leak)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }

    /// Forward pass filling `s.pre` (one block per non-input layer) and
    /// `s.act` (one block per layer input). Returns the output.
    fn forward(&self, x: &[f64], s: &mut Scratch) -> f64 {
        let theta = self.params.values();
        let last = self.layers.len() - 1;
        let total_pre = self.layers[last].pre + 1;
        let total_act = self.layers[last].act + self.layers[last].n_in;
        s.pre.resize(total_pre, 0.0);
        s.act.resize(total_act, 0.0);
        s.act[..x.len()].copy_from_slice(x);
        for (l, ly) in self.layers.iter().enumerate() {
            let w = &theta[ly.weight..ly.weight + ly.n_in * ly.n_out];
            let b = &theta[ly.bias..ly.bias + ly.n_out];
            let (head, tail) = s.act.split_at_mut(ly.act + ly.n_in);
            let input = &head[ly.act..];
            let pre = &mut s.pre[ly.pre..ly.pre + ly.n_out];
            for ((p, row), bias) in pre.iter_mut().zip(w.chunks_exact(ly.n_in)).zip(b) {
                *p = bias + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
            }
            if l != last {
                for (a, p) in tail[..ly.n_out].iter_mut().zip(pre.iter()) {
                    *a = if *p > 0.0 { *p } else { self.leak * p };
                }
            }
        }
        s.pre[total_pre - 1]
    }

    /// Backward pass after `forward`. Fills `grad_x` when given and
    /// accumulates `scale · ∇_θ f` into `grad_theta` when given.
    fn backward(&self, s: &mut Scratch, mut grad_x: Option<&mut [f64]>, mut grad_theta: Option<(&mut [f64], f64)>) {
        let theta = self.params.values();
        let last = self.layers.len() - 1;
        let Scratch { pre, act, delta, prev } = s;
        delta.clear();
        delta.push(1.0);
        for (l, ly) in self.layers.iter().enumerate().rev() {
            if l != last {
                for (d, p) in delta.iter_mut().zip(&pre[ly.pre..ly.pre + ly.n_out]) {
                    if *p <= 0.0 {
                        *d *= self.leak;
                    }
                }
            }
            let input = &act[ly.act..ly.act + ly.n_in];
            if let Some((g, scale)) = grad_theta.as_mut() {
                let (gw, gb) = g.split_at_mut(ly.bias);
                let gw = &mut gw[ly.weight..ly.weight + ly.n_in * ly.n_out];
                for ((row, gbias), d) in gw.chunks_exact_mut(ly.n_in).zip(&mut gb[..ly.n_out]).zip(delta.iter()) {
                    let d = *scale * d;
                    *gbias += d;
                    for (w, a) in row.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
            }
            if l == 0 && grad_x.is_none() {
                break;
            }
            prev.clear();
            prev.resize(ly.n_in, 0.0);
            let w = &theta[ly.weight..ly.weight + ly.n_in * ly.n_out];
            for (row, d) in w.chunks_exact(ly.n_in).zip(delta.iter()) {
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += w * d;
                }
            }
            if l == 0 {
                if let Some(gx) = grad_x.as_deref_mut() {
                    gx.copy_from_slice(prev);
                }
            }
            std::mem::swap(delta, prev);
        }
    }
}

impl EnergyModel for NeuralEnergy {
    fn dim(&self) -> usize {
        self.widths[0]
    }

    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn set_params(&mut self, theta: ParamVector) -> Result<(), EnergyError> {
        if theta.layout() != self.params.layout() {
            return Err(EnergyError::Invalid("parameter layout does not match the network".into()));
        }
        self.params = theta;
        Ok(())
    }

    fn value(&self, x: &[f64]) -> f64 {
        SCRATCH.with_borrow_mut(|s| self.forward(x, s))
    }

    fn value_and_grad_x(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        SCRATCH.with_borrow_mut(|s| {
            let v = self.forward(x, s);
            self.backward(s, Some(grad), None);
            v
        })
    }

    fn accumulate_grad_theta(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        SCRATCH.with_borrow_mut(|s| {
            self.forward(x, s);
            self.backward(s, None, Some((out, scale)));
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn zero_network_returns_final_bias() {
        let mut net = NeuralEnergy::zeros(2, &[8, 8], DEFAULT_LEAK).unwrap();
        let mut theta = net.params().clone();
        let last = theta.len() - 1;
        theta.values_mut()[last] = 0.75;
        net.set_params(theta).unwrap();
        for x in [[0.0, 0.0], [3.0, -1.0], [-20.0, 7.5]] {
            assert_eq!(net.eval(&x).unwrap(), 0.75);
        }
    }

    #[test]
    fn zero_input_kills_first_layer_weight_gradient() {
        let net = NeuralEnergy::random(2, &[16], DEFAULT_LEAK, &mut substream(3, "init")).unwrap();
        let g = net.grad_theta(&[0.0, 0.0]).unwrap();
        assert!(g.segment("layer0.weight").unwrap().iter().all(|v| *v == 0.0));
        assert!(g.segment("layer0.bias").unwrap().iter().all(|v| *v != 0.0));
        assert_eq!(g.segment("layer1.bias").unwrap(), &[1.0]);
    }

    #[test]
    fn from_params_recovers_architecture() {
        let net = NeuralEnergy::random(3, &[5, 4], DEFAULT_LEAK, &mut substream(1, "init")).unwrap();
        let back = NeuralEnergy::from_params(net.params().clone(), DEFAULT_LEAK).unwrap();
        assert_eq!(back.widths(), &[3, 5, 4, 1]);
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_bad_leak_and_widths() {
        assert!(NeuralEnergy::zeros(2, &[4], 1.0).is_err());
        assert!(NeuralEnergy::zeros(2, &[0], 0.1).is_err());
        assert!(NeuralEnergy::zeros(0, &[4], 0.1).is_err());
    }

    #[test]
    fn mismatched_dimension_is_reported() {
        let net = NeuralEnergy::zeros(2, &[4], 0.05).unwrap();
        assert_eq!(
            net.grad_x(&[1.0, 2.0, 3.0]),
            Err(EnergyError::DimensionMismatch { expected: 2, actual: 3 })
        );
    }
}
