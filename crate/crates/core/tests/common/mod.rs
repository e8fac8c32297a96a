//! Oracles shared by the integration tests.
#![allow(dead_code)]

use aniso_ebm::energy::{EnergyModel, NeuralEnergy, DEFAULT_LEAK};
use aniso_ebm::rng::indexed_substream;
use rand::Rng;
use rand_distr::StandardNormal;

pub const H: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;

/// Direct forward pass from the flat parameter vector: returns the output
/// and the smallest |pre-activation| over hidden units.
pub fn oracle_forward(widths: &[usize], theta: &[f64], leak: f64, x: &[f64]) -> (f64, f64) {
    let mut act = x.to_vec();
    let mut off = 0;
    let mut min_pre = f64::INFINITY;
    let layers = widths.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let w = &theta[off..off + n_in * n_out];
        let b = &theta[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let mut next = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let s: f64 = b[o] + (0..n_in).map(|i| w[o * n_in + i] * act[i]).sum::<f64>();
            if l + 1 < layers {
                min_pre = min_pre.min(s.abs());
                next.push(if s > 0.0 { s } else { leak * s });
            } else {
                next.push(s);
            }
        }
        act = next;
    }
    (act[0], min_pre)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A random network and input whose hidden pre-activations all clear the kink margin.
pub fn smooth_draw(i: usize) -> (NeuralEnergy, Vec<f64>) {
    let mut rng = indexed_substream(2024, "fd-draws", i);
    loop {
        let net = NeuralEnergy::random(2, &[32, 32], DEFAULT_LEAK, &mut rng).unwrap();
        let x: Vec<f64> = (0..2).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, min_pre) = oracle_forward(net.widths(), net.params().values(), DEFAULT_LEAK, &x);
        if min_pre > KINK_MARGIN {
            return (net, x);
        }
    }
}

pub fn max_grad_x_error(draws: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..draws {
        let (net, x) = smooth_draw(i);
        let g = net.grad_x(&x).unwrap();
        let theta = net.params().values();
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += H;
            xm[j] -= H;
            let fd = (oracle_forward(net.widths(), theta, DEFAULT_LEAK, &xp).0 - oracle_forward(net.widths(), theta, DEFAULT_LEAK, &xm).0) / (2.0 * H);
            worst = worst.max(rel_err(g[j], fd));
        }
    }
    worst
}

pub fn max_grad_theta_error(draws: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..draws {
        let (net, x) = smooth_draw(i);
        let g = net.grad_theta(&x).unwrap();
        let mut theta = net.params().values().to_vec();
        for j in 0..theta.len() {
            let orig = theta[j];
            theta[j] = orig + H;
            let fp = oracle_forward(net.widths(), &theta, DEFAULT_LEAK, &x).0;
            theta[j] = orig - H;
            let fm = oracle_forward(net.widths(), &theta, DEFAULT_LEAK, &x).0;
            theta[j] = orig;
            worst = worst.max(rel_err(g.values()[j], (fp - fm) / (2.0 * H)));
        }
    }
    worst
}


/// Mean of `series` and its batch-means standard error over `batches` equal batches.
pub fn batch_means(series: &[f64], batches: usize) -> (f64, f64) {
    let len = series.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| series[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (grand, (var / batches as f64).sqrt())
}

/// One chain of `n` recorded states after `burn` discarded steps, row-major.
pub fn long_run<K: aniso_ebm::samplers::Kernel>(kernel: &K, z0: Vec<f64>, burn: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = indexed_substream(seed, "long-run", 0);
    let mut z = z0;
    for _ in 0..burn {
        z = kernel.step(&z, &mut rng).unwrap();
    }
    let mut out = Vec::with_capacity(n * z.len());
    for _ in 0..n {
        z = kernel.step(&z, &mut rng).unwrap();
        out.extend_from_slice(&z);
    }
    out
}
