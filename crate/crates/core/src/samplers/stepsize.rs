//! The gradient-clamped stepsize `γ_i = th / max(th, |∂_i f|)`.

use super::StepsizeNorm;

/// A gradient coordinate that was NaN or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteGradient {
    pub index: usize,
}

/// Per-coordinate stepsize from a gradient. Every entry lies in `(0, 1]`,
/// and equals 1 exactly when `|grad_i| ≤ th`.
pub fn anisotropic_stepsize(grad: &[f64], th: f64) -> Result<Vec<f64>, NonFiniteGradient> {
    let mut out = vec![0.0; grad.len()];
    fill_stepsize(grad, th, StepsizeNorm::Elementwise, &mut out)?;
    Ok(out)
}

/// Writes the stepsize into `out`. With [`StepsizeNorm::Euclidean`] the
/// clamp uses `‖grad‖₂` and the same scalar is broadcast to every coordinate.
pub fn fill_stepsize(grad: &[f64], th: f64, norm: StepsizeNorm, out: &mut [f64]) -> Result<(), NonFiniteGradient> {
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(NonFiniteGradient { index });
    }
    match norm {
        StepsizeNorm::Elementwise => {
            for (o, g) in out.iter_mut().zip(grad) {
                *o = th / th.max(g.abs());
            }
        }
        StepsizeNorm::Euclidean => {
            let n = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let s = th / th.max(n);
            out.iter_mut().for_each(|o| *o = s);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formula_fixtures() {
        assert_eq!(anisotropic_stepsize(&[0.5], 0.01).unwrap(), vec![0.02]);
        assert_eq!(anisotropic_stepsize(&[0.005], 0.01).unwrap(), vec![1.0]);
        assert_eq!(anisotropic_stepsize(&[0.01, -0.02], 0.01).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn nonfinite_gradient_is_reported() {
        assert_eq!(anisotropic_stepsize(&[0.0, f64::NAN], 0.1), Err(NonFiniteGradient { index: 1 }));
    }

    #[test]
    fn euclidean_variant_broadcasts() {
        let mut out = [0.0; 2];
        fill_stepsize(&[3.0, 4.0], 1.0, StepsizeNorm::Euclidean, &mut out).unwrap();
        assert_eq!(out, [0.2, 0.2]);
    }

    proptest! {
        #[test]
        fn stepsize_in_unit_interval(
            grad in proptest::collection::vec(-1e6f64..1e6, 1..8),
            th in 1e-6f64..1e3,
        ) {
            for (g, s) in grad.iter().zip(anisotropic_stepsize(&grad, th).unwrap()) {
                prop_assert!(s > 0.0 && s <= 1.0);
                prop_assert_eq!(s == 1.0, g.abs() <= th);
            }
        }
    }
}
