//! Adaptive trapezoid quadrature on intervals and rectangles.

/// Integrates `f` over `[a, b]`.
///
/// The interval is first cut into `panels` equal pieces; each piece is then
/// bisected until the two-panel trapezoid estimate agrees with the one-panel
/// estimate to within the local share of `tol`. The accepted value on each
/// piece is Richardson-corrected, so the rule behaves like Simpson's on
/// smooth integrands.
pub fn adaptive_trapezoid<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + h * i as f64;
        let hi = if i + 1 == panels { b } else { lo + h };
        let flo = f(lo);
        let fhi = f(hi);
        let whole = 0.5 * (hi - lo) * (flo + fhi);
        total += refine(f, lo, hi, flo, fhi, whole, tol / panels as f64, 30);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, flo: f64, fhi: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let mid = 0.5 * (lo + hi);
    let fmid = f(mid);
    let left = 0.5 * (mid - lo) * (flo + fmid);
    let right = 0.5 * (hi - mid) * (fmid + fhi);
    let halves = left + right;
    let err = halves - whole;
    if depth == 0 || err.abs() <= 3.0 * tol.max(64.0 * f64::EPSILON * halves.abs()) {
        return halves + err / 3.0;
    }
    refine(f, lo, mid, flo, fmid, left, 0.5 * tol, depth - 1) + refine(f, mid, hi, fmid, fhi, right, 0.5 * tol, depth - 1)
}

/// Nested adaptive trapezoid over the rectangle `[x0, x1] × [y0, y1]`.
pub fn adaptive_trapezoid_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    tol: f64,
    panels: usize,
) -> f64 {
    let inner_tol = tol / ((x1 - x0).abs().max(1e-300));
    let row = |x: f64| adaptive_trapezoid(&|y| f(x, y), y0, y1, inner_tol, panels);
    adaptive_trapezoid(&row, x0, x1, tol, panels)
}

/// Composite Simpson rule with `n` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Tensor-product composite Simpson on a rectangle.
pub fn simpson_2d<F: Fn(f64, f64) -> f64>(f: &F, (x0, x1): (f64, f64), (y0, y1): (f64, f64), n: usize) -> f64 {
    simpson(&|x| simpson(&|y| f(x, y), y0, y1, n), x0, x1, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_to_sqrt_two_pi() {
        let v = adaptive_trapezoid(&|x: f64| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-12, 16);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn resolves_narrow_peak() {
        let w: f64 = 0.01;
        let v = adaptive_trapezoid(&|x: f64| (-(x - 0.3).powi(2) / (2.0 * w * w)).exp(), -2.0, 2.0, 1e-12, 64);
        let exact = w * (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn two_dimensional_polynomial_is_exact() {
        let v = adaptive_trapezoid_2d(&|x, y| x * x * y, (0.0, 1.0), (0.0, 2.0), 1e-12, 4);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
        let s = simpson_2d(&|x, y| x * x * y, (0.0, 1.0), (0.0, 2.0), 4);
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
    }
}
