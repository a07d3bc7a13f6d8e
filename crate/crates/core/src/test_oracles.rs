//! Independent numerical oracles used only by tests: adaptive quadrature,
//! modified-Bessel series, and a least-squares slope fit. These must stay
//! independent of the production code paths they are used to check.

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Modified Bessel function I_nu(x) by its power series (nu a small integer).
pub fn bessel_i_series(nu: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(nu as i32);
    for k in 1..=nu {
        term /= k as f64;
    }
    let mut sum = term;
    let q = half * half;
    for k in 1..60 {
        term *= q / (k as f64 * (k as f64 + nu as f64));
        sum += term;
        if term < sum * 1e-18 {
            break;
        }
    }
    sum
}

/// Least-squares slope of y against x.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_on_known_integrals() {
        let v = adaptive_simpson(&|t: f64| t.sin(), 0.0, PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bessel_against_quadrature() {
        // I_0(1) = (1/2π) ∫ e^{cos θ} dθ
        let q = adaptive_simpson(&|t: f64| t.cos().exp(), 0.0, 2.0 * PI, 1e-13) / (2.0 * PI);
        assert!((bessel_i_series(0, 1.0) - q).abs() < 1e-12);
    }
}
