//! Independent oracles for the acceptance gate: adaptive quadrature, a
//! modified-Bessel series, and a from-scratch brute-force circular
//! transport solver (linear-scan quantiles, per-segment Simpson, dense cut
//! scan with parabolic refinement). None of this shares code with the
//! production paths it validates.

use vicsek_circle::fields::DensityField;

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
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
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

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

const TAU: f64 = 2.0 * std::f64::consts::PI;

struct Quantile {
    cum: Vec<f64>,
    edges: Vec<f64>,
}

impl Quantile {
    fn build(field: &DensityField) -> Self {
        let h = field.grid().spacing();
        let mut weights: Vec<f64> = field.values().iter().map(|&v| v * h).collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let mut cum = vec![0.0];
        for &w in &weights {
            cum.push(cum.last().unwrap() + w);
        }
        let n = weights.len();
        cum[n] = 1.0;
        Self {
            cum,
            edges: (0..=n).map(|k| (k as f64 - 0.5) * h).collect(),
        }
    }

    fn eval(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let mut k = 0;
        while k + 1 < self.cum.len() - 1 && self.cum[k + 1] <= q {
            k += 1;
        }
        let w = self.cum[k + 1] - self.cum[k];
        if w <= 0.0 {
            self.edges[k]
        } else {
            self.edges[k] + (q - self.cum[k]) / w * (self.edges[k + 1] - self.edges[k])
        }
    }

    fn eval_extended(&self, s: f64) -> f64 {
        let m = s.floor();
        self.eval(s - m) + TAU * m
    }
}

fn cost(qa: &Quantile, qb: &Quantile, beta: f64) -> f64 {
    let mut knots = vec![0.0, 1.0];
    for &c in &qa.cum {
        if c > 0.0 && c < 1.0 {
            knots.push(c);
        }
    }
    for &c in &qb.cum {
        for m in -2i32..=3 {
            let q = c + m as f64 - beta;
            if q > 0.0 && q < 1.0 {
                knots.push(q);
            }
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = |q: f64| {
        let diff = qb.eval_extended(q + beta) - qa.eval(q);
        diff * diff
    };
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a > 1e-15 {
            total += (b - a) / 6.0 * (d(a + 1e-14) + 4.0 * d(0.5 * (a + b)) + d(b - 1e-14));
        }
    }
    total
}

/// Exhaustive cut search over the transport cost: dense scan plus
/// parabolic refinement of the best bracket.
pub fn brute_force_w2(a: &DensityField, b: &DensityField) -> f64 {
    let qa = Quantile::build(a);
    let qb = Quantile::build(b);
    let n_scan = 6001;
    let beta_at = |i: usize| -1.5 + 3.0 * i as f64 / (n_scan - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::INFINITY;
    for i in 0..n_scan {
        let c = cost(&qa, &qb, beta_at(i));
        if c < best {
            best = c;
            best_i = i;
        }
    }
    let mut x = [
        beta_at(best_i.saturating_sub(1)),
        beta_at(best_i),
        beta_at((best_i + 1).min(n_scan - 1)),
    ];
    let mut f = [
        cost(&qa, &qb, x[0]),
        cost(&qa, &qb, x[1]),
        cost(&qa, &qb, x[2]),
    ];
    for _ in 0..40 {
        let denom = (x[1] - x[0]) * (f[1] - f[2]) - (x[1] - x[2]) * (f[1] - f[0]);
        if denom.abs() < 1e-300 {
            break;
        }
        let num = (x[1] - x[0]).powi(2) * (f[1] - f[2]) - (x[1] - x[2]).powi(2) * (f[1] - f[0]);
        let cand = x[1] - 0.5 * num / denom;
        if !cand.is_finite() || cand <= x[0] || cand >= x[2] || (cand - x[1]).abs() < 1e-13 {
            break;
        }
        let fc = cost(&qa, &qb, cand);
        if cand < x[1] {
            if fc <= f[1] {
                x[2] = x[1];
                f[2] = f[1];
                x[1] = cand;
                f[1] = fc;
            } else {
                x[0] = cand;
                f[0] = fc;
            }
        } else if fc <= f[1] {
            x[0] = x[1];
            f[0] = f[1];
            x[1] = cand;
            f[1] = fc;
        } else {
            x[2] = cand;
            f[2] = fc;
        }
    }
    f[1].max(0.0).sqrt()
}
