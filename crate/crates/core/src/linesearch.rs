//! Exact line search over `γ ∈ [0, 1]` for quartic objectives.
//!
//! Both solvers move along `(ΔD, ΔZ)` (and `ΔX`), and every smooth term of
//! their surrogate is a squared norm of a quadratic matrix polynomial
//! `C₀ + γC₁ + γ²C₂`. Summing those gives a real quartic whose derivative is
//! a cubic, rooted here in closed form.

use crate::linalg::{fro_norm_sq, re_inner, CMat};

/// `φ(γ) = Σₖ cₖ γᵏ`, coefficients in ascending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartic(pub [f64; 5]);

impl Quartic {
    pub fn zero() -> Self {
        Quartic([0.0; 5])
    }

    pub fn eval(&self, g: f64) -> f64 {
        let c = &self.0;
        (((c[4] * g + c[3]) * g + c[2]) * g + c[1]) * g + c[0]
    }

    pub fn derivative(&self, g: f64) -> f64 {
        let c = &self.0;
        ((4.0 * c[4] * g + 3.0 * c[3]) * g + 2.0 * c[2]) * g + c[1]
    }

    /// Add `(w/2)·‖C₀ + γC₁ + γ²C₂‖²`. `c2 = None` means `C₂ = 0`.
    pub fn add_squared_norm(&mut self, w: f64, c0: &CMat, c1: &CMat, c2: Option<&CMat>) {
        let c = &mut self.0;
        c[0] += 0.5 * w * fro_norm_sq(c0);
        c[1] += w * re_inner(c0, c1);
        c[2] += 0.5 * w * fro_norm_sq(c1);
        if let Some(c2) = c2 {
            c[2] += w * re_inner(c0, c2);
            c[3] += w * re_inner(c1, c2);
            c[4] += 0.5 * w * fro_norm_sq(c2);
        }
    }

    /// Add the linear term `s·γ`.
    pub fn add_linear(&mut self, s: f64) {
        self.0[1] += s;
    }

    /// Minimizer over `[0, 1]`; among equal values the smallest `γ` wins.
    pub fn minimize_unit(&self) -> f64 {
        let c = &self.0;
        let mut cands = vec![0.0, 1.0];
        let roots = real_roots_cubic(4.0 * c[4], 3.0 * c[3], 2.0 * c[2], c[1]);
        cands.extend(roots.into_iter().filter(|r| (0.0..=1.0).contains(r)));
        cands.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, 0.0);
        for g in cands {
            let v = self.eval(g);
            if v < best.0 {
                best = (v, g);
            }
        }
        best.1
    }
}

/// Relative size below which a leading coefficient is treated as zero and
/// the polynomial degree is reduced.
const DEGENERATE: f64 = 1e-14;

/// Real roots of `a x³ + b x² + c x + d`.
pub fn real_roots_cubic(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= DEGENERATE * scale {
        return real_roots_quadratic(b, c, d);
    }
    let (b, c, d) = (b / a, c / a, d / a);
    // Depressed cubic t³ + p t + q with x = t − b/3.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift
            })
            .collect()
    };
    // A couple of Newton steps clean up cancellation in the closed form.
    for x in &mut roots {
        for _ in 0..2 {
            let f = ((*x + b) * *x + c) * *x + d;
            let df = (3.0 * *x + 2.0 * b) * *x + c;
            if df != 0.0 {
                let nx = *x - f / df;
                if nx.is_finite() {
                    *x = nx;
                }
            }
        }
    }
    roots
}

/// Real roots of `a x² + b x + c`, degrading to linear when `a` is negligible.
pub fn real_roots_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= DEGENERATE * scale {
        if b.abs() <= DEGENERATE * scale {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    // Numerically stable pair.
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}
