//! ℓ₂-ball constrained least squares `min ½‖y − Hd‖² s.t. ‖d‖ ≤ 1`.
//!
//! With the compact SVD `H = UΣVᴴ` and `c = Σ Uᴴ y`, the KKT system gives
//! `d(ν) = V (Σ² + ν)⁻¹ c` and `‖d(ν)‖² = ψ(ν) = Σ |cᵢ|² / (σᵢ² + ν)²`.
//! The multiplier is `0` when `ψ(0) ≤ 1` and otherwise the root of `ψ(ν) = 1`,
//! found by successive rational interpolation `α / (β − ν)²` started at `0`.

use ndarray::ArrayView1;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{herm, vec_norm, CMat, CVec, Svd};

/// Default accuracy `η` of the secular solver.
pub const DEFAULT_SECULAR_TOL: f64 = 1e-9;

/// Iteration cap after which the solver switches to bisection.
const MAX_RATIONAL_STEPS: usize = 100;

/// Nonzero singular values and projected right-hand side of a ball LS problem.
#[derive(Debug, Clone)]
pub struct SecularSpectrum {
    sigma: Vec<f64>,
    c: Vec<Complex64>,
    /// `|cᵢ|²` of the retained terms, paired with `σᵢ²`.
    terms: Vec<(f64, f64)>,
}

impl SecularSpectrum {
    /// `sigma` must be positive and finite. Terms with `cᵢ = 0` do not
    /// contribute to `ψ` and are dropped from the evaluation.
    pub fn new(sigma: Vec<f64>, c: Vec<Complex64>) -> Result<Self> {
        if sigma.len() != c.len() {
            return Err(Error::Parameter(format!(
                "spectrum has {} singular values but {} coefficients",
                sigma.len(),
                c.len()
            )));
        }
        if sigma.is_empty() {
            return Err(Error::Parameter("empty spectrum".into()));
        }
        if let Some(s) = sigma.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Parameter(format!(
                "singular values must be positive, found {s}"
            )));
        }
        let terms = sigma
            .iter()
            .zip(&c)
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(s, c)| (c.norm_sqr(), s * s))
            .collect();
        Ok(Self { sigma, c, terms })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn c(&self) -> &[Complex64] {
        &self.c
    }

    /// Right-most pole `−σ_r²`.
    pub fn rightmost_pole(&self) -> f64 {
        let smin = self.sigma.iter().copied().fold(f64::INFINITY, f64::min);
        -smin * smin
    }

    fn eval(&self, nu: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for &(w, s2) in &self.terms {
            let inv = 1.0 / (s2 + nu);
            let t = w * inv * inv;
            v += t;
            dv -= 2.0 * t * inv;
        }
        (v, dv)
    }
}

/// `(ψ(ν), ψ′(ν))`.
pub fn psi(spec: &SecularSpectrum, nu: f64) -> Result<(f64, f64)> {
    if !(nu > spec.rightmost_pole()) {
        return Err(Error::Domain(format!(
            "ν = {nu} is not right of the pole {}",
            spec.rightmost_pole()
        )));
    }
    Ok(spec.eval(nu))
}

/// Parameters `(α, β)` of the interpolant `α / (β − ν)²` matching `ψ` and
/// `ψ′` at `nu`.
pub fn rational_interpolant(spec: &SecularSpectrum, nu: f64) -> Result<(f64, f64)> {
    let (v, dv) = psi(spec, nu)?;
    if dv == 0.0 {
        return Err(Error::Domain("ψ′ vanishes; interpolant undefined".into()));
    }
    Ok((4.0 * v * v * v / (dv * dv), nu + 2.0 * v / dv))
}

/// Result of [`solve_secular`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecularRoot {
    pub nu: f64,
    /// Rational-interpolation steps taken.
    pub iterations: usize,
    /// Whether the bisection safeguard had to be used.
    pub bisected: bool,
}

/// Multiplier `ν̃ ≥ 0`: `0` if `ψ(0) ≤ 1`, otherwise `ν` with
/// `|ψ(ν) − 1| ≤ η` reached from below by rational steps.
///
/// Should rounding push an iterate past the root, or the step budget run out,
/// the bracket between the last two points is bisected instead.
pub fn solve_secular(spec: &SecularSpectrum, eta: f64) -> Result<SecularRoot> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("secular tolerance must be > 0, got {eta}")));
    }
    let (mut v, mut dv) = spec.eval(0.0);
    if !v.is_finite() {
        return Err(Error::Domain(format!("ψ(0) = {v}")));
    }
    let mut nu = 0.0;
    let mut iterations = 0;
    while v > 1.0 + eta {
        if iterations == MAX_RATIONAL_STEPS {
            let upper = spec.terms.iter().map(|t| t.0).sum::<f64>().sqrt();
            return Ok(SecularRoot {
                nu: bisect(spec, nu, upper.max(nu), eta),
                iterations,
                bisected: true,
            });
        }
        let next = nu + 2.0 * v * (1.0 - v.sqrt()) / dv;
        iterations += 1;
        if !next.is_finite() {
            return Err(Error::Domain(format!("secular step produced ν = {next}")));
        }
        let (nv, ndv) = spec.eval(next);
        if nv < 1.0 && nv >= 1.0 - eta && next > nu {
            // Landed on the root up to rounding; inside the ball is fine.
            return Ok(SecularRoot {
                nu: next,
                iterations,
                bisected: false,
            });
        }
        if nv < 1.0 || next <= nu {
            // Overshoot past the root (or stalled step): fall back to bisection
            // on the bracket that still contains it.
            let hi = if nv < 1.0 {
                next
            } else {
                spec.terms.iter().map(|t| t.0).sum::<f64>().sqrt().max(nu)
            };
            return Ok(SecularRoot {
                nu: bisect(spec, nu, hi, eta),
                iterations,
                bisected: true,
            });
        }
        nu = next;
        v = nv;
        dv = ndv;
    }
    Ok(SecularRoot {
        nu,
        iterations,
        bisected: false,
    })
}

/// Bisection on `ψ(ν) = 1` over `[lo, hi]` with `ψ(lo) > 1 ≥ ψ(hi)`; returns
/// the lower end once `ψ(lo) ≤ 1 + η` so the result stays inside the bracket
/// from below.
fn bisect(spec: &SecularSpectrum, mut lo: f64, mut hi: f64, eta: f64) -> f64 {
    for _ in 0..200 {
        if spec.eval(lo).0 <= 1.0 + eta {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.eval(mid).0 >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Solution of a ball-constrained LS problem.
#[derive(Debug, Clone)]
pub struct BallLs {
    pub d: CVec,
    pub nu: f64,
    pub iterations: usize,
}

/// Shared tail: `d = V (σ² + ν)⁻¹ c`, pulled back onto the sphere when the
/// approximate root leaves it a hair outside.
fn ball_from_spectrum(v: &CMat, sigma: Vec<f64>, c: Vec<Complex64>, eta: f64) -> Result<BallLs> {
    let spec = SecularSpectrum::new(sigma, c)?;
    let root = solve_secular(&spec, eta)?;
    let coef: CVec = spec
        .sigma
        .iter()
        .zip(&spec.c)
        .map(|(s, c)| c / (s * s + root.nu))
        .collect();
    let mut d = v.dot(&coef);
    let n = vec_norm(d.view());
    if n > 1.0 {
        d.mapv_inplace(|z| z / n);
    }
    Ok(BallLs {
        d,
        nu: root.nu,
        iterations: root.iterations,
    })
}

/// `min ½‖y − Hd‖² s.t. ‖d‖ ≤ 1` through the compact SVD of `H`.
///
/// An all-zero `H` leaves the objective constant; the result is `d = 0`.
pub fn solve_ball_ls(h: &CMat, y: ArrayView1<Complex64>, eta: f64) -> Result<BallLs> {
    let (m, n) = h.dim();
    if m == 0 || n == 0 {
        return Err(Error::Parameter(format!("empty system matrix {m}×{n}")));
    }
    if y.len() != m {
        return Err(Error::Dimension {
            context: "ball LS right-hand side",
            expected: (m, 1),
            actual: (y.len(), 1),
        });
    }
    let svd = Svd::new(h).truncated(m, n);
    if svd.rank() == 0 || svd.sigma_max() == 0.0 {
        return Ok(BallLs {
            d: CVec::zeros(n),
            nu: 0.0,
            iterations: 0,
        });
    }
    let uy = herm(&svd.u).dot(&y);
    let c: Vec<Complex64> = uy.iter().zip(svd.s.iter()).map(|(u, s)| u * *s).collect();
    ball_from_spectrum(&svd.v, svd.s.to_vec(), c, eta)
}

/// Ball LS for `H = (Bᵀz) ⊗ A` using a precomputed (truncated) SVD of `A`.
///
/// `H`'s singular values are `‖Bᵀz‖·σᵢ(A)` and `c = Σ_A U_Aᴴ Y_p Bᴴ z̄`, so no
/// SVD of `H` is needed. Returns `None` when `Bᵀz = 0`: the objective does not
/// depend on `d` and the caller keeps its current column.
pub fn solve_ball_ls_kron(
    a_svd: &Svd,
    b: &CMat,
    z_row: ArrayView1<Complex64>,
    y_p: &CMat,
    eta: f64,
) -> Result<Option<BallLs>> {
    if b.nrows() != z_row.len() {
        return Err(Error::Dimension {
            context: "temporal factor vs code row",
            expected: (z_row.len(), b.ncols()),
            actual: b.dim(),
        });
    }
    if y_p.dim() != (a_svd.u.nrows(), b.ncols()) {
        return Err(Error::Dimension {
            context: "ball LS target",
            expected: (a_svd.u.nrows(), b.ncols()),
            actual: y_p.dim(),
        });
    }
    let w = herm(b).dot(&z_row.mapv(|v| v.conj()));
    let s2 = w.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let proj = herm(&a_svd.u).dot(&y_p.dot(&w));
    let c: Vec<Complex64> = proj.iter().zip(a_svd.s.iter()).map(|(p, s)| p * *s).collect();
    kron_from_projection(a_svd, s2, c, eta)
}

/// Kronecker path given `s² = ‖Bᵀz‖²` and `c = Σ_A U_Aᴴ Y_p w` directly.
pub(crate) fn kron_from_projection(
    a_svd: &Svd,
    s2: f64,
    c: Vec<Complex64>,
    eta: f64,
) -> Result<Option<BallLs>> {
    if !(s2 > 0.0) || a_svd.rank() == 0 {
        return Ok(None);
    }
    let s = s2.sqrt();
    let sigma: Vec<f64> = a_svd.s.iter().map(|sa| s * sa).collect();
    ball_from_spectrum(&a_svd.v, sigma, c, eta).map(Some)
}

/// KKT residual `‖Hᴴ(Hd − y) + νd‖` of a ball LS solution.
pub fn kkt_residual(h: &CMat, y: ArrayView1<Complex64>, sol: &BallLs) -> f64 {
    let r = h.dot(&sol.d) - y;
    let g = herm(h).dot(&r) + sol.d.mapv(|v| v * sol.nu);
    vec_norm(g.view())
}

/// `½‖y − Hd‖²`.
pub fn ball_ls_objective(h: &CMat, y: ArrayView1<Complex64>, d: ArrayView1<Complex64>) -> f64 {
    let r = h.dot(&d) - y;
    0.5 * r.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, ONE, ZERO};
    use ndarray::{array, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column(a: &CMat, j: usize) -> CVec {
        a.index_axis(Axis(1), j).to_owned()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn psi_small_cases() {
        let s = SecularSpectrum::new(vec![1.0], vec![c(3.0)]).unwrap();
        assert_eq!(psi(&s, 0.0).unwrap(), (9.0, -18.0));
        let s = SecularSpectrum::new(vec![1.0, 1.0], vec![c(3.0), c(4.0)]).unwrap();
        assert_eq!(psi(&s, 0.0).unwrap(), (25.0, -50.0));
        assert!(psi(&s, -1.0).is_err());
        assert!(psi(&s, -2.0).is_err());
    }

    #[test]
    fn closed_form_roots() {
        let s = SecularSpectrum::new(vec![1.0], vec![c(3.0)]).unwrap();
        let r = solve_secular(&s, 1e-12).unwrap();
        assert!((r.nu - 2.0).abs() < 1e-10);
        // Identical singular values: ν = ‖c‖ − σ².
        let s = SecularSpectrum::new(vec![1.0, 1.0], vec![c(3.0), Complex64::new(0.0, 4.0)])
            .unwrap();
        let r = solve_secular(&s, 1e-12).unwrap();
        assert!((r.nu - 4.0).abs() < 1e-10);
        // Inside the ball already.
        let s = SecularSpectrum::new(vec![2.0], vec![c(1.0)]).unwrap();
        assert_eq!(solve_secular(&s, 1e-9).unwrap().nu, 0.0);
    }

    fn bisection_oracle(s: &SecularSpectrum) -> f64 {
        let norm_c: f64 = s.c().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let (mut lo, mut hi) = (0.0, norm_c);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            let (v, _) = psi(s, mid).unwrap();
            if v > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn two_term_root_matches_bisection() {
        let s = SecularSpectrum::new(vec![1.0, 2.0], vec![c(2.0), c(2.0)]).unwrap();
        let r = solve_secular(&s, 1e-12).unwrap();
        let want = bisection_oracle(&s);
        assert!((r.nu - want).abs() <= 1e-9 * want.max(1.0));
        assert!(!r.bisected);
    }

    #[test]
    fn interpolant_lies_below_psi_and_iterates_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let r = rng.random_range(2..12);
            let sigma: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..1.5)).collect();
            let cvec: Vec<Complex64> = complex_gaussian(&mut rng, (r, 1))
                .iter()
                .map(|v| v * 4.0)
                .collect();
            let s = SecularSpectrum::new(sigma, cvec).unwrap();
            let pole = s.rightmost_pole();
            let mut nu = 0.0;
            loop {
                let (v, dv) = psi(&s, nu).unwrap();
                if v <= 1.0 + 1e-9 {
                    break;
                }
                let (alpha, beta) = rational_interpolant(&s, nu).unwrap();
                for k in 0..100 {
                    let probe = pole + (k as f64 + 0.5) * (nu - pole + 5.0) / 50.0;
                    if (probe - nu).abs() < 1e-9 || probe >= beta {
                        continue;
                    }
                    let approx = alpha / (beta - probe).powi(2);
                    let exact = psi(&s, probe).unwrap().0;
                    assert!(approx <= exact * (1.0 + 1e-12), "{approx} > {exact}");
                }
                let next = nu + 2.0 * v * (1.0 - v.sqrt()) / dv;
                assert!(next > nu);
                nu = next;
            }
        }
    }

    #[test]
    fn identity_ball_cases() {
        let h = CMat::eye(2);
        let y = array![c(2.0), ZERO];
        let sol = solve_ball_ls(&h, y.view(), 1e-12).unwrap();
        assert!((sol.d[0] - ONE).norm() < 1e-9 && sol.d[1].norm() < 1e-12);
        assert!((sol.nu - 1.0).abs() < 1e-9);

        let y = array![c(0.3), c(0.4)];
        let sol = solve_ball_ls(&h, y.view(), 1e-12).unwrap();
        assert_eq!(sol.nu, 0.0);
        assert!((&sol.d - &y).iter().all(|v| v.norm() < 1e-14));

        let sol = solve_ball_ls(&CMat::zeros((3, 2)), array![ONE, ONE, ONE].view(), 1e-9)
            .unwrap();
        assert_eq!(sol.nu, 0.0);
        assert!(sol.d.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn random_ball_ls_satisfies_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let h = complex_gaussian(&mut rng, (6, 4));
            let y = column(&complex_gaussian(&mut rng, (6, 1)), 0).mapv(|v| v * 3.0);
            let sol = solve_ball_ls(&h, y.view(), DEFAULT_SECULAR_TOL).unwrap();
            let n = vec_norm(sol.d.view());
            assert!(n <= 1.0 + 1e-12);
            let scale = 1.0 + vec_norm(y.view()) * 3.0;
            assert!(kkt_residual(&h, y.view(), &sol) <= 1e-7 * scale);
            assert!(sol.nu * (n * n - 1.0).abs() <= 1e-7);
        }
    }

    #[test]
    fn kronecker_selector_row_reduces_to_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = complex_gaussian(&mut rng, (5, 3));
        let svd = Svd::new(&a).truncated(5, 3);
        let b = CMat::eye(4);
        let mut z = CVec::zeros(4);
        z[0] = ONE;
        let y = complex_gaussian(&mut rng, (5, 4)).mapv(|v| v * 3.0);
        let fast = solve_ball_ls_kron(&svd, &b, z.view(), &y, 1e-12)
            .unwrap()
            .unwrap();
        let slow = solve_ball_ls(&a, y.column(0), 1e-12).unwrap();
        assert!((&fast.d - &slow.d).iter().all(|v| v.norm() < 1e-9));
        assert!(solve_ball_ls_kron(&svd, &b, CVec::zeros(4).view(), &y, 1e-9)
            .unwrap()
            .is_none());
    }

    #[test]
    fn kronecker_identity_factor_uses_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = CMat::eye(3);
        let svd = Svd::new(&a);
        let b = complex_gaussian(&mut rng, (4, 6));
        let z = column(&complex_gaussian(&mut rng, (4, 1)), 0);
        let y = complex_gaussian(&mut rng, (3, 6)).mapv(|v| v * 5.0);
        let sol = solve_ball_ls_kron(&svd, &b, z.view(), &y, 1e-12)
            .unwrap()
            .unwrap();
        let w = herm(&b).dot(&z.mapv(|v| v.conj()));
        let s2: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        let cn = vec_norm(y.dot(&w).view());
        let want = (cn - s2).max(0.0);
        assert!((sol.nu - want).abs() <= 1e-9 * want.max(1.0));
    }
}
