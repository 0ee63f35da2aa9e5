//! Types and helpers shared by the three solvers.

use std::time::Instant;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, normalize_columns, vec_norm, CMat};
use crate::problem::ProblemInstance;
use crate::secular::DEFAULT_SECULAR_TOL;

/// Iteration controls common to all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Stopping tolerance `ε` of the scaled subgradient test.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Run the support-restricted refit after the main solve.
    pub debias: bool,
    /// Accuracy `η` of the secular solver.
    pub secular_tol: f64,
    /// Seed for random initializations drawn by the caller.
    pub rng_seed: u64,
    /// Recompute cached operator images from scratch every this many steps.
    pub refresh_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_iters: 2000,
            debias: false,
            secular_tol: DEFAULT_SECULAR_TOL,
            rng_seed: 0,
            refresh_every: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        if !(self.secular_tol > 0.0) {
            return Err(Error::Parameter("secular_tol must be > 0".into()));
        }
        if self.refresh_every == 0 {
            return Err(Error::Parameter("refresh_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the convergence trace. Row `t` describes the iterate after
/// `t` updates; its residuals are those evaluated at that iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub r_d: f64,
    pub r_z: f64,
    /// `NaN` for the compact formulation.
    pub r_x: f64,
    /// Step taken to reach this iterate (`0` for the first row).
    pub step: f64,
    pub elapsed_secs: f64,
}

/// Outcome of one solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub trace: Vec<TraceRow>,
    pub d: CMat,
    pub z: CMat,
    pub x: Option<CMat>,
    pub converged: bool,
    pub iterations: usize,
}

impl SolverReport {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn wall_secs(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.elapsed_secs)
    }

    /// True when no step increased the objective by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective + slack)
    }
}

/// Starting point of a run. `x` is required by the conventional solvers.
#[derive(Debug, Clone)]
pub struct Init {
    pub d: CMat,
    pub z: CMat,
    pub x: Option<CMat>,
}

impl Init {
    /// Unit-norm Gaussian atoms and Gaussian codes with entry scale
    /// `z_scale` (`None` picks `1/√P`).
    pub fn random_compact<R: Rng + ?Sized>(
        inst: &ProblemInstance,
        rng: &mut R,
        z_scale: Option<f64>,
    ) -> Self {
        let (_, _, n, i) = inst.dims();
        let p = inst.atoms();
        let mut d = complex_gaussian(rng, (n, p));
        normalize_columns(&mut d);
        let scale = z_scale.unwrap_or(1.0 / (p as f64).sqrt());
        let z = complex_gaussian(rng, (p, i)).mapv(|v| v * scale);
        Self { d, z, x: None }
    }

    /// Gaussian `X⁰` with entry scale `x_scale` (`None` means 1), unit-norm
    /// Gaussian atoms, and `Z⁰ = (D⁰)⁺ X⁰`.
    pub fn random_conventional<R: Rng + ?Sized>(
        inst: &ProblemInstance,
        rng: &mut R,
        x_scale: Option<f64>,
    ) -> Self {
        let (_, _, n, i) = inst.dims();
        let p = inst.atoms();
        let x = complex_gaussian(rng, (n, i)).mapv(|v| v * x_scale.unwrap_or(1.0));
        let mut d = complex_gaussian(rng, (n, p));
        normalize_columns(&mut d);
        let z = crate::linalg::pinv(&d).dot(&x);
        Self { d, z, x: Some(x) }
    }
}

/// Support pattern held fixed during debiasing: `true` entries are free.
pub type Support = Array2<bool>;

pub fn support_of(z: &CMat) -> Support {
    z.mapv(|v| v != Complex64::new(0.0, 0.0))
}

/// Atom norms at or above `1 − BOUNDARY_TOL` count as lying on the sphere.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Minimum-norm subgradient norm of the dictionary block.
///
/// Interior columns contribute their gradient. For a column on the sphere the
/// normal-cone component is removed: `∇ − min{0, Re(dᴴ∇)}·d`.
pub fn residual_d(d: &CMat, grad: &CMat) -> f64 {
    let mut acc = 0.0;
    for (dc, gc) in d.axis_iter(Axis(1)).zip(grad.axis_iter(Axis(1))) {
        let nd = vec_norm(dc);
        if nd < 1.0 - BOUNDARY_TOL {
            acc += gc.iter().map(|v| v.norm_sqr()).sum::<f64>();
        } else {
            let proj: f64 = dc
                .iter()
                .zip(gc.iter())
                .map(|(a, b)| a.re * b.re + a.im * b.im)
                .sum();
            let m = proj.min(0.0);
            acc += dc
                .iter()
                .zip(gc.iter())
                .map(|(a, b)| (b - a * m).norm_sqr())
                .sum::<f64>();
        }
    }
    acc.sqrt()
}

/// Minimum-norm subgradient norm of the code block under `weight·‖Z‖₁`;
/// entries outside `support` (when given) are fixed and skipped.
pub fn residual_z(z: &CMat, grad: &CMat, weight: f64, support: Option<&Support>) -> f64 {
    let mut acc = 0.0;
    for ((idx, zv), g) in z.indexed_iter().zip(grad.iter()) {
        if support.is_some_and(|s| !s[idx]) {
            continue;
        }
        let r = zv.norm();
        if r > 0.0 {
            acc += (g + zv / r * weight).norm_sqr();
        } else {
            let t = (g.norm() - weight).max(0.0);
            acc += t * t;
        }
    }
    acc.sqrt()
}

/// Thresholds `M1·M2·√(size)·ε` for the blocks `(D, Z, X)`.
pub fn thresholds(inst: &ProblemInstance, eps: f64) -> (f64, f64, f64) {
    let (m1, m2, n, i) = inst.dims();
    let p = inst.atoms();
    let base = (m1 * m2) as f64 * eps;
    (
        base * ((n * p) as f64).sqrt(),
        base * ((p * i) as f64).sqrt(),
        base * ((n * i) as f64).sqrt(),
    )
}

/// Wall clock started at the beginning of a run.
pub(crate) struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Clock(Instant::now())
    }

    pub fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) fn check_finite(iteration: usize, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration, value })
    }
}

/// Scale any column with norm above one back onto the sphere.
pub(crate) fn clamp_columns(d: &mut CMat) {
    for mut col in d.axis_iter_mut(Axis(1)) {
        let n = vec_norm(col.view());
        if n > 1.0 {
            col.mapv_inplace(|v| v / n);
        }
    }
}
