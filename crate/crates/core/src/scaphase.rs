//! SCAphase for `min ½‖Y − |F(X)|‖² + (μ/2)‖X − DZ‖² + ρ‖Z‖₁`.
//!
//! Same scheme as the compact solver, but the auxiliary signal `X` makes
//! every best response closed-form: a scalar quadratic per entry of `X`, a
//! projected gradient step per atom and a soft-threshold per code entry.

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{fro_norm, fro_norm_sq, l1_norm, soft_threshold, vec_norm, CMat, ZERO};
use crate::linesearch::Quartic;
use crate::problem::{conventional_gradients, data_term, Iterate, ProblemInstance};
use crate::solver::{
    check_finite, clamp_columns, residual_d, residual_z, support_of, thresholds, Clock, Init,
    SolverConfig, SolverReport, Support, TraceRow,
};

/// All three partial gradients and residual norms at an iterate.
pub(crate) struct Conventional {
    pub residual: CMat,
    pub gx: CMat,
    pub gd: CMat,
    pub gz: CMat,
}

impl Conventional {
    pub fn at(inst: &ProblemInstance, it: &Iterate) -> Self {
        let x = it.x.as_ref().expect("conventional iterate");
        let residual = it.image() - it.target();
        let (gx, gd, gz) = conventional_gradients(inst, &residual, x, &it.d, &it.z);
        Self {
            residual,
            gx,
            gd,
            gz,
        }
    }

    pub fn residuals(&self, it: &Iterate, rho: f64, support: Option<&Support>) -> (f64, f64, f64) {
        (
            residual_d(&it.d, &self.gd),
            residual_z(&it.z, &self.gz, rho, support),
            fro_norm(&self.gx),
        )
    }
}

pub(crate) fn require_mu(inst: &ProblemInstance) -> Result<()> {
    if inst.mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "the conventional formulation needs μ > 0, got {}",
            inst.mu
        )))
    }
}

pub(crate) fn conventional_objective(inst: &ProblemInstance, it: &Iterate, rho: f64) -> f64 {
    let x = it.x.as_ref().expect("conventional iterate");
    data_term(inst.y(), it.image())
        + 0.5 * inst.mu * fro_norm_sq(&(x - &it.d.dot(&it.z)))
        + rho * l1_norm(&it.z)
}

/// Validates the starting point and applies a frozen support.
pub(crate) fn start(
    inst: &ProblemInstance,
    init: &Init,
    support: Option<&Support>,
) -> Result<Iterate> {
    require_mu(inst)?;
    let x = init
        .x
        .clone()
        .ok_or_else(|| Error::Parameter("the conventional formulation needs an initial X".into()))?;
    let mut z = init.z.clone();
    if let Some(s) = support {
        Zip::from(&mut z).and(s).for_each(|z, &free| {
            if !free {
                *z = ZERO;
            }
        });
    }
    let it = Iterate::conventional(inst, x, init.d.clone(), z)?;
    let max_norm = it.max_atom_norm();
    if max_norm > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "initial dictionary is infeasible: atom norm {max_norm}"
        )));
    }
    Ok(it)
}

/// `x̃ = x − ∇ₓ/(‖f_col‖² + μ)` entrywise; `col_norms` is `op.column_norms_sq()`.
fn direction_x_with(inst: &ProblemInstance, it: &Iterate, gx: &CMat, col_norms: &Array2<f64>) -> CMat {
    let x = it.x.as_ref().expect("conventional iterate");
    let mut out = x.clone();
    Zip::from(&mut out)
        .and(gx)
        .and(col_norms)
        .for_each(|o, &g, &c| {
            let den = c + inst.mu;
            if den > 0.0 {
                *o -= g / den;
            }
        });
    out
}

fn direction_d_with(inst: &ProblemInstance, it: &Iterate, gd: &CMat) -> CMat {
    let mut out = it.d.clone();
    for (p, z_row) in it.z.axis_iter(Axis(0)).enumerate() {
        let zz: f64 = z_row.iter().map(|v| v.norm_sqr()).sum();
        if zz > 0.0 {
            let scale = Complex64::new(-1.0 / (inst.mu * zz), 0.0);
            out.column_mut(p).scaled_add(scale, &gd.column(p));
        }
    }
    clamp_columns(&mut out);
    out
}

fn direction_z_with(
    inst: &ProblemInstance,
    it: &Iterate,
    gz: &CMat,
    rho: f64,
    support: Option<&Support>,
) -> CMat {
    let dn: Vec<f64> = it
        .d
        .axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let mut out = CMat::zeros(it.z.dim());
    Zip::indexed(&mut out)
        .and(&it.z)
        .and(gz)
        .for_each(|(p, i), o, &z, &g| {
            let q = dn[p];
            if q > 0.0 && support.is_none_or(|s| s[[p, i]]) {
                *o = soft_threshold(z * q - g / inst.mu, rho / inst.mu) / q;
            }
        });
    out
}

/// Step along `(ΔX, ΔD, ΔZ)` and the image `F(ΔX)` reused for the update.
fn line_search_with(
    inst: &ProblemInstance,
    it: &Iterate,
    residual: &CMat,
    dx: &CMat,
    dd: &CMat,
    dz: &CMat,
    delta_g: f64,
) -> (f64, CMat) {
    let x = it.x.as_ref().expect("conventional iterate");
    let fdx = inst.op().apply_unchecked(dx);
    let c0 = x - &it.d.dot(&it.z);
    let ddz = dd.dot(dz);
    let c1 = dx - &dd.dot(&it.z) - &it.d.dot(dz);
    let c2 = ddz.mapv(|v| -v);
    let mut q = Quartic::zero();
    q.add_squared_norm(1.0, residual, &fdx, None);
    q.add_squared_norm(inst.mu, &c0, &c1, Some(&c2));
    q.add_linear(delta_g);
    (q.minimize_unit(), fdx)
}

/// Best response `X̃`.
pub fn direction_x(inst: &ProblemInstance, it: &Iterate) -> Result<CMat> {
    require_mu(inst)?;
    let g = Conventional::at(inst, it);
    Ok(direction_x_with(inst, it, &g.gx, &inst.op().column_norms_sq()))
}

/// Best response `D̃`: a gradient step scaled by `1/(μ‖z_p‖²)`, projected on
/// the unit ball; atoms with an all-zero code row are kept.
pub fn direction_d(inst: &ProblemInstance, it: &Iterate) -> Result<CMat> {
    require_mu(inst)?;
    let g = Conventional::at(inst, it);
    Ok(direction_d_with(inst, it, &g.gd))
}

/// Best response `Z̃`.
pub fn direction_z(inst: &ProblemInstance, it: &Iterate) -> Result<CMat> {
    require_mu(inst)?;
    let g = Conventional::at(inst, it);
    Ok(direction_z_with(inst, it, &g.gz, inst.rho, None))
}

/// Exact step along `(ΔX, ΔD, ΔZ)` from `it`.
pub fn line_search(
    inst: &ProblemInstance,
    it: &Iterate,
    dx: &CMat,
    dd: &CMat,
    dz: &CMat,
) -> Result<f64> {
    inst.check_dz(dd, dz)?;
    inst.check_x(dx)?;
    let residual = it.image() - it.target();
    let delta_g = inst.rho * (l1_norm(&(&it.z + dz)) - l1_norm(&it.z));
    Ok(line_search_with(inst, it, &residual, dx, dd, dz, delta_g).0)
}

/// The surrogate minimized by [`line_search`], evaluated directly at `γ`.
pub fn line_search_objective(
    inst: &ProblemInstance,
    it: &Iterate,
    dx: &CMat,
    dd: &CMat,
    dz: &CMat,
    gamma: f64,
) -> f64 {
    let x0 = it.x.as_ref().expect("conventional iterate");
    let g = Complex64::new(gamma, 0.0);
    let x = x0 + &dx.mapv(|v| v * g);
    let d = &it.d + &dd.mapv(|v| v * g);
    let z = &it.z + &dz.mapv(|v| v * g);
    let image = inst.op().apply_unchecked(&x);
    0.5 * fro_norm_sq(&(&image - it.target()))
        + 0.5 * inst.mu * fro_norm_sq(&(&x - &d.dot(&z)))
        + gamma * inst.rho * (l1_norm(&(&it.z + dz)) - l1_norm(&it.z))
}

/// `(r_D, r_Z, r_X)` at `it`.
pub fn stationarity_residual(inst: &ProblemInstance, it: &Iterate) -> (f64, f64, f64) {
    Conventional::at(inst, it).residuals(it, inst.rho, None)
}

fn run_with(
    inst: &ProblemInstance,
    init: &Init,
    cfg: &SolverConfig,
    rho: f64,
    support: Option<&Support>,
) -> Result<SolverReport> {
    cfg.validate()?;
    let mut it = start(inst, init, support)?;
    let col_norms = inst.op().column_norms_sq();
    let (thr_d, thr_z, thr_x) = thresholds(inst, cfg.epsilon);
    let clock = Clock::start();
    let mut trace = Vec::new();
    let mut step = 0.0;
    let mut converged = false;
    let mut t = 0;
    loop {
        let g = Conventional::at(inst, &it);
        let (r_d, r_z, r_x) = g.residuals(&it, rho, support);
        let objective = conventional_objective(inst, &it, rho);
        check_finite(t, objective)?;
        trace.push(TraceRow {
            iteration: t,
            objective,
            r_d,
            r_z,
            r_x,
            step,
            elapsed_secs: clock.secs(),
        });
        if r_d <= thr_d && r_z <= thr_z && r_x <= thr_x {
            converged = true;
            break;
        }
        if t == cfg.max_iters {
            break;
        }
        let x_new = direction_x_with(inst, &it, &g.gx, &col_norms);
        let d_new = direction_d_with(inst, &it, &g.gd);
        let z_new = direction_z_with(inst, &it, &g.gz, rho, support);
        let dx = &x_new - it.x.as_ref().expect("conventional iterate");
        let dd = &d_new - &it.d;
        let dz = &z_new - &it.z;
        let delta_g = rho * (l1_norm(&z_new) - l1_norm(&it.z));
        let (gamma, fdx) = line_search_with(inst, &it, &g.residual, &dx, &dd, &dz, delta_g);
        if gamma == 0.0 {
            log::debug!("scaphase: zero step at iteration {t}, stopping");
            break;
        }
        let gc = Complex64::new(gamma, 0.0);
        it.x.as_mut().expect("conventional iterate").scaled_add(gc, &dx);
        it.d.scaled_add(gc, &dd);
        it.z.scaled_add(gc, &dz);
        t += 1;
        if t % cfg.refresh_every == 0 {
            it.refresh(inst);
        } else {
            let mut image = it.image().clone();
            image.scaled_add(gc, &fdx);
            it.set_image(inst, image);
        }
        step = gamma;
    }
    Ok(SolverReport {
        trace,
        d: it.d,
        z: it.z,
        x: it.x,
        converged,
        iterations: t,
    })
}

/// Run from `init` (which must carry `X⁰`) until the three-block residual
/// test passes or `max_iters`.
pub fn run(inst: &ProblemInstance, init: &Init, cfg: &SolverConfig) -> Result<SolverReport> {
    run_with(inst, init, cfg, inst.rho, None)
}

/// Refit with `ρ = 0` on the support of `init.z`.
pub fn debias(inst: &ProblemInstance, init: &Init, cfg: &SolverConfig) -> Result<SolverReport> {
    let support = support_of(&init.z);
    if !support.iter().any(|&s| s) {
        return Ok(frozen_report(inst, init));
    }
    run_with(inst, init, cfg, 0.0, Some(&support))
}

/// Report for a point that is returned as is.
pub(crate) fn frozen_report(inst: &ProblemInstance, init: &Init) -> SolverReport {
    let objective = match &init.x {
        Some(x) => {
            data_term(inst.y(), &inst.op().apply_unchecked(x))
                + 0.5 * inst.mu * fro_norm_sq(&(x - &init.d.dot(&init.z)))
        }
        None => f64::NAN,
    };
    SolverReport {
        trace: vec![TraceRow {
            iteration: 0,
            objective,
            r_d: f64::NAN,
            r_z: 0.0,
            r_x: f64::NAN,
            step: 0.0,
            elapsed_secs: 0.0,
        }],
        d: init.d.clone(),
        z: init.z.clone(),
        x: init.x.clone(),
        converged: true,
        iterations: 0,
    }
}

/// Norm of every atom, for diagnostics.
pub fn atom_norms(d: &CMat) -> Vec<f64> {
    d.axis_iter(Axis(1)).map(vec_norm).collect()
}
