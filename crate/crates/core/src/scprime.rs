//! Block coordinate baseline for the conventional formulation.
//!
//! Each iteration majorizes the data term once, then takes one
//! majorize-minimize step per block in turn: `X` with curvature
//! `σ_max²(F) + μ`, each atom of `D` in sequence with a projected step, and
//! `Z` with a proximal step. There is no line search; each block step lowers
//! the surrogate because its curvature bounds the true one.

use ndarray::{Axis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{herm, singular_values, soft_threshold, vec_norm, ZERO};
use crate::problem::ProblemInstance;
use crate::scaphase::{conventional_objective, frozen_report, start, Conventional};
use crate::solver::{
    check_finite, support_of, thresholds, Clock, Init, SolverConfig, SolverReport, Support,
    TraceRow,
};

/// Curvature constants for the `D` and `Z` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepBounds {
    /// `μ‖Z‖_F²` for every atom and `μP` for the codes.
    #[default]
    Rough,
    /// `μ‖z_p‖²` per atom and `μσ_max²(D)` for the codes.
    Tight,
}

pub fn run(
    inst: &ProblemInstance,
    init: &Init,
    cfg: &SolverConfig,
    bounds: StepBounds,
) -> Result<SolverReport> {
    run_with(inst, init, cfg, bounds, inst.rho, None)
}

/// Refit with `ρ = 0` on the support of `init.z`; off-support codes stay zero,
/// which is the exact minimizer of the separable code model under the mask.
pub fn debias(
    inst: &ProblemInstance,
    init: &Init,
    cfg: &SolverConfig,
    bounds: StepBounds,
) -> Result<SolverReport> {
    let support = support_of(&init.z);
    if !support.iter().any(|&s| s) {
        return Ok(frozen_report(inst, init));
    }
    run_with(inst, init, cfg, bounds, 0.0, Some(&support))
}

fn run_with(
    inst: &ProblemInstance,
    init: &Init,
    cfg: &SolverConfig,
    bounds: StepBounds,
    rho: f64,
    support: Option<&Support>,
) -> Result<SolverReport> {
    cfg.validate()?;
    let mut it = start(inst, init, support)?;
    let mu = inst.mu;
    let sigma = inst.op().spectral_bounds().sigma_max;
    let lx = sigma * sigma + mu;
    let p_count = inst.atoms() as f64;
    let (thr_d, thr_z, thr_x) = thresholds(inst, cfg.epsilon);
    let clock = Clock::start();
    let mut trace = Vec::new();
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
            step: if t == 0 { 0.0 } else { 1.0 },
            elapsed_secs: clock.secs(),
        });
        if r_d <= thr_d && r_z <= thr_z && r_x <= thr_x {
            converged = true;
            break;
        }
        if t == cfg.max_iters {
            break;
        }

        let x = it.x.as_mut().expect("conventional iterate");
        x.scaled_add(Complex64::new(-1.0 / lx, 0.0), &g.gx);

        // Atoms in order, keeping the mismatch DZ − X current.
        let mut mismatch = it.d.dot(&it.z) - &*x;
        let z_fro: f64 = it.z.iter().map(|v| v.norm_sqr()).sum();
        for p in 0..it.d.ncols() {
            let z_row = it.z.row(p).to_owned();
            let zz: f64 = z_row.iter().map(|v| v.norm_sqr()).sum();
            let l = match bounds {
                StepBounds::Rough => mu * z_fro,
                StepBounds::Tight => mu * zz,
            };
            if zz == 0.0 {
                continue;
            }
            let grad = mismatch.dot(&z_row.mapv(|v| v.conj())).mapv(|v| v * mu);
            let old = it.d.column(p).to_owned();
            let mut new = &old - &grad.mapv(|v| v / l);
            let n = vec_norm(new.view());
            if n > 1.0 {
                new.mapv_inplace(|v| v / n);
            }
            let delta = &new - &old;
            mismatch += &delta
                .view()
                .insert_axis(Axis(1))
                .dot(&z_row.view().insert_axis(Axis(0)));
            it.d.column_mut(p).assign(&new);
        }

        let lz = match bounds {
            StepBounds::Rough => mu * p_count,
            StepBounds::Tight => {
                let s = singular_values(&it.d).first().copied().unwrap_or(0.0);
                mu * s * s
            }
        };
        if lz > 0.0 {
            let gz = herm(&it.d).dot(&mismatch).mapv(|v| v * mu);
            Zip::indexed(&mut it.z).and(&gz).for_each(|idx, z, &g| {
                *z = if support.is_none_or(|s| s[idx]) {
                    soft_threshold(*z - g / lz, rho / lz)
                } else {
                    ZERO
                };
            });
        }

        let image = inst.op().apply_unchecked(it.x.as_ref().expect("conventional iterate"));
        it.set_image(inst, image);
        t += 1;
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
