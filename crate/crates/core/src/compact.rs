//! Compact-SCAphase: `min ½‖Y − |F(DZ)|‖² + λ‖Z‖₁` over `D ∈ 𝒟`, `Z`.
//!
//! Each iteration majorizes the data term at the current point, computes a
//! best response for every atom (a ball-constrained LS problem) and every
//! code entry (a scalar soft-threshold), and moves jointly towards it with an
//! exact step along the quartic surrogate.

use ndarray::{Axis, Zip};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{herm, l1_norm, soft_threshold, vectorize, CMat, Svd, ZERO};
use crate::linesearch::Quartic;
use crate::operators::OperatorCase;
use crate::problem::{compact_gradients, data_term, Iterate, ProblemInstance};
use crate::secular::{kron_from_projection, solve_ball_ls};
use crate::solver::{
    check_finite, residual_d, residual_z, support_of, thresholds, Clock, Init, SolverConfig,
    SolverReport, Support, TraceRow,
};

/// Per-run state: effective weight, optional frozen support and the factor
/// SVD used by the time-invariant fast path.
struct Engine<'a> {
    inst: &'a ProblemInstance,
    lambda: f64,
    support: Option<Support>,
    kron: Option<KronCache>,
    eta: f64,
}

struct KronCache {
    a_svd: Svd,
    /// `None` when the temporal factor is the identity.
    b: Option<CMat>,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a ProblemInstance, lambda: f64, support: Option<Support>, eta: f64) -> Self {
        let op = inst.op();
        let kron = (op.case() == OperatorCase::TimeInvariant).then(|| {
            let a = op.a(0);
            KronCache {
                a_svd: Svd::new(a).truncated(a.nrows(), a.ncols()),
                b: (!op.has_identity_b()).then(|| op.b(0)),
            }
        });
        Self {
            inst,
            lambda,
            support,
            kron,
            eta,
        }
    }

    fn direction_d(&self, it: &Iterate, residual: &CMat) -> Result<CMat> {
        match &self.kron {
            Some(k) => self.direction_d_kron(k, it, residual),
            None => self.direction_d_generic(it, residual),
        }
    }

    /// Generic route: explicit `H_p` and its SVD for every atom.
    fn direction_d_generic(&self, it: &Iterate, residual: &CMat) -> Result<CMat> {
        let op = self.inst.op();
        let neg_r = vectorize(&residual.mapv(|v| -v));
        let mut out = it.d.clone();
        for (p, z_row) in it.z.axis_iter(Axis(0)).enumerate() {
            if z_row.iter().all(|v| *v == ZERO) {
                continue;
            }
            let h = op.atom_matrix(z_row);
            let y = &neg_r + &h.dot(&it.d.column(p));
            let sol = solve_ball_ls(&h, y.view(), self.eta)?;
            out.column_mut(p).assign(&sol.d);
        }
        Ok(out)
    }

    /// Time-invariant route: `H_p = (Bᵀz_p) ⊗ A`, so with `w_p = Bᴴ z̄_p` the
    /// projected target is `Σ_A U_Aᴴ(−R w_p) + ‖w_p‖² Σ_A² V_Aᴴ d_p`.
    fn direction_d_kron(&self, k: &KronCache, it: &Iterate, residual: &CMat) -> Result<CMat> {
        let w = match &k.b {
            Some(b) => herm(&it.z.dot(b)),
            None => herm(&it.z),
        };
        let t1 = herm(&k.a_svd.u).dot(&residual.dot(&w));
        let t2 = herm(&k.a_svd.v).dot(&it.d);
        let mut out = it.d.clone();
        for p in 0..it.d.ncols() {
            let s2: f64 = w.column(p).iter().map(|v| v.norm_sqr()).sum();
            let c: Vec<Complex64> = k
                .a_svd
                .s
                .iter()
                .enumerate()
                .map(|(r, &sa)| -t1[[r, p]] * sa + t2[[r, p]] * (s2 * sa * sa))
                .collect();
            if let Some(sol) = kron_from_projection(&k.a_svd, s2, c, self.eta)? {
                out.column_mut(p).assign(&sol.d);
            }
        }
        Ok(out)
    }

    fn direction_z(&self, it: &Iterate, grad_z: &CMat) -> CMat {
        let q = self.inst.op().block_norms_sq_all(&it.d);
        let mut out = CMat::zeros(it.z.dim());
        Zip::indexed(&mut out)
            .and(&it.z)
            .and(grad_z)
            .and(&q)
            .for_each(|idx, o, &z, &g, &q| {
                if q > 0.0 && self.support.as_ref().is_none_or(|s| s[idx]) {
                    *o = soft_threshold(z * q - g, self.lambda) / q;
                }
            });
        out
    }

    /// Exact step and the operator images of the first and second order
    /// terms, `E₁ = F(ΔD·Z + D·ΔZ)` and `E₂ = F(ΔD·ΔZ)`.
    fn line_search(
        &self,
        it: &Iterate,
        residual: &CMat,
        dd: &CMat,
        dz: &CMat,
        delta_g: f64,
    ) -> (f64, CMat, CMat) {
        let op = self.inst.op();
        let e1 = op.apply_unchecked(&(dd.dot(&it.z) + it.d.dot(dz)));
        let e2 = op.apply_unchecked(&dd.dot(dz));
        let mut q = Quartic::zero();
        q.add_squared_norm(1.0, residual, &e1, Some(&e2));
        q.add_linear(delta_g);
        (q.minimize_unit(), e1, e2)
    }

    fn objective(&self, it: &Iterate) -> f64 {
        data_term(self.inst.y(), it.image()) + self.lambda * l1_norm(&it.z)
    }

    fn run(&self, d0: CMat, z0: CMat, cfg: &SolverConfig) -> Result<SolverReport> {
        cfg.validate()?;
        let inst = self.inst;
        let mut it = Iterate::compact(inst, d0, z0)?;
        let max_norm = it.max_atom_norm();
        if max_norm > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "initial dictionary is infeasible: atom norm {max_norm}"
            )));
        }
        if let Some(s) = &self.support {
            Zip::from(&mut it.z).and(s).for_each(|z, &free| {
                if !free {
                    *z = ZERO;
                }
            });
            it.refresh(inst);
        }
        let (thr_d, thr_z, _) = thresholds(inst, cfg.epsilon);
        let clock = Clock::start();
        let mut trace = Vec::new();
        let mut step = 0.0;
        let mut converged = false;
        let mut t = 0;
        loop {
            let residual = it.image() - it.target();
            let (gd, gz) = compact_gradients(inst.op(), &residual, &it.d, &it.z);
            let r_d = residual_d(&it.d, &gd);
            let r_z = residual_z(&it.z, &gz, self.lambda, self.support.as_ref());
            let objective = self.objective(&it);
            check_finite(t, objective)?;
            trace.push(TraceRow {
                iteration: t,
                objective,
                r_d,
                r_z,
                r_x: f64::NAN,
                step,
                elapsed_secs: clock.secs(),
            });
            if r_d <= thr_d && r_z <= thr_z {
                converged = true;
                break;
            }
            if t == cfg.max_iters {
                break;
            }
            let d_new = self.direction_d(&it, &residual)?;
            let z_new = self.direction_z(&it, &gz);
            let dd = &d_new - &it.d;
            let dz = &z_new - &it.z;
            let delta_g = self.lambda * (l1_norm(&z_new) - l1_norm(&it.z));
            let (gamma, e1, e2) = self.line_search(&it, &residual, &dd, &dz, delta_g);
            if gamma == 0.0 {
                log::debug!("compact: zero step at iteration {t}, stopping");
                break;
            }
            let g = Complex64::new(gamma, 0.0);
            it.d.scaled_add(g, &dd);
            it.z.scaled_add(g, &dz);
            t += 1;
            if t % cfg.refresh_every == 0 {
                it.refresh(inst);
            } else {
                let mut image = it.image().clone();
                image.scaled_add(g, &e1);
                image.scaled_add(g * g, &e2);
                it.set_image(inst, image);
            }
            step = gamma;
        }
        Ok(SolverReport {
            trace,
            d: it.d,
            z: it.z,
            x: None,
            converged,
            iterations: t,
        })
    }
}

/// Best-response dictionary `D̃` at `it` (columns with an all-zero code row
/// are kept).
pub fn direction_d(inst: &ProblemInstance, it: &Iterate, eta: f64) -> Result<CMat> {
    let engine = Engine::new(inst, inst.lambda, None, eta);
    engine.direction_d(it, &(it.image() - it.target()))
}

/// Best-response codes `Z̃` at `it`.
pub fn direction_z(inst: &ProblemInstance, it: &Iterate) -> CMat {
    let engine = Engine::new(inst, inst.lambda, None, 1.0);
    let residual = it.image() - it.target();
    let (_, gz) = compact_gradients(inst.op(), &residual, &it.d, &it.z);
    engine.direction_z(it, &gz)
}

/// Exact step along `(ΔD, ΔZ)` from `it`.
pub fn line_search(inst: &ProblemInstance, it: &Iterate, dd: &CMat, dz: &CMat) -> Result<f64> {
    inst.check_dz(dd, dz)?;
    let engine = Engine::new(inst, inst.lambda, None, 1.0);
    let residual = it.image() - it.target();
    let delta_g = inst.lambda * (l1_norm(&(&it.z + dz)) - l1_norm(&it.z));
    Ok(engine.line_search(it, &residual, dd, dz, delta_g).0)
}

/// The line-search surrogate `½‖Y⁽ᵗ⁾ − F((D+γΔD)(Z+γΔZ))‖² + γ(g(Z+ΔZ) − g(Z))`.
pub fn line_search_objective(
    inst: &ProblemInstance,
    it: &Iterate,
    dd: &CMat,
    dz: &CMat,
    gamma: f64,
) -> f64 {
    let g = Complex64::new(gamma, 0.0);
    let d = &it.d + &dd.mapv(|v| v * g);
    let z = &it.z + &dz.mapv(|v| v * g);
    let image = inst.op().apply_unchecked(&d.dot(&z));
    let fit = 0.5 * (&image - it.target()).iter().map(|v| v.norm_sqr()).sum::<f64>();
    fit + gamma * inst.lambda * (l1_norm(&(&it.z + dz)) - l1_norm(&it.z))
}

/// `(r_D, r_Z)`: norms of the minimum-norm subgradient blocks at `it`.
pub fn stationarity_residual(inst: &ProblemInstance, it: &Iterate) -> (f64, f64) {
    let residual = it.image() - it.target();
    let (gd, gz) = compact_gradients(inst.op(), &residual, &it.d, &it.z);
    (residual_d(&it.d, &gd), residual_z(&it.z, &gz, inst.lambda, None))
}

/// Run from `init` until the scaled residual test passes or `max_iters`.
pub fn run(inst: &ProblemInstance, init: &Init, cfg: &SolverConfig) -> Result<SolverReport> {
    Engine::new(inst, inst.lambda, None, cfg.secular_tol).run(init.d.clone(), init.z.clone(), cfg)
}

/// Refit with `λ = 0` on the support of `z`; entries outside it stay zero.
pub fn debias(inst: &ProblemInstance, d: &CMat, z: &CMat, cfg: &SolverConfig) -> Result<SolverReport> {
    let support = support_of(z);
    if !support.iter().any(|&s| s) {
        let it = Iterate::compact(inst, d.clone(), z.clone())?;
        let objective = data_term(inst.y(), it.image());
        return Ok(SolverReport {
            trace: vec![TraceRow {
                iteration: 0,
                objective,
                r_d: f64::NAN,
                r_z: 0.0,
                r_x: f64::NAN,
                step: 0.0,
                elapsed_secs: 0.0,
            }],
            d: d.clone(),
            z: z.clone(),
            x: None,
            converged: true,
            iterations: 0,
        });
    }
    Engine::new(inst, 0.0, Some(support), cfg.secular_tol).run(d.clone(), z.clone(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, normalize_columns, vec_norm, ONE};
    use crate::operators::MixingOperator;
    use crate::problem::{majorizer_cprdl, objective_cprdl};
    use crate::secular::ball_ls_objective;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn instance(rng: &mut ChaCha8Rng, case: u8) -> ProblemInstance {
        let (n, i, m1) = (3, 6, 7);
        let op = match case {
            0 => MixingOperator::spatial_only(complex_gaussian(rng, (m1, n)), i),
            1 => MixingOperator::time_invariant(
                complex_gaussian(rng, (m1, n)),
                complex_gaussian(rng, (i, 5)),
            ),
            2 => MixingOperator::snapshot_selectors(
                (0..i).map(|_| complex_gaussian(rng, (m1, n))).collect(),
            ),
            _ => MixingOperator::general(
                (0..2).map(|_| complex_gaussian(rng, (m1, n))).collect(),
                (0..2).map(|_| complex_gaussian(rng, (i, 4))).collect(),
            ),
        }
        .unwrap();
        let mut d = complex_gaussian(rng, (n, 2));
        normalize_columns(&mut d);
        let z = complex_gaussian(rng, (2, i));
        let y = op.apply(&d.dot(&z)).unwrap().mapv(|v| v.norm());
        ProblemInstance::new(y, Arc::new(op), 2)
            .unwrap()
            .with_lambda(0.05)
    }

    fn random_iterate(rng: &mut ChaCha8Rng, inst: &ProblemInstance) -> Iterate {
        let init = Init::random_compact(inst, rng, None);
        Iterate::compact(inst, init.d, init.z).unwrap()
    }

    #[test]
    fn single_atom_identity_operator() {
        let op = MixingOperator::spatial_only(CMat::eye(3), 4).unwrap();
        let y = Array2::from_shape_fn((3, 4), |(r, c)| (r + 2 * c) as f64 * 0.7);
        let inst = ProblemInstance::new(y, Arc::new(op), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let it = random_iterate(&mut rng, &inst);
        let dt = direction_d(&inst, &it, 1e-12).unwrap();
        // Y_p = Y⁽ᵗ⁾ for P = 1, so the target is Y⁽ᵗ⁾ z̄ / ‖z‖² projected on the ball.
        let z = it.z.row(0);
        let zz: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let mut want = it.target().dot(&z.mapv(|v| v.conj())).mapv(|v| v / zz);
        let n = vec_norm(want.view());
        if n > 1.0 {
            want.mapv_inplace(|v| v / n);
        }
        assert!((&dt.column(0) - &want).iter().all(|v| v.norm() < 1e-8));
    }

    #[test]
    fn zero_code_row_keeps_atom() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for case in 0..4 {
            let inst = instance(&mut rng, case);
            let mut it = random_iterate(&mut rng, &inst);
            it.z.row_mut(1).fill(ZERO);
            it.refresh(&inst);
            let dt = direction_d(&inst, &it, 1e-9).unwrap();
            assert_eq!(dt.column(1), it.d.column(1));
        }
    }

    #[test]
    fn atom_best_response_is_no_worse_than_current() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..4 {
            let inst = instance(&mut rng, case);
            let it = random_iterate(&mut rng, &inst);
            let dt = direction_d(&inst, &it, 1e-9).unwrap();
            let r = it.image() - it.target();
            for p in 0..2 {
                let h = inst.op().atom_matrix(it.z.row(p));
                let y = vectorize(&r.mapv(|v| -v)) + h.dot(&it.d.column(p));
                let new = ball_ls_objective(&h, y.view(), dt.column(p));
                let old = ball_ls_objective(&h, y.view(), it.d.column(p));
                assert!(new <= old + 1e-10 * old.max(1.0));
                assert!(vec_norm(dt.column(p)) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn kronecker_and_generic_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = instance(&mut rng, 1);
        let it = random_iterate(&mut rng, &inst);
        let fast = direction_d(&inst, &it, 1e-12).unwrap();
        let engine = Engine::new(&inst, inst.lambda, None, 1e-12);
        let slow = engine
            .direction_d_generic(&it, &(it.image() - it.target()))
            .unwrap();
        assert!((&fast - &slow).iter().all(|v| v.norm() < 1e-8));
    }

    #[test]
    fn code_entries_match_scalar_grid_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = instance(&mut rng, 3).with_lambda(0.4);
        let it = random_iterate(&mut rng, &inst);
        let zt = direction_z(&inst, &it);
        let r = it.image() - it.target();
        let (_, gz) = compact_gradients(inst.op(), &r, &it.d, &it.z);
        let q = inst.op().block_norms_sq_all(&it.d);
        for p in 0..2 {
            for i in 0..3 {
                // Scalar model: ½q|z − z₀|² + Re(ḡ(z − z₀)) + λ|z|.
                let (qq, g, z0) = (q[[p, i]], gz[[p, i]], it.z[[p, i]]);
                let f = |z: Complex64| {
                    0.5 * qq * (z - z0).norm_sqr() + (g.conj() * (z - z0)).re + 0.4 * z.norm()
                };
                let centre = zt[[p, i]];
                let mut best = f(centre);
                let span = 0.05;
                for a in -100..=100 {
                    for b in -100..=100 {
                        let probe = centre
                            + Complex64::new(a as f64 * span / 100.0, b as f64 * span / 100.0);
                        best = best.min(f(probe));
                    }
                }
                assert!(f(centre) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn dominating_threshold_zeroes_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let inst = instance(&mut rng, 0).with_lambda(1e9);
        let it = random_iterate(&mut rng, &inst);
        assert!(direction_z(&inst, &it).iter().all(|v| *v == ZERO));
    }

    #[test]
    fn line_search_beats_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..4 {
            let inst = instance(&mut rng, case);
            let it = random_iterate(&mut rng, &inst);
            let dd = complex_gaussian(&mut rng, it.d.dim()).mapv(|v| v * 0.3);
            let dz = complex_gaussian(&mut rng, it.z.dim()).mapv(|v| v * 0.3);
            let g = line_search(&inst, &it, &dd, &dz).unwrap();
            let at = line_search_objective(&inst, &it, &dd, &dz, g);
            let grid = (0..=2000)
                .map(|k| line_search_objective(&inst, &it, &dd, &dz, k as f64 / 2000.0))
                .fold(f64::INFINITY, f64::min);
            assert!(at <= grid + 1e-8 * grid.abs().max(1.0));
        }
        let inst = instance(&mut rng, 0);
        let it = random_iterate(&mut rng, &inst);
        let zero = (CMat::zeros(it.d.dim()), CMat::zeros(it.z.dim()));
        assert_eq!(line_search(&inst, &it, &zero.0, &zero.1).unwrap(), 0.0);
    }

    #[test]
    fn direction_does_not_increase_approximate_objective() {
        // Separable surrogate at (D̃, Z̃) vs at the current point.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = instance(&mut rng, 0);
        let it = random_iterate(&mut rng, &inst);
        let dt = direction_d(&inst, &it, 1e-9).unwrap();
        let zt = direction_z(&inst, &it);
        let mut gain = 0.0;
        for p in 0..2 {
            let mut dp = it.d.clone();
            dp.column_mut(p).assign(&dt.column(p));
            gain += majorizer_cprdl(&inst, &dp, &it.z, &it).unwrap();
            gain -= majorizer_cprdl(&inst, &it.d, &it.z, &it).unwrap();
        }
        assert!(gain <= 1e-10);
        let r = it.image() - it.target();
        let (_, gz) = compact_gradients(inst.op(), &r, &it.d, &it.z);
        let q = inst.op().block_norms_sq_all(&it.d);
        let mut model = 0.0;
        for ((idx, z0), zn) in it.z.indexed_iter().zip(zt.iter()) {
            let step = zn - z0;
            model += 0.5 * q[idx] * step.norm_sqr() + (gz[idx].conj() * step).re
                + inst.lambda * (zn.norm() - z0.norm());
        }
        assert!(model <= 1e-12);
    }

    #[test]
    fn runs_descend_and_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for case in 0..4 {
            let inst = instance(&mut rng, case);
            let init = Init::random_compact(&inst, &mut rng, None);
            let cfg = SolverConfig {
                max_iters: 60,
                ..Default::default()
            };
            let rep = run(&inst, &init, &cfg).unwrap();
            assert!(rep.is_monotone(1e-10 * rep.trace[0].objective));
            assert!(rep
                .d
                .axis_iter(Axis(1))
                .all(|c| vec_norm(c) <= 1.0 + 1e-12));
            let direct = objective_cprdl(&inst, &rep.d, &rep.z).unwrap();
            assert!((direct - rep.final_objective()).abs() <= 1e-9 * direct.max(1.0));
        }
    }

    #[test]
    fn lambda_above_bound_stops_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let inst = instance(&mut rng, 0);
        let big = inst.clone().with_lambda(1e6);
        let mut init = Init::random_compact(&big, &mut rng, None);
        init.z.fill(ZERO);
        let rep = run(&big, &init, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
        assert!(rep.z.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn debias_keeps_support_and_lowers_data_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = instance(&mut rng, 0).with_lambda(0.5);
        let init = Init::random_compact(&inst, &mut rng, None);
        let cfg = SolverConfig {
            max_iters: 200,
            ..Default::default()
        };
        let rep = run(&inst, &init, &cfg).unwrap();
        let before = data_term(inst.y(), &inst.op().apply(&rep.d.dot(&rep.z)).unwrap());
        let deb = debias(&inst, &rep.d, &rep.z, &cfg).unwrap();
        let after = data_term(inst.y(), &inst.op().apply(&deb.d.dot(&deb.z)).unwrap());
        assert!(after <= before + 1e-10 * before.max(1.0));
        Zip::from(&rep.z).and(&deb.z).for_each(|a, b| {
            if *a == ZERO {
                assert_eq!(*b, ZERO);
            }
        });
        assert!(deb.is_monotone(1e-10 * deb.trace[0].objective.max(1.0)));

        let zero = CMat::zeros(rep.z.dim());
        let deb = debias(&inst, &rep.d, &zero, &cfg).unwrap();
        assert_eq!(deb.iterations, 0);
        assert_eq!(deb.d, rep.d);
    }

    #[test]
    fn stationary_point_has_zero_residual() {
        // Exact fit with λ = 0: gradients vanish; atoms are interior.
        let op = MixingOperator::spatial_only(CMat::eye(2), 3).unwrap();
        let d = CMat::eye(2).mapv(|v| v * 0.5);
        let z = Array2::from_elem((2, 3), ONE);
        let y = op.apply(&d.dot(&z)).unwrap().mapv(|v| v.norm());
        let inst = ProblemInstance::new(y, Arc::new(op), 2).unwrap();
        let it = Iterate::compact(&inst, d, z).unwrap();
        let (rd, rz) = stationarity_residual(&inst, &it);
        assert!(rd < 1e-15 && rz < 1e-15);
    }
}
