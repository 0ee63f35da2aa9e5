//! Sparsity-weight upper bounds and the default coupling weight.
//!
//! Above `λ_max` (resp. `ρ_max`) every point with `Z = 0` is stationary, so
//! useful weights are searched on the grid `max · 0.75ᵏ`.

use ndarray::{Array1, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigh, herm, singular_values, vec_norm, vectorize, unvectorize, CMat, CVec};
use crate::operators::OperatorCase;
use crate::problem::ProblemInstance;

/// Ratio between consecutive grid points.
pub const GRID_RATIO: f64 = 0.75;

/// `(σ_max, σ_min)` of `a` over its domain (zero when `a` has a kernel).
fn extreme_sv(a: &CMat) -> (f64, f64) {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = if s.len() < a.ncols() {
        0.0
    } else {
        s.last().copied().unwrap_or(0.0)
    };
    (smax, smin)
}

fn column_norms(y: &ndarray::Array2<f64>) -> Array1<f64> {
    y.axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

fn fro(y: &ndarray::Array2<f64>) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖Y‖_F · maxᵢ σ_max(Fᵢ)`, valid for any operator.
pub fn lambda_max_general(inst: &ProblemInstance) -> f64 {
    let op = inst.op();
    let (_, i) = op.input_dim();
    let block_max = match op.case() {
        OperatorCase::SnapshotSelectors => op
            .a_list()
            .iter()
            .map(|a| extreme_sv(a).0)
            .fold(0.0, f64::max),
        OperatorCase::TimeInvariant => {
            // Fᵢ = b_{i:}ᵀ ⊗ A, whose norm is ‖b_{i:}‖·σ_max(A).
            let sa = extreme_sv(op.a(0)).0;
            let b = op.b(0);
            b.axis_iter(Axis(0))
                .map(|r| vec_norm(r) * sa)
                .fold(0.0, f64::max)
        }
        OperatorCase::General => (0..i)
            .map(|k| {
                let blk = op.block(k).expect("index in range").matrix;
                extreme_sv(&blk).0
            })
            .fold(0.0, f64::max),
    };
    fro(inst.y()) * block_max
}

/// The tightest available `λ_max` for the operator's structure.
pub fn lambda_max(inst: &ProblemInstance) -> f64 {
    let op = inst.op();
    let y = inst.y();
    match op.case() {
        OperatorCase::TimeInvariant => {
            let sa = extreme_sv(op.a(0)).0;
            let yn = column_norms(y);
            let b = op.b(0);
            let best = b
                .axis_iter(Axis(0))
                .map(|r| r.iter().zip(yn.iter()).map(|(b, n)| b.norm() * n).sum::<f64>())
                .fold(0.0, f64::max);
            sa * best
        }
        OperatorCase::SnapshotSelectors => {
            let yn = column_norms(y);
            op.a_list()
                .iter()
                .zip(yn.iter())
                .map(|(a, n)| extreme_sv(a).0 * n)
                .fold(0.0, f64::max)
        }
        OperatorCase::General => lambda_max_general(inst),
    }
}

fn require_mu(mu: f64) -> Result<()> {
    if mu > 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("ρ_max needs μ > 0, got {mu}")))
    }
}

/// `μ·σ_max(F)·‖Y‖_F / (σ_min²(F) + μ)`, valid for any operator.
pub fn rho_max_general(inst: &ProblemInstance) -> Result<f64> {
    let mu = inst.mu;
    require_mu(mu)?;
    let sb = inst.op().spectral_bounds();
    Ok(mu * sb.sigma_max * fro(inst.y()) / (sb.sigma_min * sb.sigma_min + mu))
}

/// Per-snapshot `ρ_max` when snapshots are observed separately (`B = I` or
/// snapshot selectors); the general bound otherwise.
pub fn rho_max(inst: &ProblemInstance) -> Result<f64> {
    let mu = inst.mu;
    require_mu(mu)?;
    let op = inst.op();
    let yn = column_norms(inst.y());
    let per = |a: &CMat, n: f64| {
        let (smax, smin) = extreme_sv(a);
        mu * smax * n / (smin * smin + mu)
    };
    match op.case() {
        OperatorCase::SnapshotSelectors => Ok(op
            .a_list()
            .iter()
            .zip(yn.iter())
            .map(|(a, &n)| per(a, n))
            .fold(0.0, f64::max)),
        _ if op.has_identity_b() => {
            let a = op.a(0);
            Ok(yn.iter().map(|&n| per(a, n)).fold(0.0, f64::max))
        }
        _ => rho_max_general(inst),
    }
}

/// `σ²_min,nz(F)`, the proposed default for `μ`.
pub fn mu_default(inst: &ProblemInstance) -> f64 {
    let s = inst.op().spectral_bounds().sigma_min_nonzero;
    s * s
}

/// `top · 0.75ᵏ` for each exponent.
pub fn grid(top: f64, exponents: &[u32]) -> Vec<f64> {
    exponents
        .iter()
        .map(|&k| top * GRID_RATIO.powi(k as i32))
        .collect()
}

/// The signal `X` solving `F*(F(X) − target) + μX = 0`, i.e. the `X` block of
/// a stationary point with `Z = 0` for the majorizer with that target.
pub fn zero_code_signal(inst: &ProblemInstance, target: &CMat) -> Result<CMat> {
    let mu = inst.mu;
    require_mu(mu)?;
    let op = inst.op();
    let (n, i) = op.input_dim();
    let solve_cols = |a: &CMat, y: CVec| -> CVec {
        let mut g = herm(a).dot(a);
        for k in 0..n {
            g[[k, k]] += mu;
        }
        let (w, v) = eigh(&g);
        let rhs = herm(&v).dot(&herm(a).dot(&y));
        let scaled: CVec = rhs.iter().zip(w.iter()).map(|(r, l)| r / *l).collect();
        v.dot(&scaled)
    };
    match op.case() {
        OperatorCase::SnapshotSelectors => {
            let mut x = CMat::zeros((n, i));
            for (k, a) in op.a_list().iter().enumerate() {
                x.column_mut(k).assign(&solve_cols(a, target.column(k).to_owned()));
            }
            Ok(x)
        }
        OperatorCase::TimeInvariant => {
            // AᴴA X BBᴴ + μX = AᴴTBᴴ, diagonalized on both sides.
            let a = op.a(0);
            let b = op.b(0);
            let (la, ua) = eigh(&herm(a).dot(a));
            let (lb, vb) = eigh(&b.dot(&herm(&b)));
            let rhs = herm(a).dot(target).dot(&herm(&b));
            let mut core = herm(&ua).dot(&rhs).dot(&vb);
            for ((r, c), v) in core.indexed_iter_mut() {
                *v /= la[r].max(0.0) * lb[c].max(0.0) + mu;
            }
            Ok(ua.dot(&core).dot(&herm(&vb)))
        }
        OperatorCase::General => {
            let f = op.assemble();
            let mut g = herm(&f).dot(&f);
            for k in 0..n * i {
                g[[k, k]] += Complex64::new(mu, 0.0);
            }
            let (w, v) = eigh(&g);
            let rhs = herm(&v).dot(&herm(&f).dot(&vectorize(target)));
            let scaled: CVec = rhs.iter().zip(w.iter()).map(|(r, l)| r / *l).collect();
            Ok(unvectorize(&v.dot(&scaled), n, i))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, fro_norm};
    use crate::operators::MixingOperator;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn inst_with(op: MixingOperator, rng: &mut ChaCha8Rng) -> ProblemInstance {
        let (m1, m2) = op.output_dim();
        let y = Array2::from_shape_fn((m1, m2), |_| rng.random_range(0.0..3.0));
        ProblemInstance::new(y, Arc::new(op), 1).unwrap()
    }

    #[test]
    fn single_snapshot_identity() {
        let op = MixingOperator::snapshot_selectors(vec![CMat::eye(3), CMat::eye(3)]).unwrap();
        let y = ndarray::array![[3.0, 0.0], [4.0, 1.0], [0.0, 0.0]];
        let inst = ProblemInstance::new(y, Arc::new(op), 1).unwrap();
        assert!((lambda_max(&inst) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn identity_temporal_factor_formulas_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = complex_gaussian(&mut rng, (5, 3));
        let ti = inst_with(MixingOperator::spatial_only(a.clone(), 4).unwrap(), &mut rng);
        let sel = ProblemInstance::new(
            ti.y().clone(),
            Arc::new(MixingOperator::snapshot_selectors(vec![a.clone(); 4]).unwrap()),
            1,
        )
        .unwrap();
        assert!((lambda_max(&ti) - lambda_max(&sel)).abs() < 1e-10 * lambda_max(&ti));
        let want = extreme_sv(&a).0 * column_norms(ti.y()).iter().fold(0.0f64, |m, &v| m.max(v));
        assert!((lambda_max(&ti) - want).abs() < 1e-10 * want);
    }

    #[test]
    fn identity_operator_rho_bound() {
        let op = MixingOperator::general(vec![CMat::eye(2)], vec![CMat::eye(3)]).unwrap();
        let y = ndarray::array![[1.0, 2.0, 0.0], [2.0, 0.0, 4.0]];
        let inst = ProblemInstance::new(y.clone(), Arc::new(op), 1).unwrap().with_mu(1.0);
        assert!((rho_max_general(&inst).unwrap() - fro(&y) / 2.0).abs() < 1e-12);
        // The identity temporal factor also admits the per-snapshot bound.
        assert!((rho_max(&inst).unwrap() - 4.0 / 2.0).abs() < 1e-12);
        assert!((mu_default(&inst) - 1.0).abs() < 1e-12);
        assert!(rho_max_general(&inst.clone().with_mu(0.0)).is_err());
        // Increasing μ approaches σ_max·‖Y‖ from below.
        let mut last = 0.0;
        for mu in [0.1, 1.0, 10.0, 1e3, 1e6] {
            let r = rho_max_general(&inst.clone().with_mu(mu)).unwrap();
            assert!(r > last);
            last = r;
        }
        assert!((last - fro(&y)).abs() < 1e-5 * fro(&y));
    }

    #[test]
    fn mu_default_uses_kronecker_spectrum() {
        let a = CMat::eye(3).mapv(|v| v * 2.0);
        let op = MixingOperator::spatial_only(a, 4).unwrap();
        let inst = ProblemInstance::new(Array2::zeros((3, 4)), Arc::new(op), 1).unwrap();
        assert!((mu_default(&inst) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn grid_is_geometric() {
        let g = grid(2.0, &[0, 1, 2]);
        assert_eq!(g, vec![2.0, 1.5, 1.125]);
    }

    #[test]
    fn zero_code_signal_solves_normal_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ops = vec![
            MixingOperator::time_invariant(
                complex_gaussian(&mut rng, (5, 3)),
                complex_gaussian(&mut rng, (4, 6)),
            )
            .unwrap(),
            MixingOperator::snapshot_selectors(
                (0..4).map(|_| complex_gaussian(&mut rng, (5, 3))).collect(),
            )
            .unwrap(),
            MixingOperator::general(
                (0..2).map(|_| complex_gaussian(&mut rng, (5, 3))).collect(),
                (0..2).map(|_| complex_gaussian(&mut rng, (4, 6))).collect(),
            )
            .unwrap(),
        ];
        for op in ops {
            let inst = inst_with(op, &mut rng).with_mu(0.7);
            let (m1, m2) = inst.op().output_dim();
            let t = complex_gaussian(&mut rng, (m1, m2));
            let x = zero_code_signal(&inst, &t).unwrap();
            let g = inst.op().adjoint(&(inst.op().apply(&x).unwrap() - &t)).unwrap()
                + x.mapv(|v| v * 0.7);
            assert!(fro_norm(&g) < 1e-10 * fro_norm(&t));
        }
    }

    fn random_atoms(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CMat {
        let mut d = complex_gaussian(rng, (n, p));
        for mut c in d.columns_mut() {
            let r: f64 = rng.random_range(0.0..1.0);
            let nn = vec_norm(c.view());
            c.mapv_inplace(|v| v * r / nn);
        }
        d
    }

    fn random_ops(rng: &mut ChaCha8Rng) -> Vec<MixingOperator> {
        vec![
            MixingOperator::general(
                (0..2).map(|_| complex_gaussian(rng, (6, 4))).collect(),
                (0..2).map(|_| complex_gaussian(rng, (5, 7))).collect(),
            )
            .unwrap(),
            MixingOperator::time_invariant(
                complex_gaussian(rng, (6, 4)),
                complex_gaussian(rng, (5, 7)),
            )
            .unwrap(),
            MixingOperator::spatial_only(complex_gaussian(rng, (6, 4)), 5).unwrap(),
            MixingOperator::snapshot_selectors(
                (0..5).map(|_| complex_gaussian(rng, (6, 4))).collect(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn lambda_bounds_certified_at_zero_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for op in random_ops(&mut rng) {
            let mut inst = inst_with(op, &mut rng);
            inst = ProblemInstance::new(inst.y().clone(), inst.op_arc(), 3).unwrap();
            let special = lambda_max(&inst);
            let general = lambda_max_general(&inst);
            assert!(special <= general * (1.0 + 1e-12));
            let (_, _, n, i) = inst.dims();
            let lam_inst = inst.clone().with_lambda(special);
            for _ in 0..50 {
                let d = random_atoms(&mut rng, n, 3);
                let it = crate::problem::Iterate::compact(&lam_inst, d, CMat::zeros((3, i))).unwrap();
                let (_, gz) = crate::problem::gradients_cprdl(&lam_inst, &it.d, &it.z, &it).unwrap();
                assert!(gz.iter().all(|g| g.norm() <= special * (1.0 + 1e-12)));
            }
        }
    }

    #[test]
    fn lambda_max_makes_zero_codes_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for op in random_ops(&mut rng) {
            let inst = inst_with(op, &mut rng);
            let inst = inst.clone().with_lambda(lambda_max(&inst));
            let (_, _, n, i) = inst.dims();
            for _ in 0..20 {
                let d = random_atoms(&mut rng, n, 1);
                let it = crate::problem::Iterate::compact(&inst, d, CMat::zeros((1, i))).unwrap();
                let (r_d, r_z) = crate::compact::stationarity_residual(&inst, &it);
                assert_eq!((r_d, r_z), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn rho_bounds_certified_by_zero_code_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for op in random_ops(&mut rng) {
            let inst = inst_with(op, &mut rng);
            let inst = ProblemInstance::new(inst.y().clone(), inst.op_arc(), 3)
                .unwrap()
                .with_mu(0.3);
            let special = rho_max(&inst).unwrap();
            let general = rho_max_general(&inst).unwrap();
            assert!(special <= general * (1.0 + 1e-12));
            let inst = inst.with_rho(special);
            let (m1, m2, n, i) = inst.dims();
            for _ in 0..50 {
                // Any anchor phase: the bound only sees |Y⁽ᵗ⁾| = Y.
                let phase = complex_gaussian(&mut rng, (m1, m2));
                let target = ndarray::Zip::from(inst.y())
                    .and(&phase)
                    .map_collect(|&y, &p| crate::linalg::unit_phase(p) * y);
                let x = zero_code_signal(&inst, &target).unwrap();
                let d = random_atoms(&mut rng, n, 3);
                let it = crate::problem::Iterate::conventional(&inst, x, d, CMat::zeros((3, i)))
                    .unwrap()
                    .with_target(target)
                    .unwrap();
                let (_, _, gz) = crate::problem::gradients_prdl(
                    &inst, it.x.as_ref().unwrap(), &it.d, &it.z, &it,
                )
                .unwrap();
                assert!(gz.iter().all(|g| g.norm() <= special * (1.0 + 1e-10)));
                let (_, r_z, r_x) = crate::scaphase::stationarity_residual(&inst, &it);
                assert!(r_x < 1e-9 * fro(inst.y()));
                assert!(r_z < 1e-9 * fro(inst.y()));
            }
        }
    }

    #[test]
    fn mu_default_matches_spectral_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for op in random_ops(&mut rng) {
            let sb = op.spectral_bounds();
            let inst = inst_with(op, &mut rng);
            assert_eq!(mu_default(&inst), sb.sigma_min_nonzero.powi(2));
        }
    }
}
