//! Problem instances, objectives and their smooth majorizers.
//!
//! Two formulations share one instance type:
//!
//! * compact: `½‖Y − |F(DZ)|‖² + λ‖Z‖₁` over `D ∈ 𝒟`, `Z`;
//! * conventional: `½‖Y − |F(X)|‖² + (μ/2)‖X − DZ‖² + ρ‖Z‖₁` over `X`, `D ∈ 𝒟`, `Z`,
//!
//! where `𝒟` is the set of dictionaries with columns in the unit ℓ₂ ball.
//! The data term is majorized at an anchor point by replacing `Y` with the
//! phase-matched target `Y ⊙ exp(i·arg F(·))`, which gives a smooth quadratic.
//!
//! Gradients follow the Wirtinger convention `∇f = 2·∂f/∂x̄`, so the
//! directional derivative along `R` is `Re⟨∇f, R⟩`.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::error::{check_shape, Error, Result};
use crate::linalg::{fro_norm_sq, herm, l1_norm, modulus, rel_diff, unit_phase, CMat};
use crate::operators::MixingOperator;

/// Measurements, operator and regularization weights.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    y: Array2<f64>,
    op: Arc<MixingOperator>,
    atoms: usize,
    /// Sparsity weight of the compact formulation.
    pub lambda: f64,
    /// Coupling weight of the conventional formulation.
    pub mu: f64,
    /// Sparsity weight of the conventional formulation.
    pub rho: f64,
}

impl ProblemInstance {
    pub fn new(y: Array2<f64>, op: Arc<MixingOperator>, atoms: usize) -> Result<Self> {
        check_shape("measurements", op.output_dim(), y.dim())?;
        if let Some(bad) = y.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Parameter(format!(
                "measurements must be finite and nonnegative, found {bad}"
            )));
        }
        let (_, snapshots) = op.input_dim();
        if atoms == 0 || atoms >= snapshots {
            return Err(Error::Parameter(format!(
                "dictionary size must satisfy 0 < P < I, got P = {atoms}, I = {snapshots}"
            )));
        }
        Ok(Self {
            y,
            op,
            atoms,
            lambda: 0.0,
            mu: 0.0,
            rho: 0.0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn op(&self) -> &MixingOperator {
        &self.op
    }

    pub fn op_arc(&self) -> Arc<MixingOperator> {
        Arc::clone(&self.op)
    }

    /// Dictionary size `P`.
    pub fn atoms(&self) -> usize {
        self.atoms
    }

    /// `(M1, M2, N, I)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let (m1, m2) = self.op.output_dim();
        let (n, i) = self.op.input_dim();
        (m1, m2, n, i)
    }

    pub(crate) fn check_dz(&self, d: &CMat, z: &CMat) -> Result<()> {
        let (_, _, n, i) = self.dims();
        check_shape("dictionary", (n, self.atoms), d.dim())?;
        check_shape("codes", (self.atoms, i), z.dim())
    }

    pub(crate) fn check_x(&self, x: &CMat) -> Result<()> {
        let (_, _, n, i) = self.dims();
        check_shape("signal", (n, i), x.dim())
    }
}

/// `Y ⊙ exp(i·arg(image))`, with `arg 0 := 0`.
pub fn phase_target(y: &Array2<f64>, image: &CMat) -> CMat {
    let mut out = CMat::zeros(image.dim());
    Zip::from(&mut out)
        .and(y)
        .and(image)
        .for_each(|o, &yv, &f| *o = unit_phase(f) * yv);
    out
}

/// `½‖Y − |image|‖²`.
pub fn data_term(y: &Array2<f64>, image: &CMat) -> f64 {
    let mut acc = 0.0;
    Zip::from(y).and(image).for_each(|&yv, f| {
        let r = yv - modulus(*f);
        acc += r * r;
    });
    0.5 * acc
}

/// `½‖target − image‖²`.
pub(crate) fn surrogate_term(target: &CMat, image: &CMat) -> f64 {
    let mut acc = 0.0;
    Zip::from(target)
        .and(image)
        .for_each(|t, f| acc += (t - f).norm_sqr());
    0.5 * acc
}

pub fn objective_cprdl(inst: &ProblemInstance, d: &CMat, z: &CMat) -> Result<f64> {
    inst.check_dz(d, z)?;
    let image = inst.op.apply_unchecked(&d.dot(z));
    Ok(data_term(&inst.y, &image) + inst.lambda * l1_norm(z))
}

pub fn objective_prdl(inst: &ProblemInstance, x: &CMat, d: &CMat, z: &CMat) -> Result<f64> {
    inst.check_dz(d, z)?;
    inst.check_x(x)?;
    let image = inst.op.apply_unchecked(x);
    let coupling = fro_norm_sq(&(x - &d.dot(z)));
    Ok(data_term(&inst.y, &image) + 0.5 * inst.mu * coupling + inst.rho * l1_norm(z))
}

/// A point of either formulation together with its cached operator image
/// and the phase-matched target built from that image.
///
/// For the compact formulation the image is `F(DZ)`; for the conventional one
/// it is `F(X)`.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub d: CMat,
    pub z: CMat,
    pub x: Option<CMat>,
    image: CMat,
    target: CMat,
}

impl Iterate {
    pub fn compact(inst: &ProblemInstance, d: CMat, z: CMat) -> Result<Self> {
        inst.check_dz(&d, &z)?;
        let image = inst.op.apply_unchecked(&d.dot(&z));
        let target = phase_target(&inst.y, &image);
        Ok(Self {
            d,
            z,
            x: None,
            image,
            target,
        })
    }

    pub fn conventional(inst: &ProblemInstance, x: CMat, d: CMat, z: CMat) -> Result<Self> {
        inst.check_dz(&d, &z)?;
        inst.check_x(&x)?;
        let image = inst.op.apply_unchecked(&x);
        let target = phase_target(&inst.y, &image);
        Ok(Self {
            d,
            z,
            x: Some(x),
            image,
            target,
        })
    }

    /// Cached `F(DZ)` or `F(X)`.
    pub fn image(&self) -> &CMat {
        &self.image
    }

    /// `Y⁽ᵗ⁾`, the phase-matched target at this point.
    pub fn target(&self) -> &CMat {
        &self.target
    }

    /// Keep the variables but anchor the majorizer elsewhere: `target`
    /// replaces `Y⁽ᵗ⁾`.
    pub fn with_target(mut self, target: CMat) -> Result<Self> {
        check_shape("target", self.image.dim(), target.dim())?;
        self.target = target;
        Ok(self)
    }

    /// Replace the cached image (e.g. after a recursive update) and rebuild
    /// the target from it.
    pub(crate) fn set_image(&mut self, inst: &ProblemInstance, image: CMat) {
        self.target = phase_target(&inst.y, &image);
        self.image = image;
    }

    /// Recompute the image from the variables.
    pub fn refresh(&mut self, inst: &ProblemInstance) {
        let image = self.fresh_image(inst);
        self.set_image(inst, image);
    }

    fn fresh_image(&self, inst: &ProblemInstance) -> CMat {
        match &self.x {
            Some(x) => inst.op.apply_unchecked(x),
            None => inst.op.apply_unchecked(&self.d.dot(&self.z)),
        }
    }

    /// Relative drift between the cached image and a fresh evaluation.
    pub fn cache_drift(&self, inst: &ProblemInstance) -> f64 {
        rel_diff(&self.image, &self.fresh_image(inst))
    }

    /// Objective value of the formulation this iterate belongs to.
    pub fn objective(&self, inst: &ProblemInstance) -> f64 {
        let data = data_term(&inst.y, &self.image);
        match &self.x {
            Some(x) => {
                data + 0.5 * inst.mu * fro_norm_sq(&(x - &self.d.dot(&self.z)))
                    + inst.rho * l1_norm(&self.z)
            }
            None => data + inst.lambda * l1_norm(&self.z),
        }
    }

    /// Largest atom norm.
    pub fn max_atom_norm(&self) -> f64 {
        self.d
            .columns()
            .into_iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `½‖Y⁽ᵗ⁾ − F(DZ)‖²` with `Y⁽ᵗ⁾` taken from `anchor`.
pub fn majorizer_cprdl(
    inst: &ProblemInstance,
    d: &CMat,
    z: &CMat,
    anchor: &Iterate,
) -> Result<f64> {
    inst.check_dz(d, z)?;
    let image = inst.op.apply_unchecked(&d.dot(z));
    Ok(surrogate_term(&anchor.target, &image))
}

/// `(∇_D, ∇_Z)` of the compact majorizer:
/// `∇_D = F*(F(DZ) − Y⁽ᵗ⁾)·Zᴴ`, `∇_Z = Dᴴ·F*(F(DZ) − Y⁽ᵗ⁾)`.
pub fn gradients_cprdl(
    inst: &ProblemInstance,
    d: &CMat,
    z: &CMat,
    anchor: &Iterate,
) -> Result<(CMat, CMat)> {
    inst.check_dz(d, z)?;
    let residual = inst.op.apply_unchecked(&d.dot(z)) - &anchor.target;
    Ok(compact_gradients(inst.op(), &residual, d, z))
}

pub(crate) fn compact_gradients(
    op: &MixingOperator,
    residual: &CMat,
    d: &CMat,
    z: &CMat,
) -> (CMat, CMat) {
    let g = op.adjoint_unchecked(residual);
    (g.dot(&herm(z)), herm(d).dot(&g))
}

/// `½‖Y⁽ᵗ⁾ − F(X)‖² + (μ/2)‖X − DZ‖²` with `Y⁽ᵗ⁾` from `anchor`.
pub fn majorizer_prdl(
    inst: &ProblemInstance,
    x: &CMat,
    d: &CMat,
    z: &CMat,
    anchor: &Iterate,
) -> Result<f64> {
    inst.check_dz(d, z)?;
    inst.check_x(x)?;
    let image = inst.op.apply_unchecked(x);
    let coupling = fro_norm_sq(&(x - &d.dot(z)));
    Ok(surrogate_term(&anchor.target, &image) + 0.5 * inst.mu * coupling)
}

/// Partial gradients of the conventional majorizer, `(∇_X, ∇_D, ∇_Z)`.
pub fn gradients_prdl(
    inst: &ProblemInstance,
    x: &CMat,
    d: &CMat,
    z: &CMat,
    anchor: &Iterate,
) -> Result<(CMat, CMat, CMat)> {
    inst.check_dz(d, z)?;
    inst.check_x(x)?;
    let residual = inst.op.apply_unchecked(x) - &anchor.target;
    Ok(conventional_gradients(inst, &residual, x, d, z))
}

pub(crate) fn conventional_gradients(
    inst: &ProblemInstance,
    residual: &CMat,
    x: &CMat,
    d: &CMat,
    z: &CMat,
) -> (CMat, CMat, CMat) {
    let mismatch = d.dot(z) - x;
    let mut gx = inst.op.adjoint_unchecked(residual);
    gx.scaled_add(Complex64::new(-inst.mu, 0.0), &mismatch);
    let gd = mismatch.dot(&herm(z)).mapv(|v| v * inst.mu);
    let gz = herm(d).dot(&mismatch).mapv(|v| v * inst.mu);
    (gx, gd, gz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, re_inner, ZERO};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_instance(rng: &mut ChaCha8Rng, general: bool) -> ProblemInstance {
        let op = if general {
            let a: Vec<_> = (0..2).map(|_| complex_gaussian(rng, (5, 3))).collect();
            let b: Vec<_> = (0..2).map(|_| complex_gaussian(rng, (6, 4))).collect();
            MixingOperator::general(a, b).unwrap()
        } else {
            MixingOperator::spatial_only(complex_gaussian(rng, (5, 3)), 6).unwrap()
        };
        let (m1, m2) = op.output_dim();
        let y = Array2::from_shape_fn((m1, m2), |_| rng.random_range(0.0..2.0));
        ProblemInstance::new(y, Arc::new(op), 2)
            .unwrap()
            .with_lambda(0.3)
            .with_mu(0.7)
            .with_rho(0.2)
    }

    fn random_dict(rng: &mut ChaCha8Rng, n: usize, p: usize) -> CMat {
        let mut d = complex_gaussian(rng, (n, p));
        crate::linalg::normalize_columns(&mut d);
        d
    }

    #[test]
    fn rejects_negative_measurements_and_large_dictionary() {
        let op = Arc::new(MixingOperator::spatial_only(CMat::eye(2), 3).unwrap());
        let mut y = Array2::zeros((2, 3));
        y[[0, 0]] = -1.0;
        assert!(ProblemInstance::new(y, Arc::clone(&op), 1).is_err());
        assert!(ProblemInstance::new(Array2::zeros((2, 3)), op, 3).is_err());
    }

    #[test]
    fn objective_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let inst = small_instance(&mut rng, true);
        let (_, _, n, i) = inst.dims();
        let d = random_dict(&mut rng, n, 2);
        let z = complex_gaussian(&mut rng, (2, i));
        let x = complex_gaussian(&mut rng, (n, i));

        let f = inst.op().assemble();
        let dz = d.dot(&z);
        let (m1, m2) = inst.op().output_dim();
        let mut data = 0.0;
        let mut data_x = 0.0;
        for col in 0..m2 {
            for row in 0..m1 {
                let r = row + col * m1;
                let mut acc = ZERO;
                let mut acc_x = ZERO;
                for q in 0..i {
                    for p in 0..n {
                        acc += f[[r, p + q * n]] * dz[[p, q]];
                        acc_x += f[[r, p + q * n]] * x[[p, q]];
                    }
                }
                data += (inst.y()[[row, col]] - acc.norm()).powi(2);
                data_x += (inst.y()[[row, col]] - acc_x.norm()).powi(2);
            }
        }
        let l1: f64 = z.iter().map(|v| v.norm()).sum();
        let mut coupling = 0.0;
        for (a, b) in x.iter().zip(dz.iter()) {
            coupling += (a - b).norm_sqr();
        }
        let want = 0.5 * data + 0.3 * l1;
        let got = objective_cprdl(&inst, &d, &z).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
        let want = 0.5 * data_x + 0.35 * coupling + 0.2 * l1;
        let got = objective_prdl(&inst, &x, &d, &z).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn exact_fit_and_zero_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let op = MixingOperator::spatial_only(complex_gaussian(&mut rng, (5, 3)), 6).unwrap();
        let d = random_dict(&mut rng, 3, 2);
        let z = complex_gaussian(&mut rng, (2, 6));
        let y = op.apply(&d.dot(&z)).unwrap().mapv(|v| v.norm());
        let inst = ProblemInstance::new(y.clone(), Arc::new(op), 2).unwrap();
        assert!(objective_cprdl(&inst, &d, &z).unwrap() < 1e-24);
        let x = d.dot(&z);
        assert!(objective_prdl(&inst, &x, &d, &z).unwrap() < 1e-24);
        let zero = CMat::zeros((2, 6));
        let half = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        assert!((objective_cprdl(&inst, &d, &zero).unwrap() - half).abs() < 1e-12 * half);
    }

    #[test]
    fn majorizer_is_tight_and_above() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let inst = small_instance(&mut rng, false);
        let (_, _, n, i) = inst.dims();
        let d0 = random_dict(&mut rng, n, 2);
        let z0 = complex_gaussian(&mut rng, (2, i));
        let anchor = Iterate::compact(&inst, d0.clone(), z0.clone()).unwrap();
        let at = majorizer_cprdl(&inst, &d0, &z0, &anchor).unwrap();
        let data = objective_cprdl(&inst, &d0, &z0).unwrap() - inst.lambda * l1_norm(&z0);
        assert!((at - data).abs() <= 1e-12 * data.max(1.0));
        for _ in 0..20 {
            let d = random_dict(&mut rng, n, 2);
            let z = complex_gaussian(&mut rng, (2, i));
            let m = majorizer_cprdl(&inst, &d, &z, &anchor).unwrap();
            let f = objective_cprdl(&inst, &d, &z).unwrap() - inst.lambda * l1_norm(&z);
            assert!(m >= f - 1e-10 * f.max(1.0));
        }
    }

    #[test]
    fn zero_phase_anchor_gives_plain_target() {
        // Identity operator with a real positive anchor: target is Y itself.
        let op = MixingOperator::spatial_only(CMat::eye(2), 3).unwrap();
        let y = Array2::from_shape_fn((2, 3), |(r, c)| (r + c) as f64 + 0.5);
        let inst = ProblemInstance::new(y.clone(), Arc::new(op), 2).unwrap();
        let d = CMat::eye(2);
        let z = CMat::from_elem((2, 3), Complex64::new(1.0, 0.0));
        let anchor = Iterate::compact(&inst, d, z).unwrap();
        assert_eq!(anchor.target(), &y.mapv(|v| Complex64::new(v, 0.0)));
    }

    #[test]
    fn gradients_vanish_at_exact_fit_and_zero_codes() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let inst = small_instance(&mut rng, true);
        let (_, _, n, i) = inst.dims();
        let d = random_dict(&mut rng, n, 2);
        let z = complex_gaussian(&mut rng, (2, i));
        let anchor = Iterate::compact(&inst, d.clone(), z.clone()).unwrap();
        // At the anchor with Y := |F(DZ)| the fit is exact.
        let y = anchor.image().mapv(|v| v.norm());
        let exact = ProblemInstance::new(y, inst.op_arc(), 2).unwrap();
        let anchor = Iterate::compact(&exact, d.clone(), z.clone()).unwrap();
        let (gd, gz) = gradients_cprdl(&exact, &d, &z, &anchor).unwrap();
        assert!(fro_norm_sq(&gd) < 1e-20 && fro_norm_sq(&gz) < 1e-20);

        let zero = CMat::zeros((2, i));
        let anchor = Iterate::compact(&inst, d.clone(), zero.clone()).unwrap();
        let (gd, _) = gradients_cprdl(&inst, &d, &zero, &anchor).unwrap();
        assert_eq!(fro_norm_sq(&gd), 0.0);

        let x = complex_gaussian(&mut rng, (n, i));
        let anchor = Iterate::conventional(&inst.clone().with_mu(0.0), x.clone(), d.clone(), z.clone())
            .unwrap();
        let (_, gd, gz) =
            gradients_prdl(&inst.clone().with_mu(0.0), &x, &d, &z, &anchor).unwrap();
        assert_eq!(fro_norm_sq(&gd) + fro_norm_sq(&gz), 0.0);
    }

    /// Central differences of `f` along real and imaginary parts of every
    /// entry; returns the Wirtinger gradient `∂f/∂re + i·∂f/∂im`.
    fn fd_gradient(mut f: impl FnMut(&CMat) -> f64, at: &CMat, h: f64) -> CMat {
        let mut g = CMat::zeros(at.dim());
        let mut probe = at.clone();
        for idx in 0..at.len() {
            let (r, c) = (idx / at.ncols(), idx % at.ncols());
            let base = probe[[r, c]];
            probe[[r, c]] = base + Complex64::new(h, 0.0);
            let fp = f(&probe);
            probe[[r, c]] = base - Complex64::new(h, 0.0);
            let fm = f(&probe);
            probe[[r, c]] = base + Complex64::new(0.0, h);
            let gp = f(&probe);
            probe[[r, c]] = base - Complex64::new(0.0, h);
            let gm = f(&probe);
            probe[[r, c]] = base;
            g[[r, c]] = Complex64::new((fp - fm) / (2.0 * h), (gp - gm) / (2.0 * h));
        }
        g
    }

    fn rel(a: &CMat, b: &CMat) -> f64 {
        fro_norm_sq(&(a - b)).sqrt() / fro_norm_sq(b).sqrt().max(1e-300)
    }

    #[test]
    fn compact_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let inst = small_instance(&mut rng, true);
        let (_, _, n, i) = inst.dims();
        let d0 = random_dict(&mut rng, n, 2);
        let z0 = complex_gaussian(&mut rng, (2, i));
        let anchor = Iterate::compact(&inst, d0, z0).unwrap();
        let d = complex_gaussian(&mut rng, (n, 2));
        let z = complex_gaussian(&mut rng, (2, i));
        let (gd, gz) = gradients_cprdl(&inst, &d, &z, &anchor).unwrap();
        let fd = fd_gradient(|dd| majorizer_cprdl(&inst, dd, &z, &anchor).unwrap(), &d, 1e-6);
        assert!(rel(&gd, &fd) < 1e-6, "{}", rel(&gd, &fd));
        let fz = fd_gradient(|zz| majorizer_cprdl(&inst, &d, zz, &anchor).unwrap(), &z, 1e-6);
        assert!(rel(&gz, &fz) < 1e-6);
        // Directional derivative along a real direction R is Re⟨∇, R⟩.
        let dir = complex_gaussian(&mut rng, (n, 2));
        let h = 1e-6;
        let fp = majorizer_cprdl(&inst, &(&d + &dir.mapv(|v| v * h)), &z, &anchor).unwrap();
        let fm = majorizer_cprdl(&inst, &(&d - &dir.mapv(|v| v * h)), &z, &anchor).unwrap();
        let dd = (fp - fm) / (2.0 * h);
        assert!((dd - re_inner(&gd, &dir)).abs() < 1e-6 * dd.abs().max(1.0));
    }

    #[test]
    fn conventional_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let inst = small_instance(&mut rng, false);
        let (_, _, n, i) = inst.dims();
        let x0 = complex_gaussian(&mut rng, (n, i));
        let d0 = random_dict(&mut rng, n, 2);
        let z0 = complex_gaussian(&mut rng, (2, i));
        let anchor = Iterate::conventional(&inst, x0, d0, z0).unwrap();
        let x = complex_gaussian(&mut rng, (n, i));
        let d = complex_gaussian(&mut rng, (n, 2));
        let z = complex_gaussian(&mut rng, (2, i));
        let (gx, gd, gz) = gradients_prdl(&inst, &x, &d, &z, &anchor).unwrap();
        let fx = fd_gradient(|v| majorizer_prdl(&inst, v, &d, &z, &anchor).unwrap(), &x, 1e-6);
        let fd = fd_gradient(|v| majorizer_prdl(&inst, &x, v, &z, &anchor).unwrap(), &d, 1e-6);
        let fz = fd_gradient(|v| majorizer_prdl(&inst, &x, &d, v, &anchor).unwrap(), &z, 1e-6);
        assert!(rel(&gx, &fx) < 1e-6);
        assert!(rel(&gd, &fd) < 1e-6);
        assert!(rel(&gz, &fz) < 1e-6);
    }

    #[test]
    fn cache_drift_is_zero_after_refresh() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let inst = small_instance(&mut rng, false);
        let (_, _, n, i) = inst.dims();
        let mut it = Iterate::compact(
            &inst,
            random_dict(&mut rng, n, 2),
            complex_gaussian(&mut rng, (2, i)),
        )
        .unwrap();
        it.refresh(&inst);
        assert!(it.cache_drift(&inst) <= 1e-15);
    }
}
