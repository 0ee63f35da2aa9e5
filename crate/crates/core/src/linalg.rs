//! Dense complex helpers shared by the operator, subproblem and solver code.
//!
//! Matrices are `ndarray` arrays of `Complex64`. Decompositions go through
//! `nalgebra`, which handles complex SVD and Hermitian eigenproblems natively.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = Array2<Complex64>;
pub type CVec = Array1<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Sum of squared moduli.
pub fn norm_sq<'a, I>(it: I) -> f64
where
    I: IntoIterator<Item = &'a Complex64>,
{
    it.into_iter().map(|z| z.norm_sqr()).sum()
}

pub fn fro_norm_sq(a: &CMat) -> f64 {
    norm_sq(a.iter())
}

pub fn fro_norm(a: &CMat) -> f64 {
    fro_norm_sq(a).sqrt()
}

pub fn vec_norm(v: ArrayView1<Complex64>) -> f64 {
    norm_sq(v.iter()).sqrt()
}

/// Trace inner product `tr(aᴴ b)`.
pub fn inner(a: &CMat, b: &CMat) -> Complex64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// `Re tr(aᴴ b)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

pub fn l1_norm(a: &CMat) -> f64 {
    a.iter().map(|&z| modulus(z)).sum()
}

/// Conjugate transpose.
pub fn herm(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn herm_view(a: ArrayView2<Complex64>) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// `|z|` via `sqrt(re² + im²)`; much cheaper than `hypot` and exact enough
/// away from the extremes of the exponent range.
#[inline]
pub fn modulus(z: Complex64) -> f64 {
    z.norm_sqr().sqrt()
}

/// Unit-modulus phase factor `exp(i·arg z)`, with `arg 0 := 0`.
#[inline]
pub fn unit_phase(z: Complex64) -> Complex64 {
    let r = modulus(z);
    if r > 0.0 {
        z / r
    } else {
        ONE
    }
}

/// Complex soft-thresholding `S_t(z) = max(|z| − t, 0)·exp(i·arg z)`.
#[inline]
pub fn soft_threshold(z: Complex64, t: f64) -> Complex64 {
    let r = modulus(z);
    if r <= t {
        ZERO
    } else {
        z * ((r - t) / r)
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMat::zeros((ar * br, ac * bc));
    for ((i, j), &aij) in a.indexed_iter() {
        if aij == ZERO {
            continue;
        }
        out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .zip_mut_with(b, |o, &bv| *o = aij * bv);
    }
    out
}

/// Column-major vectorization, `vec(X)`.
pub fn vectorize(a: &CMat) -> CVec {
    a.t().iter().copied().collect()
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> CMat {
    assert_eq!(v.len(), rows * cols);
    CMat::from_shape_fn((rows, cols), |(i, j)| v[j * rows + i])
}

/// I.i.d. standard complex Gaussian entries, `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize)) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_shape_simple_fn(shape, || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Scale every column with nonzero norm to unit ℓ₂ norm.
pub fn normalize_columns(a: &mut CMat) {
    for mut col in a.axis_iter_mut(Axis(1)) {
        let n = vec_norm(col.view());
        if n > 0.0 {
            col.mapv_inplace(|z| z / n);
        }
    }
}

pub fn column_norms_sq(a: &CMat) -> Array1<f64> {
    a.axis_iter(Axis(1)).map(|c| norm_sq(c.iter())).collect()
}

pub fn row_norms_sq(a: &CMat) -> Array1<f64> {
    a.axis_iter(Axis(0)).map(|r| norm_sq(r.iter())).collect()
}

/// `a += s · b`.
pub fn axpy(a: &mut CMat, s: Complex64, b: &CMat) {
    Zip::from(a).and(b).for_each(|x, &y| *x += s * y);
}

/// Relative difference `‖a − b‖ / max(‖b‖, tiny)`.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let d = (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    d / fro_norm(b).max(f64::MIN_POSITIVE)
}

/// Threshold below which singular values count as zero.
pub fn rank_cutoff(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

fn to_na(a: &CMat) -> DMatrix<Complex64> {
    let (m, n) = a.dim();
    DMatrix::from_fn(m, n, |i, j| a[[i, j]])
}

fn from_na(a: &DMatrix<Complex64>) -> CMat {
    CMat::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Thin SVD `a = U·diag(s)·Vᴴ` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub s: Array1<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn new(a: &CMat) -> Self {
        let (m, n) = a.dim();
        if m == 0 || n == 0 {
            return Svd {
                u: CMat::zeros((m, 0)),
                s: Array1::zeros(0),
                v: CMat::zeros((n, 0)),
            };
        }
        let svd = to_na(a).svd(true, true);
        let u = from_na(svd.u.as_ref().expect("u requested"));
        let vt = from_na(svd.v_t.as_ref().expect("v_t requested"));
        let s: Vec<f64> = svd.singular_values.iter().copied().collect();
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let k = order.len();
        let mut us = CMat::zeros((m, k));
        let mut vs = CMat::zeros((n, k));
        let mut ss = Array1::zeros(k);
        for (dst, &src) in order.iter().enumerate() {
            us.column_mut(dst).assign(&u.column(src));
            vs.column_mut(dst).assign(&vt.row(src).mapv(|z| z.conj()));
            ss[dst] = s[src];
        }
        Svd { u: us, s: ss, v: vs }
    }

    pub fn sigma_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    /// Drop singular triplets under the numerical-rank cutoff.
    pub fn truncated(mut self, rows: usize, cols: usize) -> Self {
        let cut = rank_cutoff(rows, cols, self.sigma_max());
        let r = self.s.iter().take_while(|&&s| s > cut).count();
        if r < self.s.len() {
            self.u = self.u.slice(ndarray::s![.., ..r]).to_owned();
            self.v = self.v.slice(ndarray::s![.., ..r]).to_owned();
            self.s = self.s.slice(ndarray::s![..r]).to_owned();
        }
        self
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// Singular values only, sorted descending.
pub fn singular_values(a: &CMat) -> Array1<f64> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Array1::zeros(0);
    }
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Array1::from(s)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMat) -> (Array1<f64>, CMat) {
    let n = a.nrows();
    let eig = to_na(a).symmetric_eigen();
    let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let vecs = from_na(&eig.eigenvectors);
    let mut out = CMat::zeros((n, n));
    let mut w = Array1::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        out.column_mut(dst).assign(&vecs.column(src));
        w[dst] = vals[src];
    }
    (w, out)
}

/// Moore–Penrose pseudoinverse with the numerical-rank rule.
pub fn pinv(a: &CMat) -> CMat {
    let (m, n) = a.dim();
    let svd = Svd::new(a).truncated(m, n);
    let mut vs = svd.v.clone();
    for (mut col, &s) in vs.axis_iter_mut(Axis(1)).zip(svd.s.iter()) {
        col.mapv_inplace(|z| z / s);
    }
    vs.dot(&herm(&svd.u))
}
