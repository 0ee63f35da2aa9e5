//! Structured complex mixing operators `F(X) = Σₖ Aₖ X Bₖ`.
//!
//! The operator is kept as its component list. The dense vectorized matrix
//! `F = Σₖ Bₖᵀ ⊗ Aₖ` is only assembled on request (small instances, oracles).
//! Indices are zero-based throughout: snapshot `i` is column `i` of `X`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Error, Result};
use crate::linalg::{
    self, column_norms_sq, herm, kron, norm_sq, rank_cutoff, row_norms_sq, singular_values, CMat,
    ONE, ZERO,
};

/// Which structure the operator has; selects the fast paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorCase {
    /// Arbitrary component list.
    General,
    /// A single component `A X B`.
    TimeInvariant,
    /// `K = I` components where `Bₖ` selects snapshot `k`.
    SnapshotSelectors,
}

/// Extreme singular values of the assembled `F`, counted over its domain
/// `C^{N·I}` (so `sigma_min` is zero whenever `F` has a nontrivial kernel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub sigma_min_nonzero: f64,
}

/// The `i`-th column block `Fᵢ ∈ C^{M1·M2 × N}` of `F`.
#[derive(Debug, Clone)]
pub struct OperatorBlock {
    pub index: usize,
    pub matrix: CMat,
}

#[derive(Debug, Clone)]
pub struct MixingOperator {
    case: OperatorCase,
    a: Vec<CMat>,
    a_h: Vec<CMat>,
    // Empty for `SnapshotSelectors`; the selectors are implicit.
    b: Vec<CMat>,
    b_h: Vec<CMat>,
    b_identity: bool,
    // Squared row norms of `B` when there is a single component.
    b_rows: Option<Array1<f64>>,
    m1: usize,
    m2: usize,
    n: usize,
    i: usize,
}

fn is_identity(b: &CMat) -> bool {
    b.is_square()
        && b.indexed_iter()
            .all(|((r, c), &z)| if r == c { z == ONE } else { z == ZERO })
}

impl MixingOperator {
    /// `F(X) = Σₖ Aₖ X Bₖ` with no structure assumed.
    pub fn general(a: Vec<CMat>, b: Vec<CMat>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::Parameter(format!(
                "need matching nonempty component lists, got {} A and {} B",
                a.len(),
                b.len()
            )));
        }
        let (m1, n) = a[0].dim();
        let (i, m2) = b[0].dim();
        for ak in &a {
            check_shape("operator A_k", (m1, n), ak.dim())?;
        }
        for bk in &b {
            check_shape("operator B_k", (i, m2), bk.dim())?;
        }
        let b_identity = b.len() == 1 && is_identity(&b[0]);
        let b_rows = (b.len() == 1).then(|| row_norms_sq(&b[0]));
        Ok(Self {
            case: OperatorCase::General,
            a_h: a.iter().map(herm).collect(),
            b_h: b.iter().map(herm).collect(),
            a,
            b,
            b_identity,
            b_rows,
            m1,
            m2,
            n,
            i,
        })
    }

    /// `F(X) = A X B`.
    pub fn time_invariant(a: CMat, b: CMat) -> Result<Self> {
        let mut op = Self::general(vec![a], vec![b])?;
        op.case = OperatorCase::TimeInvariant;
        Ok(op)
    }

    /// `F(X) = A X`, i.e. time-invariant with `B = I`.
    pub fn spatial_only(a: CMat, snapshots: usize) -> Result<Self> {
        Self::time_invariant(a, Array2::eye(snapshots).mapv(|x: f64| Complex64::new(x, 0.0)))
    }

    /// Column `i` of `F(X)` is `Aᵢ xᵢ`; one spatial mixer per snapshot.
    pub fn snapshot_selectors(a: Vec<CMat>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Parameter("need at least one snapshot mixer".into()));
        }
        let (m1, n) = a[0].dim();
        for ak in &a {
            check_shape("operator A_k", (m1, n), ak.dim())?;
        }
        let i = a.len();
        Ok(Self {
            case: OperatorCase::SnapshotSelectors,
            a_h: a.iter().map(herm).collect(),
            a,
            b: Vec::new(),
            b_h: Vec::new(),
            b_identity: false,
            b_rows: None,
            m1,
            m2: i,
            n,
            i,
        })
    }

    pub fn case(&self) -> OperatorCase {
        self.case
    }

    /// Number of components `K`.
    pub fn diversity(&self) -> usize {
        self.a.len()
    }

    /// `(M1, M2)`.
    pub fn output_dim(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// `(N, I)`.
    pub fn input_dim(&self) -> (usize, usize) {
        (self.n, self.i)
    }

    pub fn a(&self, k: usize) -> &CMat {
        &self.a[k]
    }

    pub fn a_list(&self) -> &[CMat] {
        &self.a
    }

    /// `B_k`, materialized for the selector case.
    pub fn b(&self, k: usize) -> CMat {
        match self.case {
            OperatorCase::SnapshotSelectors => {
                let mut b = CMat::zeros((self.i, self.m2));
                b[[k, k]] = ONE;
                b
            }
            _ => self.b[k].clone(),
        }
    }

    /// Stored temporal mixers (empty for the selector case).
    pub fn b_list(&self) -> &[CMat] {
        &self.b
    }

    /// True when the operator is `A X` with an identity temporal mixer.
    pub fn has_identity_b(&self) -> bool {
        self.b_identity
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        check_shape("apply input", (self.n, self.i), x.dim())?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: &CMat) -> CMat {
        match self.case {
            OperatorCase::SnapshotSelectors => {
                let mut out = CMat::zeros((self.m1, self.m2));
                for (k, ak) in self.a.iter().enumerate() {
                    out.column_mut(k).assign(&ak.dot(&x.column(k)));
                }
                out
            }
            _ => {
                let mut out = CMat::zeros((self.m1, self.m2));
                for (ak, bk) in self.a.iter().zip(&self.b) {
                    if self.b_identity {
                        out += &ak.dot(x);
                    } else if self.m1 * self.n * self.i + self.m1 * self.i * self.m2
                        <= self.n * self.i * self.m2 + self.m1 * self.n * self.m2
                    {
                        out += &ak.dot(x).dot(bk);
                    } else {
                        out += &ak.dot(&x.dot(bk));
                    }
                }
                out
            }
        }
    }

    /// `F*(Y) = Σₖ Aₖᴴ Y Bₖᴴ`.
    pub fn adjoint(&self, y: &CMat) -> Result<CMat> {
        check_shape("adjoint input", (self.m1, self.m2), y.dim())?;
        Ok(self.adjoint_unchecked(y))
    }

    pub(crate) fn adjoint_unchecked(&self, y: &CMat) -> CMat {
        match self.case {
            OperatorCase::SnapshotSelectors => {
                let mut out = CMat::zeros((self.n, self.i));
                for (k, ak_h) in self.a_h.iter().enumerate() {
                    out.column_mut(k).assign(&ak_h.dot(&y.column(k)));
                }
                out
            }
            _ => {
                let mut out = CMat::zeros((self.n, self.i));
                for (ak_h, bk_h) in self.a_h.iter().zip(&self.b_h) {
                    if self.b_identity {
                        out += &ak_h.dot(y);
                    } else if self.n * self.m1 * self.m2 + self.n * self.m2 * self.i
                        <= self.m1 * self.m2 * self.i + self.n * self.m1 * self.i
                    {
                        out += &ak_h.dot(y).dot(bk_h);
                    } else {
                        out += &ak_h.dot(&y.dot(bk_h));
                    }
                }
                out
            }
        }
    }

    /// Column block `Fᵢ = Σₖ bₖ,ᵢ:ᵀ ⊗ Aₖ`, so that `Fᵢ z = vec(F(z eᵢᵀ))`.
    pub fn block(&self, i: usize) -> Result<OperatorBlock> {
        if i >= self.i {
            return Err(Error::Index {
                index: i,
                len: self.i,
            });
        }
        let rows = self.m1 * self.m2;
        let mut f = CMat::zeros((rows, self.n));
        match self.case {
            OperatorCase::SnapshotSelectors => {
                f.slice_mut(s![i * self.m1..(i + 1) * self.m1, ..])
                    .assign(&self.a[i]);
            }
            _ => {
                for (ak, bk) in self.a.iter().zip(&self.b) {
                    let col = bk.row(i).to_owned().insert_axis(Axis(1));
                    f += &kron(&col, ak);
                }
            }
        }
        Ok(OperatorBlock {
            index: i,
            matrix: f,
        })
    }

    /// Dense `F = Σₖ Bₖᵀ ⊗ Aₖ` of shape `(M1·M2) × (N·I)`.
    pub fn assemble(&self) -> CMat {
        let mut f = CMat::zeros((self.m1 * self.m2, self.n * self.i));
        for i in 0..self.i {
            let blk = self.block(i).expect("index in range").matrix;
            f.slice_mut(s![.., i * self.n..(i + 1) * self.n])
                .assign(&blk);
        }
        f
    }

    /// `H = F·(z ⊗ I_N) = Σₖ (Bₖᵀ z) ⊗ Aₖ`, the matrix mapping an atom to the
    /// vectorized image of `d zᵀ`.
    pub fn atom_matrix(&self, z_row: ArrayView1<Complex64>) -> CMat {
        let mut h = CMat::zeros((self.m1 * self.m2, self.n));
        match self.case {
            OperatorCase::SnapshotSelectors => {
                for (k, ak) in self.a.iter().enumerate() {
                    if z_row[k] != ZERO {
                        h.slice_mut(s![k * self.m1..(k + 1) * self.m1, ..])
                            .assign(&ak.mapv(|v| v * z_row[k]));
                    }
                }
            }
            _ => {
                for (ak, bk) in self.a.iter().zip(&self.b) {
                    let w = bk.t().dot(&z_row).insert_axis(Axis(1));
                    h += &kron(&w, ak);
                }
            }
        }
        h
    }

    /// `‖Fᵢ d‖²` for every snapshot `i`.
    pub fn block_norms_sq(&self, d: ArrayView1<Complex64>) -> Array1<f64> {
        match self.case {
            OperatorCase::SnapshotSelectors => self
                .a
                .iter()
                .map(|ak| norm_sq(ak.dot(&d).iter()))
                .collect(),
            OperatorCase::TimeInvariant if self.b.len() == 1 => {
                let ad = norm_sq(self.a[0].dot(&d).iter());
                self.b_rows.as_ref().expect("single component").mapv(|r| r * ad)
            }
            _ => {
                let u: Vec<_> = self.a.iter().map(|ak| ak.dot(&d)).collect();
                let k = u.len();
                let mut gram = Array2::<Complex64>::zeros((k, k));
                for p in 0..k {
                    for q in 0..k {
                        gram[[p, q]] = u[p]
                            .iter()
                            .zip(u[q].iter())
                            .fold(ZERO, |acc, (x, y)| acc + x.conj() * y);
                    }
                }
                (0..self.i)
                    .map(|i| {
                        let mut acc = ZERO;
                        for p in 0..k {
                            for q in 0..k {
                                let bb = self.b[q]
                                    .row(i)
                                    .iter()
                                    .zip(self.b[p].row(i).iter())
                                    .fold(ZERO, |s, (x, y)| s + x * y.conj());
                                acc += gram[[p, q]] * bb;
                            }
                        }
                        acc.re.max(0.0)
                    })
                    .collect()
            }
        }
    }

    /// `‖Fᵢ dₚ‖²` for every atom column `p` of `d` (rows) and snapshot `i`.
    pub fn block_norms_sq_all(&self, d: &CMat) -> Array2<f64> {
        let mut out = Array2::zeros((d.ncols(), self.i));
        for (p, col) in d.axis_iter(Axis(1)).enumerate() {
            out.row_mut(p).assign(&self.block_norms_sq(col));
        }
        out
    }

    /// Squared norms of the columns of `F`, arranged as an `N × I` matrix
    /// (entry `(n, i)` is column `n + i·N`).
    pub fn column_norms_sq(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.i));
        match self.case {
            OperatorCase::SnapshotSelectors => {
                for (i, ak) in self.a.iter().enumerate() {
                    out.column_mut(i).assign(&column_norms_sq(ak));
                }
            }
            OperatorCase::TimeInvariant if self.b.len() == 1 => {
                let ca = column_norms_sq(&self.a[0]);
                let rb = self.b_rows.as_ref().expect("single component");
                for ((n, i), v) in out.indexed_iter_mut() {
                    *v = ca[n] * rb[i];
                }
            }
            _ => {
                for n in 0..self.n {
                    let mut e = Array1::zeros(self.n);
                    e[n] = ONE;
                    out.row_mut(n).assign(&self.block_norms_sq(e.view()));
                }
            }
        }
        out
    }

    /// Extreme singular values of `F`. Structured cases combine the factor
    /// spectra; the general case uses a dense decomposition (of `F` itself
    /// when small, else of the `NI × NI` Gram matrix `FᴴF`).
    pub fn spectral_bounds(&self) -> SpectralBounds {
        let rows = self.m1 * self.m2;
        let cols = self.n * self.i;
        match self.case {
            OperatorCase::TimeInvariant => {
                let a = domain_spectrum(&self.a[0], self.n);
                let bt = if self.b_identity {
                    FactorSpectrum {
                        max: 1.0,
                        min: 1.0,
                        min_nz: 1.0,
                        all: vec![1.0; self.i],
                    }
                } else {
                    domain_spectrum(&self.b[0].t().to_owned(), self.i)
                };
                SpectralBounds {
                    sigma_max: a.max * bt.max,
                    sigma_min: a.min * bt.min,
                    sigma_min_nonzero: a.min_nz * bt.min_nz,
                }
            }
            OperatorCase::SnapshotSelectors => {
                let mut out = SpectralBounds {
                    sigma_max: 0.0,
                    sigma_min: f64::INFINITY,
                    sigma_min_nonzero: f64::INFINITY,
                };
                let per: Vec<_> = self.a.iter().map(|a| domain_spectrum(a, self.n)).collect();
                let smax = per.iter().map(|s| s.max).fold(0.0, f64::max);
                let cut = rank_cutoff(rows, cols, smax);
                for s in &per {
                    out.sigma_max = out.sigma_max.max(s.max);
                    out.sigma_min = out.sigma_min.min(s.min);
                    for &v in &s.all {
                        if v > cut {
                            out.sigma_min_nonzero = out.sigma_min_nonzero.min(v);
                        }
                    }
                }
                if !out.sigma_min_nonzero.is_finite() {
                    out.sigma_min_nonzero = 0.0;
                }
                out
            }
            OperatorCase::General => {
                let mut sv: Vec<f64> = if rows * cols <= 4_000_000 {
                    singular_values(&self.assemble()).to_vec()
                } else {
                    let (w, _) = linalg::eigh(&self.gram());
                    w.iter().map(|&l| l.max(0.0).sqrt()).collect()
                };
                sv.sort_by(|x, y| y.total_cmp(x));
                sv.resize(cols, 0.0);
                let smax = sv.first().copied().unwrap_or(0.0);
                let cut = rank_cutoff(rows, cols, smax);
                let min_nz = sv.iter().rev().copied().find(|&v| v > cut).unwrap_or(0.0);
                SpectralBounds {
                    sigma_max: smax,
                    sigma_min: sv.last().copied().unwrap_or(0.0),
                    sigma_min_nonzero: min_nz,
                }
            }
        }
    }

    /// `FᴴF`, built column by column through `apply`/`adjoint`.
    fn gram(&self) -> CMat {
        let cols = self.n * self.i;
        let mut g = CMat::zeros((cols, cols));
        let mut e = CMat::zeros((self.n, self.i));
        for j in 0..cols {
            let (n, i) = (j % self.n, j / self.n);
            e[[n, i]] = ONE;
            let col = linalg::vectorize(&self.adjoint_unchecked(&self.apply_unchecked(&e)));
            g.column_mut(j).assign(&col);
            e[[n, i]] = ZERO;
        }
        g
    }

    /// Flop count of one application of `F` (or `F*`) by the routes above,
    /// counting a complex multiply-add as two flops.
    pub fn structural_cost(&self) -> f64 {
        let (m1, m2, n, i) = (
            self.m1 as f64,
            self.m2 as f64,
            self.n as f64,
            self.i as f64,
        );
        match self.case {
            OperatorCase::SnapshotSelectors => 2.0 * m1 * n * i,
            _ if self.b_identity => 2.0 * m1 * n * i,
            _ => {
                let per = (m1 * n * i + m1 * i * m2).min(n * i * m2 + m1 * n * m2);
                2.0 * self.a.len() as f64 * per
            }
        }
    }
}

struct FactorSpectrum {
    max: f64,
    min: f64,
    min_nz: f64,
    all: Vec<f64>,
}

/// Singular values of `m` as a map on `C^{domain}`, zero-padded to the domain
/// dimension.
fn domain_spectrum(m: &CMat, domain: usize) -> FactorSpectrum {
    let mut all = singular_values(m).to_vec();
    all.resize(domain, 0.0);
    let max = all.first().copied().unwrap_or(0.0);
    let cut = rank_cutoff(m.nrows(), m.ncols(), max);
    let min_nz = all.iter().rev().copied().find(|&v| v > cut).unwrap_or(0.0);
    FactorSpectrum {
        max,
        min: all.last().copied().unwrap_or(0.0),
        min_nz,
        all,
    }
}
