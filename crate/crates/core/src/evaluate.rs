//! Ambiguity resolution and recovery metrics.
//!
//! Estimates are determined only up to a global phase (per snapshot when
//! snapshots are measured separately), a nonzero scale per atom, and a
//! permutation of the atoms. [`evaluate`] removes all three before scoring.

use ndarray::Axis;
use num_complex::Complex64;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_shape, Result};
use crate::linalg::{fro_norm_sq, inner, vec_norm, CMat};
use crate::operators::{MixingOperator, OperatorCase};

/// Phase correction applied by [`phase_align`].
#[derive(Debug, Clone, PartialEq)]
pub enum Phases {
    Global(f64),
    PerColumn(Vec<f64>),
}

impl Phases {
    /// Multiply `a` (or each of its columns) by `e^{iφ}`.
    pub fn apply(&self, a: &CMat) -> CMat {
        match self {
            Phases::Global(phi) => a.mapv(|v| v * Complex64::from_polar(1.0, *phi)),
            Phases::PerColumn(phis) => {
                let mut out = a.clone();
                for (mut c, &phi) in out.axis_iter_mut(Axis(1)).zip(phis) {
                    let r = Complex64::from_polar(1.0, phi);
                    c.mapv_inplace(|v| v * r);
                }
                out
            }
        }
    }
}

fn align_phase(inner_true_est: Complex64) -> f64 {
    if inner_true_est == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        -inner_true_est.arg()
    }
}

/// Rotate `x_est` to best match `x_true` in Frobenius norm, either by one
/// global phase or column by column.
pub fn phase_align(x_est: &CMat, x_true: &CMat, columnwise: bool) -> Result<(CMat, Phases)> {
    check_shape("phase_align", x_true.dim(), x_est.dim())?;
    let phases = if columnwise {
        Phases::PerColumn(
            x_est
                .axis_iter(Axis(1))
                .zip(x_true.axis_iter(Axis(1)))
                .map(|(e, t)| align_phase(t.iter().zip(e.iter()).map(|(t, e)| t.conj() * e).sum()))
                .collect(),
        )
    } else {
        Phases::Global(align_phase(inner(x_true, x_est)))
    };
    Ok((phases.apply(x_est), phases))
}

/// Atom matching strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matching {
    /// Largest normalized correlation first.
    #[default]
    Greedy,
    /// Assignment maximizing the total correlation.
    Hungarian,
}

/// `|d_pᴴ t_q| / (‖d_p‖‖t_q‖)` for every estimated `p` (rows) and true `q`;
/// zero when either column vanishes.
pub fn correlations(d_est: &CMat, d_true: &CMat) -> ndarray::Array2<f64> {
    let p = d_est.ncols();
    let q = d_true.ncols();
    ndarray::Array2::from_shape_fn((p, q), |(a, b)| {
        let e = d_est.column(a);
        let t = d_true.column(b);
        let den = vec_norm(e) * vec_norm(t);
        if den == 0.0 {
            0.0
        } else {
            e.iter().zip(t.iter()).map(|(e, t)| e.conj() * t).sum::<Complex64>().norm() / den
        }
    })
}

/// `perm[q]` is the estimated atom assigned to true atom `q`, so the aligned
/// dictionary has columns `d_est[:, perm[0]], d_est[:, perm[1]], …`.
pub fn match_permutation(d_est: &CMat, d_true: &CMat, how: Matching) -> Result<Vec<usize>> {
    check_shape("match_permutation", d_true.dim(), d_est.dim())?;
    let c = correlations(d_est, d_true);
    let p = c.nrows();
    match how {
        Matching::Greedy => {
            let mut pairs: Vec<(usize, usize)> =
                (0..p).flat_map(|a| (0..p).map(move |b| (a, b))).collect();
            // Stable sort keeps index order among ties.
            pairs.sort_by(|x, y| c[[y.0, y.1]].total_cmp(&c[[x.0, x.1]]));
            let mut perm = vec![usize::MAX; p];
            let mut used = vec![false; p];
            for (a, b) in pairs {
                if !used[a] && perm[b] == usize::MAX {
                    used[a] = true;
                    perm[b] = a;
                }
            }
            Ok(perm)
        }
        Matching::Hungarian => {
            // Integer weights; 1e9 resolution is far below any meaningful gap.
            let w = Matrix::from_fn(p, p, |(b, a)| (c[[a, b]] * 1e9).round() as i64);
            Ok(kuhn_munkres(&w).1)
        }
    }
}

/// Columns of `d` reordered by `perm`.
pub fn permute_columns(d: &CMat, perm: &[usize]) -> CMat {
    d.select(Axis(1), perm)
}

/// Rows of `z` reordered by `perm`.
pub fn permute_rows(z: &CMat, perm: &[usize]) -> CMat {
    z.select(Axis(0), perm)
}

fn scaled_residual<'a>(
    est: impl Iterator<Item = &'a Complex64> + Clone,
    truth: impl Iterator<Item = &'a Complex64> + Clone,
) -> f64 {
    let ee: f64 = est.clone().map(|v| v.norm_sqr()).sum();
    let tt: f64 = truth.clone().map(|v| v.norm_sqr()).sum();
    if ee == 0.0 {
        return tt;
    }
    let et: Complex64 = est.clone().zip(truth.clone()).map(|(e, t)| e.conj() * t).sum();
    let alpha = et / ee;
    est.zip(truth).map(|(e, t)| (alpha * e - t).norm_sqr()).sum()
}

/// Normalized squared error after the best complex scale per column.
pub fn mnse_d(d_est: &CMat, d_true: &CMat) -> Result<f64> {
    check_shape("mnse_d", d_true.dim(), d_est.dim())?;
    let num: f64 = d_est
        .axis_iter(Axis(1))
        .zip(d_true.axis_iter(Axis(1)))
        .map(|(e, t)| scaled_residual(e.into_iter(), t.into_iter()))
        .sum();
    Ok(num / fro_norm_sq(d_true))
}

/// Normalized squared error after the best complex scale per row.
pub fn mnse_z(z_est: &CMat, z_true: &CMat) -> Result<f64> {
    check_shape("mnse_z", z_true.dim(), z_est.dim())?;
    let num: f64 = z_est
        .axis_iter(Axis(0))
        .zip(z_true.axis_iter(Axis(0)))
        .map(|(e, t)| scaled_residual(e.into_iter(), t.into_iter()))
        .sum();
    Ok(num / fro_norm_sq(z_true))
}

/// `2TP / (2TP + FP + FN)` on supports; an estimate entry counts as nonzero
/// when its magnitude exceeds `threshold` (use `0.0` for an exact test).
pub fn f_measure(z_est: &CMat, z_true: &CMat, threshold: f64) -> Result<f64> {
    check_shape("f_measure", z_true.dim(), z_est.dim())?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (e, t) in z_est.iter().zip(z_true.iter()) {
        match (e.norm() > threshold, t.norm() > 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let den = 2 * tp + fp + fn_;
    Ok(if den == 0 { 1.0 } else { (2 * tp) as f64 / den as f64 })
}

/// Snapshots are observed separately, so the phase ambiguity is per column.
pub fn per_column_phase(op: &MixingOperator) -> bool {
    op.case() == OperatorCase::SnapshotSelectors || op.has_identity_b()
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub matching: Matching,
    /// Magnitude at or below which an estimated code counts as zero.
    pub support_threshold: f64,
}

/// Scores of one estimate against the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mnse_d: f64,
    pub mnse_z: f64,
    pub f_measure: f64,
    /// See [`match_permutation`].
    pub permutation: Vec<usize>,
}

/// Phase from the signal estimate, atom matching, then the metrics.
///
/// `x_est` is the signal estimate (`D_est·Z_est` for the compact form). The
/// phase found on it is applied to the permuted codes before `MNSE(Z)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    x_est: &CMat,
    d_est: &CMat,
    z_est: &CMat,
    x_true: &CMat,
    d_true: &CMat,
    z_true: &CMat,
    columnwise: bool,
    opts: EvalOptions,
) -> Result<Metrics> {
    let (_, phases) = phase_align(x_est, x_true, columnwise)?;
    let perm = match_permutation(d_est, d_true, opts.matching)?;
    let d_al = permute_columns(d_est, &perm);
    let z_al = phases.apply(&permute_rows(z_est, &perm));
    Ok(Metrics {
        mnse_d: mnse_d(&d_al, d_true)?,
        mnse_z: mnse_z(&z_al, z_true)?,
        f_measure: f_measure(&z_al, z_true, opts.support_threshold)?,
        permutation: perm,
    })
}
