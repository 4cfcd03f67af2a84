//! Small dense linear-algebra helpers over complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values above `rel * sigma_max`.
pub fn numeric_rank(m: &CMat, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > rel * top).count(),
        _ => 0,
    }
}

/// Right singular vectors ordered by ascending singular value, paired with those values.
///
/// Wide inputs are padded with zero rows so the full right basis is available.
pub fn right_singular_pairs(m: &CMat) -> Vec<(f64, CVec)> {
    let k = m.ncols();
    let mut sq = CMat::zeros(m.nrows().max(k), k);
    sq.view_mut((0, 0), (m.nrows(), k)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut pairs: Vec<(f64, CVec)> = (0..k)
        .map(|i| {
            let row = vt.row(i).transpose().map(|z| z.conj());
            (svd.singular_values[i], row)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Orthonormal basis of the numerical null space (threshold `rel * sigma_max`).
pub fn null_space(m: &CMat, rel: f64) -> Vec<CVec> {
    let pairs = right_singular_pairs(m);
    let top = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let rank = numeric_rank(m, rel);
    let nullity = m.ncols() - rank;
    if top == 0.0 {
        return pairs.into_iter().map(|p| p.1).collect();
    }
    pairs.into_iter().take(nullity).map(|p| p.1).collect()
}

pub fn det(m: &CMat) -> C64 {
    m.clone().lu().determinant()
}

/// Derivative of `det U(t)` given `U` and `U'`, summing determinants with one column replaced.
pub fn det_derivative(u: &CMat, du: &CMat) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for k in 0..u.ncols() {
        let mut w = u.clone();
        w.set_column(k, &du.column(k));
        total += det(&w);
    }
    total
}

pub fn stack_rows(top: &CMat, bottom: &CMat) -> CMat {
    let mut out = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

pub fn hstack(left: &CMat, right: &CMat) -> CMat {
    let mut out = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
