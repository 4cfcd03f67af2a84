//! Characteristic determinant `Delta(lambda) = det(C + D Phi(1, lambda))`, the unperturbed
//! quasi-periodic lattice and the separation test for its two families.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{fundamental_matrix_rtol, FundamentalSolution};
use crate::linalg::{det, det_derivative, stack_rows, CMat};
use crate::model::{compute_j_invariants, ProblemSpec};

/// Fractional parts closer than this to an integer are snapped to 0.
pub const FRAC_SNAP: f64 = 1e-12;
/// Tolerance when comparing the separation thresholds with `alpha_j`.
pub const SEPARATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct CharDet {
    pub lambda: C64,
    pub value: C64,
    pub derivative: Option<C64>,
    /// `sum_S |det (C D)_S| |det W_S|` over `n`-subsets `S` of the `2n` columns of `(C D)`,
    /// with `W = (I; Phi(1))`; bounds `|value|` by Cauchy-Binet.
    pub scale: f64,
}

impl CharDet {
    /// Determinant divided by `scale`; its modulus is unchanged under `(C D) -> G (C D)`.
    pub fn normalized(&self) -> C64 {
        self.value / self.scale
    }
}

pub fn char_det(p: &ProblemSpec, lambda: C64, with_derivative: bool) -> Result<CharDet> {
    char_det_rtol(p, lambda, with_derivative, p.solver.rtol)
}

pub fn char_det_rtol(p: &ProblemSpec, lambda: C64, with_derivative: bool, rtol: f64) -> Result<CharDet> {
    let fs = fundamental_matrix_rtol(p, lambda, with_derivative, rtol)?;
    Ok(char_det_from(p, &fs))
}

/// `det(C + D Phi(1))` by Cauchy-Binet over `W = (I; Phi(1))`, with the full minor
/// `det Phi(1)` and its derivative taken from the Liouville formula instead of the computed
/// `Phi(1)`, whose columns lose the decaying directions away from the real axis.
pub fn char_det_from(p: &ProblemSpec, fs: &FundamentalSolution) -> CharDet {
    let n = p.n();
    let a = p.bc.block();
    let w = stack_rows(&CMat::identity(n, n), fs.phi_at_one());
    let dw = fs.dphi_at_one().map(|d| stack_rows(&CMat::zeros(n, n), d));
    let (liouville, dliouville) = liouville_det(p, fs.lambda);
    let full = (1u32 << (2 * n)) - (1u32 << n);
    let zero = C64::new(0.0, 0.0);
    let (mut value, mut derivative, mut scale) = (zero, zero, 0.0);
    for mask in 0u32..(1 << (2 * n)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let cols: Vec<usize> = (0..2 * n).filter(|k| mask & (1 << k) != 0).collect();
        let da = det(&a.select_columns(&cols));
        if da == zero {
            continue;
        }
        let (m, dm) = if mask == full {
            (liouville, dliouville)
        } else {
            let ws = w.select_rows(&cols);
            let dm = dw.as_ref().map_or(zero, |d| det_derivative(&ws, &d.select_rows(&cols)));
            (det(&ws), dm)
        };
        value += da * m;
        derivative += da * dm;
        scale += da.norm() * m.norm();
    }
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    CharDet { lambda: fs.lambda, value, derivative: fs.dphi_at_one().map(|_| derivative), scale }
}

/// `det Phi(1) = exp(i lambda sum b_j - i sum b_j int Q_jj)` and its `lambda`-derivative.
pub fn liouville_det(p: &ProblemSpec, lambda: C64) -> (C64, C64) {
    let sum_b: C64 = p.b.iter().sum();
    let diag: C64 = (0..p.n()).map(|j| p.b[j] * p.q.entry(j, j).integral()).sum();
    let e = (C64::i() * (lambda * sum_b - diag)).exp();
    (e, C64::i() * sum_b * e)
}

/// Six-term expansion `J12 + J34 e^{i(b1+b2)lambda} + J32 phi11 + J13 phi12 + J42 phi21 + J14 phi22`.
pub fn char_det_via_j(p: &ProblemSpec, fs: &FundamentalSolution) -> Result<C64> {
    let j = compute_j_invariants(&p.bc)?;
    let phi = fs.phi_at_one();
    let e = (C64::i() * (p.b[0] + p.b[1]) * fs.lambda).exp();
    Ok(j.j12 + j.j34 * e + j.j32 * phi[(0, 0)] + j.j13 * phi[(0, 1)] + j.j42 * phi[(1, 0)] + j.j14 * phi[(1, 1)])
}

/// `C + D Phi(1)`.
pub fn boundary_matrix(p: &ProblemSpec, phi1: &CMat) -> CMat {
    &p.bc.c + &p.bc.d * phi1
}

/// `gamma = alpha + i beta` with `d = exp(-2 pi i gamma)` and `alpha` in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Gamma {
    pub alpha: f64,
    pub beta: f64,
}

impl Gamma {
    pub fn value(&self) -> C64 {
        C64::new(self.alpha, self.beta)
    }
}

/// Fractional part in `[0, 1)` with near-integers snapped to 0.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f < FRAC_SNAP || 1.0 - f < FRAC_SNAP {
        0.0
    } else {
        f
    }
}

pub fn gamma_of_d(d: C64) -> Result<Gamma> {
    if d.norm() == 0.0 || !d.norm().is_finite() {
        return Err(Error::Domain("quasi-periodic multiplier must be nonzero and finite".into()));
    }
    let beta = d.norm().ln() / (2.0 * PI);
    let alpha = frac(-d.arg() / (2.0 * PI));
    Ok(Gamma { alpha, beta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LatticePoint {
    pub n: i64,
    /// Family index, 1 or 2.
    pub j: usize,
    pub lambda: C64,
}

/// `lambda0_{n,j} = 2 pi b_j^{-1} (gamma_j + n)` for `|n| <= range`, sorted by `(|n|, n, j)`.
pub fn unperturbed_lattice(b: &[C64], d: [C64; 2], range: i64) -> Result<Vec<LatticePoint>> {
    let gammas = [gamma_of_d(d[0])?, gamma_of_d(d[1])?];
    let mut out = Vec::new();
    for n in -range..=range {
        for j in 0..2 {
            let lambda = (gammas[j].value() + n as f64) * (2.0 * PI) / b[j];
            out.push(LatticePoint { n, j: j + 1, lambda });
        }
    }
    out.sort_by_key(|p| (p.n.abs(), p.n, p.j));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub separated: bool,
    pub gamma1: Gamma,
    pub gamma2: Gamma,
    /// `{(c1 beta1 - (c1^2 + c2^2) beta2) / c2}` and `{(beta1 - c1 beta2) / c2}`.
    pub thresholds: [f64; 2],
    /// Colliding indices `(n, m)` with `lambda0_{n,1} = lambda0_{m,2}`.
    pub collision: Option<(i64, i64)>,
}

fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

pub fn separation_check(b: &[C64], d1: C64, d2: C64) -> Result<SeparationReport> {
    if b.len() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    let ratio = b[0] / b[1];
    if ratio.im.abs() <= 1e-12 * ratio.norm() {
        return Err(Error::RealWeightRatio);
    }
    let (c1, c2) = (ratio.re, ratio.im);
    let g1 = gamma_of_d(d1)?;
    let g2 = gamma_of_d(d2)?;
    let s1 = (c1 * g1.beta - (c1 * c1 + c2 * c2) * g2.beta) / c2;
    let s2 = (g1.beta - c1 * g2.beta) / c2;
    let thresholds = [frac(s1), frac(s2)];
    let separated = circle_dist(g1.alpha, thresholds[0]) > SEPARATION_TOL
        || circle_dist(g2.alpha, thresholds[1]) > SEPARATION_TOL;
    let collision = (!separated).then(|| ((s1 - g1.alpha).round() as i64, (s2 - g2.alpha).round() as i64));
    Ok(SeparationReport { separated, gamma1: g1, gamma2: g2, thresholds, collision })
}
