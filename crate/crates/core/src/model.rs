//! Problem description: diagonal weight `B`, potential `Q`, boundary pair `(C, D)` and solver settings.
//!
//! The operator is `-i B^{-1} y' + Q(x) y` on `[0, 1]` with `C y(0) + D y(1) = 0`.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{hstack, numeric_rank, CMat};

pub const RANK_TOL: f64 = 1e-10;
/// Relative tolerance for recognizing canonical boundary forms.
pub const CANON_TOL: f64 = 1e-12;

/// Polynomial in the global variable `x`, coefficients in ascending order.
pub type Poly = Vec<C64>;

pub fn poly_eval(p: &[C64], x: f64) -> C64 {
    p.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

/// Coefficients of `x -> p(1 - x)`.
pub fn poly_reflect(p: &[C64]) -> Poly {
    let mut out = vec![C64::new(0.0, 0.0); p.len()];
    for (k, &a) in p.iter().enumerate() {
        let mut binom = 1.0;
        for m in 0..=k {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out[m] += a * (binom * sign);
            binom = binom * (k - m) as f64 / (m + 1) as f64;
        }
    }
    out
}

/// One scalar entry of the potential.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Zero,
    Const(C64),
    Poly(Poly),
    /// `pieces[k]` applies on `[knots[k], knots[k+1]]`; knots run from 0 to 1.
    Piecewise { knots: Vec<f64>, pieces: Vec<Poly> },
}

impl Expr {
    pub fn eval(&self, x: f64) -> C64 {
        match self {
            Expr::Zero => C64::new(0.0, 0.0),
            Expr::Const(v) => *v,
            Expr::Poly(p) => poly_eval(p, x),
            Expr::Piecewise { knots, pieces } => {
                let k = knots[1..knots.len() - 1].iter().take_while(|&&t| t <= x).count();
                poly_eval(&pieces[k.min(pieces.len() - 1)], x)
            }
        }
    }

    /// Exact symbolic zero test; no tolerance is involved.
    pub fn is_identically_zero(&self) -> bool {
        let zero = |p: &Poly| p.iter().all(|a| a.re == 0.0 && a.im == 0.0);
        match self {
            Expr::Zero => true,
            Expr::Const(v) => v.re == 0.0 && v.im == 0.0,
            Expr::Poly(p) => zero(p),
            Expr::Piecewise { pieces, .. } => pieces.iter().all(zero),
        }
    }

    pub fn constant_value(&self) -> Option<C64> {
        match self {
            Expr::Zero => Some(C64::new(0.0, 0.0)),
            Expr::Const(v) => Some(*v),
            Expr::Poly(p) if p.iter().skip(1).all(|a| a.norm() == 0.0) => {
                Some(p.first().copied().unwrap_or_default())
            }
            _ => None,
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, Expr::Piecewise { .. })
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Expr::Piecewise { knots, .. } => knots[1..knots.len() - 1].to_vec(),
            _ => Vec::new(),
        }
    }

    /// Polynomial valid on the closed interval `[l, r]`, which must not straddle a knot.
    pub fn poly_on(&self, l: f64, r: f64) -> Poly {
        match self {
            Expr::Zero => Vec::new(),
            Expr::Const(v) => vec![*v],
            Expr::Poly(p) => p.clone(),
            Expr::Piecewise { knots, pieces } => {
                let mid = 0.5 * (l + r);
                let k = knots[1..knots.len() - 1].iter().take_while(|&&t| t <= mid).count();
                pieces[k.min(pieces.len() - 1)].clone()
            }
        }
    }

    pub fn conj(&self) -> Expr {
        let cj = |p: &Poly| p.iter().map(|a| a.conj()).collect::<Poly>();
        match self {
            Expr::Zero => Expr::Zero,
            Expr::Const(v) => Expr::Const(v.conj()),
            Expr::Poly(p) => Expr::Poly(cj(p)),
            Expr::Piecewise { knots, pieces } => Expr::Piecewise {
                knots: knots.clone(),
                pieces: pieces.iter().map(cj).collect(),
            },
        }
    }

    /// `x -> self(1 - x)`.
    pub fn reflect(&self) -> Expr {
        match self {
            Expr::Zero | Expr::Const(_) => self.clone(),
            Expr::Poly(p) => Expr::Poly(poly_reflect(p)),
            Expr::Piecewise { knots, pieces } => Expr::Piecewise {
                knots: knots.iter().rev().map(|t| 1.0 - t).collect(),
                pieces: pieces.iter().rev().map(|p| poly_reflect(p)).collect(),
            },
        }
    }

    /// `int_0^1` of the expression.
    pub fn integral(&self) -> C64 {
        let prim = |p: &Poly, l: f64, r: f64| -> C64 {
            p.iter()
                .enumerate()
                .map(|(k, a)| a * (r.powi(k as i32 + 1) - l.powi(k as i32 + 1)) / (k as f64 + 1.0))
                .sum()
        };
        match self {
            Expr::Zero => C64::new(0.0, 0.0),
            Expr::Const(v) => *v,
            Expr::Poly(p) => prim(p, 0.0, 1.0),
            Expr::Piecewise { knots, pieces } => {
                knots.windows(2).zip(pieces).map(|(w, p)| prim(p, w[0], w[1])).sum()
            }
        }
    }

    /// Sampled sup norm on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        if let Some(v) = self.constant_value() {
            return v.norm();
        }
        let mut pts: Vec<f64> = (0..=2048).map(|i| i as f64 / 2048.0).collect();
        if let Expr::Piecewise { knots, .. } = self {
            for &t in knots {
                pts.push(t);
                pts.push((t - 1e-12).max(0.0));
            }
        }
        pts.iter().map(|&x| self.eval(x).norm()).fold(0.0, f64::max)
    }

    fn check(&self) -> Result<(), String> {
        let finite = |p: &Poly| p.iter().all(|a| a.re.is_finite() && a.im.is_finite());
        match self {
            Expr::Zero => Ok(()),
            Expr::Const(v) if v.re.is_finite() && v.im.is_finite() => Ok(()),
            Expr::Const(_) => Err("non-finite constant".into()),
            Expr::Poly(p) if finite(p) => Ok(()),
            Expr::Poly(_) => Err("non-finite coefficient".into()),
            Expr::Piecewise { knots, pieces } => {
                if knots.len() < 2 || pieces.len() != knots.len() - 1 {
                    return Err("piece count must be one less than knot count".into());
                }
                if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
                    return Err("knots must start at 0 and end at 1".into());
                }
                if knots.windows(2).any(|w| w[1] <= w[0]) {
                    return Err("knots must be strictly increasing".into());
                }
                if !pieces.iter().all(finite) {
                    return Err("non-finite coefficient".into());
                }
                Ok(())
            }
        }
    }
}

/// `n x n` matrix of scalar expressions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub n: usize,
    pub entries: Vec<Expr>,
}

impl PotentialSpec {
    pub fn zero(n: usize) -> Self {
        PotentialSpec { n, entries: vec![Expr::Zero; n * n] }
    }

    pub fn off_diagonal(q12: Expr, q21: Expr) -> Self {
        PotentialSpec { n: 2, entries: vec![Expr::Zero, q12, q21, Expr::Zero] }
    }

    pub fn entry(&self, j: usize, k: usize) -> &Expr {
        &self.entries[j * self.n + k]
    }

    pub fn is_identically_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_identically_zero)
    }

    /// Constant matrix value when every entry is constant.
    pub fn constant_value(&self) -> Option<CMat> {
        let vals: Option<Vec<C64>> = self.entries.iter().map(Expr::constant_value).collect();
        vals.map(|v| CMat::from_row_slice(self.n, self.n, &v))
    }

    pub fn has_piecewise(&self) -> bool {
        self.entries.iter().any(Expr::is_piecewise)
    }

    /// Sorted union of interior breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.entries.iter().flat_map(Expr::breakpoints).collect();
        all.sort_by(f64::total_cmp);
        all.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        all
    }

    pub fn eval(&self, x: f64) -> CMat {
        CMat::from_row_slice(self.n, self.n, &self.entries.iter().map(|e| e.eval(x)).collect::<Vec<_>>())
    }

    pub fn polys_on(&self, l: f64, r: f64) -> Vec<Poly> {
        self.entries.iter().map(|e| e.poly_on(l, r)).collect()
    }

    /// `max_{j,k} sup |Q_jk|`.
    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().map(Expr::sup_norm).fold(0.0, f64::max)
    }

    /// Entrywise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                entries.push(self.entry(k, j).conj());
            }
        }
        PotentialSpec { n, entries }
    }

    pub fn reflect(&self) -> Self {
        PotentialSpec { n: self.n, entries: self.entries.iter().map(Expr::reflect).collect() }
    }

    /// Conjugation by the coordinate swap `P = (0 1; 1 0)` (n = 2).
    pub fn swapped(&self) -> Self {
        let e = &self.entries;
        PotentialSpec { n: 2, entries: vec![e[3].clone(), e[2].clone(), e[1].clone(), e[0].clone()] }
    }
}

/// Boundary pair `C y(0) + D y(1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    pub c: CMat,
    pub d: CMat,
}

impl BoundarySpec {
    pub fn new(c: CMat, d: CMat) -> Self {
        BoundarySpec { c, d }
    }

    pub fn from_rows(n: usize, rows: &[&[C64]]) -> Self {
        let flat: Vec<C64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let a = CMat::from_row_slice(n, 2 * n, &flat);
        BoundarySpec { c: a.columns(0, n).into_owned(), d: a.columns(n, n).into_owned() }
    }

    /// `y_j(0) - d_j y_j(1) = 0`.
    pub fn quasi_periodic(d1: C64, d2: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        Self::from_rows(2, &[&[o, z, -d1, z], &[z, o, z, -d2]])
    }

    pub fn antiperiodic() -> Self {
        Self::quasi_periodic(C64::new(-1.0, 0.0), C64::new(-1.0, 0.0))
    }

    pub fn periodic() -> Self {
        Self::quasi_periodic(C64::new(1.0, 0.0), C64::new(1.0, 0.0))
    }

    /// `y_1(0) - h_1 y_2(0) = 0`, `-h_2 y_2(0) + y_1(1) = 0`.
    pub fn special(h1: C64, h2: C64) -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        Self::from_rows(2, &[&[o, -h1, z, z], &[z, -h2, o, z]])
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    /// The `n x 2n` block `(C D)`.
    pub fn block(&self) -> CMat {
        hstack(&self.c, &self.d)
    }

    pub fn rank(&self) -> usize {
        numeric_rank(&self.block(), RANK_TOL)
    }

    /// Left multiplication by an invertible `g` (same operator).
    pub fn left_mul(&self, g: &CMat) -> Self {
        BoundarySpec { c: g * &self.c, d: g * &self.d }
    }

    /// `(d1, d2)` when row-equivalent to `y_j(0) - d_j y_j(1) = 0` with `d_j != 0` (n = 2).
    pub fn quasi_parameters(&self) -> Option<(C64, C64)> {
        if self.n() != 2 {
            return None;
        }
        let g = self.c.clone().try_inverse()?;
        if !g.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return None;
        }
        let dn = &g * &self.d;
        let scale = dn.norm().max(1.0);
        let tiny = |z: C64| z.norm() <= CANON_TOL * scale;
        if !tiny(dn[(0, 1)]) || !tiny(dn[(1, 0)]) || tiny(dn[(0, 0)]) || tiny(dn[(1, 1)]) {
            return None;
        }
        Some((-dn[(0, 0)], -dn[(1, 1)]))
    }

    /// `(h1, h2)` when row-equivalent to the special pair `(1, -h1, 0, 0), (0, -h2, 1, 0)`.
    pub fn special_parameters(&self) -> Option<(C64, C64)> {
        if self.n() != 2 {
            return None;
        }
        let a = self.block();
        let scale = a.norm();
        if a.column(3).norm() > CANON_TOL * scale {
            return None;
        }
        let a13 = CMat::from_columns(&[a.column(0), a.column(2)]);
        if minor(&a, 1, 3).norm() <= CANON_TOL * scale * scale {
            return None;
        }
        let g = a13.try_inverse()?;
        let an = &g * &a;
        Some((-an[(0, 1)], -an[(1, 1)]))
    }

    /// `C` invertible and `D = 0`, or the reverse.
    pub fn is_initial_value(&self) -> bool {
        let scale = self.block().norm();
        let full = |m: &CMat| numeric_rank(m, RANK_TOL) == m.nrows();
        (self.d.norm() <= CANON_TOL * scale && full(&self.c)) || (self.c.norm() <= CANON_TOL * scale && full(&self.d))
    }

    pub fn transformed(&self, t: Transform) -> Self {
        match t {
            Transform::SwapComponents => {
                let p = CMat::from_row_slice(
                    2,
                    2,
                    &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                );
                BoundarySpec { c: &self.c * &p, d: &self.d * &p }
            }
            Transform::ReflectInterval => BoundarySpec { c: self.d.clone(), d: self.c.clone() },
        }
    }
}

/// Plücker-type minors `J_jk = a_1j a_2k - a_1k a_2j` of the `2 x 4` block (columns 1-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryInvariants {
    pub j12: C64,
    pub j13: C64,
    pub j14: C64,
    pub j32: C64,
    pub j42: C64,
    pub j34: C64,
}

impl BoundaryInvariants {
    pub fn j23(&self) -> C64 {
        -self.j32
    }

    pub fn j24(&self) -> C64 {
        -self.j42
    }

    pub fn as_array(&self) -> [C64; 6] {
        [self.j12, self.j13, self.j14, self.j32, self.j42, self.j34]
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn minor(a: &CMat, j: usize, k: usize) -> C64 {
    a[(0, j - 1)] * a[(1, k - 1)] - a[(0, k - 1)] * a[(1, j - 1)]
}

pub fn compute_j_invariants(bc: &BoundarySpec) -> Result<BoundaryInvariants, Error> {
    if bc.n() != 2 || bc.c.ncols() != 2 || bc.d.shape() != (2, 2) {
        return Err(Error::NotTwoByTwo);
    }
    let a = bc.block();
    Ok(BoundaryInvariants {
        j12: minor(&a, 1, 2),
        j13: minor(&a, 1, 3),
        j14: minor(&a, 1, 4),
        j32: minor(&a, 3, 2),
        j42: minor(&a, 4, 2),
        j34: minor(&a, 3, 4),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    SwapComponents,
    ReflectInterval,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::SwapComponents => "swap_components",
            Transform::ReflectInterval => "reflect_interval",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Looser tolerance used while tracking the argument of the determinant.
    pub count_rtol: f64,
    /// Uniform quadrature panels on `[0, 1]` (breakpoints are added).
    pub panels: usize,
    /// Largest accepted `|Im(b_j lambda)|`.
    pub trust_region: f64,
    pub max_steps: usize,
    pub newton_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rtol: 1e-12,
            atol: 1e-14,
            count_rtol: 1e-9,
            panels: 64,
            trust_region: 50.0,
            max_steps: 2_000_000,
            newton_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub b: Vec<C64>,
    pub q: PotentialSpec,
    pub bc: BoundarySpec,
    pub solver: SolverSettings,
}

impl ProblemSpec {
    pub fn new(b: Vec<C64>, q: PotentialSpec, bc: BoundarySpec) -> Self {
        ProblemSpec { b, q, bc, solver: SolverSettings::default() }
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn with_bc(&self, bc: BoundarySpec) -> Self {
        ProblemSpec { bc, ..self.clone() }
    }

    pub fn with_solver(mut self, solver: SolverSettings) -> Self {
        self.solver = solver;
        self
    }

    /// `b_1 / b_2` is not real (n = 2).
    pub fn has_nonreal_ratio(&self) -> bool {
        self.n() == 2 && {
            let r = self.b[0] / self.b[1];
            r.im.abs() > 1e-12 * r.norm()
        }
    }

    pub fn validated(self) -> Result<Self, Error> {
        let diags = validate(&self);
        if diags.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invalid(diags))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Diagnostic {
    DimensionMismatch { what: String, expected: usize, found: usize },
    SingularWeight { index: usize },
    MaximalityViolated { rank: usize, n: usize },
    NonzeroDiagonalPotential { index: usize },
    InvalidExpression { entry: String, reason: String },
    NonFinite { what: String },
    InvalidSolver { field: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DimensionMismatch { what, expected, found } => {
                write!(f, "dimension mismatch: {what} has {found}, expected {expected}")
            }
            Diagnostic::SingularWeight { index } => write!(f, "singular weight: b_{} = 0", index + 1),
            Diagnostic::MaximalityViolated { rank, n } => {
                write!(f, "maximality violated: rank(C D) = {rank} < n = {n}")
            }
            Diagnostic::NonzeroDiagonalPotential { index } => {
                write!(f, "nonzero diagonal potential entry Q_{0}{0}", index + 1)
            }
            Diagnostic::InvalidExpression { entry, reason } => write!(f, "invalid expression {entry}: {reason}"),
            Diagnostic::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Diagnostic::InvalidSolver { field } => write!(f, "invalid solver setting {field}"),
        }
    }
}

pub fn validate(p: &ProblemSpec) -> Vec<Diagnostic> {
    let n = p.n();
    let mut out = Vec::new();
    let mut dim = |what: &str, expected: usize, found: usize| {
        if expected != found {
            out.push(Diagnostic::DimensionMismatch { what: what.into(), expected, found });
        }
    };
    dim("Q rows", n, p.q.n);
    dim("Q entries", n * n, p.q.entries.len());
    dim("C rows", n, p.bc.c.nrows());
    dim("C columns", n, p.bc.c.ncols());
    dim("D rows", n, p.bc.d.nrows());
    dim("D columns", n, p.bc.d.ncols());
    if !out.is_empty() || n == 0 {
        return out;
    }
    for (j, b) in p.b.iter().enumerate() {
        if !(b.re.is_finite() && b.im.is_finite()) {
            out.push(Diagnostic::NonFinite { what: format!("b_{}", j + 1) });
        } else if b.norm() == 0.0 {
            out.push(Diagnostic::SingularWeight { index: j });
        }
    }
    let finite_bc = p.bc.c.iter().chain(p.bc.d.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite_bc {
        out.push(Diagnostic::NonFinite { what: "boundary matrices".into() });
    } else {
        let rank = p.bc.rank();
        if rank < n {
            out.push(Diagnostic::MaximalityViolated { rank, n });
        }
    }
    for j in 0..n {
        for k in 0..n {
            let e = p.q.entry(j, k);
            if let Err(reason) = e.check() {
                out.push(Diagnostic::InvalidExpression { entry: format!("Q{}{}", j + 1, k + 1), reason });
            }
        }
        if n == 2 && !p.q.entry(j, j).is_identically_zero() {
            out.push(Diagnostic::NonzeroDiagonalPotential { index: j });
        }
    }
    let s = &p.solver;
    let bad = |v: f64| !(v.is_finite() && v > 0.0);
    for (name, v) in [
        ("rtol", s.rtol),
        ("atol", s.atol),
        ("count_rtol", s.count_rtol),
        ("trust_region", s.trust_region),
        ("newton_tol", s.newton_tol),
    ] {
        if bad(v) {
            out.push(Diagnostic::InvalidSolver { field: name.into() });
        }
    }
    if s.panels == 0 {
        out.push(Diagnostic::InvalidSolver { field: "panels".into() });
    }
    out
}

/// Change of unknown realizing one of the two equivalence transforms.
pub fn apply_equivalence_transform(p: &ProblemSpec, t: Transform) -> Result<ProblemSpec, Error> {
    if p.n() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    let out = match t {
        Transform::SwapComponents => ProblemSpec {
            b: vec![p.b[1], p.b[0]],
            q: p.q.swapped(),
            bc: p.bc.transformed(t),
            solver: p.solver.clone(),
        },
        Transform::ReflectInterval => ProblemSpec {
            b: p.b.iter().map(|&b| -b).collect(),
            q: p.q.reflect(),
            bc: p.bc.transformed(t),
            solver: p.solver.clone(),
        },
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn reflect_polynomial_is_involution() {
        let p = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0), c(2.0, -1.0)];
        let r = poly_reflect(&p);
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert!((poly_eval(&r, x) - poly_eval(&p, 1.0 - x)).norm() < 1e-13);
        }
        let back = poly_reflect(&r);
        for (a, b) in back.iter().zip(&p) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn piecewise_eval_and_reflect() {
        let e = Expr::Piecewise { knots: vec![0.0, 0.3, 1.0], pieces: vec![vec![c(1.0, 0.0)], vec![c(0.0, 0.0), c(2.0, 0.0)]] };
        assert_eq!(e.eval(0.1), c(1.0, 0.0));
        assert!((e.eval(0.5) - c(1.0, 0.0)).norm() < 1e-15);
        let r = e.reflect();
        assert_eq!(r.breakpoints(), vec![0.7]);
        for x in [0.05, 0.5, 0.69, 0.75, 0.95] {
            assert!((r.eval(x) - e.eval(1.0 - x)).norm() < 1e-13);
        }
    }

    #[test]
    fn special_invariants() {
        let (h1, h2) = (c(0.3, 1.0), c(-2.0, 0.5));
        let j = compute_j_invariants(&BoundarySpec::special(h1, h2)).unwrap();
        assert_eq!(j.j12, -h2);
        assert_eq!(j.j13, c(1.0, 0.0));
        assert_eq!(j.j14, c(0.0, 0.0));
        assert_eq!(j.j32, h1);
        assert_eq!(j.j42, c(0.0, 0.0));
        assert_eq!(j.j34, c(0.0, 0.0));
    }

    #[test]
    fn quasi_periodic_invariants() {
        let (d1, d2) = (c(0.6, 0.8), c(-1.0, 0.0));
        let j = compute_j_invariants(&BoundarySpec::quasi_periodic(d1, d2)).unwrap();
        assert_eq!(j.j12, c(1.0, 0.0));
        assert_eq!(j.j34, d1 * d2);
        assert_eq!(j.j14, -d2);
        assert_eq!(j.j32, -d1);
        assert_eq!(j.j13, c(0.0, 0.0));
        assert_eq!(j.j42, c(0.0, 0.0));
    }

    #[test]
    fn canonical_parameters_survive_row_operations() {
        let g = CMat::from_row_slice(2, 2, &[c(2.0, 1.0), c(-1.0, 0.0), c(0.5, 0.0), c(0.0, 3.0)]);
        let (d1, d2) = (c(0.6, 0.8), c(-1.0, 0.0));
        let (q1, q2) = BoundarySpec::quasi_periodic(d1, d2).left_mul(&g).quasi_parameters().unwrap();
        assert!((q1 - d1).norm() < 1e-14 && (q2 - d2).norm() < 1e-14);
        let (h1, h2) = (c(0.3, -1.0), c(2.0, 0.5));
        let (s1, s2) = BoundarySpec::special(h1, h2).left_mul(&g).special_parameters().unwrap();
        assert!((s1 - h1).norm() < 1e-14 && (s2 - h2).norm() < 1e-14);
        assert!(BoundarySpec::special(h1, h2).quasi_parameters().is_none());
        assert!(BoundarySpec::antiperiodic().special_parameters().is_none());
    }

    #[test]
    fn validation_reports_diagnostics() {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let bc = BoundarySpec::from_rows(2, &[&[o, z, o, z], &[o, z, o, z]]);
        let p = ProblemSpec::new(vec![o, z], PotentialSpec::zero(2), bc);
        let d = validate(&p);
        assert!(d.contains(&Diagnostic::SingularWeight { index: 1 }));
        assert!(d.contains(&Diagnostic::MaximalityViolated { rank: 1, n: 2 }));
        assert!(d.iter().any(|x| x.to_string().starts_with("maximality violated")));
        assert!(d.iter().any(|x| x.to_string().starts_with("singular weight")));
    }

    #[test]
    fn reflection_of_quasi_periodic_inverts_multipliers() {
        let (d1, d2) = (c(0.6, 0.8), c(2.0, 0.0));
        let bc = BoundarySpec::quasi_periodic(d1, d2).transformed(Transform::ReflectInterval);
        let g = bc.c.clone().try_inverse().unwrap();
        let norm = bc.left_mul(&g);
        assert!((norm.d[(0, 0)] + 1.0 / d1).norm() < 1e-14);
        assert!((norm.d[(1, 1)] + 1.0 / d2).norm() < 1e-14);
    }
}
