//! Regularity of boundary conditions, canonical forms and verdicts on normality,
//! peculiar pairs and similarity.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::chardet::separation_check;
use crate::error::{Error, Result};
use crate::linalg::{det, CMat};
use crate::model::{compute_j_invariants, BoundarySpec, ProblemSpec, Transform};

/// Relative threshold for the sector determinants.
pub const DET_REL_TOL: f64 = 1e-10;
/// Unimodularity tolerance `||d| - 1|`.
pub const UNIMODULAR_TOL: f64 = 1e-12;
const PARAM_TOL: f64 = 1e-10;
const WEAK_FRACTIONS: [f64; 3] = [1e-3, 0.5, 1.0 - 1e-3];

pub const SIMILARITY_NOTE: &str = "verdict from theoretical hypotheses, not a numerical proof";

/// `T_A(C, D)`: column `k` of `C` when `Re a_k > 0`, of `D` when `Re a_k < 0`.
pub fn t_matrix(a: &[C64], c: &CMat, d: &CMat) -> Result<CMat> {
    let n = c.ncols();
    if a.len() != n || d.shape() != c.shape() {
        return Err(Error::Domain("t_matrix: dimension mismatch".into()));
    }
    let mut t = CMat::zeros(c.nrows(), n);
    for (k, ak) in a.iter().enumerate() {
        if ak.re.abs() <= 1e-12 * ak.norm() {
            return Err(Error::Domain(format!("inadmissible z: a_{} = {ak} is purely imaginary", k + 1)));
        }
        let src = if ak.re > 0.0 { c } else { d };
        t.set_column(k, &src.column(k));
    }
    Ok(t)
}

/// Sector of the plane cut by the rays `Re(i b_j z) = 0`, with its sample point at radius 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sector {
    pub theta0: f64,
    pub theta1: f64,
    pub z: C64,
}

impl Sector {
    pub fn point_at(&self, frac: f64) -> C64 {
        C64::from_polar(1.0, self.theta0 + frac * (self.theta1 - self.theta0))
    }
}

fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

pub fn sectors(b: &[C64]) -> Vec<Sector> {
    let mut rays: Vec<f64> = b.iter().flat_map(|bj| [wrap(-bj.arg()), wrap(PI - bj.arg())]).collect();
    rays.sort_by(f64::total_cmp);
    rays.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if rays.len() > 1 && (rays[0] + 2.0 * PI - rays[rays.len() - 1]).abs() < 1e-12 {
        rays.pop();
    }
    let m = rays.len();
    (0..m)
        .map(|k| {
            let theta0 = rays[k];
            let theta1 = if k + 1 < m { rays[k + 1] } else { rays[0] + 2.0 * PI };
            Sector { theta0, theta1, z: C64::from_polar(1.0, 0.5 * (theta0 + theta1)) }
        })
        .collect()
}

fn nonsingular_at(b: &[C64], bc: &BoundarySpec, z: C64) -> bool {
    let a: Vec<C64> = b.iter().map(|bj| C64::i() * z * bj).collect();
    let Ok(t) = t_matrix(&a, &bc.c, &bc.d) else { return false };
    let scale: f64 = t.column_iter().map(|col| col.norm()).product();
    scale > 0.0 && det(&t).norm() > DET_REL_TOL * scale
}

pub fn regularity(b: &[C64], bc: &BoundarySpec) -> bool {
    sectors(b).iter().all(|s| nonsingular_at(b, bc, s.z))
}

fn origin_inside(angles: [f64; 3]) -> bool {
    let mut a = angles.map(wrap);
    a.sort_by(f64::total_cmp);
    let gaps = [a[1] - a[0], a[2] - a[1], a[0] + 2.0 * PI - a[2]];
    gaps.iter().all(|g| *g < PI - 1e-12)
}

pub fn weak_regularity(b: &[C64], bc: &BoundarySpec) -> bool {
    if b.len() == 2 && bc.n() == 2 {
        let ratio = b[0] / b[1];
        if ratio.im.abs() > 1e-12 * ratio.norm() {
            if let Ok(j) = compute_j_invariants(bc) {
                let s = j.max_abs().powi(2);
                return (j.j14 * j.j32).norm() > DET_REL_TOL * s || (j.j12 * j.j34).norm() > DET_REL_TOL * s;
            }
        }
    }
    let angles: Vec<f64> = sectors(b)
        .iter()
        .flat_map(|s| WEAK_FRACTIONS.map(|f| s.point_at(f)))
        .filter(|z| nonsingular_at(b, bc, *z))
        .map(|z| z.arg())
        .collect();
    let m = angles.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                if origin_inside([angles[i], angles[j], angles[k]]) {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CanonicalKind {
    QuasiPeriodic { d1: C64, d2: C64 },
    Special { h1: C64, h2: C64 },
    InitialValue,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CanonicalForm {
    #[serde(flatten)]
    pub kind: CanonicalKind,
    pub transforms_used: Vec<Transform>,
}

/// Elements of the group generated by the two transforms, identity first.
pub fn transform_group() -> [Vec<Transform>; 4] {
    [
        vec![],
        vec![Transform::SwapComponents],
        vec![Transform::ReflectInterval],
        vec![Transform::SwapComponents, Transform::ReflectInterval],
    ]
}

pub fn apply_transforms(bc: &BoundarySpec, ts: &[Transform]) -> BoundarySpec {
    ts.iter().fold(bc.clone(), |acc, t| acc.transformed(*t))
}

fn match_kind(bc: &BoundarySpec) -> CanonicalKind {
    if let Some((d1, d2)) = bc.quasi_parameters() {
        CanonicalKind::QuasiPeriodic { d1, d2 }
    } else if let Some((h1, h2)) = bc.special_parameters() {
        CanonicalKind::Special { h1, h2 }
    } else if bc.is_initial_value() {
        CanonicalKind::InitialValue
    } else {
        CanonicalKind::Other
    }
}

pub fn canonical_form(bc: &BoundarySpec, allow_transforms: bool) -> Result<CanonicalForm> {
    if bc.n() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    let group = transform_group();
    let candidates = if allow_transforms { &group[..] } else { &group[..1] };
    let mut fallback = None;
    for ts in candidates {
        let kind = match_kind(&apply_transforms(bc, ts));
        match kind {
            CanonicalKind::QuasiPeriodic { .. } | CanonicalKind::Special { .. } => {
                return Ok(CanonicalForm { kind, transforms_used: ts.clone() });
            }
            CanonicalKind::InitialValue if fallback.is_none() => {
                fallback = Some(CanonicalForm { kind, transforms_used: ts.clone() });
            }
            _ => {}
        }
    }
    Ok(fallback.unwrap_or(CanonicalForm { kind: CanonicalKind::Other, transforms_used: vec![] }))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normality {
    Normal,
    NormalConstQ,
    NotNormal,
    Unknown,
}

fn unimodular(d: C64) -> bool {
    (d.norm() - 1.0).abs() <= UNIMODULAR_TOL
}

fn nonreal_pair(b: &[C64]) -> bool {
    b.len() == 2 && {
        let r = b[0] / b[1];
        r.im.abs() > 1e-12 * r.norm()
    }
}

/// `q` with `Q = (1/b1 - 1/b2) (0 q; conj(q) 0)`, `q != 0`.
pub fn normal_const_parameter(p: &ProblemSpec) -> Option<C64> {
    let qm = p.q.constant_value()?;
    let kappa = 1.0 / p.b[0] - 1.0 / p.b[1];
    let scale = qm.norm();
    if scale == 0.0 || qm[(0, 0)].norm() > PARAM_TOL * scale || qm[(1, 1)].norm() > PARAM_TOL * scale {
        return None;
    }
    let q = qm[(0, 1)] / kappa;
    ((qm[(1, 0)] - kappa * q.conj()).norm() <= PARAM_TOL * scale && q.norm() > 0.0).then_some(q)
}

pub fn normality_verdict(p: &ProblemSpec) -> Normality {
    if p.n() != 2 || !nonreal_pair(&p.b) {
        return Normality::Unknown;
    }
    let Ok(cf) = canonical_form(&p.bc, true) else { return Normality::Unknown };
    let quasi = match cf.kind {
        CanonicalKind::QuasiPeriodic { d1, d2 } => Some((d1, d2)),
        _ => None,
    };
    if p.q.is_identically_zero() {
        return match quasi {
            Some((d1, d2)) if unimodular(d1) && unimodular(d2) => Normality::Normal,
            _ => Normality::NotNormal,
        };
    }
    match (normal_const_parameter(p), p.bc.quasi_parameters()) {
        (Some(_), Some((d1, d2))) if unimodular(d1) && (d1 - d2).norm() <= PARAM_TOL => Normality::NormalConstQ,
        _ => Normality::NotNormal,
    }
}

fn show(z: C64) -> String {
    let clean = |x: f64| if x == 0.0 { 0.0 } else { x };
    format!("{}{:+}i", clean(z.re), clean(z.im))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeculiarVerdict {
    pub is_peculiar: bool,
    pub rank_one: bool,
    pub transforms_used: Vec<Transform>,
    pub reasons: Vec<String>,
}

/// Whether `(pa, pb)` is a normal operator paired with a peculiarly complete one
/// (quasi-periodic unimodular against special conditions, `Q = 0`).
pub fn peculiar_pair_verdict(pa: &ProblemSpec, pb: &ProblemSpec) -> Result<PeculiarVerdict> {
    if pa.n() != 2 || pb.n() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    if pa.b != pb.b || pa.q != pb.q {
        return Err(Error::MismatchedSystems);
    }
    if !nonreal_pair(&pa.b) {
        return Err(Error::RealWeightRatio);
    }
    let mut reasons = Vec::new();
    if !pa.q.is_identically_zero() {
        reasons.push("Q is not identically zero".to_string());
        return Ok(PeculiarVerdict { is_peculiar: false, rank_one: false, transforms_used: vec![], reasons });
    }
    let mut best: Option<(Vec<Transform>, C64, C64, C64)> = None;
    let mut quasi_seen = None;
    let mut special_seen = false;
    for ts in transform_group() {
        let a = apply_transforms(&pa.bc, &ts);
        let b = apply_transforms(&pb.bc, &ts);
        let qa = a.quasi_parameters();
        let sb = b.special_parameters();
        if qa.is_some() {
            quasi_seen = qa;
        }
        special_seen |= sb.is_some();
        if let (Some((d1, d2)), Some((h1, h2))) = (qa, sb) {
            if unimodular(d1) && unimodular(d2) && h1.norm() > PARAM_TOL && h2.norm() > PARAM_TOL {
                best = Some((ts, d1, h1, h2));
                break;
            }
        }
    }
    match best {
        Some((ts, d1, h1, h2)) => {
            let rank_one = (h1 - d1 * h2).norm() <= PARAM_TOL * (h1.norm() + h2.norm());
            reasons.push("Q is identically zero".into());
            reasons.push("first problem: quasi-periodic with |d1| = |d2| = 1".into());
            reasons.push(format!("second problem: special with h1 = {}, h2 = {}", show(h1), show(h2)));
            reasons.push(if rank_one {
                "h1 = d1 h2: resolvent difference has rank one".into()
            } else {
                "h1 != d1 h2: resolvent difference has rank two".into()
            });
            Ok(PeculiarVerdict { is_peculiar: true, rank_one, transforms_used: ts, reasons })
        }
        None => {
            match quasi_seen {
                None => reasons.push("first problem is not quasi-periodic".into()),
                Some((d1, d2)) if !(unimodular(d1) && unimodular(d2)) => {
                    reasons.push("quasi-periodic multipliers are not unimodular".into())
                }
                _ => {}
            }
            if !special_seen {
                reasons.push("second problem is not special".into());
            } else {
                reasons.push("no shared transform puts the pair in canonical form with h1 h2 != 0".into());
            }
            Ok(PeculiarVerdict { is_peculiar: false, rank_one: false, transforms_used: vec![], reasons })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    AlmostNormal,
    NormalSmallQ,
    RieszWithParentheses,
    NoneEstablished,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimilarityVerdict {
    pub verdict: Similarity,
    pub note: &'static str,
    pub small_q_threshold: Option<f64>,
    pub q_sup_norm: f64,
    pub separated: Option<bool>,
}

pub fn similarity_verdict(p: &ProblemSpec, small_q_threshold: Option<f64>) -> Result<SimilarityVerdict> {
    if p.n() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    let q_sup_norm = p.q.sup_norm();
    let mut out =
        SimilarityVerdict { verdict: Similarity::NoneEstablished, note: SIMILARITY_NOTE, small_q_threshold, q_sup_norm, separated: None };
    if !nonreal_pair(&p.b) {
        return Ok(out);
    }
    let Some((d1, d2)) = p.bc.quasi_parameters() else { return Ok(out) };
    if p.q.has_piecewise() {
        out.verdict = Similarity::RieszWithParentheses;
        return Ok(out);
    }
    out.verdict = Similarity::AlmostNormal;
    let sep = separation_check(&p.b, d1, d2)?;
    out.separated = Some(sep.separated);
    if let Some(t) = small_q_threshold {
        if sep.separated && q_sup_norm < t {
            out.verdict = Similarity::NormalSmallQ;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub regular: bool,
    pub weakly_regular: bool,
    pub canonical_form: CanonicalForm,
    pub normality: Normality,
    pub similarity: SimilarityVerdict,
}

pub fn classify(p: &ProblemSpec, small_q_threshold: Option<f64>) -> Result<ClassificationReport> {
    Ok(ClassificationReport {
        regular: regularity(&p.b, &p.bc),
        weakly_regular: weak_regularity(&p.b, &p.bc),
        canonical_form: canonical_form(&p.bc, true)?,
        normality: normality_verdict(p),
        similarity: similarity_verdict(p, small_q_threshold)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{Expr, PotentialSpec};

    fn b_nonreal() -> Vec<C64> {
        vec![c(1.0, 0.0), c(0.0, 1.0)]
    }

    #[test]
    fn t_matrix_selects_columns() {
        let cm = CMat::from_fn(2, 2, |i, j| c((i * 2 + j) as f64 + 1.0, 0.0));
        let dm = CMat::from_fn(2, 2, |i, j| c(-((i * 2 + j) as f64) - 1.0, 0.0));
        let t = t_matrix(&[c(1.0, 0.0), c(-1.0, 0.5)], &cm, &dm).unwrap();
        assert_eq!(t.column(0), cm.column(0));
        assert_eq!(t.column(1), dm.column(1));
        let t2 = t_matrix(&[c(-1.0, 0.0), c(1.0, -0.5)], &dm, &cm).unwrap();
        assert_eq!(t, t2);
        assert!(t_matrix(&[c(0.0, 1.0), c(1.0, 0.0)], &cm, &dm).is_err());
    }

    #[test]
    fn sectors_for_nonreal_ratio() {
        let s = sectors(&b_nonreal());
        assert_eq!(s.len(), 4);
        let total: f64 = s.iter().map(|s| s.theta1 - s.theta0).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        assert_eq!(sectors(&[c(1.0, 0.0), c(-1.0, 0.0)]).len(), 2);
    }

    #[test]
    fn quasi_periodic_is_regular_special_is_not() {
        let b = b_nonreal();
        let qp = BoundarySpec::quasi_periodic(c(2.0, 1.0), c(-0.5, 0.0));
        assert!(regularity(&b, &qp));
        assert!(weak_regularity(&b, &qp));
        let sp = BoundarySpec::special(c(1.0, 0.0), c(2.0, 0.0));
        assert!(!regularity(&b, &sp));
        assert!(!weak_regularity(&b, &sp));
        let iv = BoundarySpec::new(CMat::identity(2, 2), CMat::zeros(2, 2));
        assert!(!weak_regularity(&b, &iv));
        assert!(!weak_regularity(&[c(1.0, 0.0), c(-1.0, 0.0)], &iv));
    }

    #[test]
    fn dirac_regularity_matches_projection_conditions() {
        let b = [c(1.0, 0.0), c(-1.0, 0.0)];
        let cases = [
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)],
        ];
        for e in cases {
            let bc = BoundarySpec::from_rows(2, &[&e[0..4], &e[4..8]]);
            let mut pp = bc.c.clone();
            pp.set_column(1, &bc.d.column(1));
            let mut pm = bc.d.clone();
            pm.set_column(1, &bc.c.column(1));
            let expected = det(&pp).norm() > 1e-12 && det(&pm).norm() > 1e-12;
            assert_eq!(regularity(&b, &bc), expected, "{e:?}");
        }
    }

    #[test]
    fn canonical_forms() {
        let qp = BoundarySpec::from_rows(2, &[&[c(2.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0), c(3.0, 0.0), c(0.0, 0.0), c(-6.0, 0.0)]]);
        let cf = canonical_form(&qp, false).unwrap();
        assert!(matches!(cf.kind, CanonicalKind::QuasiPeriodic { d1, d2 } if (d1 - c(0.5, 0.0)).norm() < 1e-14 && (d2 - c(2.0, 0.0)).norm() < 1e-14));
        let sp = BoundarySpec::special(c(1.5, 0.0), c(0.0, -2.0));
        let swapped = sp.transformed(Transform::SwapComponents);
        assert_eq!(canonical_form(&swapped, false).unwrap().kind, CanonicalKind::Other);
        let cf = canonical_form(&swapped, true).unwrap();
        assert_eq!(cf.transforms_used, vec![Transform::SwapComponents]);
        assert!(matches!(cf.kind, CanonicalKind::Special { h1, .. } if (h1 - c(1.5, 0.0)).norm() < 1e-14));
    }

    #[test]
    fn normality_cases() {
        let b = vec![c(1.0, 0.0), c(0.5, 1.0)];
        let p = ProblemSpec::new(b.clone(), PotentialSpec::zero(2), BoundarySpec::antiperiodic());
        assert_eq!(normality_verdict(&p), Normality::Normal);
        let p2 = p.with_bc(BoundarySpec::quasi_periodic(c(2.0, 0.0), c(1.0, 0.0)));
        assert_eq!(normality_verdict(&p2), Normality::NotNormal);
        let kappa = 1.0 / b[0] - 1.0 / b[1];
        let q = c(0.3, -0.4);
        let qs = PotentialSpec::off_diagonal(Expr::Const(kappa * q), Expr::Const(kappa * q.conj()));
        let phi: f64 = 0.7;
        let d = C64::from_polar(1.0, -phi);
        let p3 = ProblemSpec::new(b.clone(), qs.clone(), BoundarySpec::quasi_periodic(d, d));
        assert_eq!(normality_verdict(&p3), Normality::NormalConstQ);
        let p4 = p3.with_bc(BoundarySpec::quasi_periodic(d, -d));
        assert_eq!(normality_verdict(&p4), Normality::NotNormal);
        let p5 = ProblemSpec::new(b, PotentialSpec::zero(2), BoundarySpec::antiperiodic());
        let real = ProblemSpec { b: vec![c(1.0, 0.0), c(-2.0, 0.0)], ..p5 };
        assert_eq!(normality_verdict(&real), Normality::Unknown);
    }

    #[test]
    fn peculiar_pairs() {
        let b = b_nonreal();
        let h = c(0.8, 0.3);
        let pa = ProblemSpec::new(b.clone(), PotentialSpec::zero(2), BoundarySpec::antiperiodic());
        let v = peculiar_pair_verdict(&pa, &pa.with_bc(BoundarySpec::special(h, -h))).unwrap();
        assert!(v.is_peculiar && v.rank_one);
        let v = peculiar_pair_verdict(&pa, &pa.with_bc(BoundarySpec::special(h, h))).unwrap();
        assert!(v.is_peculiar && !v.rank_one);
        let q = PotentialSpec::off_diagonal(Expr::Const(c(1.0, 0.0)), Expr::Const(c(1.0, 0.0)));
        let pq = ProblemSpec::new(b, q, BoundarySpec::antiperiodic());
        let v = peculiar_pair_verdict(&pq, &pq.with_bc(BoundarySpec::special(h, -h))).unwrap();
        assert!(!v.is_peculiar);
    }

    #[test]
    fn similarity_cases() {
        let b = b_nonreal();
        let poly = PotentialSpec::off_diagonal(Expr::Poly(vec![c(0.1, 0.0), c(0.2, 0.0)]), Expr::Const(c(0.0, 0.1)));
        let p = ProblemSpec::new(b.clone(), poly, BoundarySpec::antiperiodic());
        assert_eq!(similarity_verdict(&p, None).unwrap().verdict, Similarity::AlmostNormal);
        assert_eq!(similarity_verdict(&p, Some(10.0)).unwrap().verdict, Similarity::NormalSmallQ);
        assert_eq!(similarity_verdict(&p, Some(0.01)).unwrap().verdict, Similarity::AlmostNormal);
        let pw = PotentialSpec::off_diagonal(
            Expr::Piecewise { knots: vec![0.0, 0.5, 1.0], pieces: vec![vec![c(1.0, 0.0)], vec![c(-1.0, 0.0)]] },
            Expr::Zero,
        );
        let p = ProblemSpec::new(b.clone(), pw, BoundarySpec::antiperiodic());
        assert_eq!(similarity_verdict(&p, None).unwrap().verdict, Similarity::RieszWithParentheses);
        let p = ProblemSpec::new(b, PotentialSpec::zero(2), BoundarySpec::special(c(1.0, 0.0), c(1.0, 0.0)));
        assert_eq!(similarity_verdict(&p, Some(1.0)).unwrap().verdict, Similarity::NoneEstablished);
    }

    #[test]
    fn regular_implies_two_of_three_minors_nonzero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let b = vec![c(1.0, 0.0), c(-0.4, 0.9)];
        let mut tested = 0;
        for _ in 0..400 {
            let mut e = [c(0.0, 0.0); 8];
            for z in e.iter_mut() {
                if rng.gen_bool(0.6) {
                    *z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                }
            }
            let bc = BoundarySpec::from_rows(2, &[&e[0..4], &e[4..8]]);
            if bc.rank() < 2 {
                continue;
            }
            if regularity(&b, &bc) {
                tested += 1;
                assert!(weak_regularity(&b, &bc));
                let j = compute_j_invariants(&bc).unwrap();
                let tol = 1e-10 * j.max_abs();
                let nz = [j.j14, j.j42, j.j34].iter().filter(|z| z.norm() > tol).count();
                assert!(nz >= 2, "{e:?}");
            }
        }
        assert!(tested > 10);
    }
}
