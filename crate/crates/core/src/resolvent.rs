//! Resolvents `R(lambda) f = K_lambda f - Phi M_{C,D} (K_lambda f)(1)` and the finite-rank
//! difference of two resolvents sharing `B` and `Q`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::chardet::char_det_from;
use crate::error::{Error, Result};
use crate::integrate::{apply_k, apply_pointwise, psi_evaluator, psi_integral, FundamentalSolution, SampledFunction};
use crate::linalg::{numeric_rank, stack_rows, CMat};
use crate::model::{compute_j_invariants, BoundarySpec, ProblemSpec, RANK_TOL};

/// `|Delta|` (normalized) below this means lambda is treated as an eigenvalue.
pub const RESOLVENT_DET_TOL: f64 = 1e-12;
const CRITERION_TOL: f64 = 1e-10;

/// `M_{C,D}(lambda) = (C + D Phi(1))^{-1} D`.
pub fn m_matrix(p: &ProblemSpec, fs: &FundamentalSolution) -> Result<CMat> {
    let cd = char_det_from(p, fs);
    if cd.normalized().norm() <= RESOLVENT_DET_TOL {
        return Err(Error::NotInResolventSet { lambda: fs.lambda });
    }
    let u = &p.bc.c + &p.bc.d * fs.phi_at_one();
    let inv = u.try_inverse().ok_or(Error::NotInResolventSet { lambda: fs.lambda })?;
    Ok(inv * &p.bc.d)
}

/// Closed form of `M` through the boundary minors (n = 2).
pub fn m_matrix_via_j(p: &ProblemSpec, fs: &FundamentalSolution) -> Result<CMat> {
    let j = compute_j_invariants(&p.bc)?;
    let phi = fs.phi_at_one();
    let delta = crate::chardet::char_det_via_j(p, fs)?;
    let entries = [
        j.j32 + j.j34 * phi[(1, 1)],
        j.j42 - j.j34 * phi[(0, 1)],
        j.j13 - j.j34 * phi[(1, 0)],
        j.j14 + j.j34 * phi[(0, 0)],
    ];
    Ok(CMat::from_row_slice(2, 2, &entries) / delta)
}

/// `rank (C D; C~ D~) - n`, the rank of `R_A - R_B` on the common resolvent set.
pub fn rank_resolvent_diff(a: &BoundarySpec, b: &BoundarySpec) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::MismatchedSystems);
    }
    let stacked = stack_rows(&a.block(), &b.block());
    Ok(numeric_rank(&stacked, RANK_TOL).saturating_sub(a.n()))
}

/// Whether `R_A - R_B` is one-dimensional, through the bilinear minor identity.
pub fn one_dim_criterion(a: &BoundarySpec, b: &BoundarySpec) -> Result<bool> {
    if rank_resolvent_diff(a, b)? == 0 {
        return Err(Error::IdenticalOperators);
    }
    let ja = compute_j_invariants(a)?;
    let jb = compute_j_invariants(b)?;
    let terms = [
        ja.j12 * jb.j34,
        jb.j12 * ja.j34,
        ja.j13 * jb.j42,
        jb.j13 * ja.j42,
        ja.j14 * jb.j23(),
        jb.j14 * ja.j23(),
    ];
    let sum: C64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.norm()).sum::<f64>().max(ja.max_abs() * jb.max_abs());
    Ok(sum.norm() <= CRITERION_TOL * scale)
}

/// Data of `R~(lambda) - R(lambda) = (., Psi^* beta) Phi alpha`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankOneData {
    pub lambda: C64,
    pub alpha: [C64; 2],
    pub beta: [C64; 2],
    /// `J14 + J34 phi11(lambda)`.
    pub gamma: C64,
    pub h: [C64; 2],
}

impl RankOneData {
    /// `alpha beta^*`, which equals `M_general - M_special`.
    pub fn m_hat(&self) -> CMat {
        CMat::from_fn(2, 2, |j, k| self.alpha[j] * self.beta[k].conj())
    }
}

/// Rank-one representation for a general pair `p_general` against special conditions `p_special`.
pub fn alpha_beta(p_general: &ProblemSpec, p_special: &ProblemSpec, fs: &FundamentalSolution) -> Result<RankOneData> {
    if p_general.b != p_special.b || p_general.q != p_special.q {
        return Err(Error::MismatchedSystems);
    }
    let (h1, h2) = p_special
        .bc
        .special_parameters()
        .ok_or_else(|| Error::NotCanonical("second problem must carry special boundary conditions".into()))?;
    if !one_dim_criterion(&p_general.bc, &p_special.bc)? {
        return Err(Error::RepresentationUnavailable("the resolvent difference is not one-dimensional".into()));
    }
    let j = compute_j_invariants(&p_general.bc)?;
    let phi = fs.phi_at_one();
    let delta = char_det_from(p_general, fs);
    if delta.normalized().norm() <= RESOLVENT_DET_TOL {
        return Err(Error::NotInResolventSet { lambda: fs.lambda });
    }
    let delta = crate::chardet::char_det_via_j(p_general, fs)?;
    let delta_s = -h2 + h1 * phi[(0, 0)] + phi[(0, 1)];
    let special_scale = 1.0 + h1.norm() * phi[(0, 0)].norm() + phi[(0, 1)].norm() + h2.norm();
    if delta_s.norm() <= RESOLVENT_DET_TOL * special_scale {
        return Err(Error::NotInResolventSet { lambda: fs.lambda });
    }
    let gamma = j.j14 + j.j34 * phi[(0, 0)];
    if gamma.norm() <= 1e-13 * (j.j14.norm() + j.j34.norm() * phi[(0, 0)].norm()) {
        return Err(Error::RepresentationUnavailable("gamma(lambda) vanishes".into()));
    }
    let alpha = [h1 - j.j34 * delta_s / gamma, C64::new(1.0, 0.0)];
    let beta_bar = [(j.j13 - j.j34 * phi[(1, 0)]) / delta - 1.0 / delta_s, gamma / delta];
    Ok(RankOneData { lambda: fs.lambda, alpha, beta: [beta_bar[0].conj(), beta_bar[1].conj()], gamma, h: [h1, h2] })
}

/// `R(lambda) f` for the boundary pair of `p`; `fs` must be sampled on the grid of `f`.
pub fn apply_resolvent(p: &ProblemSpec, fs: &FundamentalSolution, f: &SampledFunction) -> Result<SampledFunction> {
    let m = m_matrix(p, fs)?;
    let kf = apply_k(fs, f)?;
    let end = nalgebra::DVector::from_column_slice(kf.at_end());
    let c = &m * end;
    let mut corr = SampledFunction::zeros(&f.mesh, f.n);
    for chunk in corr.at_knots.chunks_mut(f.n).chain(corr.at_nodes.chunks_mut(f.n)) {
        chunk.copy_from_slice(c.as_slice());
    }
    apply_pointwise(fs, &mut corr);
    Ok(kf.sub(&corr))
}

/// `(f, Psi^* beta) Phi alpha`, i.e. `R_special f - R_general f`.
pub fn apply_rank_one_diff(rd: &RankOneData, fs: &FundamentalSolution, f: &SampledFunction) -> Result<SampledFunction> {
    let psi = psi_evaluator(fs)?;
    let integral = psi_integral(&psi, f);
    let coef: C64 = (0..2).map(|k| rd.beta[k].conj() * integral[k]).sum();
    let mut out = SampledFunction::zeros(&f.mesh, 2);
    for chunk in out.at_knots.chunks_mut(2).chain(out.at_nodes.chunks_mut(2)) {
        chunk[0] = rd.alpha[0] * coef;
        chunk[1] = rd.alpha[1] * coef;
    }
    apply_pointwise(fs, &mut out);
    Ok(out)
}

/// Inverse of the antiperiodic operator at `lambda = 0` with `Q = 0`:
/// `y_j = i b_j int_0^x f_j - (i b_j / 2) int_0^1 f_j`.
pub fn antiperiodic_inverse_at_zero(b: &[C64], f: &SampledFunction) -> SampledFunction {
    let cum = f.cumulative();
    let total = cum.at_end().to_vec();
    let n = f.n;
    let mut out = cum.clone();
    for chunk in out.at_knots.chunks_mut(n).chain(out.at_nodes.chunks_mut(n)) {
        for j in 0..n {
            let ib = C64::i() * b[j];
            chunk[j] = ib * chunk[j] - ib * 0.5 * total[j];
        }
    }
    out
}

/// Inverse for special conditions at `lambda = 0` with `Q = 0` (requires `h1 != h2`).
pub fn special_inverse_at_zero(b: &[C64], h1: C64, h2: C64, f: &SampledFunction) -> Result<SampledFunction> {
    if (h2 - h1).norm() == 0.0 {
        return Err(Error::NotInResolventSet { lambda: C64::new(0.0, 0.0) });
    }
    let cum = f.cumulative();
    let f1 = cum.at_end()[0];
    let (ib1, ib2) = (C64::i() * b[0], C64::i() * b[1]);
    let mut out = cum.clone();
    for chunk in out.at_knots.chunks_mut(2).chain(out.at_nodes.chunks_mut(2)) {
        let (c1, c2) = (chunk[0], chunk[1]);
        chunk[0] = ib1 * (c1 + h1 / (h2 - h1) * f1);
        chunk[1] = ib2 * c2 + ib1 / (h2 - h1) * f1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{fundamental_matrix_on, Mesh};
    use crate::linalg::{c, det};
    use crate::model::{Expr, PotentialSpec};

    fn q() -> PotentialSpec {
        PotentialSpec::off_diagonal(Expr::Poly(vec![c(0.5, 0.0), c(0.0, 1.0)]), Expr::Const(c(-0.3, 0.4)))
    }

    #[test]
    fn m_matrix_forms_agree_and_det_identity_holds() {
        let bc = BoundarySpec::from_rows(2, &[&[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0)], &[c(0.0, 0.0), c(1.0, 1.0), c(3.0, 0.0), c(0.5, 0.0)]]);
        let p = ProblemSpec::new(vec![c(1.0, 0.0), c(0.0, 1.0)], q(), bc.clone());
        let fs = fundamental_matrix_on(&p, c(1.1, -0.4), &Mesh::for_problem(&p), false).unwrap();
        let m = m_matrix(&p, &fs).unwrap();
        let mj = m_matrix_via_j(&p, &fs).unwrap();
        assert!((&m - &mj).norm() < 1e-10 * m.norm());
        let j = compute_j_invariants(&bc).unwrap();
        let delta = char_det_from(&p, &fs).value;
        assert!((det(&m) * delta - j.j34).norm() < 1e-10 * (1.0 + j.j34.norm()));
    }

    #[test]
    fn criterion_matches_stacked_rank() {
        let d = c(0.6, 0.8);
        let qp = BoundarySpec::quasi_periodic(d, c(-1.0, 0.0));
        let h2 = c(0.4, -0.2);
        assert!(one_dim_criterion(&qp, &BoundarySpec::special(d * h2, h2)).unwrap());
        assert_eq!(rank_resolvent_diff(&qp, &BoundarySpec::special(d * h2, h2)).unwrap(), 1);
        assert!(!one_dim_criterion(&qp, &BoundarySpec::special(h2, h2)).unwrap());
        assert_eq!(rank_resolvent_diff(&qp, &BoundarySpec::special(h2, h2)).unwrap(), 2);
        assert!(matches!(one_dim_criterion(&qp, &qp), Err(Error::IdenticalOperators)));
    }

    #[test]
    fn alpha_beta_reproduces_m_difference() {
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let h2 = c(0.7, 0.3);
        let general = ProblemSpec::new(b.clone(), q(), BoundarySpec::antiperiodic());
        let special = general.with_bc(BoundarySpec::special(-h2, h2));
        let fs = fundamental_matrix_on(&general, c(0.9, 0.35), &Mesh::for_problem(&general), false).unwrap();
        let rd = alpha_beta(&general, &special, &fs).unwrap();
        let diff = m_matrix(&general, &fs).unwrap() - m_matrix(&special, &fs).unwrap();
        assert!((rd.m_hat() - &diff).norm() < 1e-10 * diff.norm());
    }
}
