//! Adjoint problems, eigenfunctions and numerical completeness certificates.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::{apply_pointwise, fundamental_matrix_on, Mesh, SampledFunction};
use crate::linalg::{null_space, right_singular_pairs, singular_values, CMat};
use crate::model::{BoundarySpec, ProblemSpec, RANK_TOL};

/// Second singular value of `C + D Phi(1)` below this (relative) marks a degenerate eigenvalue.
pub const DEGENERATE_REL: f64 = 1e-6;
/// Projection members whose new direction is shorter than this are treated as dependent.
pub const DEPENDENT_TOL: f64 = 1e-12;

/// Adjoint problem `-i B^{-*} z' + Q^* z = lambda z` with the boundary conditions
/// annihilated by the Lagrange form `z(0)^* (i B^{-1}) y(0) - z(1)^* (i B^{-1}) y(1)`.
pub fn adjoint_problem(p: &ProblemSpec) -> Result<ProblemSpec> {
    let n = p.n();
    let basis = null_space(&p.bc.block(), RANK_TOL);
    if basis.len() != n {
        return Err(Error::Domain("boundary block does not have full row rank".into()));
    }
    let nm = CMat::from_columns(&basis);
    let mut jstar = CMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        let w = C64::i() / p.b[k].conj();
        jstar[(k, k)] = -w;
        jstar[(n + k, n + k)] = w;
    }
    let rows = nm.adjoint() * jstar;
    let bc = BoundarySpec::new(rows.columns(0, n).into_owned(), rows.columns(n, n).into_owned());
    Ok(ProblemSpec {
        b: p.b.iter().map(|b| b.conj()).collect(),
        q: p.q.adjoint(),
        bc,
        solver: p.solver.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct Eigenfunctions {
    pub lambda: C64,
    /// One function, or an orthonormal null-space basis when `degenerate`.
    pub functions: Vec<SampledFunction>,
    pub degenerate: bool,
    pub singular_values: Vec<f64>,
}

fn fix_phase(f: &mut SampledFunction) {
    let mut best = (0.0, C64::new(0.0, 0.0));
    for (_, r) in f.mesh.points() {
        for v in f.value(r) {
            if v.norm() > best.0 * (1.0 + 1e-12) {
                best = (v.norm(), *v);
            }
        }
    }
    if best.0 > 0.0 {
        let rot = best.1.conj() / best.0;
        *f = f.scale(rot);
    }
}

/// Eigenfunctions `y = Phi(x) v` with `v` in the null space of `C + D Phi(1, lambda)`.
pub fn eigenfunction(p: &ProblemSpec, lambda: C64, mesh: &Mesh) -> Result<Eigenfunctions> {
    let fs = fundamental_matrix_on(p, lambda, mesh, false)?;
    let u = &p.bc.c + &p.bc.d * fs.phi_at_one();
    let pairs = right_singular_pairs(&u);
    let scale = p.bc.c.norm() + p.bc.d.norm() * fs.phi_at_one().norm();
    let sv: Vec<f64> = pairs.iter().map(|q| q.0).collect();
    let nullity = sv.iter().filter(|s| **s <= DEGENERATE_REL * scale).count().max(1);
    let functions = pairs
        .iter()
        .take(nullity)
        .map(|(_, v)| {
            let mut f = SampledFunction::zeros(mesh, p.n());
            for chunk in f.at_knots.chunks_mut(p.n()).chain(f.at_nodes.chunks_mut(p.n())) {
                chunk.copy_from_slice(v.as_slice());
            }
            apply_pointwise(&fs, &mut f);
            let nrm = f.norm();
            let mut f = f.scale(C64::new(1.0 / nrm, 0.0));
            fix_phase(&mut f);
            f
        })
        .collect();
    Ok(Eigenfunctions { lambda, functions, degenerate: nullity > 1, singular_values: sv })
}

/// `||C y(0) + D y(1)||`.
pub fn boundary_residual(p: &ProblemSpec, f: &SampledFunction) -> f64 {
    let n = p.n();
    let y0 = nalgebra::DVector::from_column_slice(f.knot(0));
    let y1 = nalgebra::DVector::from_column_slice(f.at_end());
    debug_assert_eq!(y0.len(), n);
    (&p.bc.c * y0 + &p.bc.d * y1).norm()
}

/// `max |-i B^{-1} y' + Q y - lambda y|` over the Gauss nodes, relative to `max(1, |lambda|) sup |y|`.
pub fn collocation_residual(p: &ProblemSpec, lambda: C64, f: &SampledFunction) -> f64 {
    let n = p.n();
    let dy = f.derivative_at_nodes();
    let mut worst: f64 = 0.0;
    for k in 0..f.mesh.node_count() {
        let q = p.q.eval(f.mesh.node(k));
        let y = f.node(k);
        for j in 0..n {
            let mut r = -C64::i() / p.b[j] * dy[k * n + j] - lambda * y[j];
            for m in 0..n {
                r += q[(j, m)] * y[m];
            }
            worst = worst.max(r.norm());
        }
    }
    worst / (lambda.norm().max(1.0) * f.sup_norm())
}

#[derive(Clone, Debug)]
pub struct EigenfunctionBundle {
    pub mesh: Mesh,
    /// One entry per member; repeated when an eigenvalue carries several eigenfunctions.
    pub eigenvalues: Vec<C64>,
    pub functions: Vec<SampledFunction>,
    pub degenerate: Vec<bool>,
}

/// Mesh for the problem, refined so each panel spans at most about half a radian of
/// oscillation at the largest `|b_j lambda|`.
pub fn mesh_for_eigenvalues(p: &ProblemSpec, eigenvalues: &[C64]) -> Mesh {
    let top = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let bmax = p.b.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let panels = p.solver.panels.max((top * bmax / 0.5).ceil() as usize);
    Mesh::uniform(panels, &p.q.breakpoints())
}

impl EigenfunctionBundle {
    pub fn build(p: &ProblemSpec, eigenvalues: &[C64], mesh: &Mesh) -> Result<Self> {
        let parts: Vec<Eigenfunctions> =
            eigenvalues.par_iter().map(|&l| eigenfunction(p, l, mesh)).collect::<Result<_>>()?;
        let mut out = EigenfunctionBundle { mesh: mesh.clone(), eigenvalues: vec![], functions: vec![], degenerate: vec![] };
        for e in parts {
            for f in e.functions {
                out.eigenvalues.push(e.lambda);
                out.functions.push(f);
                out.degenerate.push(e.degenerate);
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// `sup_{x >= a} |f_2(x)|` for every member.
pub fn second_component_residual(bundle: &EigenfunctionBundle, a: f64) -> Vec<f64> {
    let pts: Vec<_> = bundle.mesh.points().into_iter().filter(|(x, _)| *x >= a).collect();
    bundle
        .functions
        .iter()
        .map(|f| pts.iter().map(|(_, r)| f.value(*r)[1].norm()).fold(0.0, f64::max))
        .collect()
}

/// `exp(-1 / (1 - t^2))` with `t` the affine image of `x` from `(a, 1)` onto `(-1, 1)`; zero elsewhere.
pub fn bump(a: f64, x: f64) -> f64 {
    if x <= a || x >= 1.0 {
        return 0.0;
    }
    let t = (2.0 * x - a - 1.0) / (1.0 - a);
    (-1.0 / (1.0 - t * t)).exp()
}

/// Unit-norm `w = (0, g)` with `g` the bump supported in `[a, 1]`.
pub fn bump_test_function(mesh: &Mesh, a: f64) -> SampledFunction {
    let w = SampledFunction::from_fn(mesh, 2, |x| vec![C64::new(0.0, 0.0), C64::new(bump(a, x), 0.0)]);
    let nrm = w.norm();
    w.scale(C64::new(1.0 / nrm, 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectReport {
    pub test_function: String,
    /// `(N, ||w - P_N w|| / ||w||)`.
    pub residual_by_n: Vec<(usize, f64)>,
    /// 1-based positions of members that added no new direction.
    pub dependent_members: Vec<usize>,
}

/// Residual of the best approximation of `w` from the span of the first `N` members, for each `N`.
///
/// The span is built by Gram-Schmidt with one reorthogonalization pass, so the residuals
/// are monotone by construction.
pub fn completeness_defect(
    bundle: &EigenfunctionBundle,
    w: &SampledFunction,
    test_function: &str,
    n_list: &[usize],
) -> Result<DefectReport> {
    if bundle.is_empty() {
        return Err(Error::Domain("empty eigenfunction bundle".into()));
    }
    if !bundle.functions[0].same_grid(w) {
        return Err(Error::GridMismatch);
    }
    let wn = w.norm();
    if wn == 0.0 {
        return Err(Error::Domain("test function vanishes".into()));
    }
    let top = n_list.iter().copied().max().unwrap_or(0).min(bundle.len());
    let mut basis: Vec<SampledFunction> = Vec::new();
    let mut dependent = Vec::new();
    let mut resid = w.clone();
    let mut by_n = vec![wn];
    for (i, f) in bundle.functions.iter().take(top).enumerate() {
        let mut v = f.clone();
        for _ in 0..2 {
            for e in &basis {
                let c = v.inner(e);
                v = v.sub(&e.scale(c));
            }
        }
        let vn = v.norm();
        if vn > DEPENDENT_TOL * f.norm() {
            let e = v.scale(C64::new(1.0 / vn, 0.0));
            let c = resid.inner(&e);
            resid = resid.sub(&e.scale(c));
            basis.push(e);
        } else {
            dependent.push(i + 1);
        }
        by_n.push(resid.norm());
    }
    let residual_by_n = n_list.iter().map(|&n| (n, by_n[n.min(top)] / wn)).collect();
    Ok(DefectReport { test_function: test_function.into(), residual_by_n, dependent_members: dependent })
}

/// `G_jk = (u_k, u_j)` for the first `n` members.
pub fn gram_matrix(bundle: &EigenfunctionBundle, n: usize) -> CMat {
    let fs = &bundle.functions[..n.min(bundle.len())];
    let m = fs.len();
    let rows: Vec<Vec<C64>> = (0..m).into_par_iter().map(|j| (0..m).map(|k| fs[k].inner(&fs[j])).collect()).collect();
    CMat::from_fn(m, m, |j, k| rows[j][k])
}

/// 2-norm condition number of the Gram matrix; infinite when numerically singular.
pub fn gram_condition(bundle: &EigenfunctionBundle, n: usize) -> f64 {
    let sv = singular_values(&gram_matrix(bundle, n));
    let (top, low) = (sv[0], *sv.last().unwrap_or(&0.0));
    if low <= 1e-14 * top {
        f64::INFINITY
    } else {
        top / low
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, numeric_rank, stack_rows};
    use crate::model::PotentialSpec;

    fn same_operator(a: &BoundarySpec, b: &BoundarySpec) -> bool {
        numeric_rank(&stack_rows(&a.block(), &b.block()), 1e-9) == a.n()
    }

    #[test]
    fn adjoint_of_special_matches_closed_form() {
        let b = vec![c(1.0, 0.0), c(-0.5, 1.0)];
        let (h1, h2) = (c(0.7, 0.2), c(-1.1, 0.4));
        let p = ProblemSpec::new(b.clone(), PotentialSpec::zero(2), BoundarySpec::special(h1, h2));
        let adj = adjoint_problem(&p).unwrap();
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let ratio = (b[0] / b[1]).conj();
        let expected = BoundarySpec::from_rows(2, &[&[h1.conj(), ratio, -h2.conj(), z], &[z, z, z, o]]);
        assert!(same_operator(&adj.bc, &expected));
        assert_eq!(adj.b, vec![b[0].conj(), b[1].conj()]);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let bc = BoundarySpec::from_rows(2, &[&[c(1.0, 0.3), c(0.5, 0.0), c(-0.3, 0.0), c(2.0, 1.0)], &[c(0.0, 0.0), c(1.0, -1.0), c(0.7, 0.0), c(0.0, 1.0)]]);
        let p = ProblemSpec::new(vec![c(1.0, 0.0), c(0.2, 0.9)], PotentialSpec::zero(2), bc);
        let back = adjoint_problem(&adjoint_problem(&p).unwrap()).unwrap();
        assert!(same_operator(&back.bc, &p.bc));
        assert_eq!(back.b, p.b);
    }

    #[test]
    fn unimodular_quasi_periodic_is_self_adjoint_in_bc() {
        let d1 = C64::from_polar(1.0, 0.4);
        let d2 = C64::from_polar(1.0, -2.0);
        let p = ProblemSpec::new(vec![c(1.0, 0.0), c(0.0, 1.0)], PotentialSpec::zero(2), BoundarySpec::quasi_periodic(d1, d2));
        let adj = adjoint_problem(&p).unwrap();
        assert!(same_operator(&adj.bc, &p.bc));
    }

    #[test]
    fn quasi_periodic_eigenfunction_is_exponential() {
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let d = [c(-1.0, 0.0), c(0.5, 0.0)];
        let p = ProblemSpec::new(b.clone(), PotentialSpec::zero(2), BoundarySpec::quasi_periodic(d[0], d[1]));
        let mesh = Mesh::for_problem(&p);
        for pt in crate::chardet::unperturbed_lattice(&b, d, 2).unwrap() {
            let e = eigenfunction(&p, pt.lambda, &mesh).unwrap();
            assert!(!e.degenerate);
            let f = &e.functions[0];
            let j = pt.j - 1;
            let other = 1 - j;
            let exact = SampledFunction::from_fn(&mesh, 2, |x| {
                let mut v = vec![c(0.0, 0.0); 2];
                v[j] = (C64::i() * b[j] * pt.lambda * x).exp();
                v
            });
            let exact = exact.scale(C64::new(1.0 / exact.norm(), 0.0));
            let overlap = f.inner(&exact).norm();
            assert!((overlap - 1.0).abs() < 1e-10, "{pt:?} {overlap}");
            assert!(f.knot(0)[other].norm() < 1e-10);
            assert!(boundary_residual(&p, f) < 1e-8);
            assert!(collocation_residual(&p, pt.lambda, f) < 1e-6);
        }
    }

    #[test]
    fn defect_and_gram_basics() {
        let b = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let p = ProblemSpec::new(b.clone(), PotentialSpec::zero(2), BoundarySpec::antiperiodic());
        let mesh = Mesh::for_problem(&p);
        let lam: Vec<C64> = crate::chardet::unperturbed_lattice(&b, [c(-1.0, 0.0); 2], 2).unwrap().iter().map(|x| x.lambda).collect();
        let bundle = EigenfunctionBundle::build(&p, &lam, &mesh).unwrap();
        let cond = gram_condition(&bundle, bundle.len());
        assert!(cond < 1.0 + 1e-8, "{cond}");
        let w = bundle.functions[0].clone();
        let r = completeness_defect(&bundle, &w, "first", &[1, 3, 5]).unwrap();
        assert!(r.residual_by_n.iter().all(|(_, v)| *v < 1e-12));
        let mut dup = bundle.clone();
        dup.functions.insert(1, dup.functions[0].clone());
        dup.eigenvalues.insert(1, dup.eigenvalues[0]);
        dup.degenerate.insert(1, false);
        assert!(gram_condition(&dup, 4).is_infinite());
        let r = completeness_defect(&dup, &bump_test_function(&mesh, 0.5), "bump", &[1, 2, 3, 4]).unwrap();
        assert_eq!(r.dependent_members, vec![2]);
        assert!(r.residual_by_n.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-10));
    }

    #[test]
    fn bump_is_supported_in_interval() {
        assert_eq!(bump(0.5, 0.4), 0.0);
        assert_eq!(bump(0.5, 1.0), 0.0);
        assert!((bump(0.5, 0.75) - (-1.0f64).exp()).abs() < 1e-15);
    }
}
