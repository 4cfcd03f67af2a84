//! Fundamental matrix `Phi' = i B (lambda I - Q(x)) Phi`, the Volterra operator `K_lambda`
//! and the kernel `Psi(t) = i Phi(1) Phi(t)^{-1} B`.
//!
//! Integration uses the Dormand-Prince 5(4) pair with mixed absolute/relative error control.
//! Steps always land on breakpoints of `Q` and on every requested output point.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::model::{poly_eval, Poly, ProblemSpec};

pub const GL_POINTS: usize = 8;

/// Gauss-Legendre rule on `[-1, 1]` with its spectral integration and differentiation matrices.
pub struct GaussRule {
    pub nodes: [f64; GL_POINTS],
    pub weights: [f64; GL_POINTS],
    /// `integ[k][l] = int_{-1}^{t_k} l_l(s) ds`.
    pub integ: [[f64; GL_POINTS]; GL_POINTS],
    /// `diff[k][l] = l_l'(t_k)`.
    pub diff: [[f64; GL_POINTS]; GL_POINTS],
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

pub fn gauss_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let m = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for i in 0..m {
            let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(m, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(m, x);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        let bary: Vec<f64> = (0..m)
            .map(|l| 1.0 / (0..m).filter(|&q| q != l).map(|q| nodes[l] - nodes[q]).product::<f64>())
            .collect();
        let lagrange = |l: usize, s: f64| {
            (0..m).filter(|&q| q != l).map(|q| (s - nodes[q]) / (nodes[l] - nodes[q])).product::<f64>()
        };
        let mut integ = [[0.0; GL_POINTS]; GL_POINTS];
        let mut diff = [[0.0; GL_POINTS]; GL_POINTS];
        for k in 0..m {
            let half = 0.5 * (nodes[k] + 1.0);
            for l in 0..m {
                integ[k][l] = (0..m).map(|q| half * weights[q] * lagrange(l, -1.0 + half * (nodes[q] + 1.0))).sum();
                if k != l {
                    diff[k][l] = bary[l] / bary[k] / (nodes[k] - nodes[l]);
                }
            }
            diff[k][k] = -(0..m).filter(|&l| l != k).map(|l| diff[k][l]).sum::<f64>();
        }
        GaussRule { nodes, weights, integ, diff }
    })
}

/// Panel partition of `[0, 1]`; each panel carries the Gauss-Legendre nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub knots: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointRef {
    Knot(usize),
    Node(usize),
}

impl Mesh {
    pub fn new(mut knots: Vec<f64>) -> Self {
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        Mesh { knots }
    }

    /// `panels` uniform panels refined at the given breakpoints.
    pub fn uniform(panels: usize, breakpoints: &[f64]) -> Self {
        let mut knots: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
        knots.extend_from_slice(breakpoints);
        Mesh::new(knots)
    }

    pub fn for_problem(p: &ProblemSpec) -> Self {
        Mesh::uniform(p.solver.panels, &p.q.breakpoints())
    }

    pub fn panels(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.panels() * GL_POINTS
    }

    pub fn node(&self, k: usize) -> f64 {
        let (p, i) = (k / GL_POINTS, k % GL_POINTS);
        let (a, b) = (self.knots[p], self.knots[p + 1]);
        0.5 * (a + b) + 0.5 * (b - a) * gauss_rule().nodes[i]
    }

    pub fn weight(&self, k: usize) -> f64 {
        let p = k / GL_POINTS;
        0.5 * (self.knots[p + 1] - self.knots[p]) * gauss_rule().weights[k % GL_POINTS]
    }

    /// Every sample location in increasing order.
    pub fn points(&self) -> Vec<(f64, PointRef)> {
        let mut out = Vec::with_capacity(self.knots.len() + self.node_count());
        for p in 0..self.panels() {
            out.push((self.knots[p], PointRef::Knot(p)));
            for i in 0..GL_POINTS {
                let k = p * GL_POINTS + i;
                out.push((self.node(k), PointRef::Node(k)));
            }
        }
        out.push((1.0, PointRef::Knot(self.panels())));
        out
    }
}

/// Vector function on a mesh, stored at knots and Gauss nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    pub mesh: Mesh,
    pub n: usize,
    pub at_knots: Vec<C64>,
    pub at_nodes: Vec<C64>,
}

impl SampledFunction {
    pub fn zeros(mesh: &Mesh, n: usize) -> Self {
        SampledFunction {
            mesh: mesh.clone(),
            n,
            at_knots: vec![C64::new(0.0, 0.0); mesh.knots.len() * n],
            at_nodes: vec![C64::new(0.0, 0.0); mesh.node_count() * n],
        }
    }

    pub fn from_fn(mesh: &Mesh, n: usize, f: impl Fn(f64) -> Vec<C64>) -> Self {
        let mut out = SampledFunction::zeros(mesh, n);
        for (i, &x) in mesh.knots.iter().enumerate() {
            out.at_knots[i * n..(i + 1) * n].copy_from_slice(&f(x));
        }
        for k in 0..mesh.node_count() {
            out.at_nodes[k * n..(k + 1) * n].copy_from_slice(&f(mesh.node(k)));
        }
        out
    }

    pub fn knot(&self, i: usize) -> &[C64] {
        &self.at_knots[i * self.n..(i + 1) * self.n]
    }

    pub fn node(&self, k: usize) -> &[C64] {
        &self.at_nodes[k * self.n..(k + 1) * self.n]
    }

    pub fn value(&self, r: PointRef) -> &[C64] {
        match r {
            PointRef::Knot(i) => self.knot(i),
            PointRef::Node(k) => self.node(k),
        }
    }

    pub fn at_end(&self) -> &[C64] {
        self.knot(self.mesh.knots.len() - 1)
    }

    pub fn same_grid(&self, other: &SampledFunction) -> bool {
        self.n == other.n && self.mesh == other.mesh
    }

    /// `(u, v) = int_0^1 v(t)^* u(t) dt`.
    pub fn inner(&self, other: &SampledFunction) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..self.mesh.node_count() {
            let w = self.mesh.weight(k);
            let s: C64 = self.node(k).iter().zip(other.node(k)).map(|(a, b)| a * b.conj()).sum();
            acc += s * w;
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        SampledFunction {
            mesh: self.mesh.clone(),
            n: self.n,
            at_knots: self.at_knots.iter().map(|&v| f(v)).collect(),
            at_nodes: self.at_nodes.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &SampledFunction, f: impl Fn(C64, C64) -> C64) -> Self {
        SampledFunction {
            mesh: self.mesh.clone(),
            n: self.n,
            at_knots: self.at_knots.iter().zip(&other.at_knots).map(|(&a, &b)| f(a, b)).collect(),
            at_nodes: self.at_nodes.iter().zip(&other.at_nodes).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &SampledFunction) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &SampledFunction) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    /// Largest modulus over all samples and components.
    pub fn sup_norm(&self) -> f64 {
        self.at_knots.iter().chain(&self.at_nodes).map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `x -> int_0^x self`, exact for piecewise polynomials of degree < 8 per panel.
    pub fn cumulative(&self) -> Self {
        let rule = gauss_rule();
        let n = self.n;
        let mut out = SampledFunction::zeros(&self.mesh, n);
        let mut running = vec![C64::new(0.0, 0.0); n];
        for p in 0..self.mesh.panels() {
            let half = 0.5 * (self.mesh.knots[p + 1] - self.mesh.knots[p]);
            for i in 0..GL_POINTS {
                for j in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for l in 0..GL_POINTS {
                        s += self.node(p * GL_POINTS + l)[j] * rule.integ[i][l];
                    }
                    out.at_nodes[(p * GL_POINTS + i) * n + j] = running[j] + s * half;
                }
            }
            for j in 0..n {
                let s: C64 = (0..GL_POINTS).map(|l| self.node(p * GL_POINTS + l)[j] * rule.weights[l]).sum();
                running[j] += s * half;
                out.at_knots[(p + 1) * n + j] = running[j];
            }
        }
        out
    }

    /// Derivative at the Gauss nodes from the per-panel interpolant, flattened like `at_nodes`.
    pub fn derivative_at_nodes(&self) -> Vec<C64> {
        let rule = gauss_rule();
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); self.at_nodes.len()];
        for p in 0..self.mesh.panels() {
            let scale = 2.0 / (self.mesh.knots[p + 1] - self.mesh.knots[p]);
            for i in 0..GL_POINTS {
                for j in 0..n {
                    let s: C64 = (0..GL_POINTS).map(|l| self.node(p * GL_POINTS + l)[j] * rule.diff[i][l]).sum();
                    out[(p * GL_POINTS + i) * n + j] = s * scale;
                }
            }
        }
        out
    }
}

/// Samples of `Phi` (and optionally `dPhi/dlambda`) along `[0, 1]`.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    pub lambda: C64,
    pub b: Vec<C64>,
    /// Points where `phi` was recorded; contains 0, 1 and all breakpoints.
    pub grid: Vec<f64>,
    pub phi: Vec<CMat>,
    pub dphi: Option<Vec<CMat>>,
    /// Present when sampled on a quadrature mesh.
    pub mesh: Option<Mesh>,
    pub phi_nodes: Vec<CMat>,
}

impl FundamentalSolution {
    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn phi_at_one(&self) -> &CMat {
        self.phi.last().expect("grid ends at 1")
    }

    pub fn dphi_at_one(&self) -> Option<&CMat> {
        self.dphi.as_ref().and_then(|d| d.last())
    }

    pub fn phi_at(&self, r: PointRef) -> &CMat {
        match r {
            PointRef::Knot(i) => &self.phi[i],
            PointRef::Node(k) => &self.phi_nodes[k],
        }
    }

    fn mesh_or_err(&self) -> Result<&Mesh> {
        self.mesh.as_ref().ok_or(Error::GridMismatch)
    }
}

struct Rhs<'a> {
    n: usize,
    ib: Vec<C64>,
    lambda: C64,
    polys: &'a [Poly],
    with_w: bool,
    a: Vec<C64>,
}

impl Rhs<'_> {
    fn eval(&mut self, x: f64, y: &[C64], dy: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            for k in 0..n {
                let p = &self.polys[j * n + k];
                let q = if p.is_empty() { C64::new(0.0, 0.0) } else { poly_eval(p, x) };
                let diag = if j == k { self.lambda } else { C64::new(0.0, 0.0) };
                self.a[j * n + k] = self.ib[j] * (diag - q);
            }
        }
        let nn = n * n;
        for col in 0..n {
            for row in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for m in 0..n {
                    s += self.a[row * n + m] * y[col * n + m];
                }
                dy[col * n + row] = s;
                if self.with_w {
                    let mut t = self.ib[row] * y[col * n + row];
                    for m in 0..n {
                        t += self.a[row * n + m] * y[nn + col * n + m];
                    }
                    dy[nn + col * n + row] = t;
                }
            }
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

struct Stages {
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl Stages {
    fn new(m: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); m];
        Stages { k: std::array::from_fn(|_| z.clone()), tmp: z.clone(), ynew: z }
    }
}

/// One Dormand-Prince step from `(x, y)` with `k[0] = f(x, y)` already filled.
/// Leaves the 5th-order result in `st.ynew`, `f(x+h, ynew)` in `k[6]` and returns the error vector in `tmp`.
fn dp_step(rhs: &mut Rhs, x: f64, h: f64, y: &[C64], st: &mut Stages) {
    let m = y.len();
    let comb = |st: &mut Stages, coefs: &[(usize, f64)]| {
        for i in 0..m {
            let mut s = y[i];
            for &(j, c) in coefs {
                s += st.k[j][i] * (h * c);
            }
            st.tmp[i] = s;
        }
    };
    comb(st, &[(0, A21)]);
    rhs.eval(x + C2 * h, &st.tmp, &mut st.k[1]);
    comb(st, &[(0, A31), (1, A32)]);
    rhs.eval(x + C3 * h, &st.tmp, &mut st.k[2]);
    comb(st, &[(0, A41), (1, A42), (2, A43)]);
    rhs.eval(x + C4 * h, &st.tmp, &mut st.k[3]);
    comb(st, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
    rhs.eval(x + C5 * h, &st.tmp, &mut st.k[4]);
    comb(st, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
    rhs.eval(x + h, &st.tmp, &mut st.k[5]);
    for i in 0..m {
        st.ynew[i] = y[i]
            + (st.k[0][i] * B1 + st.k[2][i] * B3 + st.k[3][i] * B4 + st.k[4][i] * B5 + st.k[5][i] * B6) * h;
    }
    rhs.eval(x + h, &st.ynew, &mut st.k[6]);
    for i in 0..m {
        st.tmp[i] = (st.k[0][i] * E1
            + st.k[2][i] * E3
            + st.k[3][i] * E4
            + st.k[4][i] * E5
            + st.k[5][i] * E6
            + st.k[6][i] * E7)
            * h;
    }
}

struct Tolerances {
    rtol: f64,
    atol: f64,
    max_steps: usize,
}

/// Integrates the stacked state through `[0, 1]`, calling `record` at each output point.
fn integrate_state(
    p: &ProblemSpec,
    lambda: C64,
    outputs: &[f64],
    with_w: bool,
    tol: &Tolerances,
    mut record: impl FnMut(usize, &[C64]),
) -> Result<()> {
    let n = p.n();
    let m = if with_w { 2 * n * n } else { n * n };
    let mut y = vec![C64::new(0.0, 0.0); m];
    for j in 0..n {
        y[j * n + j] = C64::new(1.0, 0.0);
    }
    let mut pieces = vec![0.0];
    pieces.extend(p.q.breakpoints());
    pieces.push(1.0);
    let ib: Vec<C64> = p.b.iter().map(|&b| C64::new(0.0, 1.0) * b).collect();
    let qmax = p.q.sup_norm();
    let bmax = p.b.iter().map(|b| b.norm()).fold(0.0, f64::max);
    let mut h = 0.2 * tol.rtol.powf(0.2) / (1.0 + bmax * (lambda.norm() + qmax));
    let mut st = Stages::new(m);
    let mut out_idx = 0;
    while out_idx < outputs.len() && outputs[out_idx] <= 0.0 {
        record(out_idx, &y);
        out_idx += 1;
    }
    let mut steps = 0usize;
    let mut x = 0.0;
    for w in pieces.windows(2) {
        let (l, r) = (w[0], w[1]);
        let polys = p.q.polys_on(l, r);
        let mut rhs = Rhs { n, ib: ib.clone(), lambda, polys: &polys, with_w, a: vec![C64::new(0.0, 0.0); n * n] };
        rhs.eval(x, &y, &mut st.k[0]);
        while x < r {
            let target = if out_idx < outputs.len() && outputs[out_idx] < r { outputs[out_idx] } else { r };
            let mut step = h.min(target - x);
            let snap = target - (x + step) < 1e-13;
            if snap {
                step = target - x;
            }
            if step < 1e-15 {
                return Err(Error::StepUnderflow { x });
            }
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::MaxSteps { x });
            }
            dp_step(&mut rhs, x, step, &y, &mut st);
            let mut err = 0.0;
            for i in 0..m {
                let sc = tol.atol + tol.rtol * y[i].norm().max(st.ynew[i].norm());
                err += (st.tmp[i].norm() / sc).powi(2);
            }
            let err = (err / m as f64).sqrt();
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                x = if snap { target } else { x + step };
                y.copy_from_slice(&st.ynew);
                let (first, rest) = st.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let proposed = step * fac;
                h = if snap { h.max(proposed) } else { proposed };
                while out_idx < outputs.len() && outputs[out_idx] <= x + 1e-15 {
                    record(out_idx, &y);
                    out_idx += 1;
                }
            } else {
                h = step * fac.min(1.0);
            }
        }
    }
    while out_idx < outputs.len() {
        record(out_idx, &y);
        out_idx += 1;
    }
    Ok(())
}

pub fn check_trust_region(p: &ProblemSpec, lambda: C64) -> Result<()> {
    for (j, b) in p.b.iter().enumerate() {
        let v = (b * lambda).im.abs();
        if !(v <= p.solver.trust_region) {
            return Err(Error::TrustRegion { lambda, index: j + 1, value: v, bound: p.solver.trust_region });
        }
    }
    Ok(())
}

fn unpack(n: usize, y: &[C64], offset: usize) -> CMat {
    CMat::from_column_slice(n, n, &y[offset..offset + n * n])
}

fn solve_at(
    p: &ProblemSpec,
    lambda: C64,
    outputs: &[f64],
    with_derivative: bool,
    rtol: f64,
) -> Result<(Vec<CMat>, Option<Vec<CMat>>)> {
    check_trust_region(p, lambda)?;
    let n = p.n();
    let tol = Tolerances { rtol, atol: p.solver.atol, max_steps: p.solver.max_steps };
    let mut phi = Vec::with_capacity(outputs.len());
    let mut dphi = Vec::new();
    integrate_state(p, lambda, outputs, with_derivative, &tol, |_, y| {
        phi.push(unpack(n, y, 0));
        if with_derivative {
            dphi.push(unpack(n, y, n * n));
        }
    })?;
    Ok((phi, with_derivative.then_some(dphi)))
}

fn endpoint_grid(p: &ProblemSpec) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(p.q.breakpoints());
    g.push(1.0);
    g
}

/// `Phi` at 0, the breakpoints and 1.
pub fn fundamental_matrix(p: &ProblemSpec, lambda: C64, with_derivative: bool) -> Result<FundamentalSolution> {
    fundamental_matrix_rtol(p, lambda, with_derivative, p.solver.rtol)
}

pub fn fundamental_matrix_rtol(
    p: &ProblemSpec,
    lambda: C64,
    with_derivative: bool,
    rtol: f64,
) -> Result<FundamentalSolution> {
    let grid = endpoint_grid(p);
    let (phi, dphi) = solve_at(p, lambda, &grid, with_derivative, rtol)?;
    Ok(FundamentalSolution { lambda, b: p.b.clone(), grid, phi, dphi, mesh: None, phi_nodes: Vec::new() })
}

/// `Phi` at every knot and Gauss node of `mesh`.
pub fn fundamental_matrix_on(
    p: &ProblemSpec,
    lambda: C64,
    mesh: &Mesh,
    with_derivative: bool,
) -> Result<FundamentalSolution> {
    let pts = mesh.points();
    let xs: Vec<f64> = pts.iter().map(|t| t.0).collect();
    let (all, dall) = solve_at(p, lambda, &xs, with_derivative, p.solver.rtol)?;
    let mut phi = vec![CMat::zeros(0, 0); mesh.knots.len()];
    let mut phi_nodes = vec![CMat::zeros(0, 0); mesh.node_count()];
    let mut dphi = dall.as_ref().map(|_| vec![CMat::zeros(0, 0); mesh.knots.len()]);
    for (i, (_, r)) in pts.iter().enumerate() {
        match *r {
            PointRef::Knot(j) => {
                phi[j] = all[i].clone();
                if let (Some(d), Some(src)) = (dphi.as_mut(), dall.as_ref()) {
                    d[j] = src[i].clone();
                }
            }
            PointRef::Node(k) => phi_nodes[k] = all[i].clone(),
        }
    }
    Ok(FundamentalSolution {
        lambda,
        b: p.b.clone(),
        grid: mesh.knots.clone(),
        phi,
        dphi,
        mesh: Some(mesh.clone()),
        phi_nodes,
    })
}

/// `Phi(1)` from `steps` uniform Dormand-Prince steps (5th-order solution, no error control).
pub fn fundamental_matrix_fixed(p: &ProblemSpec, lambda: C64, steps: usize) -> Result<CMat> {
    check_trust_region(p, lambda)?;
    let n = p.n();
    let m = n * n;
    let mut y = vec![C64::new(0.0, 0.0); m];
    for j in 0..n {
        y[j * n + j] = C64::new(1.0, 0.0);
    }
    let ib: Vec<C64> = p.b.iter().map(|&b| C64::new(0.0, 1.0) * b).collect();
    let mut st = Stages::new(m);
    let grid = endpoint_grid(p);
    for w in grid.windows(2) {
        let (l, r) = (w[0], w[1]);
        let polys = p.q.polys_on(l, r);
        let mut rhs = Rhs { n, ib: ib.clone(), lambda, polys: &polys, with_w: false, a: vec![C64::new(0.0, 0.0); m] };
        let count = ((r - l) * steps as f64).round().max(1.0) as usize;
        let h = (r - l) / count as f64;
        for s in 0..count {
            let x = l + s as f64 * h;
            rhs.eval(x, &y, &mut st.k[0]);
            dp_step(&mut rhs, x, h, &y, &mut st);
            y.copy_from_slice(&st.ynew);
        }
    }
    Ok(unpack(n, &y, 0))
}

fn inverse(m: &CMat) -> Result<CMat> {
    m.clone().try_inverse().ok_or_else(|| Error::Domain("fundamental matrix is numerically singular".into()))
}

/// `(K_lambda f)(x) = Phi(x) int_0^x Phi(t)^{-1} i B f(t) dt`.
pub fn apply_k(fs: &FundamentalSolution, f: &SampledFunction) -> Result<SampledFunction> {
    let mesh = fs.mesh_or_err()?;
    if &f.mesh != mesh || f.n != fs.n() {
        return Err(Error::GridMismatch);
    }
    let n = fs.n();
    let mut g = SampledFunction::zeros(mesh, n);
    for k in 0..mesh.node_count() {
        let inv = inverse(&fs.phi_nodes[k])?;
        let v = f.node(k);
        for j in 0..n {
            let mut s = C64::new(0.0, 0.0);
            for m in 0..n {
                s += inv[(j, m)] * C64::new(0.0, 1.0) * fs.b[m] * v[m];
            }
            g.at_nodes[k * n + j] = s;
        }
    }
    let mut out = g.cumulative();
    apply_pointwise(fs, &mut out);
    Ok(out)
}

/// Replaces every sample `v(x)` by `Phi(x) v(x)`.
pub fn apply_pointwise(fs: &FundamentalSolution, v: &mut SampledFunction) {
    let n = v.n;
    let mul = |m: &CMat, s: &mut [C64]| {
        let src: Vec<C64> = s.to_vec();
        for j in 0..n {
            s[j] = (0..n).map(|k| m[(j, k)] * src[k]).sum();
        }
    };
    for i in 0..fs.phi.len() {
        mul(&fs.phi[i], &mut v.at_knots[i * n..(i + 1) * n]);
    }
    for k in 0..fs.phi_nodes.len() {
        mul(&fs.phi_nodes[k], &mut v.at_nodes[k * n..(k + 1) * n]);
    }
}

/// Samples of `Psi(t) = i Phi(1) Phi(t)^{-1} B`.
#[derive(Clone, Debug)]
pub struct PsiSamples {
    pub at_knots: Vec<CMat>,
    pub at_nodes: Vec<CMat>,
}

pub fn psi_evaluator(fs: &FundamentalSolution) -> Result<PsiSamples> {
    fs.mesh_or_err()?;
    let phi1 = fs.phi_at_one();
    let bmat = CMat::from_diagonal(&nalgebra::DVector::from_vec(
        fs.b.iter().map(|&b| C64::new(0.0, 1.0) * b).collect(),
    ));
    let psi = |m: &CMat| -> Result<CMat> { Ok(phi1 * inverse(m)? * &bmat) };
    Ok(PsiSamples {
        at_knots: fs.phi.iter().map(psi).collect::<Result<_>>()?,
        at_nodes: fs.phi_nodes.iter().map(psi).collect::<Result<_>>()?,
    })
}

/// `int_0^1 Psi(t) f(t) dt`, which equals `(K_lambda f)(1)`.
pub fn psi_integral(psi: &PsiSamples, f: &SampledFunction) -> Vec<C64> {
    let n = f.n;
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for k in 0..f.mesh.node_count() {
        let w = f.mesh.weight(k);
        let v = f.node(k);
        for j in 0..n {
            acc[j] += (0..n).map(|m| psi.at_nodes[k][(j, m)] * v[m]).sum::<C64>() * w;
        }
    }
    acc
}
