//! Zero counting by the argument principle, quadtree isolation with Newton refinement,
//! and matching of computed eigenvalues against the unperturbed lattice.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Mutex;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chardet::{char_det, char_det_rtol, LatticePoint};
use crate::error::{Error, Result};
use crate::model::ProblemSpec;

pub const GUARD_REL: f64 = 1e-8;
pub const MAX_DILATIONS: usize = 3;
pub const DILATION: f64 = 0.01;
pub const CLUSTER_FLOOR: f64 = 1e-6;
const MAX_NEWTON: usize = 60;
const DIP_RATIO: f64 = 0.5;
/// Initial edge spacing in units of `1 / sum |b_j|`; `refine` bisects further where needed.
const EDGE_SPACING: f64 = 2.0;
const SPLIT_FRACTIONS: [(f64, f64); 6] =
    [(0.5137, 0.4871), (0.4709, 0.5293), (0.5613, 0.4422), (0.4381, 0.5571), (0.6023, 0.3917), (0.3779, 0.6211)];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn around(center: C64, half: f64) -> Self {
        Rect::new(center.re - half, center.re + half, center.im - half, center.im + half)
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn diag(&self) -> f64 {
        (self.x1 - self.x0).hypot(self.y1 - self.y0)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re > self.x0 && z.re < self.x1 && z.im > self.y0 && z.im < self.y1
    }

    /// Grows each side by `frac` of its length about the center.
    pub fn dilate(&self, frac: f64) -> Self {
        let (hx, hy) = (0.5 * (self.x1 - self.x0) * frac, 0.5 * (self.y1 - self.y0) * frac);
        Rect::new(self.x0 - hx, self.x1 + hx, self.y0 - hy, self.y1 + hy)
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.x0, self.y0),
            C64::new(self.x1, self.y0),
            C64::new(self.x1, self.y1),
            C64::new(self.x0, self.y1),
        ]
    }

    fn split(&self, fx: f64, fy: f64) -> [Rect; 4] {
        let xm = self.x0 + fx * (self.x1 - self.x0);
        let ym = self.y0 + fy * (self.y1 - self.y0);
        [
            Rect::new(self.x0, xm, self.y0, ym),
            Rect::new(xm, self.x1, self.y0, ym),
            Rect::new(self.x0, xm, ym, self.y1),
            Rect::new(xm, self.x1, ym, self.y1),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZeroCount {
    pub count: usize,
    /// Contour actually used (after any dilation).
    pub rect: Rect,
    pub min_abs: f64,
    pub threshold: f64,
    pub dilations: usize,
}

/// Smallest ratio of a boundary sample to its neighbours; a tiny ratio means the contour
/// runs through (or next to) a zero, while smooth exponential decay leaves it near 1.
struct Guard {
    ratio: f64,
    min_abs: f64,
    threshold: f64,
}

impl Guard {
    fn note(&mut self, v: f64, neighbours: f64) {
        if neighbours > 0.0 && v / neighbours < self.ratio {
            self.ratio = v / neighbours;
            self.min_abs = v;
            self.threshold = GUARD_REL * neighbours;
        }
    }
}

/// Memoized determinant samples shared by all contours of one search.
struct Sampler<'a> {
    p: &'a ProblemSpec,
    spacing: f64,
    cache: Mutex<HashMap<(u64, u64), C64>>,
}

impl<'a> Sampler<'a> {
    fn new(p: &'a ProblemSpec) -> Self {
        let total: f64 = p.b.iter().map(|b| b.norm()).sum();
        Sampler { p, spacing: EDGE_SPACING / total.max(1e-3), cache: Mutex::new(HashMap::new()) }
    }

    /// Normalized determinant; only its argument and modulus are used.
    fn eval(&self, z: C64) -> Result<C64> {
        let key = (z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = char_det_rtol(self.p, z, false, self.p.solver.count_rtol)?.normalized();
        self.cache.lock().unwrap().insert(key, v);
        Ok(v)
    }

    /// Phase change along the segment, sampled in a canonical direction so shared edges reuse samples.
    fn edge(&self, a: C64, b: C64, g: &mut Guard) -> Result<f64> {
        if (a.re, a.im) > (b.re, b.im) {
            return Ok(-self.edge(b, a, g)?);
        }
        let len = (b - a).norm();
        let pieces = ((len / self.spacing).ceil() as usize).clamp(4, 1 << 14);
        let pts: Vec<C64> = (0..=pieces).map(|k| a + (b - a) * (k as f64 / pieces as f64)).collect();
        let vals: Vec<C64> = pts.iter().map(|&z| self.eval(z)).collect::<Result<_>>()?;
        for k in 0..=pieces {
            let left = if k > 0 { vals[k - 1].norm() } else { 0.0 };
            let right = if k < pieces { vals[k + 1].norm() } else { 0.0 };
            g.note(vals[k].norm(), left.max(right));
        }
        let mut total = 0.0;
        for k in 0..pieces {
            total += self.refine(pts[k], vals[k], pts[k + 1], vals[k + 1], g, 0)?;
        }
        Ok(total)
    }

    /// Accepts a segment when both half-steps turn by less than a quarter circle and the
    /// modulus shows no dip at the midpoint; otherwise bisects.
    fn refine(&self, a: C64, fa: C64, b: C64, fb: C64, g: &mut Guard, depth: usize) -> Result<f64> {
        if fa.norm() == 0.0 || fb.norm() == 0.0 {
            return Err(Error::BoundaryTooClose { min: 0.0, threshold: 0.0 });
        }
        let m = 0.5 * (a + b);
        let fm = self.eval(m)?;
        g.note(fm.norm(), fa.norm().max(fb.norm()));
        if fm.norm() == 0.0 {
            return Err(Error::BoundaryTooClose { min: 0.0, threshold: 0.0 });
        }
        let (d1, d2) = ((fm / fa).arg(), (fb / fm).arg());
        let dip = fm.norm() < DIP_RATIO * (fa.norm() * fb.norm()).sqrt();
        if d1.abs() < FRAC_PI_2 && d2.abs() < FRAC_PI_2 && !dip {
            return Ok(d1 + d2);
        }
        if depth > 48 || (b - a).norm() < 1e-13 * (1.0 + a.norm()) {
            return Err(Error::BoundaryTooClose { min: fm.norm(), threshold: 0.0 });
        }
        Ok(self.refine(a, fa, m, fm, g, depth + 1)? + self.refine(m, fm, b, fb, g, depth + 1)?)
    }

    /// Winding number around `rect`, with the near-zero guard applied.
    fn count(&self, rect: &Rect) -> Result<ZeroCount> {
        let c = rect.corners();
        let mut g = Guard { ratio: f64::INFINITY, min_abs: f64::INFINITY, threshold: 0.0 };
        let mut phase = 0.0;
        for k in 0..4 {
            phase += self.edge(c[k], c[(k + 1) % 4], &mut g)?;
        }
        if g.ratio < GUARD_REL {
            return Err(Error::BoundaryTooClose { min: g.min_abs, threshold: g.threshold });
        }
        let w = phase / (2.0 * PI);
        if (w - w.round()).abs() > 1e-6 || w.round() < 0.0 {
            return Err(Error::NonIntegerWinding { value: w });
        }
        Ok(ZeroCount { count: w.round() as usize, rect: *rect, min_abs: g.min_abs, threshold: g.threshold, dilations: 0 })
    }

    fn count_with_dilation(&self, rect: &Rect) -> Result<ZeroCount> {
        let mut r = *rect;
        for k in 0..=MAX_DILATIONS {
            match self.count(&r) {
                Ok(mut zc) => {
                    zc.dilations = k;
                    return Ok(zc);
                }
                Err(Error::BoundaryTooClose { .. }) if k < MAX_DILATIONS => r = r.dilate(DILATION),
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    }
}

/// Number of zeros of `Delta` inside `rect` (with multiplicity).
pub fn count_zeros_rect(p: &ProblemSpec, rect: Rect) -> Result<ZeroCount> {
    Sampler::new(p).count_with_dilation(&rect)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub lambda: C64,
    pub multiplicity: usize,
    /// Newton-converged with `|Delta| <= tol` (normalized).
    pub refined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenvalueSet {
    pub items: Vec<Eigenvalue>,
    pub rect: Rect,
}

impl EigenvalueSet {
    pub fn total(&self) -> usize {
        self.items.iter().map(|e| e.multiplicity).sum()
    }

    pub fn values(&self) -> Vec<C64> {
        self.items.iter().map(|e| e.lambda).collect()
    }
}

/// Newton iteration `z <- z - m Delta / Delta'`, kept inside a slightly enlarged box.
fn newton(p: &ProblemSpec, z0: C64, bx: &Rect, m: usize) -> Option<C64> {
    let tol = p.solver.newton_tol;
    let fence = bx.dilate(0.5);
    let mut z = z0;
    for _ in 0..MAX_NEWTON {
        let cd = char_det(p, z, true).ok()?;
        if cd.value.norm() == 0.0 {
            return Some(z);
        }
        let step = cd.value / cd.derivative? * m as f64;
        if !step.re.is_finite() || !step.im.is_finite() {
            return None;
        }
        z -= step;
        if !fence.contains(z) {
            return None;
        }
        if step.norm() <= tol * z.norm().max(1.0) {
            if m > 1 {
                return Some(z);
            }
            let cd = char_det(p, z, false).ok()?;
            return (cd.normalized().norm() <= tol).then_some(z);
        }
    }
    None
}

enum Outcome {
    Items(Vec<Eigenvalue>),
    Split(Vec<(Rect, usize)>),
}

fn try_split(s: &Sampler, bx: &Rect, count: usize) -> Option<Vec<(Rect, usize)>> {
    for &(fx, fy) in &SPLIT_FRACTIONS {
        let kids = bx.split(fx, fy);
        let counts: Result<Vec<usize>> = kids.iter().map(|k| s.count(k).map(|c| c.count)).collect();
        if let Ok(counts) = counts {
            if counts.iter().sum::<usize>() == count {
                return Some(kids.into_iter().zip(counts).filter(|(_, c)| *c > 0).collect());
            }
        }
    }
    None
}

fn settle(p: &ProblemSpec, bx: &Rect, count: usize) -> Eigenvalue {
    let center = bx.center();
    let lambda = newton(p, center, bx, count).filter(|z| bx.dilate(0.5).contains(*z)).unwrap_or(center);
    Eigenvalue { lambda, multiplicity: count, refined: false }
}

fn process(s: &Sampler, bx: &Rect, count: usize, depth: usize) -> Outcome {
    let p = s.p;
    if count == 1 {
        if let Some(z) = newton(p, bx.center(), bx, 1) {
            if bx.contains(z) {
                return Outcome::Items(vec![Eigenvalue { lambda: z, multiplicity: 1, refined: true }]);
            }
        }
    }
    if depth > 60 || bx.diag() < CLUSTER_FLOOR {
        return Outcome::Items(vec![settle(p, bx, count)]);
    }
    match try_split(s, bx, count) {
        Some(kids) => Outcome::Split(kids),
        None => Outcome::Items(vec![settle(p, bx, count)]),
    }
}

/// Ordering key `(re, im)` quantized to `1e-8`, so rounding noise does not reorder output.
fn sort_key(z: C64) -> (i64, i64) {
    ((z.re * 1e8).round() as i64, (z.im * 1e8).round() as i64)
}

/// Eigenvalues inside `rect`, sorted by `(re, im)`.
pub fn find_eigenvalues(p: &ProblemSpec, rect: Rect) -> Result<EigenvalueSet> {
    let s = Sampler::new(p);
    let top = s.count_with_dilation(&rect)?;
    let mut items = Vec::new();
    let mut work = if top.count > 0 { vec![(top.rect, top.count)] } else { Vec::new() };
    let mut depth = 0;
    while !work.is_empty() {
        let outcomes: Vec<Outcome> = work.par_iter().map(|(bx, c)| process(&s, bx, *c, depth)).collect();
        work.clear();
        for o in outcomes {
            match o {
                Outcome::Items(v) => items.extend(v),
                Outcome::Split(kids) => work.extend(kids),
            }
        }
        depth += 1;
    }
    items.sort_by(|a, b| sort_key(a.lambda).cmp(&sort_key(b.lambda)));
    Ok(EigenvalueSet { items, rect: top.rect })
}

/// Searches a square of half-width `half` around each center; results are merged and sorted.
pub fn find_eigenvalues_near(p: &ProblemSpec, centers: &[C64], half: f64) -> Result<Vec<Eigenvalue>> {
    let sets: Vec<EigenvalueSet> =
        centers.par_iter().map(|&c| find_eigenvalues(p, Rect::around(c, half))).collect::<Result<_>>()?;
    let mut items: Vec<Eigenvalue> = sets.into_iter().flat_map(|s| s.items).collect();
    items.sort_by(|a, b| sort_key(a.lambda).cmp(&sort_key(b.lambda)));
    items.dedup_by(|a, b| (a.lambda - b.lambda).norm() < 1e-8 * a.lambda.norm().max(1.0));
    Ok(items)
}

/// Largest `h` with `|Im(b_j (x + i y))| <= 0.95 trust_region` for all `|x| <= half`, `|y| <= h`.
fn trusted_height(p: &ProblemSpec, half: f64) -> f64 {
    let t = 0.95 * p.solver.trust_region;
    p.b.iter()
        .map(|b| {
            let room = t - b.im.abs() * half;
            if b.re != 0.0 {
                room / b.re.abs()
            } else if room >= 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// The `count` eigenvalues of smallest modulus among those with `|Im(b_j lambda)|` inside the
/// trust region. A centered box, clipped vertically to that band, grows until the part of its
/// inscribed disk covered by the band holds enough eigenvalues.
pub fn smallest_eigenvalues(p: &ProblemSpec, count: usize, start_half: f64) -> Result<Vec<Eigenvalue>> {
    let cap = p
        .b
        .iter()
        .filter(|b| b.im != 0.0)
        .map(|b| 0.999 * 0.95 * p.solver.trust_region / b.im.abs())
        .fold(f64::INFINITY, f64::min);
    let mut half = start_half.min(cap);
    let grow = |h: f64| -> Result<f64> {
        if h >= cap {
            Err(Error::Domain(format!("trust region exhausted before {count} eigenvalues were found")))
        } else {
            Ok((h * 1.5).min(cap))
        }
    };
    loop {
        let height = trusted_height(p, half).min(half);
        if height <= 0.0 {
            return Err(Error::Domain(format!("trust region exhausted before {count} eigenvalues were found")));
        }
        let rect = Rect::new(-half, half, -height, height);
        if count_zeros_rect(p, rect)?.count < count {
            half = grow(half)?;
            continue;
        }
        let set = find_eigenvalues(p, rect)?;
        let mut items: Vec<Eigenvalue> = set.items.into_iter().filter(|e| e.lambda.norm() <= half).collect();
        if items.iter().map(|e| e.multiplicity).sum::<usize>() >= count {
            items.sort_by(|a, b| {
                a.lambda.norm().total_cmp(&b.lambda.norm()).then(a.lambda.re.total_cmp(&b.lambda.re))
            });
            let mut out = Vec::new();
            let mut total = 0;
            for e in items {
                if total >= count {
                    break;
                }
                total += e.multiplicity;
                out.push(e);
            }
            return Ok(out);
        }
        half = grow(half)?;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRow {
    pub n: i64,
    pub j: usize,
    pub lattice: C64,
    pub eigenvalue: Option<C64>,
    pub residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairingTable {
    pub radius: f64,
    pub rows: Vec<PairRow>,
    pub unmatched: Vec<C64>,
}

/// Half the smallest distance between distinct lattice points.
pub fn default_pairing_radius(lattice: &[LatticePoint]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in lattice.iter().enumerate() {
        for b in &lattice[i + 1..] {
            let d = (a.lambda - b.lambda).norm();
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    0.5 * gap
}

/// Greedy nearest matching; `(n, j)` labels are heuristic.
pub fn pair_with_lattice(eigs: &[C64], lattice: &[LatticePoint], radius: Option<f64>) -> PairingTable {
    let radius = radius.unwrap_or_else(|| default_pairing_radius(lattice));
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in eigs.iter().enumerate() {
        for (k, l) in lattice.iter().enumerate() {
            let d = (e - l.lambda).norm();
            if d <= radius {
                cand.push((d, k, i));
            }
        }
    }
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut lat_used = vec![None; lattice.len()];
    let mut eig_used = vec![false; eigs.len()];
    for (d, k, i) in cand {
        if lat_used[k].is_none() && !eig_used[i] {
            lat_used[k] = Some((i, d));
            eig_used[i] = true;
        }
    }
    let mut rows: Vec<PairRow> = lattice
        .iter()
        .zip(&lat_used)
        .map(|(l, m)| PairRow {
            n: l.n,
            j: l.j,
            lattice: l.lambda,
            eigenvalue: m.map(|(i, _)| eigs[i]),
            residual: m.map(|(_, d)| d),
        })
        .collect();
    rows.sort_by_key(|r| (r.n.abs(), r.n, r.j));
    let unmatched = eigs.iter().zip(&eig_used).filter(|(_, u)| !**u).map(|(e, _)| *e).collect();
    PairingTable { radius, rows, unmatched }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub gap: f64,
    pub has_cluster: bool,
}

pub fn separation_gap(set: &[Eigenvalue]) -> GapReport {
    let has_cluster = set.iter().any(|e| e.multiplicity > 1);
    if has_cluster {
        return GapReport { gap: 0.0, has_cluster };
    }
    let mut gap = f64::INFINITY;
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            gap = gap.min((a.lambda - b.lambda).norm());
        }
    }
    GapReport { gap, has_cluster }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::model::{BoundarySpec, PotentialSpec};

    fn quasi(d1: C64, d2: C64) -> ProblemSpec {
        ProblemSpec::new(vec![c(1.0, 0.0), c(0.0, 1.0)], PotentialSpec::zero(2), BoundarySpec::quasi_periodic(d1, d2))
    }

    #[test]
    fn counts_antiperiodic_zeros() {
        let p = quasi(c(-1.0, 0.0), c(-1.0, 0.0));
        assert_eq!(count_zeros_rect(&p, Rect::new(-4.0, 4.0, -4.0, 4.0)).unwrap().count, 4);
        assert_eq!(count_zeros_rect(&p, Rect::new(2.0, 4.0, -1.0, 1.0)).unwrap().count, 1);
        assert_eq!(count_zeros_rect(&p, Rect::new(0.5, 2.5, 0.5, 2.5)).unwrap().count, 0);
    }

    #[test]
    fn contour_through_zero_is_dilated() {
        let p = quasi(c(-1.0, 0.0), c(-1.0, 0.0));
        let zc = count_zeros_rect(&p, Rect::new(-PI, 2.0, -1.0, 1.0)).unwrap();
        assert!(zc.dilations >= 1);
        assert_eq!(zc.count, 1);
    }

    #[test]
    fn periodic_double_zero_is_a_cluster() {
        let p = quasi(c(1.0, 0.0), c(1.0, 0.0));
        let set = find_eigenvalues(&p, Rect::new(-3.0, 3.0, -3.0, 3.0)).unwrap();
        assert_eq!(set.items.len(), 1, "{:?}", set.items);
        let e = set.items[0];
        assert_eq!(e.multiplicity, 2);
        assert!(e.lambda.norm() < 1e-5, "{e:?}");
        assert!(separation_gap(&set.items).has_cluster);
    }

    #[test]
    fn greedy_pairing_prefers_nearest() {
        let lat = vec![
            LatticePoint { n: 0, j: 1, lambda: c(0.0, 0.0) },
            LatticePoint { n: 1, j: 1, lambda: c(1.0, 0.0) },
        ];
        let t = pair_with_lattice(&[c(0.9, 0.0), c(0.2, 0.0)], &lat, None);
        assert_eq!(t.radius, 0.5);
        assert_eq!(t.rows[0].eigenvalue, Some(c(0.2, 0.0)));
        assert_eq!(t.rows[1].eigenvalue, Some(c(0.9, 0.0)));
        assert!(t.unmatched.is_empty());
    }
}
