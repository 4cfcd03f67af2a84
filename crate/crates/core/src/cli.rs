//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::chardet::{char_det, gamma_of_d, separation_check, unperturbed_lattice};
use crate::classify::{classify, peculiar_pair_verdict};
use crate::error::{Error, Result};
use crate::integrate::{fundamental_matrix_on, Mesh, SampledFunction};
use crate::io::{csv_string, fmt_f64, read_problem, sampled_from_csv, sampled_to_csv, to_json_string};
use crate::model::{compute_j_invariants, ProblemSpec};
use crate::probe::{
    adjoint_problem, boundary_residual, bump_test_function, collocation_residual, completeness_defect, gram_condition,
    mesh_for_eigenvalues, second_component_residual, EigenfunctionBundle,
};
use crate::resolvent::{alpha_beta, apply_resolvent, one_dim_criterion, rank_resolvent_diff};
use crate::spectrum::{find_eigenvalues, pair_with_lattice, smallest_eigenvalues, Rect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Spectral analysis of first-order 2x2 boundary value problems
/// `-i B^{-1} y' + Q(x) y = lambda y`, `C y(0) + D y(1) = 0` on [0, 1].
///
/// Problem files are JSON: {"n":2, "B":[[re,im],[re,im]], "Q":{"Q12":expr,"Q21":expr},
/// "C":[[[re,im],..],..], "D":[..], "solver":{..}}, with expressions
/// {"kind":"zero"|"const"|"poly"|"piecewise","data":..}. Polynomial coefficients are
/// listed in ascending order; piecewise data is {"knots":[0,..,1],"pieces":[poly,..]}.
/// Floats are printed with 17 significant digits.
#[derive(Debug, Parser)]
#[command(name = "bvp-spectra", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value = "json", global = true)]
    pub format: Format,
    /// Newton tolerance on the normalized determinant (overrides solver.newton_tol).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed for randomized test functions.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,
    /// Work with the adjoint problem (single-problem subcommands).
    #[arg(long, global = true)]
    pub adjoint: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a problem file; exits 1 with diagnostics when invalid.
    Validate { problem: PathBuf },
    /// Regularity, canonical form, normality and similarity verdicts.
    Classify {
        problem: PathBuf,
        /// Smallness threshold for sup |Q| in the similarity verdict (the constant is user supplied).
        #[arg(long)]
        small_q_threshold: Option<f64>,
    },
    /// Characteristic determinant det(C + D Phi(1, lambda)); CSV columns lambda_re,lambda_im,delta_re,delta_im.
    Det {
        problem: PathBuf,
        /// Evaluation point "re,im"; may be repeated.
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Vec<C64>,
        /// Grid over the rectangle "x0,x1,y0,y1".
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: Option<Rect>,
        /// Points per side of the rectangle grid.
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Unperturbed lattice 2 pi b_j^{-1} (gamma_j + n) for quasi-periodic conditions; CSV columns n,j,lambda_re,lambda_im.
    Lattice {
        problem: PathBuf,
        /// Largest |n|.
        #[arg(long, default_value_t = 10)]
        range: i64,
    },
    /// Eigenvalues inside a rectangle, with multiplicities.
    Spectrum {
        problem: PathBuf,
        /// Search rectangle "x0,x1,y0,y1".
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: Rect,
    },
    /// Rank of the resolvent difference of two problems sharing B and Q.
    RankDiff {
        a: PathBuf,
        b: PathBuf,
        /// Evaluate the rank-one data alpha, beta, gamma at "re,im" (second problem must be special).
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Option<C64>,
    },
    /// Apply the resolvent at lambda to f read from CSV (x,re_y1,im_y1,re_y2,im_y2); output is CSV of the same shape.
    Resolve {
        problem: PathBuf,
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: C64,
        /// Right-hand side samples, linearly interpolated onto the quadrature mesh.
        #[arg(long)]
        f: PathBuf,
    },
    /// Peculiar-pair verdict for a quasi-periodic and a special problem.
    Peculiar { a: PathBuf, b: PathBuf },
    /// Eigenfunction certificates: second components on [a, 1], completeness defects, Gram conditioning.
    Probe {
        problem: PathBuf,
        /// Left end of the interval where second components are inspected, in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        a: f64,
        /// Number of eigenfunctions (smallest |lambda| first).
        #[arg(long, default_value_t = 40)]
        num_eig: usize,
    },
}

fn parse_floats(s: &str, k: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != k || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {k} comma-separated finite numbers"));
    }
    Ok(v)
}

fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let v = parse_floats(s, 2)?;
    Ok(C64::new(v[0], v[1]))
}

fn parse_rect(s: &str) -> std::result::Result<Rect, String> {
    let v = parse_floats(s, 4)?;
    if !(v[1] > v[0] && v[3] > v[2]) {
        return Err("rectangle must satisfy x0 < x1 and y0 < y1".into());
    }
    Ok(Rect::new(v[0], v[1], v[2], v[3]))
}

fn load(path: &Path, tol: Option<f64>) -> Result<ProblemSpec> {
    let p = read_problem(path)?.validated()?;
    tuned(p, tol)
}

fn tuned(mut p: ProblemSpec, tol: Option<f64>) -> Result<ProblemSpec> {
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Domain("--tol must be positive".into()));
        }
        p.solver.newton_tol = t;
    }
    Ok(p)
}

fn cpair(z: C64) -> Value {
    json!([z.re, z.im])
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

/// Runs a parsed command and returns its standard output.
pub fn run(cli: &Cli) -> Result<String> {
    let tol = cli.tol;
    let load = |path: &Path, tol: Option<f64>| -> Result<ProblemSpec> {
        let p = load(path, tol)?;
        if cli.adjoint && !matches!(cli.command, Command::RankDiff { .. } | Command::Peculiar { .. }) {
            adjoint_problem(&p)
        } else {
            Ok(p)
        }
    };
    let csv = cli.format == Format::Csv;
    match &cli.command {
        Command::Validate { problem } => {
            let p = load(problem, None)?;
            to_json_string(&json!({ "valid": true, "n": p.n(), "nonreal_ratio": p.has_nonreal_ratio() }))
        }
        Command::Classify { problem, small_q_threshold } => {
            let p = load(problem, tol)?;
            let report = classify(&p, *small_q_threshold)?;
            let mut v = serde_json::to_value(&report).map_err(|e| Error::Domain(e.to_string()))?;
            if let Ok(j) = compute_j_invariants(&p.bc) {
                v["j_invariants"] = json!({
                    "J12": cpair(j.j12), "J13": cpair(j.j13), "J14": cpair(j.j14),
                    "J32": cpair(j.j32), "J42": cpair(j.j42), "J34": cpair(j.j34),
                });
            }
            to_json_string(&v)
        }
        Command::Det { problem, lambda, rect, grid } => {
            let p = load(problem, tol)?;
            let mut pts = lambda.clone();
            if let Some(r) = rect {
                let g = (*grid).max(2);
                for iy in 0..g {
                    for ix in 0..g {
                        let x = r.x0 + (r.x1 - r.x0) * ix as f64 / (g - 1) as f64;
                        let y = r.y0 + (r.y1 - r.y0) * iy as f64 / (g - 1) as f64;
                        pts.push(C64::new(x, y));
                    }
                }
            }
            if pts.is_empty() {
                return Err(Error::Domain("give --lambda or --rect".into()));
            }
            use rayon::prelude::*;
            let vals = pts.par_iter().map(|&l| char_det(&p, l, false)).collect::<Result<Vec<_>>>()?;
            if csv {
                let rows: Vec<Vec<String>> = vals
                    .iter()
                    .map(|d| vec![f(d.lambda.re), f(d.lambda.im), f(d.value.re), f(d.value.im)])
                    .collect();
                csv_string(&["lambda_re", "lambda_im", "delta_re", "delta_im"], &rows)
            } else {
                let items: Vec<Value> = vals
                    .iter()
                    .map(|d| json!({ "lambda": cpair(d.lambda), "delta": cpair(d.value), "normalized_abs": d.normalized().norm() }))
                    .collect();
                to_json_string(&json!({ "values": items }))
            }
        }
        Command::Lattice { problem, range } => {
            let p = load(problem, tol)?;
            let (d1, d2) = p
                .bc
                .quasi_parameters()
                .ok_or_else(|| Error::NotCanonical("lattice requires quasi-periodic conditions".into()))?;
            let pts = unperturbed_lattice(&p.b, [d1, d2], *range)?;
            if csv {
                let rows: Vec<Vec<String>> =
                    pts.iter().map(|q| vec![q.n.to_string(), q.j.to_string(), f(q.lambda.re), f(q.lambda.im)]).collect();
                return csv_string(&["n", "j", "lambda_re", "lambda_im"], &rows);
            }
            let sep = separation_check(&p.b, d1, d2).ok();
            to_json_string(&json!({
                "d": [cpair(d1), cpair(d2)],
                "gamma": [gamma_of_d(d1)?, gamma_of_d(d2)?],
                "separation": sep,
                "points": pts,
            }))
        }
        Command::Spectrum { problem, rect } => {
            let p = load(problem, tol)?;
            let set = find_eigenvalues(&p, *rect)?;
            if csv {
                let rows: Vec<Vec<String>> = set
                    .items
                    .iter()
                    .map(|e| vec![f(e.lambda.re), f(e.lambda.im), e.multiplicity.to_string(), e.refined.to_string()])
                    .collect();
                return csv_string(&["re", "im", "mult", "refined"], &rows);
            }
            let eigs: Vec<Value> = set
                .items
                .iter()
                .map(|e| json!({ "re": e.lambda.re, "im": e.lambda.im, "mult": e.multiplicity, "refined": e.refined }))
                .collect();
            let pairing = match p.bc.quasi_parameters() {
                Some((d1, d2)) => {
                    let lat = unperturbed_lattice(&p.b, [d1, d2], 200)?;
                    let inside: Vec<_> = lat.into_iter().filter(|l| set.rect.dilate(0.5).contains(l.lambda)).collect();
                    let table = pair_with_lattice(&set.values(), &inside, None);
                    Some(json!({
                        "labels": "heuristic (n, j) from greedy nearest matching",
                        "radius": table.radius,
                        "rows": table.rows,
                        "unmatched": table.unmatched,
                    }))
                }
                None => None,
            };
            to_json_string(&json!({
                "rect": set.rect,
                "count": set.total(),
                "eigenvalues": eigs,
                "pairing": pairing,
            }))
        }
        Command::RankDiff { a, b, lambda } => {
            let pa = load(a, tol)?;
            let pb = load(b, tol)?;
            let rank = rank_resolvent_diff(&pa.bc, &pb.bc)?;
            let one_dim = match one_dim_criterion(&pa.bc, &pb.bc) {
                Ok(v) => Some(v),
                Err(Error::IdenticalOperators) => None,
                Err(e) => return Err(e),
            };
            let mut out = json!({ "stacked_rank": rank + pa.n(), "rank": rank, "one_dim": one_dim });
            if let Some(l) = lambda {
                let mesh = Mesh::for_problem(&pa);
                let fs = fundamental_matrix_on(&pa, *l, &mesh, false)?;
                let rd = alpha_beta(&pa, &pb, &fs)?;
                out["lambda"] = cpair(*l);
                out["alpha"] = json!(rd.alpha.map(cpair));
                out["beta"] = json!(rd.beta.map(cpair));
                out["gamma"] = cpair(rd.gamma);
            }
            to_json_string(&out)
        }
        Command::Resolve { problem, lambda, f: fpath } => {
            let p = load(problem, tol)?;
            let text = std::fs::read_to_string(fpath).map_err(|e| Error::Domain(format!("{}: {e}", fpath.display())))?;
            let mesh = Mesh::for_problem(&p);
            let rhs = sampled_from_csv(&text, &mesh, p.n())?;
            let fs = fundamental_matrix_on(&p, *lambda, &mesh, false)?;
            let y = apply_resolvent(&p, &fs, &rhs)?;
            sampled_to_csv(&y)
        }
        Command::Peculiar { a, b } => {
            let pa = load(a, tol)?;
            let pb = load(b, tol)?;
            let v = peculiar_pair_verdict(&pa, &pb)?;
            let rank = rank_resolvent_diff(&pa.bc, &pb.bc)?;
            let mut out = serde_json::to_value(&v).map_err(|e| Error::Domain(e.to_string()))?;
            out["rank_resolvent_diff"] = json!(rank);
            to_json_string(&out)
        }
        Command::Probe { problem, a, num_eig } => {
            if !(*a > 0.0 && *a < 1.0) {
                return Err(Error::Domain("--a must lie in (0, 1)".into()));
            }
            let direct = tuned(read_problem(problem)?.validated()?, tol)?;
            probe_report(&direct, *a, *num_eig, cli.seed, cli.adjoint, csv)
        }
    }
}

/// Smooth random test function `sum_k (c_k cos(pi k x) + s_k sin(pi k x))` per component, unit norm.
pub fn random_test_function(mesh: &Mesh, n: usize, seed: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<Vec<(C64, C64)>> = (0..n)
        .map(|_| {
            (0..6)
                .map(|_| {
                    let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    (z(), z())
                })
                .collect()
        })
        .collect();
    let w = SampledFunction::from_fn(mesh, n, |x| {
        coef.iter()
            .map(|cs| {
                cs.iter()
                    .enumerate()
                    .map(|(k, (c, s))| {
                        let t = std::f64::consts::PI * k as f64 * x;
                        c * t.cos() + s * t.sin()
                    })
                    .sum()
            })
            .collect()
    });
    let nrm = w.norm();
    w.scale(C64::new(1.0 / nrm, 0.0))
}

/// Eigenvalues are always located on the direct problem; the adjoint spectrum is their conjugate.
fn probe_report(direct: &ProblemSpec, a: f64, num: usize, seed: u64, adjoint: bool, csv: bool) -> Result<String> {
    if num == 0 {
        return Err(Error::Domain("--num-eig must be positive".into()));
    }
    let start = 2.0 * std::f64::consts::PI / direct.b.iter().map(|b| b.norm()).sum::<f64>();
    let eigs = smallest_eigenvalues(direct, num, start)?;
    let adj;
    let (p, values): (&ProblemSpec, Vec<C64>) = if adjoint {
        adj = adjoint_problem(direct)?;
        (&adj, eigs.iter().map(|e| e.lambda.conj()).collect())
    } else {
        (direct, eigs.iter().map(|e| e.lambda).collect())
    };
    let mesh = mesh_for_eigenvalues(p, &values);
    let mut bundle = EigenfunctionBundle::build(p, &values, &mesh)?;
    bundle.functions.truncate(num);
    bundle.eigenvalues.truncate(num);
    bundle.degenerate.truncate(num);
    let resid = second_component_residual(&bundle, a);
    if csv {
        let rows: Vec<Vec<String>> = bundle
            .eigenvalues
            .iter()
            .zip(&resid)
            .enumerate()
            .map(|(i, (l, r))| vec![(i + 1).to_string(), f(l.re), f(l.im), f(*r)])
            .collect();
        return csv_string(&["member", "lambda_re", "lambda_im", "second_component_residual"], &rows);
    }
    let n_list: Vec<usize> = (1..=bundle.len()).collect();
    let bump = completeness_defect(&bundle, &bump_test_function(&mesh, a), "bump_second_component", &n_list)?;
    let random = completeness_defect(&bundle, &random_test_function(&mesh, p.n(), seed), "random_smooth", &n_list)?;
    let gram: Vec<Value> = (1..=bundle.len().div_ceil(10))
        .map(|k| (10 * k).min(bundle.len()))
        .map(|n| json!({ "n": n, "condition": gram_condition(&bundle, n) }))
        .collect();
    let members: Vec<Value> = bundle
        .functions
        .iter()
        .zip(&bundle.eigenvalues)
        .zip(&bundle.degenerate)
        .map(|((fun, l), d)| {
            json!({
                "lambda": cpair(*l),
                "degenerate": d,
                "boundary_residual": boundary_residual(p, fun),
                "collocation_residual": collocation_residual(p, *l, fun),
            })
        })
        .collect();
    to_json_string(&json!({
        "problem": if adjoint { "adjoint" } else { "direct" },
        "a": a,
        "members": members,
        "second_component_residuals": resid,
        "defect": { "bump": bump, "random": random },
        "gram_condition": gram,
    }))
}

/// Structured error report for standard error.
pub fn error_json(e: &Error) -> String {
    let diagnostics = match e {
        Error::Invalid(d) => serde_json::to_value(d).unwrap_or(Value::Null),
        _ => json!([]),
    };
    let messages: Vec<String> = match e {
        Error::Invalid(d) => d.iter().map(|x| x.to_string()).collect(),
        _ => vec![],
    };
    to_json_string(&json!({ "error": e.to_string(), "diagnostics": diagnostics, "messages": messages }))
        .unwrap_or_else(|_| format!("{{\"error\": {:?}}}\n", e.to_string()))
}
