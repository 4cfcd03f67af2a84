//! Problem files, deterministic JSON output and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::integrate::{Mesh, SampledFunction};
use crate::linalg::CMat;
use crate::model::{BoundarySpec, Expr, PotentialSpec, ProblemSpec, SolverSettings};

type Pair = [f64; 2];

#[derive(Debug, Deserialize, Serialize)]
struct RawExpr {
    kind: String,
    #[serde(default)]
    data: Value,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawPiecewise {
    knots: Vec<f64>,
    pieces: Vec<Vec<Pair>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPotential {
    OffDiagonal {
        #[serde(rename = "Q12")]
        q12: RawExpr,
        #[serde(rename = "Q21")]
        q21: RawExpr,
    },
    Entries {
        entries: Vec<Vec<RawExpr>>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    n: Option<usize>,
    #[serde(rename = "B")]
    b: Vec<Pair>,
    #[serde(rename = "Q", default)]
    q: Option<RawPotential>,
    #[serde(rename = "C")]
    c: Vec<Vec<Pair>>,
    #[serde(rename = "D")]
    d: Vec<Vec<Pair>>,
    #[serde(default)]
    solver: SolverSettings,
}

fn cx(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

fn pair(z: C64) -> Pair {
    [z.re, z.im]
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Domain(format!("parse error: {}", msg.into()))
}

fn poly_from(v: &Value) -> Result<Vec<C64>> {
    let raw: Vec<Pair> = serde_json::from_value(v.clone()).map_err(|e| parse_err(format!("polynomial: {e}")))?;
    Ok(raw.into_iter().map(cx).collect())
}

fn expr_from(raw: &RawExpr) -> Result<Expr> {
    match raw.kind.as_str() {
        "zero" => Ok(Expr::Zero),
        "const" => {
            let v: Pair = serde_json::from_value(raw.data.clone()).map_err(|e| parse_err(format!("constant: {e}")))?;
            Ok(Expr::Const(cx(v)))
        }
        "poly" => Ok(Expr::Poly(poly_from(&raw.data)?)),
        "piecewise" => {
            let pw: RawPiecewise =
                serde_json::from_value(raw.data.clone()).map_err(|e| parse_err(format!("piecewise: {e}")))?;
            Ok(Expr::Piecewise { knots: pw.knots, pieces: pw.pieces.into_iter().map(|p| p.into_iter().map(cx).collect()).collect() })
        }
        other => Err(parse_err(format!("unknown expression kind {other:?}"))),
    }
}

fn expr_to(e: &Expr) -> RawExpr {
    let poly = |p: &[C64]| -> Value { json!(p.iter().map(|z| pair(*z)).collect::<Vec<_>>()) };
    match e {
        Expr::Zero => RawExpr { kind: "zero".into(), data: Value::Null },
        Expr::Const(v) => RawExpr { kind: "const".into(), data: json!(pair(*v)) },
        Expr::Poly(p) => RawExpr { kind: "poly".into(), data: poly(p) },
        Expr::Piecewise { knots, pieces } => RawExpr {
            kind: "piecewise".into(),
            data: json!({ "knots": knots, "pieces": pieces.iter().map(|p| poly(p)).collect::<Vec<_>>() }),
        },
    }
}

fn matrix_from(rows: &[Vec<Pair>], name: &str, n: usize) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(parse_err(format!("{name} must be {n} x {n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| cx(rows[i][j])))
}

/// Parses a problem without validating it.
pub fn problem_from_str(s: &str) -> Result<ProblemSpec> {
    let raw: RawProblem = serde_json::from_str(s).map_err(|e| parse_err(e.to_string()))?;
    let n = raw.n.unwrap_or(raw.b.len());
    if raw.b.len() != n {
        return Err(parse_err(format!("B has {} entries, expected {n}", raw.b.len())));
    }
    let q = match &raw.q {
        None => PotentialSpec::zero(n),
        Some(RawPotential::OffDiagonal { q12, q21 }) => {
            if n != 2 {
                return Err(parse_err("Q12/Q21 form requires n = 2"));
            }
            PotentialSpec::off_diagonal(expr_from(q12)?, expr_from(q21)?)
        }
        Some(RawPotential::Entries { entries }) => {
            if entries.len() != n || entries.iter().any(|r| r.len() != n) {
                return Err(parse_err(format!("Q entries must be {n} x {n}")));
            }
            let flat = entries.iter().flatten().map(expr_from).collect::<Result<Vec<_>>>()?;
            PotentialSpec { n, entries: flat }
        }
    };
    let bc = BoundarySpec::new(matrix_from(&raw.c, "C", n)?, matrix_from(&raw.d, "D", n)?);
    Ok(ProblemSpec { b: raw.b.into_iter().map(cx).collect(), q, bc, solver: raw.solver })
}

pub fn read_problem(path: &Path) -> Result<ProblemSpec> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("{}: {e}", path.display())))?;
    problem_from_str(&s)
}

pub fn problem_to_value(p: &ProblemSpec) -> Value {
    let n = p.n();
    let mat = |m: &CMat| -> Vec<Vec<Pair>> { (0..n).map(|i| (0..n).map(|j| pair(m[(i, j)])).collect()).collect() };
    let q = if n == 2 && p.q.entry(0, 0).is_identically_zero() && p.q.entry(1, 1).is_identically_zero() {
        json!({ "Q12": expr_to(p.q.entry(0, 1)), "Q21": expr_to(p.q.entry(1, 0)) })
    } else {
        json!({ "entries": (0..n).map(|i| (0..n).map(|j| expr_to(p.q.entry(i, j))).collect::<Vec<_>>()).collect::<Vec<_>>() })
    };
    json!({
        "n": n,
        "B": p.b.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "Q": q,
        "C": mat(&p.bc.c),
        "D": mat(&p.bc.d),
        "solver": p.solver,
    })
}

/// Float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0.0000000000000000e0".into()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat_n(' ', k));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(|x| !x.is_array() && !x.is_object());
            out.push('[');
            for (i, x) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if flat {
                    if i > 0 {
                        out.push(' ');
                    }
                } else {
                    out.push('\n');
                    pad(out, indent + 2);
                }
                write_value(out, x, indent + 2);
            }
            if !flat {
                out.push('\n');
                pad(out, indent);
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, x)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                pad(out, indent + 2);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, indent + 2);
            }
            out.push('\n');
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with every float printed to 17 significant digits.
pub fn to_json_string<T: Serialize>(v: &T) -> Result<String> {
    let value = serde_json::to_value(v).map_err(|e| Error::Domain(e.to_string()))?;
    let mut out = String::new();
    write_value(&mut out, &value, 0);
    out.push('\n');
    Ok(out)
}

/// CSV text from a header and rows of already formatted cells.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Domain(e.to_string()))?;
    for r in rows {
        w.write_record(r).map_err(|e| Error::Domain(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Domain(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Domain(e.to_string()))
}

/// Columns `x, re(y1), im(y1), re(y2), im(y2), ...` at every sample, in increasing `x`.
pub fn sampled_to_csv(f: &SampledFunction) -> Result<String> {
    let mut header = vec!["x".to_string()];
    for j in 1..=f.n {
        header.push(format!("re_y{j}"));
        header.push(format!("im_y{j}"));
    }
    let rows: Vec<Vec<String>> = f
        .mesh
        .points()
        .into_iter()
        .map(|(x, r)| {
            let mut row = vec![fmt_f64(x)];
            for v in f.value(r) {
                row.push(fmt_f64(v.re));
                row.push(fmt_f64(v.im));
            }
            row
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(&h, &rows)
}

/// Reads `x, re(y1), im(y1), ...` samples and interpolates them linearly onto `mesh`.
pub fn sampled_from_csv(text: &str, mesh: &Mesh, n: usize) -> Result<SampledFunction> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<(f64, Vec<C64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != 1 + 2 * n {
            return Err(parse_err(format!("expected {} columns, found {}", 1 + 2 * n, rec.len())));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        rows.push((nums[0], (0..n).map(|j| C64::new(nums[1 + 2 * j], nums[2 + 2 * j])).collect()));
    }
    if rows.len() < 2 {
        return Err(parse_err("need at least two samples"));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let interp = |x: f64| -> Vec<C64> {
        let k = rows.partition_point(|r| r.0 < x).clamp(1, rows.len() - 1);
        let (x0, v0) = (&rows[k - 1].0, &rows[k - 1].1);
        let (x1, v1) = (&rows[k].0, &rows[k].1);
        let t = if x1 > x0 { ((x - x0) / (x1 - x0)).clamp(0.0, 1.0) } else { 0.0 };
        v0.iter().zip(v1).map(|(a, b)| a + (b - a) * t).collect()
    };
    Ok(SampledFunction::from_fn(mesh, n, interp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    const SAMPLE: &str = r#"{
        "n": 2,
        "B": [[1, 0], [0, 1]],
        "Q": {"Q12": {"kind": "piecewise", "data": {"knots": [0, 0.5, 1], "pieces": [[[1, 0]], [[0, 0]]]}},
              "Q21": {"kind": "poly", "data": [[0, 1], [2, 0]]}},
        "C": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
        "D": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]],
        "solver": {"trust_region": 70}
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let p = problem_from_str(SAMPLE).unwrap();
        assert_eq!(p.bc, BoundarySpec::antiperiodic());
        assert_eq!(p.solver.trust_region, 70.0);
        assert_eq!(p.solver.rtol, SolverSettings::default().rtol);
        assert_eq!(p.q.entry(1, 0), &Expr::Poly(vec![c(0.0, 1.0), c(2.0, 0.0)]));
        let text = to_json_string(&problem_to_value(&p)).unwrap();
        let back = problem_from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn missing_potential_is_zero() {
        let s = r#"{"B": [[1,0],[0,1]], "C": [[[1,0],[0,0]],[[0,0],[1,0]]], "D": [[[0,0],[0,0]],[[0,0],[0,0]]]}"#;
        let p = problem_from_str(s).unwrap();
        assert!(p.q.is_identically_zero());
        assert!(problem_from_str(r#"{"B": [[1,0]], "C": [], "D": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        let s = to_json_string(&json!({"a": [1.5, 2], "b": f64::NAN})).unwrap();
        assert!(s.contains("1.5000000000000000e0"));
        assert!(s.contains("\"b\": null"));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"][0], json!(1.5));
    }

    #[test]
    fn csv_round_trip_is_exact_for_linear_data() {
        let mesh = Mesh::uniform(4, &[]);
        let f = SampledFunction::from_fn(&mesh, 2, |x| vec![c(x, -x), c(2.0 * x + 1.0, 0.5)]);
        let text = sampled_to_csv(&f).unwrap();
        let g = sampled_from_csv(&text, &mesh, 2).unwrap();
        assert!(f.sub(&g).sup_norm() < 1e-15);
    }
}
