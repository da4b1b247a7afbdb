//! Browser bindings for three demos: transport between two planar sets,
//! the PD-ization curve of the nested transform, and exact versus
//! mean-approximated transport on the circle.
//!
//! Every operation takes and returns JSON strings. The plain functions are
//! usable (and tested) natively; the `#[wasm_bindgen]` wrappers only map
//! the error type.

use emdkern::gram::{eigen_verdict, DEFAULT_TOL};
use emdkern::ground::{GroundDistance, SinkSpec};
use emdkern::linalg::Matrix;
use emdkern::multiset::WeightedPointSet;
use emdkern::transform::{check_admissible, nested_gram};
use emdkern::transport::{emd, emd_circle, emd_circle_mean_approx, emd_rubner, emdhat_p, emi};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

#[derive(Deserialize)]
struct TransportInput {
    /// `[x, y, mass]` triples.
    a: Vec<[f64; 3]>,
    b: Vec<[f64; 3]>,
    #[serde(default = "euclidean")]
    ground: String,
    threshold: Option<f64>,
    /// Flat sink rate; defaults to the threshold, or 1.
    sink: Option<f64>,
}

fn euclidean() -> String {
    "euclidean".into()
}

#[derive(Serialize)]
struct Flow {
    from: usize,
    to: usize,
    mass: f64,
}

#[derive(Serialize)]
struct TransportOutput {
    /// Canonical supports (duplicates merged); flows index into these.
    a: Vec<[f64; 3]>,
    b: Vec<[f64; 3]>,
    flows: Vec<Flow>,
    emd: f64,
    emd_rubner: Option<f64>,
    emdhat: f64,
    emi: f64,
    sink: f64,
}

fn planar(triples: &[[f64; 3]]) -> Result<WeightedPointSet> {
    WeightedPointSet::new(2, triples.iter().map(|t| vec![t[0], t[1]]).collect(), triples.iter().map(|t| t[2]).collect())
        .map_err(err)
}

fn triples(s: &WeightedPointSet) -> Vec<[f64; 3]> {
    s.points().zip(s.masses()).map(|(p, &m)| [p[0], p[1], m]).collect()
}

/// Optimal plan and the set-level values for two planar sets.
pub fn transport(input: &str) -> Result<String> {
    let inp: TransportInput = serde_json::from_str(input).map_err(err)?;
    let ground = match inp.ground.as_str() {
        "euclidean" => GroundDistance::euclidean(),
        "sqeuclidean" => GroundDistance::squared_euclidean(),
        other => return Err(format!("unknown ground distance {other:?}")),
    };
    let ground = match inp.threshold {
        Some(t) => ground.thresholded(t).map_err(err)?,
        None => ground,
    };
    let beta = inp.sink.or(inp.threshold).unwrap_or(1.0);
    let sink = SinkSpec::flat(beta).map_err(err)?;
    let (a, b) = (planar(&inp.a)?, planar(&inp.b)?);
    let plan = emd(&a, &b, &ground).map_err(err)?;
    let out = TransportOutput {
        flows: plan.flows.iter().map(|&(from, to, mass)| Flow { from, to, mass }).collect(),
        emd: plan.cost,
        emd_rubner: emd_rubner(&a, &b, &ground).ok(),
        emdhat: emdhat_p(&a, &b, &ground, &sink).map_err(err)?,
        emi: emi(&a, &b, &ground, &sink).map_err(err)?,
        sink: beta,
        a: triples(&a),
        b: triples(&b),
    };
    serde_json::to_string(&out).map_err(err)
}

#[derive(Deserialize)]
struct NestedInput {
    gram: Vec<Vec<f64>>,
    max_n: u32,
}

#[derive(Serialize)]
struct NestedStep {
    n: u32,
    min_eig: f64,
    max_abs_eig: f64,
    is_psd: bool,
    matrix: Vec<Vec<f64>>,
}

/// Spectrum of `K_T^n` for `n = 0..=max_n` (`n = 0` is the input).
pub fn nested_curve(input: &str) -> Result<String> {
    let inp: NestedInput = serde_json::from_str(input).map_err(err)?;
    let n = inp.gram.len();
    if inp.gram.iter().any(|r| r.len() != n) {
        return Err("the Gram matrix must be square".into());
    }
    if inp.max_n > 60 {
        return Err("max_n is capped at 60".into());
    }
    let g = Matrix::from_fn(n, n, |i, j| 0.5 * (inp.gram[i][j] + inp.gram[j][i]));
    check_admissible(&g).map_err(err)?;
    let mut steps = Vec::new();
    for k in 0..=inp.max_n {
        let m = if k == 0 { g.clone() } else { nested_gram(&g, k).map_err(err)? };
        let r = eigen_verdict(&m, DEFAULT_TOL).map_err(err)?;
        steps.push(NestedStep {
            n: k,
            min_eig: r.min_eig,
            max_abs_eig: r.max_abs_eig,
            is_psd: r.is_psd,
            matrix: (0..n).map(|i| m.row(i).iter().copied().collect()).collect(),
        });
    }
    serde_json::to_string(&steps).map_err(err)
}

#[derive(Deserialize)]
struct CircleInput {
    /// `[angle, mass]` pairs, angles in `[0, 2π)`.
    a: Vec<[f64; 2]>,
    b: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct CircleOutput {
    exact: f64,
    mean_approx: f64,
    lp: f64,
}

/// Exact circle transport (both sets are rescaled to unit mass), the
/// mean-cut approximation and the general solver for comparison.
pub fn circle(input: &str) -> Result<String> {
    let inp: CircleInput = serde_json::from_str(input).map_err(err)?;
    let set = |pairs: &[[f64; 2]]| -> Result<WeightedPointSet> {
        let pairs: Vec<(f64, f64)> = pairs.iter().map(|p| (p[0].rem_euclid(std::f64::consts::TAU), p[1])).collect();
        WeightedPointSet::from_1d(&pairs).map_err(err)?.normalize().map_err(err)
    };
    let (a, b) = (set(&inp.a)?, set(&inp.b)?);
    let out = CircleOutput {
        exact: emd_circle(&a, &b).map_err(err)?,
        mean_approx: emd_circle_mean_approx(&a, &b).map_err(err)?,
        lp: emd(&a, &b, &GroundDistance::circle()).map_err(err)?.cost,
    };
    serde_json::to_string(&out).map_err(err)
}

#[wasm_bindgen(js_name = transport)]
pub fn transport_js(input: &str) -> std::result::Result<String, JsValue> {
    transport(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = nestedCurve)]
pub fn nested_curve_js(input: &str) -> std::result::Result<String, JsValue> {
    nested_curve(input).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = circle)]
pub fn circle_js(input: &str) -> std::result::Result<String, JsValue> {
    circle(input).map_err(|e| JsValue::from_str(&e))
}
