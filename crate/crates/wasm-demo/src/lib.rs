//! Browser bindings for three boxverify operations on built-in toy networks.
//!
//! Each exported function returns a JSON string; `www/index.html` draws it.
//! The same functions without the `wasm_bindgen` wrappers are plain Rust so
//! they can be tested natively.

use boxverify::bounds_engine::{estimate_output_bounds, EstimateConfig};
use boxverify::checker::Verdict;
use boxverify::cli::{verify_loaded, VerifyOptions};
use boxverify::onnx_runtime::{LayerOp, Network};
use boxverify::sampler::{lhsmdu, InputBox};
use boxverify::spec_parser::parse_spec;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// One input, four ReLUs: a zig-zag with peaks of different heights, so the
/// bounds are set by interior kinks rather than by the interval ends.
pub fn zigzag() -> Network {
    Network::from_layers(
        1,
        vec![
            LayerOp::dense(vec![vec![1.0, 1.0, 1.0, 1.0]]),
            LayerOp::bias(vec![1.0, 0.5, 0.0, -0.5]),
            LayerOp::Relu,
            LayerOp::dense(vec![vec![1.0], vec![-2.5], vec![2.2], vec![-1.6]]),
            LayerOp::bias(vec![-0.2]),
        ],
    )
    .expect("zigzag layers are consistent")
}

/// Two inputs, four hidden ReLUs, two outputs. `Y_0` grows with `X_0 + X_1`,
/// `Y_1` with `|X_0 − X_1|`.
pub fn pair() -> Network {
    Network::from_layers(
        2,
        vec![
            LayerOp::dense(vec![vec![1.0, 1.0, -1.0, 0.5], vec![1.0, -1.0, 1.0, 0.5]]),
            LayerOp::bias(vec![0.0, 0.0, 0.0, -0.25]),
            LayerOp::Relu,
            LayerOp::dense(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![-0.5, 0.0]]),
            LayerOp::bias(vec![0.0, -0.1]),
        ],
    )
    .expect("pair layers are consistent")
}

#[derive(Serialize)]
pub struct Scatter {
    pub points: Vec<Vec<f64>>,
}

/// `n` LHSMDU points in the unit square.
pub fn scatter(n: usize, seed: u64) -> Result<Scatter, String> {
    if n == 0 || n > 2000 {
        return Err("n must be between 1 and 2000".into());
    }
    let b = InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).map_err(|e| e.to_string())?;
    Ok(Scatter {
        points: lhsmdu(n, &b, seed).points,
    })
}

#[derive(Serialize)]
pub struct Curve {
    /// (x, y) on a fine grid, for drawing the network.
    pub curve: Vec<[f64; 2]>,
    /// (x, y) at the LHSMDU samples.
    pub samples: Vec<[f64; 2]>,
    pub lo: f64,
    pub hi: f64,
    pub lo_at: f64,
    pub hi_at: f64,
}

/// Estimated output range of the zig-zag net on `[lo, hi]`.
pub fn bounds_curve(lo: f64, hi: f64, seed: u64, samples_per_input: usize) -> Result<Curve, String> {
    let net = zigzag();
    let b = InputBox::new(vec![lo], vec![hi]).map_err(|e| e.to_string())?;
    let cfg = EstimateConfig {
        samples_per_input: samples_per_input.clamp(1, 500),
        ..EstimateConfig::default()
    };
    let est = estimate_output_bounds(&net, &b, seed, &cfg, None).map_err(|e| e.to_string())?;
    let at = |x: f64| net.infer(&[x]).map(|y| [x, y[0]]).map_err(|e| e.to_string());
    let curve = (0..=400)
        .map(|k| {
            at(if k == 400 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / 400.0
            })
        })
        .collect::<Result<_, _>>()?;
    let samples = est.samples.points.iter().map(|p| at(p[0])).collect::<Result<_, _>>()?;
    let bound = &est.bounds.outputs[0];
    Ok(Curve {
        curve,
        samples,
        lo: bound.lo,
        hi: bound.hi,
        lo_at: bound.lo_witness[0],
        hi_at: bound.hi_witness[0],
    })
}

#[derive(Serialize, Debug, PartialEq)]
pub struct Outcome {
    pub verdict: &'static str,
    pub detail: Option<String>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

/// Runs the full pipeline on VNNLIB text against the `pair` network.
pub fn verify_text(spec: &str, seed: u64) -> Outcome {
    let parsed = match parse_spec(spec) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                verdict: "unknown",
                detail: Some(e.to_string()),
                x: None,
                y: None,
            };
        }
    };
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let out = verify_loaded(&pair(), &parsed, &opts, None);
    let detail = out.diagnostic.or_else(|| match &out.verdict {
        Verdict::Unknown(reason) => Some(format!("{reason:?}")),
        _ => None,
    });
    let (x, y) = match out.verdict {
        Verdict::Violated { ref x, ref y } => (Some(x.clone()), Some(y.clone())),
        _ => (None, None),
    };
    Outcome {
        verdict: out.verdict.token(),
        detail,
        x,
        y,
    }
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sampleSquare)]
pub fn sample_square(n: usize, seed: u32) -> Result<String, JsError> {
    json(scatter(n, seed.into()))
}

#[wasm_bindgen(js_name = zigzagBounds)]
pub fn zigzag_bounds(lo: f64, hi: f64, seed: u32, samples_per_input: usize) -> Result<String, JsError> {
    json(bounds_curve(lo, hi, seed.into(), samples_per_input))
}

#[wasm_bindgen(js_name = verifyPair)]
pub fn verify_pair(spec: &str, seed: u32) -> Result<String, JsError> {
    json(Ok(verify_text(spec, seed.into())))
}
