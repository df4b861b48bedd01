//! wasm-bindgen exports for the demo page in `www/`.
//!
//! Every function takes and returns JSON text so the page needs no glue
//! beyond `JSON.parse`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;
use welding::capacity::estimate_capacity;
use welding::decompose::{decompose, DecomposeOptions};
use welding::geometry::IntervalUnion;
use welding::homeo::Homeo;

type Out = Result<String, String>;

fn parse_map(text: &str) -> Result<Homeo, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("map: {e}"))?;
    Homeo::from_json(value).map_err(|e| e.to_string())
}

fn grid(a: f64, b: f64, samples: usize) -> impl Iterator<Item = f64> {
    let n = samples.max(2) - 1;
    (0..=n).map(move |i| a + (b - a) * i as f64 / n as f64)
}

/// Capacity estimate and bounds for a set given as JSON, e.g. `[[0,0.5]]`.
pub fn capacity_json(set: &str, panels: usize) -> Out {
    let union: IntervalUnion = serde_json::from_str(set).map_err(|e| format!("set: {e}"))?;
    let est = estimate_capacity(&union, panels.max(8)).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&est).expect("plain data"))
}

/// Samples of a map on its domain: `{"x": [...], "y": [...]}`.
pub fn sample_map_json(map: &str, samples: usize) -> Out {
    let phi = parse_map(map)?;
    let [a, b] = phi.domain();
    let xs: Vec<f64> = grid(a, b, samples).collect();
    let ys = xs
        .iter()
        .map(|&x| phi.eval(x))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(json!({ "x": xs, "y": ys }).to_string())
}

/// Runs the factorization and returns the ledger with the stage maps
/// sampled on `samples` points. Full trees are left out; they grow too
/// fast to ship to a page.
pub fn decompose_json(map: &str, depth: usize, samples: usize) -> Out {
    let phi = parse_map(map)?;
    let opts = DecomposeOptions {
        depth,
        grid: samples.max(2),
        ..Default::default()
    };
    let result = decompose(&phi, &opts).map_err(|e| e.to_string())?;
    let [a, b] = result.trees.domain().root();
    let xs: Vec<f64> = grid(a, b, samples).collect();
    let mut stages = Vec::with_capacity(depth);
    for stage in &result.stages[1..] {
        let h = stage.h_pl().map_err(|e| e.to_string())?;
        let ys = xs
            .iter()
            .map(|&x| h.eval(x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        stages.push(json!({ "n": stage.n, "breakpoints": h.len(), "y": ys }));
    }
    let pieces: Vec<usize> = (0..=depth)
        .map(|n| result.trees.domain().level(n).len())
        .collect();
    Ok(json!({
        "passed": result.passed,
        "ledger": result.ledger,
        "pieces": pieces,
        "x": xs,
        "stages": stages,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn capacity(set: &str, panels: usize) -> Result<String, JsError> {
    capacity_json(set, panels).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = sampleMap)]
pub fn sample_map(map: &str, samples: usize) -> Result<String, JsError> {
    sample_map_json(map, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = decompose)]
pub fn decompose_map(map: &str, depth: usize, samples: usize) -> Result<String, JsError> {
    decompose_json(map, depth, samples).map_err(|e| JsError::new(&e))
}
