//! Browser bindings for the demo page. Each export takes plain numbers and a
//! built-in scenario name and returns a JSON string for the page to plot.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use weakfix_core::condition::condition_sides;
use weakfix_core::lambda::{
    analyze_lambda, derive_sequence, running_averages, series_report, LambdaReading,
};
use weakfix_core::scenario::{builtin, BUILTIN_NAMES};
use weakfix_core::solver::{certificate_for, iterate};

const MAX_STEPS: usize = 500;
const MAX_HORIZON: usize = 256;
const MAX_GRID: usize = 101;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn builtin_names() -> String {
    json!(BUILTIN_NAMES).to_string()
}

#[wasm_bindgen]
pub fn picard_trace(name: &str, x0: f64, steps: usize) -> Result<String, JsValue> {
    to_js(trace_json(name, x0, steps))
}

#[wasm_bindgen]
pub fn lambda_profile(name: &str, horizon: usize) -> Result<String, JsValue> {
    to_js(lambda_json(name, horizon))
}

#[wasm_bindgen]
pub fn condition_gap_map(name: &str, i: u32, j: u32, grid: usize) -> Result<String, JsValue> {
    to_js(gap_map_json(name, i as u64, j as u64, grid))
}

/// Iterates without early stopping and attaches the certificate bound when one exists.
pub fn trace_json(name: &str, x0: f64, steps: usize) -> Result<Value, String> {
    let sc = builtin(name).map_err(|e| e.to_string())?;
    let steps = steps.clamp(1, MAX_STEPS);
    let trace = iterate(&sc, x0, steps, 0.0, steps).map_err(|e| e.to_string())?;
    let mut points = vec![trace.start];
    points.extend(&trace.points);
    let bound = match certificate_for(&sc, &trace, sc.defaults.horizon) {
        Ok(c) => json!({ "first_index": c.first_index, "values": c.bounds }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "scenario": sc.name,
        "points": points,
        "step_distances": trace.step_distances,
        "bound": bound,
        "expected_limit": sc.expected_limit,
    }))
}

pub fn lambda_json(name: &str, horizon: usize) -> Result<Value, String> {
    let sc = builtin(name).map_err(|e| e.to_string())?;
    let horizon = horizon.clamp(2, MAX_HORIZON);
    let degree = sc.degree();
    let seq = derive_sequence(&sc.schedule, degree, sc.variant.sequence_variant(), horizon)
        .map_err(|e| e.to_string())?;
    let averages = running_averages(&seq.values);
    let analysis = analyze_lambda(&seq, LambdaReading::RawValues);
    let series = series_report(&sc.schedule, degree, horizon).map_err(|e| e.to_string())?;
    Ok(json!({
        "scenario": sc.name,
        "relaxed": sc.variant.relaxed(),
        "values": seq.values,
        "averages": averages,
        "analysis": analysis,
        "c_values": series.c_values,
        "series_verdict": series.verdict,
    }))
}

/// RHS - LHS over a grid × grid of (x, y) at fixed (i, j); null where a tuple fails to evaluate.
pub fn gap_map_json(name: &str, i: u64, j: u64, grid: usize) -> Result<Value, String> {
    let sc = builtin(name).map_err(|e| e.to_string())?;
    if i == 0 || j == 0 {
        return Err("indices start at 1".into());
    }
    let axis = sc.space.carrier().grid(grid.clamp(2, MAX_GRID));
    let mut min_gap = f64::INFINITY;
    let rows: Vec<Vec<Value>> = axis
        .iter()
        .map(|&y| {
            axis.iter()
                .map(|&x| match condition_sides(&sc, sc.variant, x, y, i, j) {
                    Ok(s) => {
                        min_gap = min_gap.min(s.gap());
                        json!(s.gap())
                    }
                    Err(_) => Value::Null,
                })
                .collect()
        })
        .collect();
    Ok(json!({
        "scenario": sc.name,
        "variant": sc.variant.to_string(),
        "axis": axis,
        "gaps": rows,
        "min_gap": if min_gap.is_finite() { json!(min_gap) } else { Value::Null },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(builtin_names(), r#"["example-1","example-2","example-3"]"#);
    }

    #[test]
    fn trace_of_third_example() {
        let v = trace_json("example-3", 0.0, 5).unwrap();
        assert_eq!(v["points"], json!([0.0, 1.0, 1.0, 1.0, 1.0, 1.0]));
        assert!(v["bound"]["values"].is_array());
    }

    #[test]
    fn profile_of_first_example() {
        let v = lambda_json("example-1", 16).unwrap();
        let lambda = v["analysis"]["lambda"].as_f64().unwrap();
        assert!((lambda - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(v["values"].as_array().unwrap().len(), 16);
    }

    #[test]
    fn gap_map_shows_second_example_violation() {
        let v = gap_map_json("example-2", 1, 1, 11).unwrap();
        assert!(v["min_gap"].as_f64().unwrap() < -0.2);
        assert_eq!(v["gaps"].as_array().unwrap().len(), 11);
        assert!(gap_map_json("example-9", 1, 1, 11).is_err());
    }
}
