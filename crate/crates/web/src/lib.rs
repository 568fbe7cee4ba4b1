//! Browser bindings. Each export takes and returns JSON text so the page
//! needs no generated types; the `*_json` functions are the same operations
//! without the JavaScript boundary and are what the tests call.

use std::collections::BTreeMap;

use relicomp::curves::{mean_value_comparison, reliability_comparison, uniform_grid, CurveTable};
use relicomp::datasets::PathSpec;
use relicomp::gofit::{fit_go, GoModel};
use relicomp::simgen::{generate, SimSpec};
use relicomp::sysmodel::SystemModel;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Most points a request may ask for; keeps the page responsive.
pub const MAX_GRID: usize = 4096;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentParams {
    pub v0: f64,
    pub b: f64,
    pub end_of_test: f64,
}

/// One path running every listed component, compared against a single
/// whole-system model.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareRequest {
    pub components: Vec<ComponentParams>,
    pub baseline: ComponentParams,
    pub last_failure: f64,
    pub mu_max: f64,
    pub r_max: f64,
    pub points: usize,
}

#[derive(Debug, Serialize)]
pub struct CompareResponse {
    pub mean_value: CurveTable,
    pub reliability: CurveTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    pub v0: f64,
    pub b: f64,
    pub end_of_test: f64,
    pub seed: u64,
    pub points: usize,
}

#[derive(Debug, Serialize)]
pub struct SimulateResponse {
    pub times: Vec<f64>,
    pub fitted: Option<GoModel>,
    pub fit_error: Option<String>,
    /// True and fitted mean-value curves over `[0, end_of_test]`.
    pub curves: CurveTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveRequest {
    pub components: Vec<ComponentParams>,
    pub index: usize,
    pub replacement: ComponentParams,
    pub last_failure: f64,
    pub r_max: f64,
    pub points: usize,
}

fn model(p: &ComponentParams) -> Result<GoModel, String> {
    GoModel::new(p.v0, p.b, p.end_of_test).map_err(|e| e.to_string())
}

fn points(n: usize) -> Result<usize, String> {
    if (1..=MAX_GRID).contains(&n) {
        Ok(n)
    } else {
        Err(format!("points must be in 1..={MAX_GRID}, got {n}"))
    }
}

fn single_path_system(components: &[ComponentParams], last_failure: f64) -> Result<SystemModel, String> {
    let mut table = BTreeMap::new();
    for (i, p) in components.iter().enumerate() {
        // zero-padded so the key order is the input order
        table.insert(format!("c{i:03}"), model(p)?);
    }
    let ids: Vec<String> = table.keys().cloned().collect();
    let path = PathSpec {
        components: ids,
        probability: 1.0,
        last_failure_time: last_failure,
    };
    SystemModel::build(table, vec![path], last_failure).map_err(|e| e.to_string())
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

fn reply<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("response serializes")
}

pub fn compare_json(request: &str) -> Result<String, String> {
    let req: CompareRequest = parse(request)?;
    let n = points(req.points)?;
    let system = single_path_system(&req.components, req.last_failure)?;
    let baseline = model(&req.baseline)?;
    let mean_value = mean_value_comparison(&system, Some(&baseline), &uniform_grid(n, req.mu_max))
        .map_err(|e| e.to_string())?;
    let reliability = reliability_comparison(&system, Some(&baseline), &uniform_grid(n, req.r_max))
        .map_err(|e| e.to_string())?;
    Ok(reply(&CompareResponse {
        mean_value,
        reliability,
    }))
}

pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(request)?;
    let n = points(req.points)?;
    let spec = SimSpec::new(req.v0, req.b, req.end_of_test, req.seed);
    let truth = spec.model().map_err(|e| e.to_string())?;
    let data = generate(&spec).map_err(|e| e.to_string())?;
    let (fitted, fit_error) = match fit_go(&data) {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let grid = uniform_grid(n, req.end_of_test);
    let mut curves = CurveTable::new("tau", grid.clone());
    curves.push("true", grid.iter().map(|&t| truth.mean_value(t).unwrap_or(f64::NAN)).collect());
    if let Some(m) = &fitted {
        curves.push("fitted", grid.iter().map(|&t| m.mean_value(t).unwrap_or(f64::NAN)).collect());
    }
    Ok(reply(&SimulateResponse {
        times: data.times().to_vec(),
        fitted,
        fit_error,
        curves,
    }))
}

/// Reliability after the last failure before and after swapping component
/// `index`, plus how many paths had to be recomposed.
pub fn evolve_json(request: &str) -> Result<String, String> {
    let req: EvolveRequest = parse(request)?;
    let n = points(req.points)?;
    if req.index >= req.components.len() {
        return Err(format!("no component at index {}", req.index));
    }
    let before = single_path_system(&req.components, req.last_failure)?;
    let id = format!("c{:03}", req.index);
    let (after, report) = before
        .replace_component(&id, model(&req.replacement)?)
        .map_err(|e| e.to_string())?;
    let grid = uniform_grid(n, req.r_max);
    let mut curves = CurveTable::new("tau_since_failure", grid.clone());
    for (name, system) in [("before", &before), ("after", &after)] {
        let values = grid
            .iter()
            .map(|&t| system.system_reliability(t))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        curves.push(name, values);
    }
    #[derive(Serialize)]
    struct Reply {
        report: String,
        curves: CurveTable,
    }
    Ok(reply(&Reply {
        report: report.to_string(),
        curves,
    }))
}

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Mean-value and conditional reliability curves of the composed path, the
/// whole-system baseline and the additive sum.
#[wasm_bindgen]
pub fn compare(request: &str) -> Result<String, JsValue> {
    to_js(compare_json(request))
}

/// Draw a synthetic dataset and fit it back.
#[wasm_bindgen]
pub fn simulate(request: &str) -> Result<String, JsValue> {
    to_js(simulate_json(request))
}

#[wasm_bindgen]
pub fn evolve(request: &str) -> Result<String, JsValue> {
    to_js(evolve_json(request))
}
