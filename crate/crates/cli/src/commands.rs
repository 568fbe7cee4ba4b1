use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::Path;

use relicomp::curves::{mean_value_comparison, reliability_comparison, system_reliability_table, uniform_grid, CurveTable};
use relicomp::datasets::{load_dataset, load_system_config, FailureDataset, SystemConfig};
use relicomp::gofit::{fit_go, GoModel};
use relicomp::simgen::{generate, SimSpec};
use relicomp::sysmodel::{resolve_source, SystemModel};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{self, Sink};
use crate::{BaselineArgs, Format, GridArgs};

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn read_dataset(path: &Path) -> Result<FailureDataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    load_dataset(file).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Fit one dataset. The model is named by the dataset's own header, or by
/// the file stem when the header has none.
fn fit_file(path: &Path) -> Result<(GoModel, usize), CliError> {
    let data = read_dataset(path)?;
    let id = match data.component_id() {
        Some(id) => id.to_string(),
        None => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let model = fit_go(&data)
        .map_err(|e| CliError::from(e).prefixed(&path.display().to_string()))?
        .with_component_id(id.clone());
    if model.is_near_homogeneous() {
        log::warn!(
            "{id}: bT = {:.3e}, the failure rate barely decays over the test; b and v0 are poorly determined",
            model.b * model.end_of_test
        );
    }
    Ok((model, data.len()))
}

/// A saved system model (its paths carry a `model`) or a configuration to
/// resolve, together with the configuration when there is one.
fn load_system(path: &Path) -> Result<(SystemModel, Option<SystemConfig>), CliError> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: invalid JSON: {e}", path.display())))?;
    let saved = value["paths"]
        .as_array()
        .and_then(|p| p.first())
        .is_some_and(|p| p.get("model").is_some());
    if saved {
        let system = SystemModel::from_json(&text)?;
        Ok((system, None))
    } else {
        let config = load_system_config(text.as_bytes())
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let system = SystemModel::from_config(&config, base_dir(path))?;
        Ok((system, Some(config)))
    }
}

fn longest_test(system: &SystemModel) -> f64 {
    system
        .used_components()
        .iter()
        .map(|m| m.end_of_test)
        .fold(0.0, f64::max)
}

fn grid_for(system: &SystemModel, args: &GridArgs) -> Result<Vec<f64>, CliError> {
    let max = args.tau_max.unwrap_or_else(|| longest_test(system));
    if !max.is_finite() || max < 0.0 {
        return Err(CliError::Validation(format!(
            "--tau-max must be finite and nonnegative, got {max}"
        )));
    }
    if args.grid == 0 {
        return Err(CliError::Validation("--grid must be at least 1".into()));
    }
    Ok(uniform_grid(args.grid, max))
}

pub fn fit(paths: &[std::path::PathBuf], sink: &Sink) -> Result<(), CliError> {
    let mut rows = Vec::with_capacity(paths.len());
    for p in paths {
        rows.push(fit_file(p)?);
    }
    let text = match sink.format_or(Format::Json) {
        Format::Json => rows
            .iter()
            .map(|(m, _)| serde_json::to_string(m).expect("model serializes") + "\n")
            .collect(),
        Format::Csv => {
            let mut s = String::from("component_id,v0,b,end_of_test,failures\n");
            for (m, n) in &rows {
                let id = m.component_id.as_deref().unwrap_or("");
                s.push_str(&format!("{id},{},{},{},{n}\n", m.v0, m.b, m.end_of_test));
            }
            s
        }
    };
    sink.write(&text)
}

pub fn compose(config: &Path, sink: &Sink) -> Result<(), CliError> {
    sink.require_json("compose")?;
    let (system, _) = load_system(config)?;
    sink.write(&system.to_json())
}

pub fn predict(input: &Path, grid: &GridArgs, sink: &Sink) -> Result<(), CliError> {
    let (system, _) = load_system(input)?;
    let grid = grid_for(&system, grid)?;
    let table = system_reliability_table(&system, &grid)?;
    sink.write(&output::render_curves(&table, sink.format_or(Format::Csv))?)
}

fn resolve_baseline(
    args: &BaselineArgs,
    config: Option<&SystemConfig>,
    input: &Path,
    end_of_test: f64,
) -> Result<GoModel, CliError> {
    if let (Some(v0), Some(b)) = (args.baseline_v0, args.baseline_b) {
        return GoModel::new(v0, b, end_of_test)
            .map_err(|e| CliError::Validation(format!("baseline: {e}")));
    }
    if let Some(path) = &args.baseline_data {
        return Ok(fit_file(path)?.0);
    }
    match config.and_then(|c| c.baseline.as_ref()) {
        Some(source) => Ok(resolve_source("baseline", source, base_dir(input))?),
        None => Err(CliError::Validation(
            "compare needs a baseline: add `baseline` to the configuration or pass --baseline-v0/--baseline-b or --baseline-data".into(),
        )),
    }
}

/// Largest pointwise gap between every pair of model variants.
fn max_deviations(table: &CurveTable) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for quantity in ["mu", "r"] {
        for (a, b) in [("ma", "nhpp"), ("ma", "additive"), ("nhpp", "additive")] {
            let (ca, cb) = (format!("{quantity}_{a}"), format!("{quantity}_{b}"));
            if let Some(d) = table.max_abs_difference(&ca, &cb) {
                out.insert(format!("{ca}-{cb}"), d);
            }
        }
    }
    out
}

#[derive(Serialize)]
struct Comparison<'a> {
    #[serde(flatten)]
    table: &'a CurveTable,
    max_abs_deviation: &'a BTreeMap<String, f64>,
}

pub fn compare(input: &Path, grid: &GridArgs, baseline: &BaselineArgs, sink: &Sink) -> Result<(), CliError> {
    let (system, config) = load_system(input)?;
    let base = resolve_baseline(baseline, config.as_ref(), input, longest_test(&system))?;
    let grid = grid_for(&system, grid)?;
    let mu = mean_value_comparison(&system, Some(&base), &grid)?;
    let r = reliability_comparison(&system, Some(&base), &grid)?;

    // one grid serves as τ for μ and as time since the last failure for R
    let mut table = CurveTable::new("tau", grid);
    for (prefix, part) in [("mu", mu), ("r", r)] {
        for s in part.series {
            table.push(format!("{prefix}_{}", s.name), s.values);
        }
    }
    output::check_finite(&table)?;
    let deviations = max_deviations(&table);
    for (pair, d) in &deviations {
        eprintln!("max |{pair}| = {d}");
    }
    let text = match sink.format_or(Format::Csv) {
        Format::Csv => table.to_csv(output::precision()?),
        Format::Json => output::pretty_json(&Comparison {
            table: &output::rounded(&table, output::precision()?),
            max_abs_deviation: &deviations,
        }),
    };
    sink.write(&text)
}

pub fn simulate(spec: &Path, seed: Option<u64>, sink: &Sink) -> Result<(), CliError> {
    if sink.format_or(Format::Csv) == Format::Json {
        return Err(CliError::Validation("simulate writes CSV only".into()));
    }
    let mut spec: SimSpec = serde_json::from_str(&read_text(spec)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", spec.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    sink.write(&generate(&spec)?.to_csv())
}

pub fn evolve(
    system: &Path,
    component: &str,
    model: Option<&Path>,
    dataset: Option<&Path>,
    sink: &Sink,
) -> Result<(), CliError> {
    sink.require_json("evolve")?;
    let (current, _) = load_system(system)?;
    let replacement = match (model, dataset) {
        (Some(path), _) => serde_json::from_str::<GoModel>(&read_text(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        (None, Some(path)) => fit_file(path)?.0,
        (None, None) => return Err(CliError::Validation("evolve needs --model or --dataset".into())),
    };
    let (next, report) = current.replace_component(component, replacement)?;
    eprintln!("{report}");
    sink.write(&next.to_json())
}
