//! Tabulated curves for export and plotting.

use serde::Serialize;

use crate::gofit::GoModel;
use crate::sysmodel::{additive_mu, conditional_reliability, MeanValueFunction, SystemError, SystemModel};

/// `n` evenly spaced points on `[0, max]`, both ends included.
pub fn uniform_grid(n: usize, max: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => {
            let step = max / (n - 1) as f64;
            let mut g: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
            g[n - 1] = max;
            g
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// Columns of values over a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub tau_label: String,
    pub tau: Vec<f64>,
    pub series: Vec<Series>,
}

impl CurveTable {
    pub fn new(tau_label: impl Into<String>, tau: Vec<f64>) -> Self {
        CurveTable {
            tau_label: tau_label.into(),
            tau,
            series: Vec::new(),
        }
    }

    /// Append a column. `values` must match the grid length.
    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        assert_eq!(values.len(), self.tau.len(), "series length must match the grid");
        self.series.push(Series {
            name: name.into(),
            values,
        });
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.values.as_slice())
    }

    /// `max |a - b|` over the grid.
    pub fn max_abs_difference(&self, a: &str, b: &str) -> Option<f64> {
        let (a, b) = (self.column(a)?, self.column(b)?);
        Some(a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// Header row then one row per grid point. `None` prints the shortest
    /// representation that round-trips; `Some(p)` prints `p` significant
    /// digits in scientific notation.
    pub fn to_csv(&self, precision: Option<usize>) -> String {
        let fmt = |x: f64| match precision {
            None => format!("{x}"),
            Some(p) => format!("{:.*e}", p.saturating_sub(1), x),
        };
        let mut out = self.tau_label.clone();
        for s in &self.series {
            out.push(',');
            out.push_str(&s.name);
        }
        out.push('\n');
        for (i, &t) in self.tau.iter().enumerate() {
            out.push_str(&fmt(t));
            for s in &self.series {
                out.push(',');
                out.push_str(&fmt(s.values[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("curve table serializes");
        s.push('\n');
        s
    }
}

/// Mean-value curves of the composed system, the single-component baseline
/// and the sum of the components' own mean-value functions.
pub fn mean_value_comparison(
    system: &SystemModel,
    baseline: Option<&GoModel>,
    grid: &[f64],
) -> Result<CurveTable, SystemError> {
    let additive = additive_mu(&system.used_components())?;
    let mut table = CurveTable::new("tau", grid.to_vec());
    table.push(
        "ma",
        grid.iter().map(|&t| system.mean_value(t)).collect::<Result<_, _>>()?,
    );
    if let Some(base) = baseline {
        table.push("nhpp", map_grid(grid, |t| base.mu(t))?);
    }
    table.push("additive", map_grid(grid, |t| additive.mu(t))?);
    Ok(table)
}

/// Conditional reliability after the system's last failure, for the same
/// three models. Column `ma` is the path-weighted system reliability.
pub fn reliability_comparison(
    system: &SystemModel,
    baseline: Option<&GoModel>,
    grid: &[f64],
) -> Result<CurveTable, SystemError> {
    let additive = additive_mu(&system.used_components())?;
    let prev = system.system_last_failure();
    let mut table = CurveTable::new("tau_since_failure", grid.to_vec());
    table.push(
        "ma",
        grid.iter().map(|&t| system.system_reliability(t)).collect::<Result<_, _>>()?,
    );
    if let Some(base) = baseline {
        table.push(
            "nhpp",
            grid.iter()
                .map(|&t| conditional_reliability(base, prev, t))
                .collect::<Result<_, _>>()?,
        );
    }
    table.push(
        "additive",
        grid.iter()
            .map(|&t| conditional_reliability(&additive, prev, t))
            .collect::<Result<_, _>>()?,
    );
    Ok(table)
}

/// System reliability followed by one column per path.
pub fn system_reliability_table(system: &SystemModel, grid: &[f64]) -> Result<CurveTable, SystemError> {
    let mut table = CurveTable::new("tau_since_failure", grid.to_vec());
    let mut system_col = Vec::with_capacity(grid.len());
    let mut per_path = vec![Vec::with_capacity(grid.len()); system.paths().len()];
    for &t in grid {
        system_col.push(system.system_reliability(t)?);
        for (col, r) in per_path.iter_mut().zip(system.path_reliabilities(t)?) {
            col.push(r);
        }
    }
    table.push("system", system_col);
    for (i, col) in per_path.into_iter().enumerate() {
        table.push(format!("path_{}", i + 1), col);
    }
    Ok(table)
}

fn map_grid(grid: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>, SystemError> {
    grid.iter()
        .map(|&t| if t >= 0.0 { Ok(f(t)) } else { Err(SystemError::NegativeTime(t)) })
        .collect()
}
