use std::fs;
use std::io::Write;
use std::path::PathBuf;

use relicomp::curves::CurveTable;
use serde::Serialize;

use crate::error::CliError;
use crate::Format;

/// Significant digits for curve values; unset means shortest round-trip.
pub const PRECISION_VAR: &str = "RELICOMP_PRECISION";

pub struct Sink {
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>, format: Option<Format>) -> Self {
        Sink { out, format }
    }

    pub fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    /// Commands whose only product is a JSON document.
    pub fn require_json(&self, command: &str) -> Result<(), CliError> {
        match self.format {
            Some(Format::Csv) => Err(CliError::Validation(format!("{command} writes JSON only"))),
            _ => Ok(()),
        }
    }

    pub fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|e| CliError::io(path, e)),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .and_then(|_| stdout.flush())
                    .map_err(|e| CliError::Validation(format!("stdout: {e}")))
            }
        }
    }
}

pub fn precision() -> Result<Option<usize>, CliError> {
    match std::env::var(PRECISION_VAR) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(p) if (1..=17).contains(&p) => Ok(Some(p)),
            _ => Err(CliError::Validation(format!(
                "{PRECISION_VAR} must be an integer in 1..=17, got `{s}`"
            ))),
        },
    }
}

/// Round to `p` significant digits through the same decimal text the CSV
/// writer would print.
fn round_sig(x: f64, p: usize) -> f64 {
    format!("{:.*e}", p - 1, x).parse().unwrap_or(x)
}

/// Refuse to print curves containing NaN or infinities.
pub fn check_finite(table: &CurveTable) -> Result<(), CliError> {
    for s in &table.series {
        if let Some(i) = s.values.iter().position(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!(
                "series `{}` is not finite at {} = {}",
                s.name, table.tau_label, table.tau[i]
            )));
        }
    }
    Ok(())
}

pub fn rounded(table: &CurveTable, precision: Option<usize>) -> CurveTable {
    let Some(p) = precision else {
        return table.clone();
    };
    let mut t = table.clone();
    for v in t.tau.iter_mut().chain(t.series.iter_mut().flat_map(|s| s.values.iter_mut())) {
        *v = round_sig(*v, p);
    }
    t
}

pub fn render_curves(table: &CurveTable, format: Format) -> Result<String, CliError> {
    check_finite(table)?;
    let precision = precision()?;
    Ok(match format {
        Format::Csv => table.to_csv(precision),
        Format::Json => rounded(table, precision).to_json(),
    })
}

pub fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}
