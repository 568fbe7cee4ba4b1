//! Failure-time datasets and system configuration files.
//!
//! Dataset CSV:
//!
//! ```text
//! # end_of_test=91208
//! # component_id=c1
//! 127.5
//! 311
//! ```
//!
//! Header lines come first; every other non-blank line is one cumulative
//! failure time in CPU seconds. Times must be positive, strictly increasing
//! and no later than `end_of_test`. A dataset with no times is a
//! failure-free component.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gofit::GoModel;

/// Tolerance on the sum of path traversal probabilities.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Where a dataset problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// 1-based line in the source text.
    Line(usize),
    /// 1-based position in the list of failure times.
    Time(usize),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(n) => write!(f, "line {n}"),
            Location::Time(n) => write!(f, "failure time #{n}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("read failed: {0}")]
    Io(String),
    #[error("missing `# end_of_test=<float>` header")]
    MissingEndOfTest,
    #[error("{at}: {message}")]
    Header { at: Location, message: String },
    #[error("{at}: `{text}` is not a decimal number")]
    Malformed { at: Location, text: String },
    #[error("end_of_test must be finite and positive, got {0}")]
    InvalidEndOfTest(f64),
    #[error("{at}: failure time {value} must be finite and positive")]
    NonPositive { at: Location, value: f64 },
    #[error("{at}: failure time {value} is not greater than the previous time {previous}")]
    NonIncreasing {
        at: Location,
        previous: f64,
        value: f64,
    },
    #[error("{at}: failure time {value} exceeds end_of_test {end_of_test}")]
    ExceedsEndOfTest {
        at: Location,
        value: f64,
        end_of_test: f64,
    },
}

/// Ordered cumulative failure times of one component (or a whole system)
/// together with the end of its test.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureDataset {
    component_id: Option<String>,
    times: Vec<f64>,
    end_of_test: f64,
}

impl FailureDataset {
    pub fn new(
        component_id: Option<String>,
        times: Vec<f64>,
        end_of_test: f64,
    ) -> Result<Self, DatasetError> {
        let located: Vec<_> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| (Location::Time(i + 1), t))
            .collect();
        validate_times(&located, end_of_test)?;
        Ok(FailureDataset {
            component_id,
            times,
            end_of_test,
        })
    }

    pub fn component_id(&self) -> Option<&str> {
        self.component_id.as_deref()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn end_of_test(&self) -> f64 {
        self.end_of_test
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// No recorded failures; such a component cannot be fitted by MLE.
    pub fn is_failure_free(&self) -> bool {
        self.times.is_empty()
    }

    /// Last failure occurrence time, if any failure was observed.
    pub fn last_failure(&self) -> Option<f64> {
        self.times.last().copied()
    }

    /// The data as it would have looked had the test stopped at `end`.
    pub fn truncated(&self, end: f64) -> Result<Self, DatasetError> {
        let times = self.times.iter().copied().filter(|&t| t <= end).collect();
        FailureDataset::new(self.component_id.clone(), times, end)
    }

    /// Rescale every time and the end of test by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self, DatasetError> {
        let times = self.times.iter().map(|t| t * factor).collect();
        FailureDataset::new(self.component_id.clone(), times, self.end_of_test * factor)
    }

    /// Canonical CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# end_of_test={}\n", self.end_of_test);
        if let Some(id) = &self.component_id {
            out.push_str(&format!("# component_id={id}\n"));
        }
        for t in &self.times {
            out.push_str(&format!("{t}\n"));
        }
        out
    }
}

fn validate_times(times: &[(Location, f64)], end_of_test: f64) -> Result<(), DatasetError> {
    if !end_of_test.is_finite() || end_of_test <= 0.0 {
        return Err(DatasetError::InvalidEndOfTest(end_of_test));
    }
    let mut previous: Option<f64> = None;
    for &(at, value) in times {
        if !value.is_finite() || value <= 0.0 {
            return Err(DatasetError::NonPositive { at, value });
        }
        if let Some(previous) = previous {
            if value <= previous {
                return Err(DatasetError::NonIncreasing {
                    at,
                    previous,
                    value,
                });
            }
        }
        if value > end_of_test {
            return Err(DatasetError::ExceedsEndOfTest {
                at,
                value,
                end_of_test,
            });
        }
        previous = Some(value);
    }
    Ok(())
}

/// Parse a dataset from CSV text.
pub fn load_dataset<R: Read>(mut source: R) -> Result<FailureDataset, DatasetError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| DatasetError::Io(e.to_string()))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<FailureDataset, DatasetError> {
    let mut end_of_test = None;
    let mut component_id = None;
    let mut times = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let at = Location::Line(idx + 1);
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if !times.is_empty() {
                return Err(DatasetError::Header {
                    at,
                    message: "header lines must precede failure times".into(),
                });
            }
            let (key, value) = header.split_once('=').ok_or_else(|| DatasetError::Header {
                at,
                message: format!("expected `# key=value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "end_of_test" => {
                    if end_of_test.is_some() {
                        return Err(DatasetError::Header {
                            at,
                            message: "duplicate end_of_test".into(),
                        });
                    }
                    let v: f64 = value.parse().map_err(|_| DatasetError::Malformed {
                        at,
                        text: value.to_string(),
                    })?;
                    end_of_test = Some(v);
                }
                "component_id" => {
                    if component_id.is_some() {
                        return Err(DatasetError::Header {
                            at,
                            message: "duplicate component_id".into(),
                        });
                    }
                    if value.is_empty() {
                        return Err(DatasetError::Header {
                            at,
                            message: "empty component_id".into(),
                        });
                    }
                    component_id = Some(value.to_string());
                }
                other => {
                    return Err(DatasetError::Header {
                        at,
                        message: format!("unknown header key `{other}`"),
                    })
                }
            }
            continue;
        }
        let value: f64 = line.parse().map_err(|_| DatasetError::Malformed {
            at,
            text: line.to_string(),
        })?;
        times.push((at, value));
    }

    let end_of_test = end_of_test.ok_or(DatasetError::MissingEndOfTest)?;
    validate_times(&times, end_of_test)?;
    Ok(FailureDataset {
        component_id,
        times: times.into_iter().map(|(_, t)| t).collect(),
        end_of_test,
    })
}

/// An execution path: the components it runs, how often it is taken, and
/// when it last failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub components: Vec<String>,
    pub probability: f64,
    pub last_failure_time: f64,
}

/// A component is described either by a dataset file to fit or by an
/// already fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentSource {
    Dataset(String),
    Model(GoModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub components: BTreeMap<String, ComponentSource>,
    pub paths: Vec<PathSpec>,
    pub system_last_failure: f64,
    /// Whole-system model used for baseline comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<ComponentSource>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("configuration has no paths")]
    NoPaths,
    #[error("paths[{path}]: component list is empty")]
    EmptyPath { path: usize },
    #[error("paths[{path}]: unknown component `{component}`")]
    DanglingComponent { path: usize, component: String },
    #[error("paths[{path}].probability: {value} is not in [0, 1]")]
    InvalidProbability { path: usize, value: f64 },
    #[error("path probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("system_last_failure must be finite and nonnegative, got {0}")]
    InvalidLastFailure(f64),
    #[error("paths[{path}].last_failure_time: {value} must lie in [0, system_last_failure = {system}]")]
    PathAfterSystem { path: usize, value: f64, system: f64 },
    #[error("components.{id}: {message}")]
    InvalidModel { id: String, message: String },
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let system = self.system_last_failure;
        if !system.is_finite() || system < 0.0 {
            return Err(ConfigError::InvalidLastFailure(system));
        }
        for (id, source) in &self.components {
            if let ComponentSource::Model(m) = source {
                m.validate().map_err(|e| ConfigError::InvalidModel {
                    id: id.clone(),
                    message: e.to_string(),
                })?;
            }
        }
        if let Some(ComponentSource::Model(m)) = &self.baseline {
            m.validate().map_err(|e| ConfigError::InvalidModel {
                id: "baseline".into(),
                message: e.to_string(),
            })?;
        }
        validate_paths(&self.paths, system, |id| self.components.contains_key(id))
    }

    /// Canonical pretty-printed JSON, newline terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Shared path checks for configurations and composed system models.
pub(crate) fn validate_paths(
    paths: &[PathSpec],
    system_last_failure: f64,
    known: impl Fn(&str) -> bool,
) -> Result<(), ConfigError> {
    if paths.is_empty() {
        return Err(ConfigError::NoPaths);
    }
    let mut sum = 0.0;
    for (path, spec) in paths.iter().enumerate() {
        if spec.components.is_empty() {
            return Err(ConfigError::EmptyPath { path });
        }
        if let Some(component) = spec.components.iter().find(|c| !known(c)) {
            return Err(ConfigError::DanglingComponent {
                path,
                component: component.clone(),
            });
        }
        let p = spec.probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::InvalidProbability { path, value: p });
        }
        let t = spec.last_failure_time;
        if !(t >= 0.0 && t <= system_last_failure) {
            return Err(ConfigError::PathAfterSystem {
                path,
                value: t,
                system: system_last_failure,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(ConfigError::ProbabilitySum { sum });
    }
    Ok(())
}

/// Parse and validate a system configuration from JSON.
pub fn load_system_config<R: Read>(source: R) -> Result<SystemConfig, ConfigError> {
    let config: SystemConfig =
        serde_json::from_reader(source).map_err(|e| ConfigError::Json(e.to_string()))?;
    config.validate()?;
    Ok(config)
}
