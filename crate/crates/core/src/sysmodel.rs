//! Path and system reliability from component models.
//!
//! A path's mean-value function is `μ(τ) = v0·(1 - MA(τ))`, where `v0` sums
//! the scale parameters of the path's components and `MA` is the moving
//! average of their unconditional reliabilities `e^{-bτ}`. After a repair at
//! `τ_prev` the chance of running another `τ'` without failure is
//! `R(τ' | τ_prev) = exp(-(μ(τ_prev + τ') - μ(τ_prev)))`. A system with
//! several paths weights each path's conditional reliability by its
//! traversal probability, every path evaluated at the same absolute time.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::datasets::PathSpec;
use crate::datasets::{load_dataset, validate_paths, ComponentSource, ConfigError, DatasetError, SystemConfig};
use crate::gofit::{fit_go, one_minus_exp_neg, FitError, GoModel, ModelError};
use crate::ma::{ma_continuous, MaError, MaFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("a path needs at least one component")]
    EmptyPath,
    #[error("time arguments must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ma(#[from] MaError),
    #[error("component `{id}`: {source}")]
    Model { id: String, source: ModelError },
    #[error("component `{id}`: {source}")]
    Fit { id: String, source: FitError },
    #[error("{path}: {source}")]
    Dataset { path: String, source: DatasetError },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("inconsistent system model: {0}")]
    Inconsistent(String),
    #[error("invalid JSON: {0}")]
    Json(String),
}

/// A nondecreasing expected-failure-count function.
pub trait MeanValueFunction {
    /// `μ(τ)` for `τ >= 0`.
    fn mu(&self, tau: f64) -> f64;

    /// `μ(from + delta) - μ(from)`.
    fn increment(&self, from: f64, delta: f64) -> f64 {
        self.mu(from + delta) - self.mu(from)
    }
}

impl MeanValueFunction for GoModel {
    fn mu(&self, tau: f64) -> f64 {
        GoModel::mu(self, tau)
    }

    fn increment(&self, from: f64, delta: f64) -> f64 {
        self.v0 * (-self.b * from).exp() * one_minus_exp_neg(self.b * delta)
    }
}

/// `R(τ' | τ_prev) = exp(-(μ(τ_prev + τ') - μ(τ_prev)))`.
pub fn conditional_reliability<M: MeanValueFunction + ?Sized>(
    mu: &M,
    tau_prev: f64,
    tau_delta: f64,
) -> Result<f64, SystemError> {
    for t in [tau_prev, tau_delta] {
        if t.is_nan() || t < 0.0 {
            return Err(SystemError::NegativeTime(t));
        }
    }
    if tau_delta == 0.0 {
        return Ok(1.0);
    }
    Ok((-mu.increment(tau_prev, tau_delta).max(0.0)).exp())
}

/// MA-composed model of one execution path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathModelRepr")]
pub struct PathModel {
    members: Vec<GoModel>,
    v0: f64,
    ma: MaFunction,
}

#[derive(Deserialize)]
struct PathModelRepr {
    members: Vec<GoModel>,
    v0: f64,
    ma: MaFunction,
}

impl TryFrom<PathModelRepr> for PathModel {
    type Error = SystemError;

    fn try_from(r: PathModelRepr) -> Result<Self, SystemError> {
        if r.members.is_empty() {
            return Err(SystemError::EmptyPath);
        }
        let v0 = sum_scales(&r.members);
        let expected: Vec<_> = r.members.iter().map(GoModel::unconditional_reliability).collect();
        if v0 != r.v0 || expected != r.ma.components() {
            return Err(SystemError::Inconsistent(
                "path model does not match its member components".into(),
            ));
        }
        Ok(PathModel {
            members: r.members,
            v0: r.v0,
            ma: r.ma,
        })
    }
}

fn sum_scales(models: &[GoModel]) -> f64 {
    models.iter().map(|m| m.v0).sum()
}

/// Compose the components of one path. Repeated components are counted
/// once.
pub fn build_path_model(components: &[GoModel]) -> Result<PathModel, SystemError> {
    if components.is_empty() {
        return Err(SystemError::EmptyPath);
    }
    let mut members: Vec<GoModel> = Vec::with_capacity(components.len());
    for c in components {
        c.validate().map_err(|source| SystemError::Model {
            id: c.component_id.clone().unwrap_or_default(),
            source,
        })?;
        if members.contains(c) {
            // self-convolution would change the average; the component
            // contributes once
            log::warn!(
                "component {} repeats on a path; counted once",
                c.component_id.as_deref().unwrap_or("<unnamed>")
            );
        } else {
            members.push(c.clone());
        }
    }
    let reliabilities: Vec<_> = members.iter().map(GoModel::unconditional_reliability).collect();
    let ma = ma_continuous(&reliabilities)?;
    Ok(PathModel {
        v0: sum_scales(&members),
        members,
        ma,
    })
}

impl PathModel {
    pub fn members(&self) -> &[GoModel] {
        &self.members
    }

    /// Sum of the member scale parameters.
    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn ma(&self) -> &MaFunction {
        &self.ma
    }

    pub fn mean_value(&self, tau: f64) -> Result<f64, SystemError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(SystemError::NegativeTime(tau));
        }
        Ok(self.mu(tau))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("path model serializes")
    }
}

impl MeanValueFunction for PathModel {
    fn mu(&self, tau: f64) -> f64 {
        self.v0 * (1.0 - self.ma.value(tau))
    }

    fn increment(&self, from: f64, delta: f64) -> f64 {
        self.v0 * (self.ma.value(from) - self.ma.value(from + delta))
    }
}

/// Baseline that adds component mean-value functions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    components: Vec<GoModel>,
}

pub fn additive_mu(components: &[GoModel]) -> Result<AdditiveModel, SystemError> {
    if components.is_empty() {
        return Err(SystemError::EmptyPath);
    }
    Ok(AdditiveModel {
        components: components.to_vec(),
    })
}

impl AdditiveModel {
    pub fn components(&self) -> &[GoModel] {
        &self.components
    }

    pub fn mean_value(&self, tau: f64) -> Result<f64, SystemError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(SystemError::NegativeTime(tau));
        }
        Ok(self.mu(tau))
    }
}

impl MeanValueFunction for AdditiveModel {
    fn mu(&self, tau: f64) -> f64 {
        self.components.iter().map(|c| GoModel::mu(c, tau)).sum()
    }

    fn increment(&self, from: f64, delta: f64) -> f64 {
        self.components.iter().map(|c| c.increment(from, delta)).sum()
    }
}

/// One path of a composed system. Path models are shared between system
/// values, so a replacement that does not touch a path keeps the same
/// allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPath {
    #[serde(flatten)]
    pub spec: PathSpec,
    pub model: Arc<PathModel>,
}

impl SystemPath {
    /// Component ids after removing repeats, in first-seen order.
    pub fn distinct_components(&self) -> Vec<&str> {
        distinct(&self.spec.components)
    }
}

fn distinct(ids: &[String]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::with_capacity(ids.len());
    for id in ids {
        if !out.contains(&id.as_str()) {
            out.push(id);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemModelRepr")]
pub struct SystemModel {
    system_last_failure: f64,
    components: BTreeMap<String, GoModel>,
    paths: Vec<SystemPath>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemModelRepr {
    system_last_failure: f64,
    components: BTreeMap<String, GoModel>,
    paths: Vec<SystemPath>,
}

impl TryFrom<SystemModelRepr> for SystemModel {
    type Error = SystemError;

    fn try_from(r: SystemModelRepr) -> Result<Self, SystemError> {
        let specs: Vec<PathSpec> = r.paths.iter().map(|p| p.spec.clone()).collect();
        validate_paths(&specs, r.system_last_failure, |id| r.components.contains_key(id))?;
        for (i, path) in r.paths.iter().enumerate() {
            let expected: Vec<&GoModel> = path
                .distinct_components()
                .iter()
                .map(|id| &r.components[*id])
                .collect();
            let stored: Vec<&GoModel> = path.model.members().iter().collect();
            if expected != stored {
                return Err(SystemError::Inconsistent(format!(
                    "paths[{i}] model members differ from the component table"
                )));
            }
        }
        Ok(SystemModel {
            system_last_failure: r.system_last_failure,
            components: r.components,
            paths: r.paths,
        })
    }
}

/// Which paths a component replacement rebuilt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolveReport {
    pub recomputed: Vec<usize>,
    pub reused: Vec<usize>,
}

impl fmt::Display for EvolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "paths: {} recomputed, {} reused",
            self.recomputed.len(),
            self.reused.len()
        )
    }
}

impl SystemModel {
    /// Compose a system from fitted component models. Each model's
    /// `component_id` is set to its key.
    pub fn build(
        components: BTreeMap<String, GoModel>,
        paths: Vec<PathSpec>,
        system_last_failure: f64,
    ) -> Result<Self, SystemError> {
        if !(system_last_failure >= 0.0 && system_last_failure.is_finite()) {
            return Err(ConfigError::InvalidLastFailure(system_last_failure).into());
        }
        validate_paths(&paths, system_last_failure, |id| components.contains_key(id))?;
        let components: BTreeMap<String, GoModel> = components
            .into_iter()
            .map(|(id, mut m)| {
                m.component_id = Some(id.clone());
                (id, m)
            })
            .collect();
        let paths = paths
            .into_iter()
            .map(|spec| {
                let model = Arc::new(path_model_for(&spec, &components)?);
                Ok(SystemPath { spec, model })
            })
            .collect::<Result<Vec<_>, SystemError>>()?;
        Ok(SystemModel {
            system_last_failure,
            components,
            paths,
        })
    }

    /// Validate a configuration, fit or read every component it names and
    /// compose the system. Dataset paths are relative to `base_dir`.
    pub fn from_config(config: &SystemConfig, base_dir: &Path) -> Result<Self, SystemError> {
        config.validate()?;
        let models = resolve_models(config, base_dir)?;
        SystemModel::build(models, config.paths.clone(), config.system_last_failure)
    }

    pub fn components(&self) -> &BTreeMap<String, GoModel> {
        &self.components
    }

    pub fn paths(&self) -> &[SystemPath] {
        &self.paths
    }

    /// Last system failure time `τ_prev`.
    pub fn system_last_failure(&self) -> f64 {
        self.system_last_failure
    }

    /// Conditional reliability of each path `ε` at the common time
    /// `τ_prev + τ'`, conditioned on the path's own last failure `τ_ε`.
    pub fn path_reliabilities(&self, tau_delta: f64) -> Result<Vec<f64>, SystemError> {
        if tau_delta.is_nan() || tau_delta < 0.0 {
            return Err(SystemError::NegativeTime(tau_delta));
        }
        self.paths
            .iter()
            .map(|p| {
                let since = tau_delta + (self.system_last_failure - p.spec.last_failure_time);
                conditional_reliability(p.model.as_ref(), p.spec.last_failure_time, since)
            })
            .collect()
    }

    /// `Σ_ε P_ε · R_ε(τ' + τ_prev - τ_ε | τ_ε)`.
    pub fn system_reliability(&self, tau_delta: f64) -> Result<f64, SystemError> {
        let per_path = self.path_reliabilities(tau_delta)?;
        let r: f64 = per_path
            .iter()
            .zip(&self.paths)
            .map(|(r, p)| r * p.spec.probability)
            .sum();
        Ok(r.clamp(0.0, 1.0))
    }

    /// Traversal-weighted mean of the path mean-value functions.
    pub fn mean_value(&self, tau: f64) -> Result<f64, SystemError> {
        if tau.is_nan() || tau < 0.0 {
            return Err(SystemError::NegativeTime(tau));
        }
        Ok(self
            .paths
            .iter()
            .map(|p| p.spec.probability * p.model.mu(tau))
            .sum())
    }

    /// Distinct component models used by any path, in id order.
    pub fn used_components(&self) -> Vec<GoModel> {
        self.components
            .iter()
            .filter(|(id, _)| self.paths.iter().any(|p| p.spec.components.contains(id)))
            .map(|(_, m)| m.clone())
            .collect()
    }

    /// Swap in a new model for `component_id`. Only paths running that
    /// component are recomposed; every other path keeps its existing model.
    pub fn replace_component(
        &self,
        component_id: &str,
        new_model: GoModel,
    ) -> Result<(SystemModel, EvolveReport), SystemError> {
        if !self
            .paths
            .iter()
            .any(|p| p.spec.components.iter().any(|c| c == component_id))
        {
            return Err(SystemError::UnknownComponent(component_id.to_string()));
        }
        new_model.validate().map_err(|source| SystemError::Model {
            id: component_id.to_string(),
            source,
        })?;
        let mut components = self.components.clone();
        let mut new_model = new_model;
        new_model.component_id = Some(component_id.to_string());
        components.insert(component_id.to_string(), new_model);

        let mut report = EvolveReport {
            recomputed: Vec::new(),
            reused: Vec::new(),
        };
        let mut paths = Vec::with_capacity(self.paths.len());
        for (i, p) in self.paths.iter().enumerate() {
            let model = if p.spec.components.iter().any(|c| c == component_id) {
                report.recomputed.push(i);
                Arc::new(path_model_for(&p.spec, &components)?)
            } else {
                report.reused.push(i);
                Arc::clone(&p.model)
            };
            paths.push(SystemPath {
                spec: p.spec.clone(),
                model,
            });
        }
        Ok((
            SystemModel {
                system_last_failure: self.system_last_failure,
                components,
                paths,
            },
            report,
        ))
    }

    /// Pretty JSON, newline terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        serde_json::from_str(text).map_err(|e| SystemError::Json(e.to_string()))
    }
}

fn path_model_for(spec: &PathSpec, components: &BTreeMap<String, GoModel>) -> Result<PathModel, SystemError> {
    let ids = distinct(&spec.components);
    if ids.len() < spec.components.len() {
        log::warn!(
            "path {:?} lists a component more than once; repeats are ignored",
            spec.components
        );
    }
    let models: Vec<GoModel> = ids
        .iter()
        .map(|id| {
            components
                .get(*id)
                .cloned()
                .ok_or_else(|| SystemError::UnknownComponent(id.to_string()))
        })
        .collect::<Result<_, _>>()?;
    build_path_model(&models)
}

/// Read or fit a single component description.
pub fn resolve_source(id: &str, source: &ComponentSource, base_dir: &Path) -> Result<GoModel, SystemError> {
    let mut model = match source {
        ComponentSource::Model(m) => {
            m.validate().map_err(|source| SystemError::Model {
                id: id.to_string(),
                source,
            })?;
            m.clone()
        }
        ComponentSource::Dataset(rel) => {
            let path = base_dir.join(rel);
            let shown = path.display().to_string();
            let file = File::open(&path).map_err(|e| SystemError::Io {
                path: shown.clone(),
                message: e.to_string(),
            })?;
            let data = load_dataset(file).map_err(|source| SystemError::Dataset { path: shown, source })?;
            fit_go(&data).map_err(|source| SystemError::Fit {
                id: id.to_string(),
                source,
            })?
        }
    };
    model.component_id = Some(id.to_string());
    Ok(model)
}

/// Resolve every component of a configuration to a fitted model.
pub fn resolve_models(config: &SystemConfig, base_dir: &Path) -> Result<BTreeMap<String, GoModel>, SystemError> {
    config
        .components
        .iter()
        .map(|(id, source)| Ok((id.clone(), resolve_source(id, source, base_dir)?)))
        .collect()
}
