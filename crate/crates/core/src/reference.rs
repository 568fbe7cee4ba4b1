//! Built-in two-component system used by the demos and the acceptance
//! checks: components `c1` and `c2` fitted over `T = 91208` on a single
//! path, plus a whole-system Goel–Okumoto baseline fitted to the merged
//! failure data.

use std::path::Path;

use crate::datasets::{load_system_config, ComponentSource, SystemConfig};
use crate::gofit::GoModel;
use crate::sysmodel::SystemModel;

pub const TWO_COMPONENT_SYSTEM_JSON: &str = include_str!("../../../fixtures/two-component-system.json");

pub fn two_component_config() -> SystemConfig {
    load_system_config(TWO_COMPONENT_SYSTEM_JSON.as_bytes()).expect("built-in configuration is valid")
}

pub fn two_component_system() -> SystemModel {
    SystemModel::from_config(&two_component_config(), Path::new(".")).expect("built-in system composes")
}

pub fn two_component_baseline() -> GoModel {
    match two_component_config().baseline {
        Some(ComponentSource::Model(m)) => m,
        _ => unreachable!("built-in baseline is an inline model"),
    }
}
