//! Scenario files: every knob an episode needs, in strict TOML.
//!
//! Unknown keys are rejected so configuration drift cannot silently change
//! a run. All times derive from two constants: minutes per corridor
//! traversal and minutes per sensing action.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::TaskSpec;
use crate::explorer::NavigationMethod;
use crate::grid::{GridSpec, Intersection};
use crate::inference::Structure;
use crate::sensing::NoiseModel;
use crate::world::DEFAULT_ENUMERATION_BUDGET;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("scenario file is not valid TOML: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub false_negative: f64,
    pub false_positive: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            false_negative: NoiseModel::DEFAULT.false_negative,
            false_positive: NoiseModel::DEFAULT.false_positive,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub enabled: bool,
    #[serde(default = "default_threshold")]
    pub descend_threshold: u64,
}

fn default_threshold() -> u64 {
    64
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig { enabled: false, descend_threshold: default_threshold() }
    }
}

/// Wall-time scale: corridor traversals take about four minutes on the
/// target platform, a sensing action well under one.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeScaleConfig {
    pub minutes_per_traversal: f64,
    pub minutes_per_sensing: f64,
}

impl Default for TimeScaleConfig {
    fn default() -> Self {
        TimeScaleConfig { minutes_per_traversal: 4.0, minutes_per_sensing: 0.75 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub id: usize,
    pub origin: [usize; 2],
    pub destination: [usize; 2],
    pub expected_count: f64,
}

/// A full episode configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub grid: GridConfig,
    pub hypotheses: usize,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_structure")]
    pub structure: String,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub time_scale: TimeScaleConfig,
    #[serde(default = "default_budget")]
    pub enumeration_budget: u64,
    /// Starting intersection; defaults to the first task's origin.
    #[serde(default)]
    pub start: Option<[usize; 2]>,
    /// When set, this many tasks are drawn with probability proportional
    /// to expected counts instead of executing the list in order.
    #[serde(default)]
    pub task_draws: Option<usize>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
}

fn default_structure() -> String {
    "multiply".to_string()
}

fn default_method() -> String {
    "weighted_path".to_string()
}

fn default_budget() -> u64 {
    DEFAULT_ENUMERATION_BUDGET
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ConfigError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid_spec().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.hypotheses == 0 {
            return Err(ConfigError::Invalid("hypotheses must be at least 1".into()));
        }
        if self.noise_model().is_none() {
            return Err(ConfigError::Invalid(format!(
                "noise rates must lie in [0, 1]: fn={} fp={}",
                self.noise.false_negative, self.noise.false_positive
            )));
        }
        if self.structure_mode().is_none() {
            return Err(ConfigError::Invalid(format!("unknown structure `{}`", self.structure)));
        }
        if self.navigation_method().is_none() {
            return Err(ConfigError::Invalid(format!("unknown method `{}`", self.method)));
        }
        for t in &self.tasks {
            for point in [t.origin, t.destination] {
                if !grid.contains(Intersection::new(point[0], point[1])) {
                    return Err(ConfigError::Invalid(format!(
                        "task {} references ({}, {}) outside the {} grid",
                        t.id, point[0], point[1], grid
                    )));
                }
            }
            if t.expected_count < 0.0 {
                return Err(ConfigError::Invalid(format!(
                    "task {} has negative expected_count",
                    t.id
                )));
            }
        }
        if let Some(s) = self.start {
            if !grid.contains(Intersection::new(s[0], s[1])) {
                return Err(ConfigError::Invalid(format!(
                    "start ({}, {}) outside the {} grid",
                    s[0], s[1], grid
                )));
            }
        }
        if self.task_draws.is_some() && self.tasks.is_empty() {
            return Err(ConfigError::Invalid("task_draws set but no tasks given".into()));
        }
        if self.task_draws.is_some() && self.tasks.iter().all(|t| t.expected_count == 0.0) {
            return Err(ConfigError::Invalid(
                "task_draws needs at least one positive expected_count".into(),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, crate::grid::GridError> {
        GridSpec::new(self.grid.nx, self.grid.ny)
    }

    pub fn noise_model(&self) -> Option<NoiseModel> {
        NoiseModel::new(self.noise.false_negative, self.noise.false_positive)
    }

    pub fn structure_mode(&self) -> Option<Structure> {
        Structure::from_name(&self.structure)
    }

    pub fn navigation_method(&self) -> Option<NavigationMethod> {
        NavigationMethod::from_name(&self.method)
    }

    pub fn task_specs(&self) -> Vec<TaskSpec> {
        self.tasks
            .iter()
            .map(|t| TaskSpec {
                id: t.id,
                origin: Intersection::new(t.origin[0], t.origin[1]),
                destination: Intersection::new(t.destination[0], t.destination[1]),
                expected_count: t.expected_count,
            })
            .collect()
    }

    pub fn start_position(&self) -> Option<Intersection> {
        self.start
            .map(|s| Intersection::new(s[0], s[1]))
            .or_else(|| self.tasks.first().map(|t| Intersection::new(t.origin[0], t.origin[1])))
    }
}
