//! Scenario files: TOML with unit-suffixed keys describing parameters,
//! initial condition, input schedule, horizon, solver settings and which
//! models to run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TesError};
use crate::fg::FgModel;
use crate::geometry::TesParameters;
use crate::mb::{FsmMode, MbModel};
use crate::sim::Inputs;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fg,
    Mb,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSelection {
    pub kind: ModelKind,
    #[serde(default = "default_sections")]
    pub fg_sections: usize,
}

fn default_sections() -> usize {
    35
}

impl ModelSelection {
    pub fn runs_fg(&self) -> bool {
        matches!(self.kind, ModelKind::Fg | ModelKind::Both)
    }

    pub fn runs_mb(&self) -> bool {
        matches!(self.kind, ModelKind::Mb | ModelKind::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Every vertex at one temperature.
    Uniform { temperature_c: f64 },
    /// Explicit enthalpy states per model.
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fg_state: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mb_state: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mb_mode: Option<u32>,
    },
}

/// Defaults for the `sweep` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub sections: Vec<usize>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
}

fn default_reps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub horizon_s: f64,
    pub model: ModelSelection,
    pub initial: InitialCondition,
    pub inputs: Inputs,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub parameters: TesParameters,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let s: Scenario = toml::from_str(text).map_err(|e| TesError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml_str(&text).map_err(|e| match e {
            TesError::Scenario(msg) => TesError::Scenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Normalized form: every field written out, defaults included.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| TesError::Scenario(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(TesError::invalid("name", "must be non-empty and use only [A-Za-z0-9_-]"));
        }
        if !(self.horizon_s.is_finite() && self.horizon_s > 0.0) {
            return Err(TesError::invalid("horizon_s", "must be > 0"));
        }
        if self.model.runs_fg() && self.model.fg_sections == 0 {
            return Err(TesError::invalid("model.fg_sections", "must be >= 1"));
        }
        self.parameters.validate()?;
        self.solver.validate()?;
        self.inputs.validate(self.horizon_s)?;
        if let InitialCondition::Uniform { temperature_c } = self.initial {
            if !temperature_c.is_finite() {
                return Err(TesError::invalid("initial.temperature_c", "must be finite"));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.sections.is_empty() || sw.sections.contains(&0) {
                return Err(TesError::invalid("sweep.sections", "must be a non-empty list of positive integers"));
            }
            if sw.repetitions == 0 {
                return Err(TesError::invalid("sweep.repetitions", "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn fg_initial(&self, model: &FgModel) -> Result<Vec<f64>> {
        match &self.initial {
            InitialCondition::Uniform { temperature_c } => model.uniform_state(*temperature_c),
            InitialCondition::Explicit { fg_state: Some(x), .. } => {
                if x.len() != model.n_states() {
                    return Err(TesError::invalid(
                        "initial.fg_state",
                        format!("expected {} values for n = {}, got {}", model.n_states(), model.n_sections(), x.len()),
                    ));
                }
                Ok(x.clone())
            }
            InitialCondition::Explicit { .. } => Err(TesError::invalid("initial.fg_state", "required to run the FG model")),
        }
    }

    pub fn mb_initial(&self, model: &MbModel) -> Result<(Vec<f64>, FsmMode)> {
        match &self.initial {
            InitialCondition::Uniform { temperature_c } => model.uniform_state(*temperature_c),
            InitialCondition::Explicit {
                mb_state: Some(x),
                mb_mode: Some(m),
                ..
            } => {
                if x.len() != 6 {
                    return Err(TesError::invalid("initial.mb_state", format!("expected 6 values, got {}", x.len())));
                }
                let mode = FsmMode::from_number(*m).ok_or_else(|| TesError::invalid("initial.mb_mode", format!("must be 1..=4, got {m}")))?;
                Ok((x.clone(), mode))
            }
            InitialCondition::Explicit { .. } => Err(TesError::invalid("initial", "mb_state and mb_mode required to run the MB model")),
        }
    }
}
