//! JSON scenario documents.
//!
//! Every section is required so that a missing value is reported rather than
//! silently defaulted. `configs/defaults.json` holds the shipped defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actuator::ActuatorCalib;
use crate::aero::{AeroPoint, AeroTable, GroundEffectModel, PelvicFin, DEFAULT_REFERENCE_CHORD};
use crate::error::{Error, Result};
use crate::hydro::{ForceModel, ForceToggles, HydroCoeffs, ThrustModel};
use crate::model::{Environment, RobotParams};
use crate::sim::{Launch, Scenario, Termination, WingSchedule};

/// The checked-in defaults document.
pub const DEFAULTS_JSON: &str = include_str!("../configs/defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    /// `"default"`: the bundled table.
    Named(String),
    /// CSV file, relative paths resolved against the config's directory.
    Csv { csv: PathBuf },
    /// Inline `[alpha_deg, CL, CD, CM]` rows.
    Points { points: Vec<[f64; 4]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroSection {
    pub table: TableSource,
    pub side_force_coeff: f64,
    pub roll_moment_coeff: f64,
    pub yaw_moment_coeff: f64,
    /// m
    pub reference_chord: f64,
}

impl Default for AeroSection {
    fn default() -> Self {
        Self {
            table: TableSource::Named("default".into()),
            side_force_coeff: 0.0,
            roll_moment_coeff: 0.0,
            yaw_moment_coeff: 0.0,
            reference_chord: DEFAULT_REFERENCE_CHORD,
        }
    }
}

impl AeroSection {
    pub fn build(&self, base_dir: &Path) -> Result<AeroTable> {
        let mut table = match &self.table {
            TableSource::Named(name) if name == "default" => {
                AeroTable::new(AeroTable::default_table().points().to_vec(), self.reference_chord)?
            }
            TableSource::Named(name) => {
                return Err(Error::Unknown { kind: "aero table", name: name.clone() })
            }
            TableSource::Csv { csv } => {
                let path = base_dir.join(csv);
                let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                AeroTable::from_csv(file, self.reference_chord)?
            }
            TableSource::Points { points } => AeroTable::new(
                points
                    .iter()
                    .map(|p| AeroPoint { alpha: p[0].to_radians(), cl: p[1], cd: p[2], cm: p[3] })
                    .collect(),
                self.reference_chord,
            )?,
        };
        table.side_force_coeff = self.side_force_coeff;
        table.roll_moment_coeff = self.roll_moment_coeff;
        table.yaw_moment_coeff = self.yaw_moment_coeff;
        if ![table.side_force_coeff, table.roll_moment_coeff, table.yaw_moment_coeff]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid("aero", "non-finite lateral coefficient"));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    /// s
    pub dt: f64,
    pub record_every: usize,
    pub exit_attitude_hold: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let s = Scenario::default();
        Self { dt: s.dt, record_every: s.record_every, exit_attitude_hold: s.exit_attitude_hold }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub launch: Launch,
    pub robot: RobotParams,
    pub environment: Environment,
    pub aero: AeroSection,
    pub ground_effect: GroundEffectModel,
    pub pelvic_fin: PelvicFin,
    pub hydro: HydroCoeffs,
    pub thrust: ThrustModel,
    pub forces: ForceToggles,
    pub actuator: ActuatorCalib,
    pub schedule: WingSchedule,
    pub termination: Termination,
    pub integrator: IntegratorSection,
}

fn config_error(source_name: &str, e: impl std::fmt::Display) -> Error {
    Error::Config { source_name: source_name.to_string(), message: e.to_string() }
}

/// Parses JSON text, reporting the location of syntax errors.
pub fn parse_value(text: &str, source_name: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| config_error(source_name, e))
}

impl ScenarioConfig {
    pub fn from_value(value: Value, source_name: &str) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| config_error(source_name, e))
    }

    /// Parses a document. Field errors carry the line and column.
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error(source_name, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Builds and validates the scenario. `base_dir` resolves relative
    /// table paths.
    pub fn build(&self, base_dir: &Path) -> Result<Scenario> {
        let aero = self.aero.build(base_dir)?;
        let scenario = Scenario {
            launch: self.launch.clone(),
            model: ForceModel {
                params: self.robot.clone(),
                env: self.environment.clone(),
                aero,
                ground_effect: self.ground_effect,
                pelvic: self.pelvic_fin,
                hydro: self.hydro.clone(),
                thrust: self.thrust.clone(),
                toggles: self.forces,
            },
            actuator: self.actuator.clone(),
            schedule: self.schedule.clone(),
            termination: self.termination.clone(),
            dt: self.integrator.dt,
            record_every: self.integrator.record_every,
            exit_attitude_hold: self.integrator.exit_attitude_hold,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Applies a JSON merge patch: objects merge recursively, `null` removes a
/// key, anything else replaces.
pub fn merge_patch(target: &mut Value, patch: &Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(k);
                } else {
                    merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p.clone(),
    }
}

/// Replaces the value at a dotted path such as `launch.discharge_deg`.
/// Numeric segments index arrays. Every segment must already exist.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let unresolved = || Error::invalid("axis", format!("path `{path}` does not resolve"));
    let mut cur = doc;
    for seg in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(seg).ok_or_else(unresolved)?,
            Value::Array(items) => {
                let i: usize = seg.parse().map_err(|_| unresolved())?;
                items.get_mut(i).ok_or_else(unresolved)?
            }
            _ => return Err(unresolved()),
        };
    }
    *cur = value;
    Ok(())
}
