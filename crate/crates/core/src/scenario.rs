//! Scenario files: a TOML document with the sections `agents`,
//! `environment`, `object`, `control` and `output`. Unknown keys are
//! rejected. Lengths are world units, angles radians, times seconds.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::dynamics::{DynamicsParams, RepulsionMode};
use crate::geometry::{max_grid_resolution, Polygon, Vec2};
use crate::phase1::{FitOptions, ObjectFootprint};
use crate::sensing::{SensorRig, DEFAULT_MAX_RANGE};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario rejected: {}", failed_names(.0))]
    Invalid(Vec<Check>),
}

fn failed_names(checks: &[Check]) -> String {
    checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub agents: AgentsSection,
    pub environment: EnvironmentSection,
    pub object: ObjectSection,
    pub control: ControlSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsSection {
    pub count: usize,
    pub positions: Vec<Vec2>,
    #[serde(default = "default_sensors")]
    pub sensors: usize,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    /// Physical radius used only by metrics; agents are points by default.
    #[serde(default)]
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    pub target: Vec2,
    #[serde(default)]
    pub obstacles: Vec<Vec<Vec2>>,
}

/// Exactly one of `vertices` (polygon about the reference point) or
/// `radius` (disc).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub vertices: Option<Vec<Vec2>>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub k_c: f64,
    pub k_r: f64,
    pub r_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub repulsion: RepulsionMode,
    pub r_c: f64,
    pub n: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_ticks")]
    pub max_ticks: u64,
    #[serde(default)]
    pub clearance: f64,
    #[serde(default)]
    pub message_delay: u64,
    /// Master keeps every obstacle point sensed so far, not only the
    /// current tick's scan.
    #[serde(default = "default_true")]
    pub cloud_memory: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<String>,
    #[serde(default)]
    pub plots: Vec<String>,
}

fn default_sensors() -> usize {
    8
}
fn default_max_range() -> f64 {
    DEFAULT_MAX_RANGE
}
fn default_dt() -> f64 {
    0.01
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_step() -> f64 {
    0.25
}
fn default_cadence() -> u64 {
    10
}
fn default_max_ticks() -> u64 {
    200_000
}
fn default_true() -> bool {
    true
}

/// One named load-time check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            write!(f, "[{mark}] {}", self.name)
        } else {
            write!(f, "[{mark}] {} ({})", self.name, self.detail)
        }
    }
}

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial_positions: Vec<Vec2>,
    pub obstacles: Vec<Polygon>,
    pub target: Vec2,
    pub footprint: ObjectFootprint,
    pub params: DynamicsParams,
    pub r_c: f64,
    pub n: usize,
    pub rig: SensorRig,
    pub agent_radius: f64,
    pub epsilon: f64,
    pub step: f64,
    pub cadence: u64,
    pub seed: u64,
    pub max_ticks: u64,
    pub fit: FitOptions,
    pub message_delay: u64,
    pub cloud_memory: bool,
    pub output: OutputSection,
}

impl Scenario {
    pub fn agent_count(&self) -> usize {
        self.initial_positions.len()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let file = ScenarioFile::load(path)?;
        file.into_scenario()
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        ScenarioFile::parse(text)?.into_scenario()
    }
}

impl ScenarioFile {
    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioFile, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        ScenarioFile::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ScenarioFile, ScenarioError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((1, 1));
            ScenarioError::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    fn footprint(&self) -> Result<ObjectFootprint, String> {
        match (&self.object.vertices, self.object.radius) {
            (Some(v), None) => Polygon::new(v.clone())
                .map(ObjectFootprint::polygon)
                .map_err(|e| e.to_string()),
            (None, Some(r)) if r.is_finite() && r > 0.0 => Ok(ObjectFootprint::disc(r)),
            (None, Some(r)) => Err(format!("disc radius {r} must be positive")),
            _ => Err("give exactly one of `vertices` or `radius`".into()),
        }
    }

    /// Every load-time invariant, in a fixed order.
    pub fn checks(&self) -> Vec<Check> {
        let a = &self.agents;
        let c = &self.control;
        let mut out = Vec::new();

        out.push(Check::new(
            "agent count >= 1",
            a.count >= 1,
            format!("N = {}", a.count),
        ));
        out.push(Check::new(
            "one initial position per agent",
            a.positions.len() == a.count,
            format!("{} positions for {} agents", a.positions.len(), a.count),
        ));
        out.push(Check::new(
            "finite initial positions and target",
            a.positions.iter().all(|p| p.is_finite()) && self.environment.target.is_finite(),
            "",
        ));
        out.push(Check::new(
            "sensor rig: m >= 1 and max_range > 0",
            SensorRig::new(a.sensors, a.max_range).is_ok(),
            format!("m = {}, max_range = {}", a.sensors, a.max_range),
        ));
        out.push(Check::new(
            "agent radius >= 0",
            a.radius.is_finite() && a.radius >= 0.0,
            format!("{}", a.radius),
        ));
        let params = self.params();
        out.push(Check::new(
            "dynamics: k_c > 0, k_r >= 0, r_s > 0, dt > 0",
            params.validate().is_ok(),
            params
                .validate()
                .err()
                .map(|e| e.to_string())
                .unwrap_or_default(),
        ));
        out.push(Check::new(
            "region radius r_c > 0",
            c.r_c.is_finite() && c.r_c > 0.0,
            format!("r_c = {}", c.r_c),
        ));
        out.push(match max_grid_resolution(c.r_c, c.r_s) {
            Ok(bound) => Check::new(
                format!("packing stability: n <= {bound}"),
                c.n >= 1 && c.n <= bound,
                format!("n = {}, bound floor(r_c / 3 r_s) = {bound}", c.n),
            ),
            Err(e) => Check::new(
                "packing stability: n <= floor(r_c / 3 r_s)",
                false,
                e.to_string(),
            ),
        });
        match self.footprint() {
            Ok(fp) => {
                let d = fp.max_diameter();
                out.push(Check::new("object footprint valid", true, ""));
                out.push(Check::new(
                    "object fits the region: max diameter <= 2 r_c",
                    d <= 2.0 * c.r_c,
                    format!("diameter {d:.4}, 2 r_c = {}", 2.0 * c.r_c),
                ));
            }
            Err(e) => {
                out.push(Check::new("object footprint valid", false, e));
                out.push(Check::new(
                    "object fits the region: max diameter <= 2 r_c",
                    false,
                    "no footprint",
                ));
            }
        }
        let polys: Vec<_> = self
            .environment
            .obstacles
            .iter()
            .map(|v| Polygon::new(v.clone()))
            .collect();
        let bad: Vec<String> = polys
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().err().map(|e| format!("obstacle {i}: {e}")))
            .collect();
        out.push(Check::new(
            "obstacle polygons valid",
            bad.is_empty(),
            bad.join("; "),
        ));
        let blocked: Vec<String> = a
            .positions
            .iter()
            .enumerate()
            .filter(|(_, p)| polys.iter().flatten().any(|o| o.contains(**p)))
            .map(|(i, _)| format!("agent {}", i + 1))
            .collect();
        out.push(Check::new(
            "initial positions outside obstacles",
            blocked.is_empty(),
            blocked.join(", "),
        ));
        out.push(Check::new(
            "convergence tolerance epsilon > 0",
            c.epsilon.is_finite() && c.epsilon > 0.0,
            format!("{}", c.epsilon),
        ));
        out.push(Check::new(
            "planning step > 0 and cadence >= 1",
            c.step.is_finite() && c.step > 0.0 && c.cadence >= 1,
            format!("step {}, cadence {}", c.step, c.cadence),
        ));
        out.push(Check::new(
            "tick limit >= 1 and clearance >= 0",
            c.max_ticks >= 1 && c.clearance.is_finite() && c.clearance >= 0.0,
            "",
        ));
        out
    }

    fn params(&self) -> DynamicsParams {
        let c = &self.control;
        DynamicsParams {
            k_c: c.k_c,
            k_r: c.k_r,
            r_s: c.r_s,
            dt: c.dt,
            repulsion: c.repulsion,
        }
    }

    pub fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let checks = self.checks();
        if checks.iter().any(|c| !c.passed) {
            return Err(ScenarioError::Invalid(checks));
        }
        let invalid = |msg: String| ScenarioError::Invalid(vec![Check::new(msg, false, "")]);
        let footprint = self.footprint().map_err(invalid)?;
        let obstacles = self
            .environment
            .obstacles
            .iter()
            .map(|v| Polygon::new(v.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| invalid(e.to_string()))?;
        let rig = SensorRig::new(self.agents.sensors, self.agents.max_range)
            .map_err(|e| invalid(e.to_string()))?;
        let c = &self.control;
        Ok(Scenario {
            params: self.params(),
            initial_positions: self.agents.positions.clone(),
            obstacles,
            target: self.environment.target,
            footprint,
            r_c: c.r_c,
            n: c.n,
            rig,
            agent_radius: self.agents.radius,
            epsilon: c.epsilon,
            step: c.step,
            cadence: c.cadence,
            seed: c.seed,
            max_ticks: c.max_ticks,
            fit: FitOptions {
                clearance: c.clearance,
            },
            message_delay: c.message_delay,
            cloud_memory: c.cloud_memory,
            output: self.output,
        })
    }
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[agents]
count = 2
positions = [[0.0, 0.0], [1.0, 0.0]]

[environment]
target = [3.0, 0.0]

[object]
radius = 2.0

[control]
k_c = 5.0
k_r = 2.5
r_s = 0.0575
r_c = 3.0
n = 4
"#;

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.agent_count(), 2);
        assert_eq!(s.rig.count(), 8);
        assert_eq!(s.rig.max_range(), 10.0);
        assert_eq!(s.params.dt, 0.01);
        assert_eq!(s.cadence, 10);
        assert_eq!(s.step, 0.25);
        assert_eq!(s.epsilon, 0.05);
        assert_eq!(s.params.repulsion, RepulsionMode::AsWritten);
        assert!(s.cloud_memory);
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = MINIMAL.replace("k_r = 2.5", "k_r = 2.5\nbogus = 1");
        match ScenarioFile::parse(&text) {
            Err(ScenarioError::Parse { line, message, .. }) => {
                assert_eq!(line, 15);
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_section_rejected() {
        let text = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(
            ScenarioFile::parse(&text),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn stability_bound_enforced() {
        let text = MINIMAL.replace("n = 4", "n = 18");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(
            err.to_string().contains("packing stability: n <= 17"),
            "{err}"
        );
    }

    #[test]
    fn oversized_object_rejected() {
        let text = MINIMAL.replace("radius = 2.0", "radius = 3.5");
        let err = Scenario::parse(&text).unwrap_err();
        assert!(err.to_string().contains("max diameter"), "{err}");
    }

    #[test]
    fn start_inside_obstacle_rejected() {
        let text = MINIMAL.replace(
            "target = [3.0, 0.0]",
            "target = [3.0, 0.0]\nobstacles = [[[0.5, -1.0], [2.0, -1.0], [2.0, 1.0], [0.5, 1.0]]]",
        );
        let file = ScenarioFile::parse(&text).unwrap();
        let failed: Vec<_> = file.checks().into_iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].detail, "agent 2");
    }

    #[test]
    fn line_column_counts() {
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
        assert_eq!(line_column("ab", 0), (1, 1));
    }
}
