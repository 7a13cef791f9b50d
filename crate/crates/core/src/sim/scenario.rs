//! Scenario files: world, scripted objects, drone start and parameters.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::spline::CubicSpline;
use super::{Result, SimError};
use crate::planner::PlanParams;
use crate::prediction::ProcessNoise;

pub const SCHEMA_VERSION: u32 = 1;

/// Path samples per waypoint interval for the obstacle check.
const PATH_CHECK_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Interrupter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticObstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub p: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingObject {
    pub role: Role,
    pub body_radius: f64,
    /// Observation noise on position (m) and velocity (m/s), one sigma.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub velocity_noise: f64,
    pub script: Vec<Waypoint>,
}

impl MovingObject {
    pub fn spline(&self) -> CubicSpline {
        CubicSpline::new(self.script.iter().map(|w| w.t).collect(), self.script.iter().map(|w| v2(w.p)).collect())
    }
}

fn default_r_c() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroneSpec {
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default = "default_r_c")]
    pub r_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub planner: PlanParams,
    pub samples: usize,
    pub outlier_ratio: f64,
    /// Isotropic acceleration variance of the constant-velocity model.
    pub accel_variance: f64,
    pub replan_rate: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            planner: PlanParams::default(),
            samples: 1000,
            outlier_ratio: 0.0,
            accel_variance: 1.0,
            replan_rate: 10.0,
            step: 0.005,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn process_noise(&self) -> ProcessNoise {
        ProcessNoise::isotropic(self.accel_variance)
    }

    /// Integration steps between replans.
    pub fn steps_per_replan(&self) -> usize {
        (1.0 / (self.replan_rate * self.step)).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub mode: Mode,
    pub drone: DroneSpec,
    #[serde(default)]
    pub static_obstacles: Vec<StaticObstacle>,
    pub moving_objects: Vec<MovingObject>,
    #[serde(default)]
    pub params: SimParams,
}

pub(crate) fn v2(p: [f64; 2]) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

impl Scenario {
    pub fn targets(&self) -> impl Iterator<Item = (usize, &MovingObject)> {
        self.moving_objects.iter().enumerate().filter(|(_, o)| o.role == Role::Target)
    }

    pub fn interrupters(&self) -> impl Iterator<Item = (usize, &MovingObject)> {
        self.moving_objects.iter().enumerate().filter(|(_, o)| o.role == Role::Interrupter)
    }

    /// Planner parameters with the drone radius from the drone block.
    pub fn plan_params(&self) -> PlanParams {
        PlanParams { r_c: self.drone.r_c, ..self.params.planner }
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| SimError::Parse { path: origin.to_string(), message: e.to_string() })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(SimError::invalid("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema)));
        }
        let p = &self.params;
        self.plan_params().validate().map_err(|e| SimError::invalid("params.planner", e.to_string()))?;
        if p.samples == 0 {
            return Err(SimError::invalid("params.samples", "must be positive"));
        }
        if !(0.0..1.0).contains(&p.outlier_ratio) {
            return Err(SimError::invalid("params.outlier_ratio", "must lie in [0, 1)"));
        }
        if !(p.accel_variance >= 0.0 && p.accel_variance.is_finite()) {
            return Err(SimError::invalid("params.accel_variance", "must be non-negative"));
        }
        if !(p.replan_rate > 0.0 && p.step > 0.0) {
            return Err(SimError::invalid("params", "replan_rate and step must be positive"));
        }
        let ratio = 1.0 / (p.replan_rate * p.step);
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(SimError::invalid("params.step", "replan period must be a whole number of steps"));
        }
        if 1.0 / p.replan_rate >= self.params.planner.horizon {
            return Err(SimError::invalid("params.replan_rate", "replan period must be shorter than the horizon"));
        }
        if !(self.drone.r_c > 0.0) {
            return Err(SimError::invalid("drone.r_c", "must be positive"));
        }
        for (k, o) in self.static_obstacles.iter().enumerate() {
            if !(o.radius > 0.0) {
                return Err(SimError::invalid(format!("static_obstacles[{k}].radius"), "must be positive"));
            }
            let gap = (v2(self.drone.position) - v2(o.center)).norm() - o.radius - self.drone.r_c;
            if gap <= 0.0 {
                return Err(SimError::invalid("drone.position", format!("inside static_obstacles[{k}]")));
            }
        }
        let targets = self.targets().count();
        match self.mode {
            Mode::Single if targets != 1 => {
                return Err(SimError::invalid("moving_objects", format!("single mode needs 1 target, found {targets}")))
            }
            Mode::Dual if targets != 2 => {
                return Err(SimError::invalid("moving_objects", format!("dual mode needs 2 targets, found {targets}")))
            }
            _ => {}
        }
        for (i, m) in self.moving_objects.iter().enumerate() {
            let at = |what: &str| format!("moving_objects[{i}].{what}");
            if !(m.body_radius > 0.0) {
                return Err(SimError::invalid(at("body_radius"), "must be positive"));
            }
            if !(m.noise >= 0.0 && m.velocity_noise >= 0.0) {
                return Err(SimError::invalid(at("noise"), "must be non-negative"));
            }
            if m.script.is_empty() {
                return Err(SimError::invalid(at("script"), "needs at least one waypoint"));
            }
            for (j, w) in m.script.iter().enumerate() {
                if !(w.t.is_finite() && w.p.iter().all(|x| x.is_finite())) {
                    return Err(SimError::invalid(at(&format!("script[{j}]")), "non-finite waypoint"));
                }
                if j > 0 && w.t <= m.script[j - 1].t {
                    return Err(SimError::invalid(at(&format!("script[{j}].t")), "times must increase"));
                }
            }
            self.check_path(i, m)?;
        }
        Ok(())
    }

    /// Scripted paths must keep clear of the static obstacles.
    fn check_path(&self, index: usize, object: &MovingObject) -> Result<()> {
        let spline = object.spline();
        let script = &object.script;
        let hits = |p: Vector2<f64>| {
            self.static_obstacles
                .iter()
                .position(|o| (p - v2(o.center)).norm() < o.radius + object.body_radius)
        };
        let location = |j: usize, k: usize| {
            (format!("moving_objects[{index}].script[{j}]"), format!("path enters static_obstacles[{k}]"))
        };
        if let Some(k) = hits(v2(script[0].p)) {
            let (l, m) = location(0, k);
            return Err(SimError::invalid(l, m));
        }
        for j in 1..script.len() {
            let (a, b) = (script[j - 1].t, script[j].t);
            for s in 1..=PATH_CHECK_SAMPLES {
                let t = a + (b - a) * s as f64 / PATH_CHECK_SAMPLES as f64;
                if let Some(k) = hits(spline.position(t)) {
                    // Name the waypoint the offending stretch leads to.
                    let (l, m) = location(j, k);
                    return Err(SimError::invalid(l, m));
                }
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    Scenario::from_json(&text, &path.display().to_string())
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(scenario)?;
    std::fs::write(path, text + "\n").map_err(|e| SimError::io(path, e))
}
