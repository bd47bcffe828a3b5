//! Attraction-repulsion motion law and its explicit first-order integration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite velocity for agent {agent}")]
    IntegrationDiverged { agent: usize },
    #[error("invalid dynamics parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    /// 1-based agent number.
    pub index: usize,
    pub position: Vec2,
    /// Held at 0 for the omnidirectional agents simulated here.
    pub heading: f64,
    pub distance_traveled: f64,
    pub goal: Vec2,
}

impl AgentState {
    pub fn new(index: usize, position: Vec2) -> Self {
        AgentState {
            index,
            position,
            heading: 0.0,
            distance_traveled: 0.0,
            goal: position,
        }
    }
}

/// Argument of the repulsion exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepulsionMode {
    /// `exp(-|p_ij| / r_s^2)`
    #[default]
    AsWritten,
    /// `exp(-|p_ij|^2 / r_s^2)`
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub k_c: f64,
    pub k_r: f64,
    pub r_s: f64,
    pub dt: f64,
    pub repulsion: RepulsionMode,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let finite = [self.k_c, self.k_r, self.r_s, self.dt]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(DynamicsError::InvalidParams("non-finite value"));
        }
        if self.k_c <= 0.0 {
            return Err(DynamicsError::InvalidParams("k_c must be > 0"));
        }
        if self.k_r < 0.0 {
            return Err(DynamicsError::InvalidParams("k_r must be >= 0"));
        }
        if self.r_s <= 0.0 {
            return Err(DynamicsError::InvalidParams("r_s must be > 0"));
        }
        if self.dt <= 0.0 {
            return Err(DynamicsError::InvalidParams("dt must be > 0"));
        }
        Ok(())
    }

    fn repulsion_weight(&self, separation: f64) -> f64 {
        let r2 = self.r_s * self.r_s;
        match self.repulsion {
            RepulsionMode::AsWritten => (-separation / r2).exp(),
            RepulsionMode::Squared => (-separation * separation / r2).exp(),
        }
    }
}

/// Velocity of `agent` given the rest of the swarm. Entries of `swarm` with
/// the same index as `agent` are skipped, so the whole swarm can be passed.
pub fn velocity(agent: &AgentState, swarm: &[AgentState], params: &DynamicsParams) -> Vec2 {
    let attraction = (agent.position - agent.goal) * -params.k_c;
    if params.k_r == 0.0 {
        return attraction;
    }
    let mut repulsion = Vec2::ZERO;
    for other in swarm.iter().filter(|o| o.index != agent.index) {
        let diff = agent.position - other.position;
        repulsion += diff * params.repulsion_weight(diff.norm());
    }
    attraction + repulsion * params.k_r
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// Pairs `(i, j)`, `i < j`, sharing a position before the step.
    pub coincident: Vec<(usize, usize)>,
    pub peak_speed: f64,
}

/// Advances every agent by one synchronous explicit step.
pub fn step(
    agents: &mut [AgentState],
    params: &DynamicsParams,
) -> Result<StepReport, DynamicsError> {
    let snapshot = agents.to_vec();
    let velocities: Vec<Vec2> = snapshot
        .iter()
        .map(|a| velocity(a, &snapshot, params))
        .collect();

    let mut report = StepReport::default();
    for (i, a) in snapshot.iter().enumerate() {
        for b in &snapshot[i + 1..] {
            if a.position == b.position {
                report
                    .coincident
                    .push((a.index.min(b.index), a.index.max(b.index)));
            }
        }
    }
    if let Some((a, _)) = snapshot
        .iter()
        .zip(&velocities)
        .find(|(_, v)| !v.is_finite())
    {
        return Err(DynamicsError::IntegrationDiverged { agent: a.index });
    }
    for (agent, v) in agents.iter_mut().zip(velocities) {
        let next = agent.position + v * params.dt;
        agent.distance_traveled += (next - agent.position).norm();
        agent.position = next;
        report.peak_speed = report.peak_speed.max(v.norm());
    }
    Ok(report)
}
