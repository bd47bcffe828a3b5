//! Decentralised transport protocol. The master plans the next circular
//! region and broadcasts its center; every agent rebuilds its own goal from
//! the polar offset of its current goal about the current center.

use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::geometry::{CircleRegion, Vec2};
use crate::phase1::{fit_circle, FitOptions, Phase1Error};

/// Distance and full-quadrant angle of a goal about a circle center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarOffset {
    pub r: f64,
    /// In `(-pi, pi]`.
    pub alpha: f64,
}

impl PolarOffset {
    pub fn to_vector(self) -> Vec2 {
        Vec2::from_polar(self.r, self.alpha)
    }
}

pub fn compute_offset(goal: Vec2, center: Vec2) -> PolarOffset {
    let d = goal - center;
    if d.x == 0.0 && d.y == 0.0 {
        return PolarOffset { r: 0.0, alpha: 0.0 };
    }
    let alpha = d.y.atan2(d.x);
    PolarOffset {
        r: d.norm(),
        alpha: if alpha == -PI { PI } else { alpha },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanMessage {
    pub new_center: Vec2,
    pub epoch: u64,
}

pub fn next_goal(offset: PolarOffset, plan: &PlanMessage) -> Vec2 {
    plan.new_center + offset.to_vector()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanOutcome {
    Plan(PlanMessage),
    Arrived,
}

/// One master planning step: either the current region is within `step` of
/// the target, or the next region is fitted ahead of the current one.
pub fn plan_step(
    cloud: &[Vec2],
    current: &CircleRegion,
    target: Vec2,
    step: f64,
    last_epoch: u64,
    opts: &FitOptions,
) -> Result<PlanOutcome, Phase1Error> {
    if current.center.distance(target) <= step {
        return Ok(PlanOutcome::Arrived);
    }
    let next = fit_circle(
        cloud,
        current.center,
        target,
        current.radius,
        Some(current.center),
        step,
        opts,
    )?;
    Ok(PlanOutcome::Plan(PlanMessage {
        new_center: next.center,
        epoch: last_epoch + 1,
    }))
}

/// Per-agent protocol state: the center and goal the agent currently holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPlanner {
    pub center: Vec2,
    pub goal: Vec2,
    pub last_epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Applied,
    Stale,
}

impl AgentPlanner {
    pub fn new(center: Vec2, goal: Vec2, epoch: u64) -> Self {
        AgentPlanner {
            center,
            goal,
            last_epoch: epoch,
        }
    }

    pub fn offset(&self) -> PolarOffset {
        compute_offset(self.goal, self.center)
    }

    /// Applies `msg` unless its epoch is not newer than the last one applied.
    pub fn receive(&mut self, msg: &PlanMessage) -> Delivery {
        if msg.epoch <= self.last_epoch {
            return Delivery::Stale;
        }
        self.goal = next_goal(self.offset(), msg);
        self.center = msg.new_center;
        self.last_epoch = msg.epoch;
        Delivery::Applied
    }
}

/// Master-to-all broadcast with an optional fixed delivery delay in ticks.
#[derive(Debug, Clone, Default)]
pub struct Broadcast {
    delay: u64,
    queue: VecDeque<(u64, PlanMessage)>,
}

impl Broadcast {
    pub fn new(delay: u64) -> Self {
        Broadcast {
            delay,
            queue: VecDeque::new(),
        }
    }

    pub fn send(&mut self, msg: PlanMessage, tick: u64) {
        self.queue.push_back((tick + self.delay, msg));
    }

    /// Messages due at or before `tick`, in send order.
    pub fn deliver(&mut self, tick: u64) -> Vec<PlanMessage> {
        let mut due = Vec::new();
        while let Some((at, _)) = self.queue.front() {
            if *at > tick {
                break;
            }
            due.push(self.queue.pop_front().unwrap().1);
        }
        due
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }
}
