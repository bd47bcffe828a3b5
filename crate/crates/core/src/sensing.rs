//! Ring of range sensors on each agent, realised as ray casts against the
//! environment polygons, and conversion of readings into world-frame
//! obstacle points.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::geometry::{Polygon, Vec2};

pub const DEFAULT_MAX_RANGE: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("agent at {position} is inside obstacle {obstacle}")]
    AgentInObstacle { position: Vec2, obstacle: usize },
    #[error("sensor rig needs at least one sensor and a positive range")]
    InvalidRig,
    #[error("scan has {got} readings but the rig has {expected} sensors")]
    RigMismatch { expected: usize, got: usize },
}

/// `count` sensors spaced `2 pi / count` apart, sensor 0 along the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRig {
    count: usize,
    max_range: f64,
}

impl SensorRig {
    pub fn new(count: usize, max_range: f64) -> Result<Self, SensingError> {
        if count == 0 || !(max_range.is_finite() && max_range > 0.0) {
            return Err(SensingError::InvalidRig);
        }
        Ok(SensorRig { count, max_range })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.count as f64
    }

    /// Offset of sensor `j` (0-based) from the agent heading.
    pub fn angular_offset(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorScan {
    /// One entry per sensor; `None` when nothing is within range.
    pub readings: Vec<Option<f64>>,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstaclePointCloud {
    pub points: Vec<Vec2>,
    pub source_agent: usize,
}

/// Distance along the ray `origin + t dir` (`|dir| = 1`) to segment `a-b`,
/// if it is hit at some `t > 0`.
pub fn ray_segment_hit(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let edge = b - a;
    let denom = dir.cross(edge);
    let rel = a - origin;
    if denom == 0.0 {
        // parallel; only a collinear edge can be hit, at its nearer endpoint
        if rel.cross(dir) != 0.0 {
            return None;
        }
        let (ta, tb) = (rel.dot(dir), (b - origin).dot(dir));
        return match (ta > 0.0, tb > 0.0) {
            (true, true) => Some(ta.min(tb)),
            (false, false) => None,
            // origin lies on the edge itself
            _ => None,
        };
    }
    let t = rel.cross(edge) / denom;
    let s = rel.cross(dir) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

pub fn scan(
    position: Vec2,
    heading: f64,
    rig: &SensorRig,
    obstacles: &[Polygon],
    tick: u64,
) -> Result<SensorScan, SensingError> {
    if let Some(obstacle) = obstacles.iter().position(|o| o.contains(position)) {
        return Err(SensingError::AgentInObstacle { position, obstacle });
    }
    let readings = (0..rig.count)
        .map(|j| {
            let dir = Vec2::from_polar(1.0, rig.angular_offset(j) + heading);
            obstacles
                .iter()
                .flat_map(|o| o.edges())
                .filter_map(|(a, b)| ray_segment_hit(position, dir, a, b))
                .filter(|&t| t <= rig.max_range)
                .fold(None, |best: Option<f64>, t| {
                    Some(best.map_or(t, |b| b.min(t)))
                })
        })
        .collect();
    Ok(SensorScan { readings, tick })
}

/// Projects each present reading into the world frame.
pub fn predict_obstacle_points(
    scan: &SensorScan,
    position: Vec2,
    heading: f64,
    rig: &SensorRig,
    source_agent: usize,
) -> Result<ObstaclePointCloud, SensingError> {
    if scan.readings.len() != rig.count {
        return Err(SensingError::RigMismatch {
            expected: rig.count,
            got: scan.readings.len(),
        });
    }
    let points = scan
        .readings
        .iter()
        .enumerate()
        .filter_map(|(j, d)| {
            d.map(|d| position + Vec2::from_polar(d, rig.angular_offset(j) + heading))
        })
        .collect();
    Ok(ObstaclePointCloud {
        points,
        source_agent,
    })
}

/// Concatenates per-agent clouds ordered by agent index, then sensor index.
pub fn aggregate_swarm_cloud(clouds: &[ObstaclePointCloud]) -> Vec<Vec2> {
    let mut ordered: Vec<&ObstaclePointCloud> = clouds.iter().collect();
    ordered.sort_by_key(|c| c.source_agent);
    ordered
        .iter()
        .flat_map(|c| c.points.iter().copied())
        .collect()
}
