//! Centralised formation planner: circle fitting in sensed free space,
//! footprint census over the triangle packing, goal assignment and master
//! election.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::AgentState;
use crate::geometry::{
    inscribe_square, pack_triangles, quadrant_of, Centroid, CircleRegion, GeometryError,
    InscribedSquare, Polygon, Quadrant, TriangleGrid, Vec2,
};
use crate::phase2::{compute_offset, PolarOffset};

/// Angular resolution of the direction sweep in `fit_circle`.
pub const ANGULAR_STEP: f64 = PI / 36.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Phase1Error {
    #[error("no admissible region of radius {radius} around {anchor}: swarm is walled in")]
    NoFreeRegion { anchor: Vec2, radius: f64 },
    #[error(
        "insufficient capacity: segments {top} and {second} hold {top_count} and {second_count} \
         footprint triangles, need {top_needed} and {second_needed}; increase n toward its \
         stability bound or enlarge r_c"
    )]
    InsufficientCapacity {
        top: Quadrant,
        second: Quadrant,
        top_count: usize,
        second_count: usize,
        top_needed: usize,
        second_needed: usize,
    },
    #[error("swarm must contain at least one agent")]
    EmptySwarm,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Shape of the carried object, relative to its reference point.
#[derive(Debug, Clone, PartialEq)]
pub enum FootprintShape {
    Polygon(Polygon),
    /// Closed disc about the reference point; radius 0 covers no area.
    Disc {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFootprint {
    pub shape: FootprintShape,
}

impl ObjectFootprint {
    pub fn polygon(shape: Polygon) -> Self {
        ObjectFootprint {
            shape: FootprintShape::Polygon(shape),
        }
    }

    pub fn disc(radius: f64) -> Self {
        ObjectFootprint {
            shape: FootprintShape::Disc { radius },
        }
    }

    pub fn area(&self) -> f64 {
        match &self.shape {
            FootprintShape::Polygon(p) => p.area(),
            FootprintShape::Disc { radius } => PI * radius * radius,
        }
    }

    pub fn max_diameter(&self) -> f64 {
        match &self.shape {
            FootprintShape::Polygon(p) => p.max_diameter(),
            FootprintShape::Disc { radius } => 2.0 * radius,
        }
    }

    /// Boundary-inclusive membership with the reference point at `origin`.
    pub fn contains_at(&self, origin: Vec2, p: Vec2) -> bool {
        match &self.shape {
            FootprintShape::Polygon(poly) => poly.contains(p - origin),
            FootprintShape::Disc { radius } => (p - origin).norm() <= *radius,
        }
    }

    /// Outline in world coordinates with the reference point at `origin`.
    pub fn outline_at(&self, origin: Vec2) -> Vec<Vec2> {
        match &self.shape {
            FootprintShape::Polygon(p) => p.vertices().iter().map(|v| *v + origin).collect(),
            FootprintShape::Disc { radius } => (0..64)
                .map(|k| origin + Vec2::from_polar(*radius, k as f64 * PI / 32.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Extra distance every cloud point must keep from the circle.
    pub clearance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { clearance: 0.0 }
    }
}

/// Deviations from the target bearing in probe order: `0, +d, -d, +2d, ...`
/// up to `pi`, which is probed once.
pub fn probe_deviations() -> Vec<f64> {
    let half_turn = (PI / ANGULAR_STEP).round() as i64;
    let mut out = vec![0.0];
    for k in 1..half_turn {
        out.push(k as f64 * ANGULAR_STEP);
        out.push(-(k as f64) * ANGULAR_STEP);
    }
    out.push(PI);
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit {
    pub circle: CircleRegion,
    /// Signed deviation of the accepted direction from the target bearing.
    pub deviation: f64,
}

/// True iff no cloud point lies strictly inside the (clearance-inflated)
/// circle.
pub fn region_is_clear(cloud: &[Vec2], center: Vec2, radius: f64, clearance: f64) -> bool {
    let reach = radius + clearance;
    cloud.iter().all(|p| p.distance(center) >= reach)
}

/// Places a circle of radius `r_c` one `step` away from the anchor
/// (`prev_center`, else `swarm_centroid`), turning as little as possible away
/// from the bearing to `target`.
pub fn fit_circle(
    cloud: &[Vec2],
    swarm_centroid: Vec2,
    target: Vec2,
    r_c: f64,
    prev_center: Option<Vec2>,
    step: f64,
    opts: &FitOptions,
) -> Result<CircleRegion, Phase1Error> {
    fit_circle_detailed(cloud, swarm_centroid, target, r_c, prev_center, step, opts)
        .map(|fit| fit.circle)
}

pub fn fit_circle_detailed(
    cloud: &[Vec2],
    swarm_centroid: Vec2,
    target: Vec2,
    r_c: f64,
    prev_center: Option<Vec2>,
    step: f64,
    opts: &FitOptions,
) -> Result<CircleFit, Phase1Error> {
    let anchor = prev_center.unwrap_or(swarm_centroid);
    CircleRegion::new(anchor, r_c)?;
    let bearing = (target - anchor).angle();
    for deviation in probe_deviations() {
        let center = anchor + Vec2::from_polar(step, bearing + deviation);
        if region_is_clear(cloud, center, r_c, opts.clearance) {
            return Ok(CircleFit {
                circle: CircleRegion::new(center, r_c)?,
                deviation,
            });
        }
    }
    Err(Phase1Error::NoFreeRegion {
        anchor,
        radius: r_c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCensus {
    /// Triangles per segment, indexed by `Quadrant::slot`.
    pub counts: [usize; 4],
    /// Counted centroids per segment, in grid order.
    pub members: [Vec<Centroid>; 4],
}

impl SegmentCensus {
    pub fn from_members(members: [Vec<Centroid>; 4]) -> Self {
        let counts = std::array::from_fn(|i| members[i].len());
        SegmentCensus { counts, members }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Counts grid centroids lying both in each segment and under the object
/// placed at the circle center.
pub fn census(
    grid: &TriangleGrid,
    circle: &CircleRegion,
    footprint: &ObjectFootprint,
) -> SegmentCensus {
    let mut members: [Vec<Centroid>; 4] = Default::default();
    for c in &grid.centroids {
        if !footprint.contains_at(circle.center, c.point) {
            continue;
        }
        // centroids never coincide with the center; skip defensively if they did
        if let Ok(q) = quadrant_of(c.point, circle.center) {
            members[q.slot()].push(*c);
        }
    }
    SegmentCensus::from_members(members)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoalAssignment {
    pub goals: Vec<Vec2>,
    pub polar_offsets: Vec<PolarOffset>,
    pub source_segments: Vec<Quadrant>,
    pub circle: CircleRegion,
}

/// The two segments with the most footprint triangles, lowest index first on
/// ties.
pub fn select_segments(counts: &[usize; 4]) -> (Quadrant, Quadrant) {
    let mut order = Quadrant::ALL;
    order.sort_by_key(|q| std::cmp::Reverse(counts[q.slot()]));
    (order[0], order[1])
}

/// Agents `1..=ceil(N/2)` take the farthest-from-center centroids of the top
/// segment, one each; the rest do the same in the second segment.
pub fn assign_goals(
    census: &SegmentCensus,
    circle: &CircleRegion,
    n_agents: usize,
) -> Result<GoalAssignment, Phase1Error> {
    if n_agents == 0 {
        return Err(Phase1Error::EmptySwarm);
    }
    let (top, second) = select_segments(&census.counts);
    let top_needed = n_agents.div_ceil(2);
    let second_needed = n_agents / 2;
    let (top_count, second_count) = (census.counts[top.slot()], census.counts[second.slot()]);
    if top_count < top_needed || second_count < second_needed {
        return Err(Phase1Error::InsufficientCapacity {
            top,
            second,
            top_count,
            second_count,
            top_needed,
            second_needed,
        });
    }

    let farthest_first = |seg: Quadrant, take: usize| -> Vec<Vec2> {
        let mut pts: Vec<Vec2> = census.members[seg.slot()].iter().map(|c| c.point).collect();
        // stable: equal distances keep grid order
        pts.sort_by(|a, b| {
            b.distance(circle.center)
                .total_cmp(&a.distance(circle.center))
        });
        pts.truncate(take);
        pts
    };

    let mut goals = farthest_first(top, top_needed);
    goals.extend(farthest_first(second, second_needed));
    let source_segments = (0..n_agents)
        .map(|i| if i < top_needed { top } else { second })
        .collect();
    let polar_offsets = goals
        .iter()
        .map(|g| compute_offset(*g, circle.center))
        .collect();
    Ok(GoalAssignment {
        goals,
        polar_offsets,
        source_segments,
        circle: *circle,
    })
}

/// True iff every agent is strictly within `epsilon` of its goal.
pub fn formation_converged(agents: &[AgentState], goals: &[Vec2], epsilon: f64) -> bool {
    agents
        .iter()
        .zip(goals)
        .all(|(a, g)| a.position.distance(*g) < epsilon)
}

/// Uniform draw of a 1-based agent number from a seeded generator.
pub fn elect_master(n_agents: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.gen_range(1..=n_agents.max(1))
}

/// Everything the central controller computes in one planning event.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationPlan {
    pub circle: CircleRegion,
    pub square: InscribedSquare,
    pub grid: TriangleGrid,
    pub census: SegmentCensus,
    pub assignment: GoalAssignment,
}

#[allow(clippy::too_many_arguments)]
pub fn plan_formation(
    cloud: &[Vec2],
    swarm_centroid: Vec2,
    target: Vec2,
    r_c: f64,
    step: f64,
    n: usize,
    footprint: &ObjectFootprint,
    n_agents: usize,
    opts: &FitOptions,
) -> Result<FormationPlan, Phase1Error> {
    let circle = fit_circle(cloud, swarm_centroid, target, r_c, None, step, opts)?;
    let square = inscribe_square(&circle)?;
    let grid = pack_triangles(&circle, n)?;
    let census = census(&grid, &circle, footprint);
    let assignment = assign_goals(&census, &circle, n_agents)?;
    Ok(FormationPlan {
        circle,
        square,
        grid,
        census,
        assignment,
    })
}
