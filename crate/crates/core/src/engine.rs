//! Tick loop: Phase 1 assembly, load event, master election, Phase 2
//! transport, arrival. Everything recorded lands in a [`SimTrace`].

use std::fmt;

use thiserror::Error;

use crate::dynamics::{self, AgentState, DynamicsError};
use crate::geometry::{CircleRegion, Vec2};
use crate::phase1::{
    elect_master, formation_converged, plan_formation, FootprintShape, ObjectFootprint, Phase1Error,
};
use crate::phase2::{plan_step, AgentPlanner, Broadcast, Delivery, PlanMessage, PlanOutcome};
use crate::scenario::Scenario;
use crate::sensing::{aggregate_swarm_cloud, predict_obstacle_points, scan, SensingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    One,
    Two,
    Done,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::One => "1",
            Phase::Two => "2",
            Phase::Done => "done",
        }
    }

    pub fn from_label(s: &str) -> Option<Phase> {
        match s {
            "1" => Some(Phase::One),
            "2" => Some(Phase::Two),
            "done" => Some(Phase::Done),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub tick: u64,
    pub time: f64,
    pub phase: Phase,
    pub positions: Vec<Vec2>,
    pub goals: Vec<Vec2>,
    pub circle: Option<Vec2>,
    pub formation_error: f64,
    pub distances: Vec<f64>,
    /// Only evaluated while the object is carried.
    pub support: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Obstacle,
    Target,
    Footprint,
    Grid,
    Phase1Plan,
    Assign,
    Load,
    Election,
    Plan,
    Arrived,
    Done,
    Warning,
    Discard,
    Error,
}

impl EventKind {
    pub const ALL: [EventKind; 14] = [
        EventKind::Obstacle,
        EventKind::Target,
        EventKind::Footprint,
        EventKind::Grid,
        EventKind::Phase1Plan,
        EventKind::Assign,
        EventKind::Load,
        EventKind::Election,
        EventKind::Plan,
        EventKind::Arrived,
        EventKind::Done,
        EventKind::Warning,
        EventKind::Discard,
        EventKind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Obstacle => "obstacle",
            EventKind::Target => "target",
            EventKind::Footprint => "footprint",
            EventKind::Grid => "grid",
            EventKind::Phase1Plan => "phase1_plan",
            EventKind::Assign => "assign",
            EventKind::Load => "load",
            EventKind::Election => "election",
            EventKind::Plan => "plan",
            EventKind::Arrived => "arrived",
            EventKind::Done => "done",
            EventKind::Warning => "warning",
            EventKind::Discard => "discard",
            EventKind::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// `payload` is a space-separated list of `key=value` pairs; point lists
/// are written `x:y;x:y;...`. It never contains a comma.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub payload: String,
}

impl Event {
    /// Value of `key` in the payload.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.payload
            .split(' ')
            .find_map(|kv| kv.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
    }

    pub fn field_f64(&self, key: &str) -> Option<f64> {
        self.field(key)?.parse().ok()
    }

    pub fn points(&self, key: &str) -> Vec<Vec2> {
        self.field(key).map(parse_points).unwrap_or_default()
    }
}

pub fn format_points(points: &[Vec2]) -> String {
    points
        .iter()
        .map(|p| format!("{}:{}", p.x, p.y))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn parse_points(s: &str) -> Vec<Vec2> {
    s.split(';')
        .filter_map(|xy| {
            let (x, y) = xy.split_once(':')?;
            Some(Vec2::new(x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Phase1(#[from] Phase1Error),
    #[error("tick {tick}: {source}")]
    Dynamics {
        tick: u64,
        #[source]
        source: DynamicsError,
    },
    #[error("tick {tick}: {source}")]
    Sensing {
        tick: u64,
        #[source]
        source: SensingError,
    },
    #[error("tick limit {limit} reached before arrival")]
    TickLimit { limit: u64 },
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub n_agents: usize,
    pub dt: f64,
    pub epsilon: f64,
    pub rows: Vec<TraceRow>,
    pub events: Vec<Event>,
    pub error: Option<EngineError>,
    pub load_tick: Option<u64>,
    pub done_tick: Option<u64>,
    pub master: Option<usize>,
    /// Epoch of the last broadcast plan.
    pub plans: u64,
    pub peak_speed: f64,
}

impl SimTrace {
    pub fn completed(&self) -> bool {
        self.error.is_none() && self.done_tick.is_some()
    }

    pub fn phase1_duration(&self) -> Option<f64> {
        self.load_tick.map(|t| t as f64 * self.dt)
    }

    pub fn phase2_duration(&self) -> Option<f64> {
        Some((self.done_tick? - self.load_tick?) as f64 * self.dt)
    }

    pub fn last_tick(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.tick)
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn summary(&self) -> Summary {
        let last = self.rows.last();
        Summary {
            total_ticks: self.last_tick(),
            phase1_seconds: self.phase1_duration(),
            phase2_seconds: self.phase2_duration(),
            final_formation_error: last.map(|r| r.formation_error),
            distances: last.map(|r| r.distances.clone()).unwrap_or_default(),
            master: self.master,
            plans: self.plans,
            outcome: match &self.error {
                Some(e) => format!("error: {e}"),
                None if self.completed() => "arrived".into(),
                None => "incomplete".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub total_ticks: u64,
    pub phase1_seconds: Option<f64>,
    pub phase2_seconds: Option<f64>,
    pub final_formation_error: Option<f64>,
    pub distances: Vec<f64>,
    pub master: Option<usize>,
    pub plans: u64,
    pub outcome: String,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = |v: Option<f64>| v.map_or("-".to_string(), |s| format!("{s:.2} s"));
        writeln!(f, "outcome: {}", self.outcome)?;
        writeln!(f, "total ticks: {}", self.total_ticks)?;
        writeln!(f, "phase 1 duration: {}", secs(self.phase1_seconds))?;
        writeln!(f, "phase 2 duration: {}", secs(self.phase2_seconds))?;
        match self.final_formation_error {
            Some(e) => writeln!(f, "final formation error: {e:.6}")?,
            None => writeln!(f, "final formation error: -")?,
        }
        match self.master {
            Some(m) => writeln!(f, "master agent: {m}")?,
            None => writeln!(f, "master agent: -")?,
        }
        writeln!(f, "plans broadcast: {}", self.plans)?;
        for (i, d) in self.distances.iter().enumerate() {
            writeln!(f, "agent {} distance: {d:.4}", i + 1)?;
        }
        Ok(())
    }
}

/// Mean distance of agents to their goals.
pub fn formation_error(agents: &[AgentState], goals: &[Vec2]) -> f64 {
    if agents.is_empty() {
        return 0.0;
    }
    let total: f64 = agents
        .iter()
        .zip(goals)
        .map(|(a, g)| a.position.distance(*g))
        .sum();
    total / agents.len() as f64
}

/// True iff every agent stands under the footprint placed at `object_center`.
pub fn support_coverage(
    agents: &[AgentState],
    footprint: &ObjectFootprint,
    object_center: Vec2,
) -> bool {
    agents
        .iter()
        .all(|a| footprint.contains_at(object_center, a.position))
}

/// Where the carried object sits: each agent holds it at its own
/// goal-minus-center offset, so the object is the mean of
/// `position - (goal - center)` over the swarm.
pub fn object_center(agents: &[AgentState], planners: &[AgentPlanner]) -> Vec2 {
    let implied: Vec<Vec2> = agents
        .iter()
        .zip(planners)
        .map(|(a, p)| a.position - (p.goal - p.center))
        .collect();
    Vec2::mean(&implied).unwrap_or(Vec2::ZERO)
}

struct Run<'a> {
    sc: &'a Scenario,
    agents: Vec<AgentState>,
    /// Obstacle points known to the planner.
    known: Vec<Vec2>,
    trace: SimTrace,
}

impl Run<'_> {
    fn event(&mut self, tick: u64, kind: EventKind, payload: String) {
        self.trace.events.push(Event {
            tick,
            kind,
            payload,
        });
    }

    fn goals(&self) -> Vec<Vec2> {
        self.agents.iter().map(|a| a.goal).collect()
    }

    fn record(&mut self, tick: u64, phase: Phase, circle: Vec2, support: Option<bool>) {
        let goals = self.goals();
        self.trace.rows.push(TraceRow {
            tick,
            time: tick as f64 * self.sc.params.dt,
            phase,
            positions: self.agents.iter().map(|a| a.position).collect(),
            formation_error: formation_error(&self.agents, &goals),
            goals,
            circle: Some(circle),
            distances: self.agents.iter().map(|a| a.distance_traveled).collect(),
            support,
        });
    }

    fn sense(&self, tick: u64) -> Result<Vec<Vec2>, EngineError> {
        let clouds = self
            .agents
            .iter()
            .map(|a| {
                let s = scan(
                    a.position,
                    a.heading,
                    &self.sc.rig,
                    &self.sc.obstacles,
                    tick,
                )?;
                predict_obstacle_points(&s, a.position, a.heading, &self.sc.rig, a.index)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| EngineError::Sensing { tick, source })?;
        Ok(aggregate_swarm_cloud(&clouds))
    }

    /// Folds a fresh scan into the planner's knowledge and returns the
    /// points that can reach a circle planned from `anchor`.
    fn planning_cloud(&mut self, scanned: Vec<Vec2>, anchor: Vec2) -> Vec<Vec2> {
        if self.sc.cloud_memory {
            self.known.extend(scanned);
        } else {
            self.known = scanned;
        }
        let reach = self.sc.r_c + self.sc.fit.clearance + self.sc.step + 1e-6;
        self.known
            .iter()
            .copied()
            .filter(|p| p.distance(anchor) <= reach)
            .collect()
    }

    fn step(&mut self, tick: u64) -> Result<(), EngineError> {
        let report = dynamics::step(&mut self.agents, &self.sc.params)
            .map_err(|source| EngineError::Dynamics { tick, source })?;
        for (i, j) in report.coincident {
            self.event(
                tick,
                EventKind::Warning,
                format!("coincident agents={i}:{j}"),
            );
        }
        self.trace.peak_speed = self.trace.peak_speed.max(report.peak_speed);
        Ok(())
    }

    fn fail(&mut self, tick: u64, err: EngineError) {
        self.event(
            tick,
            EventKind::Error,
            format!("message={}", err.to_string().replace([',', ' '], "_")),
        );
        self.trace.error = Some(err);
    }

    fn header_events(&mut self) {
        for (i, o) in self.sc.obstacles.iter().enumerate() {
            self.event(
                0,
                EventKind::Obstacle,
                format!("id={i} pts={}", format_points(o.vertices())),
            );
        }
        let t = self.sc.target;
        self.event(0, EventKind::Target, format!("x={} y={}", t.x, t.y));
        let payload = match &self.sc.footprint.shape {
            FootprintShape::Polygon(p) => format!("pts={}", format_points(p.vertices())),
            FootprintShape::Disc { radius } => format!("radius={radius}"),
        };
        self.event(0, EventKind::Footprint, payload);
    }

    fn phase1(&mut self) -> Result<CircleRegion, EngineError> {
        self.header_events();
        let scanned = self.sense(0)?;
        let positions: Vec<Vec2> = self.agents.iter().map(|a| a.position).collect();
        let centroid = Vec2::mean(&positions).ok_or(Phase1Error::EmptySwarm)?;
        let cloud = self.planning_cloud(scanned, centroid);
        let plan = plan_formation(
            &cloud,
            centroid,
            self.sc.target,
            self.sc.r_c,
            self.sc.step,
            self.sc.n,
            &self.sc.footprint,
            self.agents.len(),
            &self.sc.fit,
        )?;
        let c = plan.circle;
        self.event(
            0,
            EventKind::Phase1Plan,
            format!(
                "epoch=0 x={} y={} r={} cloud={}",
                c.center.x,
                c.center.y,
                c.radius,
                cloud.len()
            ),
        );
        let counts = plan.census.counts;
        self.event(
            0,
            EventKind::Grid,
            format!(
                "n={} sub_side={} centroids={} S1={} S2={} S3={} S4={}",
                plan.grid.n,
                plan.grid.sub_side,
                plan.grid.centroids.len(),
                counts[0],
                counts[1],
                counts[2],
                counts[3]
            ),
        );
        let a = &plan.assignment;
        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.goal = a.goals[i];
        }
        for i in 0..a.goals.len() {
            let payload = format!(
                "agent={} segment={} x={} y={} r={} alpha={}",
                i + 1,
                a.source_segments[i],
                a.goals[i].x,
                a.goals[i].y,
                a.polar_offsets[i].r,
                a.polar_offsets[i].alpha
            );
            self.event(0, EventKind::Assign, payload);
        }
        Ok(c)
    }

    fn execute(&mut self) -> Result<(), EngineError> {
        let sc = self.sc;
        let mut circle = self.phase1()?;
        let mut phase = Phase::One;
        let mut planners: Vec<AgentPlanner> = Vec::new();
        let mut bus = Broadcast::new(sc.message_delay);
        let mut epoch = 0u64;
        let mut arrived = false;
        let mut load_tick = 0u64;

        self.record(0, Phase::One, circle.center, None);
        let mut tick = 0u64;
        if formation_converged(&self.agents, &self.goals(), sc.epsilon) {
            planners = self.load(0, &circle);
            load_tick = 0;
            phase = Phase::Two;
        }

        loop {
            tick += 1;
            if tick > sc.max_ticks {
                return Err(EngineError::TickLimit {
                    limit: sc.max_ticks,
                });
            }
            if phase == Phase::Two {
                if !arrived && (tick - load_tick - 1).is_multiple_of(sc.cadence) {
                    let scanned = self.sense(tick)?;
                    let cloud = self.planning_cloud(scanned, circle.center);
                    match plan_step(&cloud, &circle, sc.target, sc.step, epoch, &sc.fit)? {
                        PlanOutcome::Plan(msg) => {
                            circle.center = msg.new_center;
                            epoch = msg.epoch;
                            bus.send(msg, tick);
                            self.plan_event(tick, &msg, cloud.len());
                        }
                        PlanOutcome::Arrived => {
                            arrived = true;
                            if circle.center != sc.target {
                                epoch += 1;
                                let msg = PlanMessage {
                                    new_center: sc.target,
                                    epoch,
                                };
                                circle.center = sc.target;
                                bus.send(msg, tick);
                                self.plan_event(tick, &msg, cloud.len());
                            }
                            self.event(tick, EventKind::Arrived, format!("epoch={epoch}"));
                        }
                    }
                }
                for msg in bus.deliver(tick) {
                    for (i, p) in planners.iter_mut().enumerate() {
                        if p.receive(&msg) == Delivery::Stale {
                            let payload = format!("agent={} epoch={}", i + 1, msg.epoch);
                            self.trace.events.push(Event {
                                tick,
                                kind: EventKind::Discard,
                                payload,
                            });
                        }
                    }
                }
                for (a, p) in self.agents.iter_mut().zip(&planners) {
                    a.goal = p.goal;
                }
            }

            self.step(tick)?;
            let converged = formation_converged(&self.agents, &self.goals(), sc.epsilon);

            match phase {
                Phase::One => {
                    self.record(tick, Phase::One, circle.center, None);
                    if converged {
                        planners = self.load(tick, &circle);
                        load_tick = tick;
                        phase = Phase::Two;
                    }
                }
                _ => {
                    let settled = arrived
                        && bus.is_idle()
                        && planners.iter().all(|p| p.last_epoch == epoch)
                        && converged;
                    let obj = object_center(&self.agents, &planners);
                    let covered = support_coverage(&self.agents, &sc.footprint, obj);
                    let label = if settled { Phase::Done } else { Phase::Two };
                    self.record(tick, label, circle.center, Some(covered));
                    if settled {
                        self.trace.done_tick = Some(tick);
                        self.event(
                            tick,
                            EventKind::Done,
                            format!(
                                "x={} y={} object_x={} object_y={}",
                                circle.center.x, circle.center.y, obj.x, obj.y
                            ),
                        );
                        return Ok(());
                    }
                }
            }
        }
    }

    fn plan_event(&mut self, tick: u64, msg: &PlanMessage, cloud: usize) {
        let payload = format!(
            "epoch={} x={} y={} r={} cloud={cloud}",
            msg.epoch, msg.new_center.x, msg.new_center.y, self.sc.r_c
        );
        self.event(tick, EventKind::Plan, payload);
        self.trace.plans = msg.epoch;
    }

    fn load(&mut self, tick: u64, circle: &CircleRegion) -> Vec<AgentPlanner> {
        let master = elect_master(self.agents.len(), self.sc.seed);
        self.trace.load_tick = Some(tick);
        self.trace.master = Some(master);
        let err = self.trace.rows.last().map_or(0.0, |r| r.formation_error);
        self.event(
            tick,
            EventKind::Load,
            format!(
                "x={} y={} formation_error={err}",
                circle.center.x, circle.center.y
            ),
        );
        self.event(
            tick,
            EventKind::Election,
            format!("master={master} seed={}", self.sc.seed),
        );
        self.agents
            .iter()
            .map(|a| AgentPlanner::new(circle.center, a.goal, 0))
            .collect()
    }
}

/// Runs `scenario` to arrival or to the first error. On error the trace
/// holds every row recorded so far plus an `error` event.
pub fn run(scenario: &Scenario) -> SimTrace {
    let agents = scenario
        .initial_positions
        .iter()
        .enumerate()
        .map(|(i, p)| AgentState::new(i + 1, *p))
        .collect();
    let mut r = Run {
        sc: scenario,
        agents,
        known: Vec::new(),
        trace: SimTrace {
            n_agents: scenario.agent_count(),
            dt: scenario.params.dt,
            epsilon: scenario.epsilon,
            rows: Vec::new(),
            events: Vec::new(),
            error: None,
            load_tick: None,
            done_tick: None,
            master: None,
            plans: 0,
            peak_speed: 0.0,
        },
    };
    if let Err(e) = r.execute() {
        let tick = r.trace.last_tick() + u64::from(!r.trace.rows.is_empty());
        r.fail(tick, e);
    }
    r.trace
}
