//! Acceptance suite. Prints one line per criterion and exits nonzero if
//! any criterion fails. Oracles here are written independently of the
//! library code they check.

use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use swarmsim_core::dynamics::{step, AgentState, DynamicsParams, RepulsionMode};
use swarmsim_core::engine::{run, EventKind, Phase};
use swarmsim_core::geometry::{
    max_grid_resolution, pack_triangles, quadrant_of, Centroid, Quadrant, TriangleTag,
};
use swarmsim_core::phase1::{assign_goals, SegmentCensus};
use swarmsim_core::phase2::{compute_offset, next_goal, AgentPlanner, PlanMessage};
use swarmsim_core::scenario::{Scenario, ScenarioError};
use swarmsim_core::sensing::{predict_obstacle_points, scan, SensorRig};
use swarmsim_core::trace::read_trace;
use swarmsim_core::{CircleRegion, Polygon, Vec2};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let took = start.elapsed();
    (
        took <= limit,
        format!(
            "{:.3} s of {:.3} s budget",
            took.as_secs_f64(),
            limit.as_secs_f64()
        ),
    )
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let bound = max_grid_resolution(8.5, 0.0575).unwrap();
    let took = start.elapsed();
    let expected = (8.5f64 / (3.0 * 0.0575)).floor() as usize;
    let text = std::fs::read_to_string(scenarios().join("open_field.scenario")).unwrap();
    let ok49 = Scenario::parse(&text).is_ok();
    let rejected50 = matches!(
        Scenario::parse(&text.replace("n = 49", "n = 50")),
        Err(ScenarioError::Invalid(_))
    );
    outcome(
        bound == 49 && expected == 49 && ok49 && rejected50 && took < Duration::from_millis(1),
        format!(
            "bound {bound}, n = 49 loads {ok49}, n = 50 rejected {rejected50}, {:?}",
            took
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let circle = CircleRegion::new(Vec2::new(-12.5, 40.25), 8.5).unwrap();
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    let mut inside = true;
    for n in [1usize, 2, 7, 49] {
        let grid = pack_triangles(&circle, n).unwrap();
        counts_ok &= grid.centroids.len() == 2 * n * n;
        let l = SQRT_2 * 8.5 / n as f64;
        let origin = circle.center - Vec2::new(8.5 / SQRT_2, 8.5 / SQRT_2);
        for c in &grid.centroids {
            let x0 = origin.x + (c.q2 - 1) as f64 * l;
            let y0 = origin.y + (c.q1 - 1) as f64 * l;
            let verts = match c.tag {
                TriangleTag::A => [(x0, y0), (x0 + l, y0), (x0, y0 + l)],
                TriangleTag::B => [(x0 + l, y0), (x0 + l, y0 + l), (x0, y0 + l)],
            };
            let mean = Vec2::new(
                verts.iter().map(|v| v.0).sum::<f64>() / 3.0,
                verts.iter().map(|v| v.1).sum::<f64>() / 3.0,
            );
            worst = worst.max(c.point.distance(mean));
            inside &= c.point.distance(circle.center) < 8.5;
        }
    }
    let (fast, t) = within(Duration::from_secs(1), start);
    outcome(
        counts_ok && inside && worst <= 1e-9 && fast,
        format!("counts 2n^2 {counts_ok}, max oracle gap {worst:.2e}, all inside {inside}, {t}"),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_hop = 0.0f64;
    let mut worst_rigid = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=12);
        let c0 = Vec2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let c1 = Vec2::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let goals: Vec<Vec2> = (0..n)
            .map(|_| c0 + Vec2::new(rng.gen_range(-8.5..8.5), rng.gen_range(-8.5..8.5)))
            .collect();
        let mut agents: Vec<AgentPlanner> =
            goals.iter().map(|g| AgentPlanner::new(c0, *g, 0)).collect();
        let msg = PlanMessage {
            new_center: c1,
            epoch: 1,
        };
        for a in agents.iter_mut() {
            a.receive(&msg);
        }
        let hop = (c1 - c0).norm();
        for (i, a) in agents.iter().enumerate() {
            worst_hop = worst_hop.max(((a.goal - goals[i]).norm() - hop).abs());
            for j in 0..n {
                let before = goals[j] - goals[i];
                let after = agents[j].goal - a.goal;
                worst_rigid = worst_rigid.max((after - before).norm());
            }
        }
    }
    let (fast, t) = within(Duration::from_secs(1), start);
    outcome(
        worst_hop <= 1e-12 && worst_rigid <= 1e-12 && fast,
        format!("max displacement gap {worst_hop:.2e}, max pairwise drift {worst_rigid:.2e}, {t}"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let center = Vec2::new(3.25, -7.5);
    let mut cases = vec![Vec2::ZERO];
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        cases.push(Vec2::new(2.0 * sx, 0.5 * sy));
        cases.push(Vec2::new(0.3 * sx, 6.0 * sy));
    }
    cases.extend([
        Vec2::new(4.0, 0.0),
        Vec2::new(0.0, 4.0),
        Vec2::new(-4.0, 0.0),
        Vec2::new(0.0, -4.0),
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        cases.push(Vec2::new(
            rng.gen_range(-20.0..20.0),
            rng.gen_range(-20.0..20.0),
        ));
    }
    let mut worst = 0.0f64;
    let mut quadrants = [false; 4];
    for d in &cases {
        let goal = center + *d;
        if let Ok(q) = quadrant_of(goal, center) {
            quadrants[q.slot()] = true;
        }
        let back = next_goal(
            compute_offset(goal, center),
            &PlanMessage {
                new_center: center,
                epoch: 1,
            },
        );
        worst = worst.max(back.distance(goal));
    }
    let (fast, t) = within(Duration::from_secs(1), start);
    let all_q = quadrants.iter().all(|q| *q);
    outcome(
        worst <= 1e-12 && all_q && fast,
        format!(
            "{} goals incl. r = 0, all four segments {all_q}, max error {worst:.2e}, {t}",
            cases.len()
        ),
    )
}

/// Greedy argmax-with-removal, written out longhand.
fn greedy(members: &[Centroid], center: Vec2, take: usize) -> Vec<Vec2> {
    let mut pool: Vec<Vec2> = members.iter().map(|c| c.point).collect();
    let mut out = Vec::new();
    while out.len() < take {
        let mut best = 0;
        for (i, p) in pool.iter().enumerate() {
            if p.distance(center) > pool[best].distance(center) {
                best = i;
            }
        }
        out.push(pool.remove(best));
    }
    out
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 600,
            failure_persistence: None,
            ..Config::default()
        },
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    );
    let point = (-8.0f64..8.0, -8.0f64..8.0)
        .prop_filter("off the axes", |(x, y)| *x != 0.0 && *y != 0.0)
        .prop_map(|(x, y)| Vec2::new(x, y));
    let strategy = (prop::collection::vec(point, 1..120), 1usize..20);
    let result = runner.run(&strategy, |(points, n_agents)| {
        let center = Vec2::ZERO;
        let mut members: [Vec<Centroid>; 4] = Default::default();
        for (i, p) in points.iter().enumerate() {
            let q = quadrant_of(*p, center).unwrap();
            members[q.slot()].push(Centroid {
                q1: 1,
                q2: i + 1,
                tag: TriangleTag::A,
                point: *p,
            });
        }
        let census = SegmentCensus::from_members(members);
        let mut order: Vec<Quadrant> = Quadrant::ALL.to_vec();
        order.sort_by_key(|q| std::cmp::Reverse(census.counts[q.slot()]));
        let (top, second) = (order[0], order[1]);
        let (need_top, need_second) = (n_agents.div_ceil(2), n_agents / 2);
        prop_assume!(
            census.counts[top.slot()] >= need_top && census.counts[second.slot()] >= need_second
        );
        let circle = CircleRegion::new(center, 8.5).unwrap();
        let a = assign_goals(&census, &circle, n_agents).unwrap();
        prop_assert_eq!(a.goals.len(), n_agents);
        for i in 0..n_agents {
            for j in i + 1..n_agents {
                prop_assert!(a.goals[i] != a.goals[j]);
            }
        }
        prop_assert_eq!(
            &a.goals[..need_top],
            &greedy(&census.members[top.slot()], center, need_top)[..]
        );
        prop_assert_eq!(
            &a.goals[need_top..],
            &greedy(&census.members[second.slot()], center, need_second)[..]
        );
        for w in a.goals[..need_top]
            .windows(2)
            .chain(a.goals[need_top..].windows(2))
        {
            prop_assert!(w[0].norm() >= w[1].norm());
        }
        Ok(())
    });
    let (fast, t) = within(Duration::from_secs(5), start);
    match result {
        Ok(()) => outcome(fast, format!("600 accepted cases, {t}")),
        Err(e) => outcome(false, format!("{e}")),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let sc = Scenario::load(scenarios().join("open_field.scenario")).unwrap();
    let table_i = sc.agent_count() == 10
        && sc.params.k_c == 5.0
        && sc.params.k_r == 2.5
        && sc.params.r_s == 0.0575
        && sc.r_c == 8.5
        && sc.n == 49
        && sc.rig.count() == 8;
    let trace = run(&sc);
    let (fast, t) = within(Duration::from_secs(10), start);
    let Some(load) = trace.load_tick else {
        return outcome(false, format!("no load event: {:?}", trace.error));
    };
    let circle = trace.rows[0].circle.unwrap();
    let farthest = sc
        .initial_positions
        .iter()
        .map(|p| p.distance(circle))
        .fold(0.0, f64::max);
    let errs: Vec<(f64, f64)> = trace
        .rows
        .iter()
        .filter(|r| r.phase == Phase::One)
        .map(|r| (r.time, r.formation_error))
        .collect();
    // earliest time after which the error never rises again
    let mut settle = 0.0;
    for w in errs.windows(2) {
        if w[1].1 > w[0].1 {
            settle = w[1].0;
        }
    }
    let reached = errs.iter().find(|(_, e)| *e < 0.05).map(|(t, _)| *t);
    let duration = load as f64 * sc.params.dt;
    let in_band = (5.0..=30.0).contains(&duration);
    let pass = table_i
        && farthest <= 20.0
        && settle <= 1.0
        && reached.is_some_and(|t| t <= 30.0)
        && in_band
        && fast;
    outcome(
        pass,
        format!(
            "Table I values {table_i}, farthest start {farthest:.2}, monotone after {settle:.2} s, \
             error < 0.05 at {} s, Phase-1 duration {duration:.2} s (band [5, 30] s: {}), {t}",
            reached.map_or("never".into(), |t| format!("{t:.2}")),
            if in_band { "inside" } else { "outside" },
        ),
    )
}

fn run_binary(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_swarmsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SWARMSIM_OUT")
        .output()
        .expect("binary runs")
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let file = scenarios().join("corridor.scenario");
    let out = run_binary(&["run", file.to_str().unwrap()], dir.path());
    let (fast, t) = within(Duration::from_secs(60), start);
    let code = out.status.code();
    let sc = Scenario::load(&file).unwrap();
    let data = match read_trace(&dir.path().join("trace.csv")) {
        Ok(d) => d,
        Err(e) => return outcome(false, format!("exit {code:?}, trace unreadable: {e}")),
    };
    let first_circle = data.rows[0].circle.unwrap();
    let span = first_circle.distance(sc.target);
    let carried: Vec<_> = data.rows.iter().filter(|r| r.phase != Phase::One).collect();
    let covered = !carried.is_empty() && carried.iter().all(|r| r.support == Some(true));
    let last = data.rows.last().unwrap();
    let final_gap = last.circle.map_or(f64::INFINITY, |c| c.distance(sc.target));
    let load = data.events_of(EventKind::Load).next().map(|e| e.tick);
    let done = data.events_of(EventKind::Done).next().map(|e| e.tick);
    let phase2 = match (load, done) {
        (Some(l), Some(d)) => (d - l) as f64 * sc.params.dt,
        _ => f64::NAN,
    };
    let pass = code == Some(0)
        && covered
        && final_gap <= sc.step
        && (50.0..=200.0).contains(&phase2)
        && (95.0..=105.0).contains(&span)
        && fast;
    outcome(
        pass,
        format!(
            "exit {code:?}, start-to-target {span:.1}, support at all {} Phase-2 ticks {covered}, \
             final center gap {final_gap:.2e}, Phase-2 time {phase2:.2} s (band [50, 200]), {t}",
            carried.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let params = DynamicsParams {
        k_c: 5.0,
        k_r: 2.5,
        r_s: 0.0575,
        dt: 0.01,
        repulsion: RepulsionMode::AsWritten,
    };
    let goal = Vec2::new(40.0, -15.0);
    let p0 = Vec2::new(-3.0, 22.0);
    let mut agents = vec![AgentState {
        goal,
        ..AgentState::new(1, p0)
    }];
    let mut worst = 0.0f64;
    for k in 1..=1000 {
        step(&mut agents, &params).unwrap();
        let closed = goal + (p0 - goal) * (1.0f64 - 0.05).powi(k);
        worst = worst.max(agents[0].position.distance(closed));
    }
    let mut one = vec![AgentState {
        goal: Vec2::ZERO,
        ..AgentState::new(1, Vec2::new(1.0, 0.0))
    }];
    step(&mut one, &params).unwrap();
    let exact = one[0].position == Vec2::new(0.95, 0.0);
    outcome(
        worst <= 1e-9 && exact,
        format!(
            "max gap to (1 - k_c dt)^k solution over 1000 ticks {worst:.2e}, (1,0) -> {}",
            one[0].position
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for name in ["smoke.scenario", "corridor.scenario", "open_field.scenario"] {
        let file = scenarios().join(name);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let args = [
            "run",
            file.to_str().unwrap(),
            "--seed",
            "42",
            "--plot",
            "all",
        ];
        let ra = run_binary(&args, a.path());
        let rb = run_binary(&args, b.path());
        let mut names: Vec<String> = std::fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        let same = ra.status.code() == rb.status.code()
            && names.len() == 7
            && names.iter().all(|n| {
                std::fs::read(a.path().join(n)).ok() == std::fs::read(b.path().join(n)).ok()
            });
        pass &= same;
        details.push(format!("{name}: {} files identical {same}", names.len()));
    }
    outcome(pass, details.join(", "))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rig = SensorRig::new(8, 10.0).unwrap();
    let mut worst = 0.0f64;
    let mut hits = 0usize;
    let mut count_mismatch = 0usize;
    for _ in 0..100 {
        let env: Vec<Polygon> = (0..3)
            .map(|k| {
                let c = Vec2::from_polar(
                    rng.gen_range(4.0..7.0),
                    k as f64 * 2.0 * PI / 3.0 + rng.gen_range(-0.4..0.4),
                );
                Polygon::regular(c, rng.gen_range(0.5..2.0), rng.gen_range(3..8)).unwrap()
            })
            .collect();
        let p = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let heading = rng.gen_range(-PI..PI);
        let theta = rng.gen_range(-PI..PI);
        let s = scan(p, heading, &rig, &env, 0).unwrap();
        let base = predict_obstacle_points(&s, p, heading, &rig, 1).unwrap();
        let env_r: Vec<Polygon> = env.iter().map(|o| o.rotate(theta)).collect();
        let pr = p.rotate(theta);
        let s_r = scan(pr, heading + theta, &rig, &env_r, 0).unwrap();
        let turned = predict_obstacle_points(&s_r, pr, heading + theta, &rig, 1).unwrap();
        if base.points.len() != turned.points.len() {
            count_mismatch += 1;
            continue;
        }
        for (a, b) in base.points.iter().zip(&turned.points) {
            // rotate by hand rather than through Vec2::rotate
            let (c, sn) = (theta.cos(), theta.sin());
            let expect = Vec2::new(a.x * c - a.y * sn, a.x * sn + a.y * c);
            worst = worst.max(expect.distance(*b));
            hits += 1;
        }
    }
    outcome(
        worst <= 1e-9 && count_mismatch == 0 && hits > 0,
        format!("100 cases, {hits} points compared, max error {worst:.2e}, reading-count mismatches {count_mismatch}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("packing bound 49 and n = 50 rejected at load", criterion_1),
        ("packing identities for n in {1, 2, 7, 49}", criterion_2),
        (
            "uniform displacement and rigidity of propagated goals",
            criterion_3,
        ),
        ("polar offset round trip", criterion_4),
        ("goal-assignment contract", criterion_5),
        ("Phase-1 convergence at Table I scale", criterion_6),
        ("end-to-end corridor transport", criterion_7),
        ("dynamics closed-form oracle", criterion_8),
        ("determinism of trace and plot files", criterion_9),
        ("sensing rotational equivariance", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let mark = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{mark}] {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
