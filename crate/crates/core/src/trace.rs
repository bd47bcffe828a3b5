//! Text serialisation of a run: `trace.csv` (one row per tick),
//! `trace.events` (`tick,kind,payload`) and `summary.txt`. Floats are written
//! in shortest round-trip form so a trace reads back bit-exact.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{Event, EventKind, Phase, SimTrace, TraceRow};
use crate::geometry::Vec2;

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "trace.events";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
}

pub fn header(n_agents: usize) -> String {
    let mut cols = vec!["tick".to_string(), "sim_time".into(), "phase".into()];
    for i in 1..=n_agents {
        cols.push(format!("p{i}_x"));
        cols.push(format!("p{i}_y"));
    }
    for i in 1..=n_agents {
        cols.push(format!("g{i}_x"));
        cols.push(format!("g{i}_y"));
    }
    cols.extend([
        "circle_x".into(),
        "circle_y".into(),
        "formation_error".into(),
    ]);
    cols.extend((1..=n_agents).map(|i| format!("d{i}")));
    cols.push("support_coverage".into());
    cols.join(",")
}

fn row_line(row: &TraceRow) -> String {
    let mut f: Vec<String> = vec![
        row.tick.to_string(),
        row.time.to_string(),
        row.phase.to_string(),
    ];
    for p in row.positions.iter().chain(&row.goals) {
        f.push(p.x.to_string());
        f.push(p.y.to_string());
    }
    match row.circle {
        Some(c) => {
            f.push(c.x.to_string());
            f.push(c.y.to_string());
        }
        None => f.extend([String::new(), String::new()]),
    }
    f.push(row.formation_error.to_string());
    f.extend(row.distances.iter().map(f64::to_string));
    f.push(match row.support {
        Some(true) => "1".into(),
        Some(false) => "0".into(),
        None => String::new(),
    });
    f.join(",")
}

pub fn write_rows(trace: &SimTrace, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", header(trace.n_agents))?;
    for row in &trace.rows {
        writeln!(w, "{}", row_line(row))?;
    }
    Ok(())
}

pub fn write_events(events: &[Event], mut w: impl Write) -> io::Result<()> {
    for e in events {
        writeln!(w, "{},{},{}", e.tick, e.kind.as_str(), e.payload)?;
    }
    Ok(())
}

/// Paths of the files written by [`write_run`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub trace: PathBuf,
    pub events: PathBuf,
    pub summary: PathBuf,
}

pub fn write_run(trace: &SimTrace, dir: &Path) -> Result<RunFiles, TraceError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| TraceError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = RunFiles {
        trace: dir.join(TRACE_FILE),
        events: dir.join(EVENTS_FILE),
        summary: dir.join(SUMMARY_FILE),
    };
    let mut buf = Vec::new();
    write_rows(trace, &mut buf).map_err(io_err(&files.trace))?;
    fs::write(&files.trace, &buf).map_err(io_err(&files.trace))?;
    buf.clear();
    write_events(&trace.events, &mut buf).map_err(io_err(&files.events))?;
    fs::write(&files.events, &buf).map_err(io_err(&files.events))?;
    fs::write(&files.summary, trace.summary().to_string()).map_err(io_err(&files.summary))?;
    Ok(files)
}

/// A trace read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceData {
    pub n_agents: usize,
    pub rows: Vec<TraceRow>,
    pub events: Vec<Event>,
}

impl TraceData {
    pub fn from_trace(trace: &SimTrace) -> TraceData {
        TraceData {
            n_agents: trace.n_agents,
            rows: trace.rows.clone(),
            events: trace.events.clone(),
        }
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

fn agent_count_from_header(h: &str) -> Option<usize> {
    let cols = h.split(',').count();
    // 3 leading, 4 per agent (p, g), 3 circle/error, 1 per agent (d), 1 support
    let rest = cols.checked_sub(7)?;
    (rest % 5 == 0).then_some(rest / 5)
}

fn parse_row(line: &str, n: usize) -> Result<TraceRow, String> {
    let f: Vec<&str> = line.split(',').collect();
    let expected = 7 + 5 * n;
    if f.len() != expected {
        return Err(format!("expected {expected} fields, found {}", f.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        f[i].parse::<f64>()
            .map_err(|_| format!("bad number {:?} in column {}", f[i], i + 1))
    };
    let vec_at = |i: usize| -> Result<Vec2, String> { Ok(Vec2::new(num(i)?, num(i + 1)?)) };
    let tick = f[0]
        .parse::<u64>()
        .map_err(|_| format!("bad tick {:?}", f[0]))?;
    let phase = Phase::from_label(f[2]).ok_or_else(|| format!("bad phase {:?}", f[2]))?;
    let positions = (0..n)
        .map(|i| vec_at(3 + 2 * i))
        .collect::<Result<Vec<_>, _>>()?;
    let goals = (0..n)
        .map(|i| vec_at(3 + 2 * n + 2 * i))
        .collect::<Result<Vec<_>, _>>()?;
    let c = 3 + 4 * n;
    let circle = if f[c].is_empty() {
        None
    } else {
        Some(vec_at(c)?)
    };
    let distances = (0..n)
        .map(|i| num(c + 3 + i))
        .collect::<Result<Vec<_>, _>>()?;
    let support = match f[expected - 1] {
        "" => None,
        "1" => Some(true),
        "0" => Some(false),
        other => return Err(format!("bad support flag {other:?}")),
    };
    Ok(TraceRow {
        tick,
        time: num(1)?,
        phase,
        positions,
        goals,
        circle,
        formation_error: num(c + 2)?,
        distances,
        support,
    })
}

pub fn read_rows(r: impl BufRead, path: &str) -> Result<(usize, Vec<TraceRow>), TraceError> {
    let malformed = |line: usize, message: String| TraceError::Malformed {
        path: path.into(),
        line,
        message,
    };
    let mut lines = r.lines();
    let head = match lines.next() {
        Some(h) => h.map_err(|source| TraceError::Io {
            path: path.into(),
            source,
        })?,
        None => return Ok((0, Vec::new())),
    };
    let n = agent_count_from_header(&head)
        .filter(|&n| header(n) == head)
        .ok_or_else(|| malformed(1, "unrecognised header".into()))?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|source| TraceError::Io {
            path: path.into(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        rows.push(parse_row(&line, n).map_err(|m| malformed(i + 2, m))?);
    }
    Ok((n, rows))
}

pub fn read_events(r: impl BufRead, path: &str) -> Result<Vec<Event>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|source| TraceError::Io {
            path: path.into(),
            source,
        })?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| TraceError::Malformed {
            path: path.into(),
            line: i + 1,
            message: m.into(),
        };
        let mut parts = line.splitn(3, ',');
        let tick = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad tick"))?;
        let kind = parts
            .next()
            .and_then(EventKind::parse)
            .ok_or_else(|| bad("unknown event kind"))?;
        let payload = parts.next().unwrap_or("").to_string();
        out.push(Event {
            tick,
            kind,
            payload,
        });
    }
    Ok(out)
}

/// Reads `trace.csv` and, if present next to it, `trace.events`.
pub fn read_trace(path: &Path) -> Result<TraceData, TraceError> {
    let open = |p: &Path| {
        fs::File::open(p)
            .map(BufReader::new)
            .map_err(|source| TraceError::Io {
                path: p.display().to_string(),
                source,
            })
    };
    let (n_agents, rows) = read_rows(open(path)?, &path.display().to_string())?;
    let events_path = path.with_extension("events");
    let events = if events_path.exists() {
        read_events(open(&events_path)?, &events_path.display().to_string())?
    } else {
        Vec::new()
    };
    Ok(TraceData {
        n_agents,
        rows,
        events,
    })
}
