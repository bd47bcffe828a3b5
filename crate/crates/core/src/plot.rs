//! Static SVG renderings of a trace. Output is a pure function of the trace:
//! fixed canvas, fixed element order, fixed number formatting.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::engine::{EventKind, TraceRow};
use crate::geometry::Vec2;
use crate::trace::TraceData;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 60.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("trace has no rows")]
    EmptyTrace,
    #[error("unknown plot {0:?}; expected trajectories, formation-error, distance or regions")]
    UnknownPlot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trajectories,
    FormationError,
    Distance,
    Regions,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::Trajectories,
        PlotKind::FormationError,
        PlotKind::Distance,
        PlotKind::Regions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Trajectories => "trajectories",
            PlotKind::FormationError => "formation-error",
            PlotKind::Distance => "distance",
            PlotKind::Regions => "regions",
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            PlotKind::Trajectories => "trajectories.svg",
            PlotKind::FormationError => "formation_error.svg",
            PlotKind::Distance => "distance.svg",
            PlotKind::Regions => "regions.svg",
        }
    }

    /// Parses a comma-separated list; `all` selects every plot. Order and
    /// duplicates are normalised.
    pub fn parse_list(list: &str) -> Result<Vec<PlotKind>, PlotError> {
        let mut out = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            if item == "all" {
                return Ok(PlotKind::ALL.to_vec());
            }
            out.push(item.parse()?);
        }
        Ok(PlotKind::ALL
            .into_iter()
            .filter(|k| out.contains(k))
            .collect())
    }
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PlotError::UnknownPlot(s.to_string()))
    }
}

pub fn render(kind: PlotKind, data: &TraceData) -> Result<String, PlotError> {
    if data.rows.is_empty() {
        return Err(PlotError::EmptyTrace);
    }
    Ok(match kind {
        PlotKind::Trajectories => map_plot(data, true),
        PlotKind::Regions => map_plot(data, false),
        PlotKind::FormationError => series_plot(
            "Formation error",
            "formation error",
            &[data
                .rows
                .iter()
                .map(|r| (r.time, r.formation_error))
                .collect()],
        ),
        PlotKind::Distance => {
            let series: Vec<Vec<(f64, f64)>> = (0..data.n_agents)
                .map(|i| data.rows.iter().map(|r| (r.time, r.distances[i])).collect())
                .collect();
            series_plot("Distance traveled", "distance", &series)
        }
    })
}

/// Maps data bounds into the drawing area, y up.
struct Frame {
    min: Vec2,
    scale_x: f64,
    scale_y: f64,
}

impl Frame {
    fn new(min: Vec2, max: Vec2, equal: bool) -> Frame {
        let span = |lo: f64, hi: f64| if hi - lo > 1e-12 { hi - lo } else { 1.0 };
        let (w, h) = (span(min.x, max.x), span(min.y, max.y));
        let (aw, ah) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
        let (mut sx, mut sy) = (aw / w, ah / h);
        if equal {
            sx = sx.min(sy);
            sy = sx;
        }
        Frame {
            min,
            scale_x: sx,
            scale_y: sy,
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale_x,
            HEIGHT - MARGIN - (p.y - self.min.y) * self.scale_y,
        )
    }
}

fn bounds(points: impl IntoIterator<Item = Vec2>) -> (Vec2, Vec2) {
    let mut min = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
        max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
    }
    if !min.is_finite() {
        return (Vec2::ZERO, Vec2::new(1.0, 1.0));
    }
    (min, max)
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        out,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
        WIDTH / 2.0
    );
}

fn points_attr(frame: &Frame, pts: impl IntoIterator<Item = Vec2>) -> (String, usize) {
    let mut s = String::new();
    let mut last = String::new();
    let mut count = 0;
    for p in pts {
        let (x, y) = frame.map(p);
        let xy = format!("{x:.2},{y:.2}");
        if xy != last {
            if count > 0 {
                s.push(' ');
            }
            s.push_str(&xy);
            count += 1;
            last = xy;
        }
    }
    (s, count)
}

fn polyline(out: &mut String, frame: &Frame, pts: &[Vec2], class: &str, color: &str, extra: &str) {
    let (attr, count) = points_attr(frame, pts.iter().copied());
    if count <= 1 {
        let (x, y) = frame.map(pts[0]);
        let _ = writeln!(
            out,
            r#"<circle class="marker" {extra}cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
        );
    } else {
        let _ = writeln!(
            out,
            r#"<polyline class="{class}" {extra}points="{attr}" fill="none" stroke="{color}" stroke-width="1.2"/>"#
        );
    }
}

fn map_plot(data: &TraceData, trajectories: bool) -> String {
    let obstacles: Vec<Vec<Vec2>> = data
        .events_of(EventKind::Obstacle)
        .map(|e| e.points("pts"))
        .collect();
    let target = data
        .events_of(EventKind::Target)
        .find_map(|e| Some(Vec2::new(e.field_f64("x")?, e.field_f64("y")?)));
    let regions: Vec<(Vec2, f64)> = data
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Phase1Plan | EventKind::Plan))
        .filter_map(|e| {
            Some((
                Vec2::new(e.field_f64("x")?, e.field_f64("y")?),
                e.field_f64("r")?,
            ))
        })
        .collect();

    let mut extent: Vec<Vec2> = data
        .rows
        .iter()
        .flat_map(|r| r.positions.iter().copied())
        .collect();
    extent.extend(obstacles.iter().flatten());
    extent.extend(target);
    for (c, r) in &regions {
        extent.push(*c - Vec2::new(*r, *r));
        extent.push(*c + Vec2::new(*r, *r));
    }
    let (min, max) = bounds(extent);
    let pad = Vec2::new(1.0, 1.0);
    let frame = Frame::new(min - pad, max + pad, true);

    let mut out = String::new();
    open(
        &mut out,
        if trajectories {
            "Agent trajectories"
        } else {
            "Planned regions"
        },
    );
    for (i, poly) in obstacles.iter().enumerate() {
        let (attr, _) = points_attr(&frame, poly.iter().copied());
        let _ = writeln!(
            out,
            r##"<polygon class="obstacle" data-id="{i}" points="{attr}" fill="#9a9a9a" stroke="#444444"/>"##
        );
    }
    let stride = if trajectories {
        1
    } else {
        1.max(regions.len() / 40)
    };
    for (k, (c, r)) in regions.iter().enumerate() {
        if k % stride != 0 && k + 1 != regions.len() {
            continue;
        }
        let (x, y) = frame.map(*c);
        let _ = writeln!(
            out,
            r##"<circle class="region" data-epoch="{k}" cx="{x:.2}" cy="{y:.2}" r="{:.2}" fill="none" stroke="#b0c4de" stroke-width="0.6"/>"##,
            r * frame.scale_x
        );
    }
    if trajectories {
        for i in 0..data.n_agents {
            let pts: Vec<Vec2> = data.rows.iter().map(|r| r.positions[i]).collect();
            let extra = format!(r#"data-agent="{}" "#, i + 1);
            polyline(
                &mut out,
                &frame,
                &pts,
                "trajectory",
                PALETTE[i % PALETTE.len()],
                &extra,
            );
        }
    } else {
        let centers: Vec<Vec2> = data.rows.iter().filter_map(|r| r.circle).collect();
        if !centers.is_empty() {
            polyline(&mut out, &frame, &centers, "center-path", "#000000", "");
        }
        let last: &TraceRow = data.rows.last().expect("non-empty");
        for (i, p) in last.positions.iter().enumerate() {
            let (x, y) = frame.map(*p);
            let _ = writeln!(
                out,
                r#"<circle class="agent" data-agent="{}" cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#,
                i + 1,
                PALETTE[i % PALETTE.len()]
            );
        }
    }
    if let Some(t) = target {
        let (x, y) = frame.map(t);
        let _ = writeln!(
            out,
            r##"<path class="target" d="M {:.2} {:.2} L {:.2} {:.2} M {:.2} {:.2} L {:.2} {:.2}" stroke="#d62728" stroke-width="2"/>"##,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0
        );
    }
    out.push_str("</svg>\n");
    out
}

fn series_plot(title: &str, y_label: &str, series: &[Vec<(f64, f64)>]) -> String {
    let all: Vec<Vec2> = series
        .iter()
        .flatten()
        .map(|(t, v)| Vec2::new(*t, *v))
        .collect();
    let (mut min, max) = bounds(all);
    min.y = min.y.min(0.0);
    let frame = Frame::new(min, max, false);

    let mut out = String::new();
    open(&mut out, title);
    let (x0, y0) = frame.map(min);
    let (x1, y1) = frame.map(max);
    let _ = writeln!(
        out,
        r##"<path class="axes" d="M {x0:.2} {y1:.2} L {x0:.2} {y0:.2} L {x1:.2} {y0:.2}" fill="none" stroke="#000000"/>"##
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let t = min.x + f * (max.x - min.x);
        let v = min.y + f * (max.y - min.y);
        let (tx, _) = frame.map(Vec2::new(t, min.y));
        let (_, vy) = frame.map(Vec2::new(min.x, v));
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{tx:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:.2}</text>"#,
            y0 + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text class="tick" x="{:.2}" y="{vy:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            x0 - 6.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">simulated time (s)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" transform="rotate(-90 15 {:.2})" text-anchor="middle" font-family="sans-serif" font-size="12">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<Vec2> = s.iter().map(|(t, v)| Vec2::new(*t, *v)).collect();
        let extra = format!(r#"data-series="{}" "#, i + 1);
        polyline(
            &mut out,
            &frame,
            &pts,
            "series",
            PALETTE[i % PALETTE.len()],
            &extra,
        );
    }
    if let Some(&(t, v)) = series.first().and_then(|s| s.last()) {
        let _ = writeln!(out, r#"<desc class="final">t={t} value={v}</desc>"#);
    }
    out.push_str("</svg>\n");
    out
}
