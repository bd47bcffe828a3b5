//! Planar geometry kernel: vectors, circular regions, the inscribed square,
//! the triangle-packing grid and the polygon / quadrant predicates used by
//! the formation planner.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used for geometric equality tests.
pub const GEOM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid circular region (center {center}, radius {radius})")]
    InvalidRegion { center: Vec2, radius: f64 },
    #[error("grid resolution must be at least 1")]
    InvalidGridSize,
    #[error(
        "region too small: r_c = {r_c} admits no packing with r_s = {r_s} (need r_c >= 3 r_s)"
    )]
    RegionTooSmall { r_c: f64, r_s: f64 },
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("point coincides with the segment center")]
    AmbiguousSegment,
}

/// A point or displacement in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians, scaled by `len`.
    pub fn from_polar(len: f64, angle: f64) -> Self {
        Vec2::new(len * angle.cos(), len * angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Full-quadrant angle in `[-pi, pi]`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rotates counterclockwise by `theta` about the origin.
    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Arithmetic mean of a non-empty set of points.
    pub fn mean(points: &[Vec2]) -> Option<Vec2> {
        if points.is_empty() {
            return None;
        }
        let sum = points.iter().fold(Vec2::ZERO, |acc, p| acc + *p);
        Some(sum * (1.0 / points.len() as f64))
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2::new(x, y)
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Virtual circular region the formation is planned in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleRegion {
    pub center: Vec2,
    pub radius: f64,
}

impl CircleRegion {
    pub fn new(center: Vec2, radius: f64) -> Result<Self, GeometryError> {
        let circle = CircleRegion { center, radius };
        circle.validate()?;
        Ok(circle)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.center.is_finite() || !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(GeometryError::InvalidRegion {
                center: self.center,
                radius: self.radius,
            });
        }
        Ok(())
    }

    /// Strict interior test.
    pub fn strictly_contains(&self, p: Vec2) -> bool {
        p.distance(self.center) < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InscribedSquare {
    /// Counterclockwise, starting at the `+x, +y` corner.
    pub corners: [Vec2; 4],
    pub side_length: f64,
}

impl InscribedSquare {
    /// Lower-left corner, i.e. `center - (s/2, s/2)`.
    pub fn lower_left(&self) -> Vec2 {
        self.corners[2]
    }
}

/// Square whose four corners sit on the circle at `pi/4 + k pi/2`.
pub fn inscribe_square(circle: &CircleRegion) -> Result<InscribedSquare, GeometryError> {
    circle.validate()?;
    let corners = std::array::from_fn(|k| {
        circle.center + Vec2::from_polar(circle.radius, k as f64 * FRAC_PI_2 + FRAC_PI_4)
    });
    Ok(InscribedSquare {
        corners,
        side_length: std::f64::consts::SQRT_2 * circle.radius,
    })
}

/// Which of the two right isosceles triangles of a sub-square a centroid
/// belongs to: `A` is the lower-left half, `B` the upper-right half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TriangleTag {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    /// Row of the sub-square, 1-based, counted upward.
    pub q1: usize,
    /// Column of the sub-square, 1-based, counted rightward.
    pub q2: usize,
    pub tag: TriangleTag,
    pub point: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGrid {
    pub n: usize,
    /// Side of one sub-square, `sqrt(2) r_c / n`.
    pub sub_side: f64,
    /// Lower-left corner of the inscribed square.
    pub anchor: Vec2,
    /// Row-major by `(q1, q2)`, tag `A` before `B`.
    pub centroids: Vec<Centroid>,
}

impl TriangleGrid {
    /// The four corners of sub-square `(q1, q2)`, counterclockwise from its
    /// lower-left corner.
    pub fn sub_square_corners(&self, q1: usize, q2: usize) -> [Vec2; 4] {
        let l = self.sub_side;
        let (x0, x1) = ((q2 - 1) as f64 * l, q2 as f64 * l);
        let (y0, y1) = ((q1 - 1) as f64 * l, q1 as f64 * l);
        [
            self.anchor + Vec2::new(x0, y0),
            self.anchor + Vec2::new(x1, y0),
            self.anchor + Vec2::new(x1, y1),
            self.anchor + Vec2::new(x0, y1),
        ]
    }
}

/// Splits the inscribed square of `circle` into `n x n` sub-squares, each cut
/// along its anti-diagonal into two right isosceles triangles, and returns
/// the `2 n^2` triangle centroids.
pub fn pack_triangles(circle: &CircleRegion, n: usize) -> Result<TriangleGrid, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidGridSize);
    }
    let square = inscribe_square(circle)?;
    let sub_side = square.side_length / n as f64;
    let half = square.side_length / 2.0;
    let anchor = circle.center - Vec2::new(half, half);

    let mut centroids = Vec::with_capacity(2 * n * n);
    for q1 in 1..=n {
        for q2 in 1..=n {
            let (c, r) = (q2 as f64, q1 as f64);
            let a = Vec2::new((3.0 * c - 2.0) / 3.0, (3.0 * r - 2.0) / 3.0) * sub_side;
            let b = Vec2::new((3.0 * c - 1.0) / 3.0, (3.0 * r - 1.0) / 3.0) * sub_side;
            centroids.push(Centroid {
                q1,
                q2,
                tag: TriangleTag::A,
                point: anchor + a,
            });
            centroids.push(Centroid {
                q1,
                q2,
                tag: TriangleTag::B,
                point: anchor + b,
            });
        }
    }
    Ok(TriangleGrid {
        n,
        sub_side,
        anchor,
        centroids,
    })
}

/// Largest grid resolution whose neighbouring centroids stay further apart
/// than the repulsion diameter: `floor(r_c / (3 r_s))`.
pub fn max_grid_resolution(r_c: f64, r_s: f64) -> Result<usize, GeometryError> {
    if !(r_c.is_finite() && r_s.is_finite() && r_c > 0.0 && r_s > 0.0) {
        return Err(GeometryError::RegionTooSmall { r_c, r_s });
    }
    let bound = (r_c / (3.0 * r_s)).floor();
    if bound < 1.0 {
        return Err(GeometryError::RegionTooSmall { r_c, r_s });
    }
    Ok(bound as usize)
}

/// Simple polygon with counterclockwise vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    /// Validates the ring and normalises it to counterclockwise order.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex".into()));
        }
        let area = signed_area(&vertices);
        let scale = bounding_scale(&vertices);
        if area.abs() <= GEOM_TOLERANCE * scale * scale {
            return Err(GeometryError::InvalidPolygon("zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let poly = Polygon { vertices };
        if let Some((i, j)) = poly.first_self_intersection() {
            return Err(GeometryError::InvalidPolygon(format!(
                "edges {i} and {j} intersect"
            )));
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rectangle(min: Vec2, max: Vec2) -> Result<Self, GeometryError> {
        Polygon::new(vec![
            min,
            Vec2::new(max.x, min.y),
            max,
            Vec2::new(min.x, max.y),
        ])
    }

    /// Regular polygon approximating a disc.
    pub fn regular(center: Vec2, radius: f64, sides: usize) -> Result<Self, GeometryError> {
        let step = std::f64::consts::TAU / sides as f64;
        Polygon::new(
            (0..sides)
                .map(|k| center + Vec2::from_polar(radius, k as f64 * step))
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn translate(&self, offset: Vec2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| *v + offset).collect(),
        }
    }

    /// Rotation about the origin; orientation is preserved.
    pub fn rotate(&self, theta: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| v.rotate(theta)).collect(),
        }
    }

    /// Largest vertex-to-vertex distance.
    pub fn max_diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.distance(*b));
            }
        }
        best
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, self)
    }

    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn first_self_intersection(&self) -> Option<(usize, usize)> {
        let n = self.vertices.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // Neighbouring edges share one vertex; they may only
                    // overlap if they fold back onto each other.
                    let shared_is_b = j == i + 1;
                    let (other, far, pivot) = if shared_is_b { (a, d, b) } else { (b, c, a) };
                    let u = other - pivot;
                    let v = far - pivot;
                    if u.cross(v) == 0.0 && u.dot(v) > 0.0 {
                        return Some((i, j));
                    }
                } else if segments_intersect(a, b, c, d) {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

fn bounding_scale(vertices: &[Vec2]) -> f64 {
    let (mut lo, mut hi) = (vertices[0], vertices[0]);
    for v in vertices {
        lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    (hi - lo).norm().max(1.0)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(a, c, d))
        || (d2 == 0.0 && on_segment(b, c, d))
        || (d3 == 0.0 && on_segment(c, a, b))
        || (d4 == 0.0 && on_segment(d, a, b))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// True iff `p` is inside `poly` or on its boundary.
pub fn point_in_polygon(p: Vec2, poly: &Polygon) -> bool {
    let scale = bounding_scale(&poly.vertices);
    let tol = GEOM_TOLERANCE * scale;
    let mut inside = false;
    for (a, b) in poly.edges() {
        if point_segment_distance(p, a, b) <= tol {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// One of the four axis-aligned segments of a circular region, numbered
/// counterclockwise from the `+x, +y` quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quadrant {
    S1,
    S2,
    S3,
    S4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::S1, Quadrant::S2, Quadrant::S3, Quadrant::S4];

    /// 1-based segment number.
    pub fn number(self) -> usize {
        self.slot() + 1
    }

    /// 0-based position in `ALL`.
    pub fn slot(self) -> usize {
        match self {
            Quadrant::S1 => 0,
            Quadrant::S2 => 1,
            Quadrant::S3 => 2,
            Quadrant::S4 => 3,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.number())
    }
}

/// Assigns `p` to a segment about `center`. Each segment is half-open and
/// owns the boundary ray it starts from when sweeping counterclockwise:
/// `+x` to S1, `+y` to S2, `-x` to S3, `-y` to S4.
pub fn quadrant_of(p: Vec2, center: Vec2) -> Result<Quadrant, GeometryError> {
    let d = p - center;
    if d.x == 0.0 && d.y == 0.0 {
        return Err(GeometryError::AmbiguousSegment);
    }
    Ok(if d.x > 0.0 && d.y >= 0.0 {
        Quadrant::S1
    } else if d.x <= 0.0 && d.y > 0.0 {
        Quadrant::S2
    } else if d.x < 0.0 && d.y <= 0.0 {
        Quadrant::S3
    } else {
        Quadrant::S4
    })
}
