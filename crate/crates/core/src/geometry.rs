//! Star-shaped boundaries, sampling and outward normals.
//!
//! A boundary is described in polar form `r(α)` around the origin. Smooth
//! boundaries use the five-term trigonometric perturbation of the unit circle
//!
//! ```text
//! r(α) = 1 + 0.2 (t1 sin 3α + t2 sin 4α + t3 sin 6α + t4 cos 2α + t5 cos 5α)
//! ```
//!
//! and the pentagonal test boundary is a regular polygon with straight edges.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of α samples used to validate shapes and bound their extent.
pub const VALIDATION_GRID: usize = 4096;

/// Default fraction of the local radius kept free of interior samples.
pub const DEFAULT_MARGIN: f64 = 0.02;

const MAX_CONSECUTIVE_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("boundary radius is not positive at alpha = {alpha} (r = {radius})")]
    NonPositiveRadius { alpha: f64, radius: f64 },
    #[error("polygon needs at least 3 sides and a positive circumradius")]
    InvalidPolygon,
    #[error("interior sampling stalled after {0} consecutive rejections")]
    SamplingStalled(usize),
    #[error("invalid sampling request: {0}")]
    InvalidRequest(&'static str),
    #[error("unknown boundary id `{0}`")]
    UnknownBoundary(String),
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// A point carrying both Cartesian and polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
    pub r: f64,
    pub theta: f64,
}

impl Point2 {
    pub fn from_cartesian(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            r: x.hypot(y),
            theta: wrap_angle(y.atan2(x)),
        }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        let theta = wrap_angle(theta);
        Self {
            x: r * theta.cos(),
            y: r * theta.sin(),
            r,
            theta,
        }
    }

    /// The four input features of the kernel branch: `(x, y, r, θ)`.
    pub fn features(&self) -> [f64; 4] {
        [self.x, self.y, self.r, self.theta]
    }
}

/// A point on the boundary together with its outward normal and datum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: Point2,
    pub alpha: f64,
    pub normal: [f64; 2],
    /// Dirichlet value or outward normal derivative, depending on the problem.
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundarySampleRecord {
    alpha: f64,
    x: f64,
    y: f64,
    r: f64,
    theta: f64,
    nx: f64,
    ny: f64,
    value: f64,
}

impl Serialize for BoundarySample {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BoundarySampleRecord {
            alpha: self.alpha,
            x: self.point.x,
            y: self.point.y,
            r: self.point.r,
            theta: self.point.theta,
            nx: self.normal[0],
            ny: self.normal[1],
            value: self.value,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BoundarySample {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = BoundarySampleRecord::deserialize(d)?;
        Ok(Self {
            point: Point2 {
                x: r.x,
                y: r.y,
                r: r.r,
                theta: r.theta,
            },
            alpha: r.alpha,
            normal: [r.nx, r.ny],
            value: r.value,
        })
    }
}

/// Five-coefficient smooth star-shaped boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryShape {
    coeffs: [f64; 5],
}

impl BoundaryShape {
    /// Builds a shape, rejecting coefficient vectors whose radius is not
    /// positive everywhere on a 4096-point α grid.
    pub fn new(coeffs: [f64; 5]) -> Result<Self, GeometryError> {
        let shape = Self { coeffs };
        for i in 0..VALIDATION_GRID {
            let alpha = TAU * i as f64 / VALIDATION_GRID as f64;
            let radius = shape.radius(alpha);
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(GeometryError::NonPositiveRadius { alpha, radius });
            }
        }
        Ok(shape)
    }

    pub fn circle() -> Self {
        Self { coeffs: [0.0; 5] }
    }

    pub fn coeffs(&self) -> [f64; 5] {
        self.coeffs
    }

    pub fn radius(&self, alpha: f64) -> f64 {
        let [t1, t2, t3, t4, t5] = self.coeffs;
        1.0 + 0.2
            * (t1 * (3.0 * alpha).sin()
                + t2 * (4.0 * alpha).sin()
                + t3 * (6.0 * alpha).sin()
                + t4 * (2.0 * alpha).cos()
                + t5 * (5.0 * alpha).cos())
    }

    /// dr/dα.
    pub fn radius_derivative(&self, alpha: f64) -> f64 {
        let [t1, t2, t3, t4, t5] = self.coeffs;
        0.2 * (3.0 * t1 * (3.0 * alpha).cos() + 4.0 * t2 * (4.0 * alpha).cos()
            + 6.0 * t3 * (6.0 * alpha).cos()
            - 2.0 * t4 * (2.0 * alpha).sin()
            - 5.0 * t5 * (5.0 * alpha).sin())
    }
}

/// Regular polygon centred at the origin with a vertex at angle `rotation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularPolygon {
    sides: usize,
    circumradius: f64,
    rotation: f64,
}

impl RegularPolygon {
    pub fn new(sides: usize, circumradius: f64, rotation: f64) -> Result<Self, GeometryError> {
        if sides < 3 || !(circumradius > 0.0) {
            return Err(GeometryError::InvalidPolygon);
        }
        Ok(Self {
            sides,
            circumradius,
            rotation,
        })
    }

    fn sector(&self) -> f64 {
        TAU / self.sides as f64
    }

    /// Edge index containing α and the offset of α from that edge's midpoint.
    fn locate(&self, alpha: f64) -> (usize, f64) {
        let s = (alpha - self.rotation).rem_euclid(TAU);
        let k = ((s / self.sector()).floor() as usize).min(self.sides - 1);
        let offset = s - (k as f64 + 0.5) * self.sector();
        (k, offset)
    }

    fn apothem(&self) -> f64 {
        self.circumradius * (PI / self.sides as f64).cos()
    }

    pub fn radius(&self, alpha: f64) -> f64 {
        let (_, offset) = self.locate(alpha);
        self.apothem() / offset.cos()
    }

    pub fn radius_derivative(&self, alpha: f64) -> f64 {
        let (_, offset) = self.locate(alpha);
        let c = offset.cos();
        self.apothem() * offset.sin() / (c * c)
    }

    /// Edge normal, or the angle bisector at a vertex.
    pub fn normal(&self, alpha: f64) -> [f64; 2] {
        let (k, offset) = self.locate(alpha);
        let half = 0.5 * self.sector();
        let dir = if (offset.abs() - half).abs() < 1e-12 {
            // Vertex: bisector of the two adjacent edge normals is radial.
            self.rotation + (k as f64 + 0.5) * self.sector() + offset.signum() * half
        } else {
            self.rotation + (k as f64 + 0.5) * self.sector()
        };
        [dir.cos(), dir.sin()]
    }
}

/// Any supported closed boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Star(BoundaryShape),
    Polygon(RegularPolygon),
}

impl Boundary {
    pub fn radius(&self, alpha: f64) -> f64 {
        match self {
            Boundary::Star(s) => s.radius(alpha),
            Boundary::Polygon(p) => p.radius(alpha),
        }
    }

    pub fn radius_derivative(&self, alpha: f64) -> f64 {
        match self {
            Boundary::Star(s) => s.radius_derivative(alpha),
            Boundary::Polygon(p) => p.radius_derivative(alpha),
        }
    }

    /// Tangent dP/dα of the curve `P(α) = r(α)(cos α, sin α)`.
    pub fn tangent(&self, alpha: f64) -> [f64; 2] {
        let r = self.radius(alpha);
        let dr = self.radius_derivative(alpha);
        let (s, c) = alpha.sin_cos();
        [dr * c - r * s, dr * s + r * c]
    }

    /// Outward unit normal at parameter α.
    pub fn normal(&self, alpha: f64) -> [f64; 2] {
        match self {
            Boundary::Star(_) => {
                // The curve runs counter-clockwise, so rotating the tangent
                // clockwise points away from the interior.
                let [tx, ty] = self.tangent(alpha);
                let len = tx.hypot(ty);
                [ty / len, -tx / len]
            }
            Boundary::Polygon(p) => p.normal(alpha),
        }
    }

    pub fn point(&self, alpha: f64) -> Point2 {
        Point2::from_polar(self.radius(alpha), alpha)
    }

    /// A boundary sample at α with an unset (zero) value.
    pub fn sample_at(&self, alpha: f64) -> BoundarySample {
        let alpha = wrap_angle(alpha);
        BoundarySample {
            point: self.point(alpha),
            alpha,
            normal: self.normal(alpha),
            value: 0.0,
        }
    }

    /// Maximum radius over the validation grid.
    pub fn max_radius(&self) -> f64 {
        (0..VALIDATION_GRID)
            .map(|i| self.radius(TAU * i as f64 / VALIDATION_GRID as f64))
            .fold(0.0, f64::max)
    }

    /// Arc-length speed |dP/dα|.
    pub fn speed(&self, alpha: f64) -> f64 {
        let [tx, ty] = self.tangent(alpha);
        tx.hypot(ty)
    }

    /// Perimeter by periodic trapezoid quadrature.
    pub fn perimeter(&self) -> f64 {
        let n = VALIDATION_GRID;
        let h = TAU / n as f64;
        (0..n).map(|i| self.speed(h * i as f64)).sum::<f64>() * h
    }

    /// Whether `p` lies strictly inside the boundary shrunk by `margin`.
    pub fn contains(&self, p: &Point2, margin: f64) -> bool {
        p.r < (1.0 - margin) * self.radius(p.theta)
    }
}

/// Free-function form of [`Boundary::radius`].
pub fn radius(boundary: &Boundary, alpha: f64) -> f64 {
    boundary.radius(alpha)
}

/// Free-function form of [`Boundary::normal`].
pub fn boundary_normal(boundary: &Boundary, alpha: f64) -> [f64; 2] {
    boundary.normal(alpha)
}

/// `m` boundary samples with α uniform on `[0, 2π)`. Values are left at zero.
pub fn sample_boundary<R: Rng + ?Sized>(
    boundary: &Boundary,
    m: usize,
    rng: &mut R,
) -> Result<Vec<BoundarySample>, GeometryError> {
    if m == 0 {
        return Err(GeometryError::InvalidRequest("boundary sample count must be >= 1"));
    }
    Ok((0..m)
        .map(|_| boundary.sample_at(rng.random_range(0.0..TAU)))
        .collect())
}

/// `m` boundary samples at equispaced α, starting at α = 0.
pub fn equispaced_boundary(boundary: &Boundary, m: usize) -> Vec<BoundarySample> {
    (0..m)
        .map(|i| boundary.sample_at(TAU * i as f64 / m as f64))
        .collect()
}

/// `n` interior points uniform over the region shrunk by `margin`, drawn by
/// rejection from the bounding box.
pub fn sample_interior<R: Rng + ?Sized>(
    boundary: &Boundary,
    n: usize,
    margin: f64,
    rng: &mut R,
) -> Result<Vec<Point2>, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidRequest("interior sample count must be >= 1"));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(GeometryError::InvalidRequest("margin must lie in [0, 1)"));
    }
    let half = boundary.max_radius() * 1.01;
    let mut points = Vec::with_capacity(n);
    let mut rejections = 0usize;
    while points.len() < n {
        let x = rng.random_range(-half..half);
        let y = rng.random_range(-half..half);
        let p = Point2::from_cartesian(x, y);
        if boundary.contains(&p, margin) {
            points.push(p);
            rejections = 0;
        } else {
            rejections += 1;
            if rejections > MAX_CONSECUTIVE_REJECTIONS {
                return Err(GeometryError::SamplingStalled(rejections));
            }
        }
    }
    Ok(points)
}

/// Identifiers of the built-in boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryId {
    #[serde(rename = "B_train")]
    BTrain,
    B1,
    B2,
    B3,
    B4,
    #[serde(rename = "circle")]
    Circle,
}

impl BoundaryId {
    /// The four evaluation boundaries.
    pub const TEST: [BoundaryId; 4] = [BoundaryId::B1, BoundaryId::B2, BoundaryId::B3, BoundaryId::B4];
    /// Every preset, training boundary first.
    pub const ALL: [BoundaryId; 6] = [
        BoundaryId::BTrain,
        BoundaryId::B1,
        BoundaryId::B2,
        BoundaryId::B3,
        BoundaryId::B4,
        BoundaryId::Circle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryId::BTrain => "B_train",
            BoundaryId::B1 => "B1",
            BoundaryId::B2 => "B2",
            BoundaryId::B3 => "B3",
            BoundaryId::B4 => "B4",
            BoundaryId::Circle => "circle",
        }
    }

    pub fn boundary(&self) -> Boundary {
        let star = |c: [f64; 5]| Boundary::Star(BoundaryShape::new(c).expect("preset shape is valid"));
        match self {
            BoundaryId::BTrain => star([0.0, 1.0, 0.0, 0.0, 0.0]),
            BoundaryId::B1 => star([0.3, 0.0, 0.2, 0.0, 0.0]),
            BoundaryId::B2 => star([0.0, 0.5, 0.0, 0.3, 0.0]),
            BoundaryId::B3 => star([0.2, 0.2, 0.0, 0.0, 0.3]),
            BoundaryId::B4 => Boundary::Polygon(
                RegularPolygon::new(5, 1.0, PI / 2.0).expect("preset polygon is valid"),
            ),
            BoundaryId::Circle => Boundary::Star(BoundaryShape::circle()),
        }
    }
}

impl fmt::Display for BoundaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryId {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b_train" | "btrain" | "train" => Ok(BoundaryId::BTrain),
            "b1" => Ok(BoundaryId::B1),
            "b2" => Ok(BoundaryId::B2),
            "b3" => Ok(BoundaryId::B3),
            "b4" | "pentagon" => Ok(BoundaryId::B4),
            "circle" => Ok(BoundaryId::Circle),
            _ => Err(GeometryError::UnknownBoundary(s.to_string())),
        }
    }
}

/// The training boundary, the three smooth test boundaries and the pentagon.
pub fn preset_boundaries() -> Vec<(BoundaryId, Boundary)> {
    [
        BoundaryId::BTrain,
        BoundaryId::B1,
        BoundaryId::B2,
        BoundaryId::B3,
        BoundaryId::B4,
    ]
    .into_iter()
    .map(|id| (id, id.boundary()))
    .collect()
}

/// Writes `n` equispaced boundary points as CSV with 17 significant digits.
pub fn write_boundary_csv<W: Write>(boundary: &Boundary, n: usize, mut out: W) -> std::io::Result<()> {
    writeln!(out, "alpha,x,y,r,theta,nx,ny")?;
    for s in equispaced_boundary(boundary, n) {
        let p = s.point;
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.alpha, p.x, p.y, p.r, p.theta, s.normal[0], s.normal[1]
        )?;
    }
    Ok(())
}
