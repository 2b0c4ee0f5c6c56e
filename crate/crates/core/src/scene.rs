//! Body, inclusion and conductivity descriptions.
//!
//! A [`Scene`] is the ground truth for a synthetic experiment: the outer
//! boundary of the body, the phase-1 inclusions and the two complex
//! conductivities. Areas are computed analytically so that the true area
//! fraction is known to machine precision, independent of any mesh.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{self, Point};

/// Samples used when a curved outline is tested for containment and overlap.
const VALIDATION_SAMPLES: usize = 720;
const CONTAINMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("unknown shape kind `{kind}` at {location}")]
    UnknownShape { kind: String, location: String },
    #[error("inclusion {index} is not inside the outer boundary")]
    OutsideDomain { index: usize },
    #[error("inclusions {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("area fraction {0} is not in (0, 1)")]
    DegenerateFraction(f64),
}

/// The admissibility conditions a conductivity pair can violate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseViolation {
    /// Re(sigma) <= 0 for the given phase (1 or 2).
    NonPositiveReal { phase: u8 },
    /// |sigma1| == |sigma2|.
    EqualModulus,
    /// sigma1 / sigma2 is real.
    RealRatio,
}

impl fmt::Display for PhaseViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseViolation::NonPositiveReal { phase } => {
                write!(f, "Re(sigma{phase}) <= 0")
            }
            PhaseViolation::EqualModulus => write!(f, "|sigma1| == |sigma2|"),
            PhaseViolation::RealRatio => write!(f, "sigma1/sigma2 is real"),
        }
    }
}

/// Complex conductivities of the inclusion (phase 1) and the background (phase 2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePair {
    pub sigma1: Complex64,
    pub sigma2: Complex64,
}

impl PhasePair {
    pub fn new(sigma1: Complex64, sigma2: Complex64) -> Self {
        Self { sigma1, sigma2 }
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.sigma2, self.sigma1)
    }
}

/// Checks the three admissibility conditions. An empty violation list means ok.
pub fn validate_phases(p: &PhasePair) -> Result<(), Vec<PhaseViolation>> {
    let mut violations = Vec::new();
    if !(p.sigma1.re > 0.0) {
        violations.push(PhaseViolation::NonPositiveReal { phase: 1 });
    }
    if !(p.sigma2.re > 0.0) {
        violations.push(PhaseViolation::NonPositiveReal { phase: 2 });
    }
    let (n1, n2) = (p.sigma1.norm(), p.sigma2.norm());
    if (n1 - n2).abs() <= 1e-12 * n1.max(n2) {
        violations.push(PhaseViolation::EqualModulus);
    }
    // Im(sigma1 conj(sigma2)) has the sign and zero set of Im(sigma1/sigma2).
    let cross = (p.sigma1 * p.sigma2.conj()).im;
    if cross.abs() <= 1e-12 * n1 * n2 {
        violations.push(PhaseViolation::RealRatio);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    fn contains(&self, p: Point, tol: f64) -> bool {
        geometry::dist(p, self.center) < self.radius + tol
    }
}

/// Closed curves and inclusion shapes. Serialized with a `kind` tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: Point,
        radius: f64,
    },
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
    },
    Polygon {
        points: Vec<Point>,
    },
    /// Set difference `outer \ inner` of two intersecting disks.
    Crescent {
        outer: Disk,
        inner: Disk,
    },
    /// Phase 1 occupies `r < R1` and `R2 < r < R3`, concentric with a disk-shaped body of radius R3.
    AnnulusPhase1 {
        radii: [f64; 3],
    },
    /// Star-shaped curve `r(w) = radius * (1 + amplitude * cos(lobes * w + phase))`.
    Star {
        center: Point,
        radius: f64,
        amplitude: f64,
        lobes: u32,
        #[serde(default)]
        phase: f64,
    },
}

pub const SHAPE_KINDS: [&str; 6] = [
    "disk",
    "ellipse",
    "polygon",
    "crescent",
    "annulus_phase1",
    "star",
];

/// Polygonal phase-1 region used for centroid tagging of mesh triangles.
#[derive(Clone, Debug)]
pub enum PhaseRegion {
    Inside(Vec<Point>),
    /// Inside `core`, or outside `ring_inner`.
    Annulus {
        core: Vec<Point>,
        ring_inner: Vec<Point>,
    },
}

impl PhaseRegion {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            PhaseRegion::Inside(poly) => geometry::point_in_polygon(p, poly),
            PhaseRegion::Annulus { core, ring_inner } => {
                geometry::point_in_polygon(p, core) || !geometry::point_in_polygon(p, ring_inner)
            }
        }
    }
}

/// Interface polylines of an inclusion plus the region they bound.
#[derive(Clone, Debug)]
pub struct InterfaceLoops {
    pub loops: Vec<Vec<Point>>,
    pub region: PhaseRegion,
}

fn circle_point(center: Point, radius: f64, angle: f64) -> Point {
    [
        center[0] + radius * angle.cos(),
        center[1] + radius * angle.sin(),
    ]
}

/// Area of the intersection of two disks with radii `r1`, `r2` and center distance `d`.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        return PI * r1.min(r2).powi(2);
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1))
        .clamp(-1.0, 1.0)
        .acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2))
        .clamp(-1.0, 1.0)
        .acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Disk { .. } => "disk",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Polygon { .. } => "polygon",
            Shape::Crescent { .. } => "crescent",
            Shape::AnnulusPhase1 { .. } => "annulus_phase1",
            Shape::Star { .. } => "star",
        }
    }

    /// Whether the shape is a single simple closed curve usable as a body outline.
    pub fn is_closed_curve(&self) -> bool {
        matches!(
            self,
            Shape::Disk { .. } | Shape::Ellipse { .. } | Shape::Polygon { .. } | Shape::Star { .. }
        )
    }

    fn check_parameters(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidShape(format!("{}: {m}", self.kind())));
        match self {
            Shape::Disk { radius, .. } if !(*radius > 0.0) => bad("radius must be positive"),
            Shape::Ellipse { a, b, .. } if !(*a > 0.0 && *b > 0.0) => {
                bad("semi-axes must be positive")
            }
            Shape::Polygon { points } => {
                if points.len() < 3 {
                    return bad("needs at least 3 points");
                }
                if geometry::signed_area(points).abs() <= 0.0 {
                    return bad("zero area");
                }
                if geometry::is_self_intersecting(points) {
                    return bad("self-intersecting");
                }
                Ok(())
            }
            Shape::Crescent { outer, inner } => {
                if !(outer.radius > 0.0 && inner.radius > 0.0) {
                    return bad("radii must be positive");
                }
                let d = geometry::dist(outer.center, inner.center);
                if !(d > (outer.radius - inner.radius).abs() && d < outer.radius + inner.radius) {
                    return bad("disks must intersect properly");
                }
                Ok(())
            }
            Shape::AnnulusPhase1 { radii } => {
                if !(radii[0] > 0.0 && radii[0] < radii[1] && radii[1] < radii[2]) {
                    return bad("radii must be strictly increasing and positive");
                }
                Ok(())
            }
            Shape::Star {
                radius,
                amplitude,
                lobes,
                ..
            } => {
                if !(*radius > 0.0 && *amplitude >= 0.0 && *amplitude < 1.0 && *lobes >= 1) {
                    return bad("needs radius > 0, 0 <= amplitude < 1, lobes >= 1");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Exact area.
    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Ellipse { a, b, .. } => PI * a * b,
            Shape::Polygon { points } => geometry::signed_area(points).abs(),
            Shape::Crescent { outer, inner } => {
                let d = geometry::dist(outer.center, inner.center);
                PI * outer.radius.powi(2) - lens_area(outer.radius, inner.radius, d)
            }
            Shape::AnnulusPhase1 { radii } => {
                PI * (radii[0].powi(2) + radii[2].powi(2) - radii[1].powi(2))
            }
            Shape::Star {
                radius, amplitude, ..
            } => PI * radius * radius * (1.0 + 0.5 * amplitude * amplitude),
        }
    }

    /// Point at curve parameter `t` in [0, 1), counterclockwise. Closed curves only.
    fn curve_point(&self, t: f64) -> Point {
        let w = 2.0 * PI * t;
        match self {
            Shape::Disk { center, radius } => circle_point(*center, *radius, w),
            Shape::Ellipse {
                center,
                a,
                b,
                angle,
            } => {
                let (x, y) = (a * w.cos(), b * w.sin());
                let (c, s) = (angle.cos(), angle.sin());
                [center[0] + c * x - s * y, center[1] + s * x + c * y]
            }
            Shape::Star {
                center,
                radius,
                amplitude,
                lobes,
                phase,
            } => {
                let r = radius * (1.0 + amplitude * (*lobes as f64 * w + phase).cos());
                circle_point(*center, r, w)
            }
            _ => unreachable!("curve_point on a non-parametric shape"),
        }
    }

    /// `n` counterclockwise samples uniform in the curve parameter. Polygons
    /// return their own vertices (counterclockwise) and ignore `n`.
    pub fn sample(&self, n: usize) -> Vec<Point> {
        match self {
            Shape::Polygon { points } => {
                let mut pts = points.clone();
                if geometry::signed_area(&pts) < 0.0 {
                    pts.reverse();
                }
                pts
            }
            Shape::Crescent { .. } | Shape::AnnulusPhase1 { .. } => {
                // Composite shapes have no single parametrization; use the
                // interface loops at the equivalent resolution.
                let h = self.perimeter_estimate() / n as f64;
                self.interface_loops(h, 3)
                    .map(|l| l.loops.into_iter().flatten().collect())
                    .unwrap_or_default()
            }
            _ => (0..n)
                .map(|i| self.curve_point(i as f64 / n as f64))
                .collect(),
        }
    }

    fn perimeter_estimate(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => 2.0 * PI * radius,
            Shape::Polygon { points } => geometry::perimeter(points),
            Shape::Crescent { outer, inner } => 2.0 * PI * (outer.radius + inner.radius),
            Shape::AnnulusPhase1 { radii } => 2.0 * PI * (radii[0] + radii[1]),
            _ => geometry::perimeter(&self.sample(4096)),
        }
    }

    /// Length of the closed curve (polygonal estimate for ellipses and stars).
    pub fn perimeter(&self) -> f64 {
        self.perimeter_estimate()
    }

    /// Exact membership, with the boundary widened by `tol`.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self {
            Shape::Disk { center, radius } => geometry::dist(p, *center) < radius + tol,
            Shape::Ellipse {
                center,
                a,
                b,
                angle,
            } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let (c, s) = (angle.cos(), angle.sin());
                let (x, y) = (c * dx + s * dy, -s * dx + c * dy);
                ((x / a).powi(2) + (y / b).powi(2)).sqrt() < 1.0 + tol / a.min(*b)
            }
            Shape::Polygon { points } => {
                if geometry::point_in_polygon(p, points) {
                    return true;
                }
                tol > 0.0 && distance_to_polyline(p, points) <= tol
            }
            Shape::Crescent { outer, inner } => outer.contains(p, tol) && !inner.contains(p, -tol),
            Shape::AnnulusPhase1 { radii } => {
                // Centered at the origin of the enclosing disk; callers shift.
                let r = p[0].hypot(p[1]);
                r < radii[0] + tol || (r > radii[1] - tol && r < radii[2] + tol)
            }
            Shape::Star {
                center,
                radius,
                amplitude,
                lobes,
                phase,
            } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let w = dy.atan2(dx);
                let r = radius * (1.0 + amplitude * (*lobes as f64 * w + phase).cos());
                dx.hypot(dy) < r + tol
            }
        }
    }

    /// Interface polylines at target edge length `h`, each with at least
    /// `min_vertices` vertices; fails when `h` cannot resolve the shape.
    pub fn interface_loops(
        &self,
        h: f64,
        min_vertices: usize,
    ) -> Result<InterfaceLoops, SceneError> {
        let count = |len: f64| (len / h).ceil() as usize;
        let unresolved = || {
            SceneError::InvalidShape(format!(
                "{} cannot be resolved with edge length {h}",
                self.kind()
            ))
        };
        match self {
            Shape::Polygon { .. } => {
                let poly = geometry::subdivide_closed(&self.sample(0), h);
                Ok(InterfaceLoops {
                    loops: vec![poly.clone()],
                    region: PhaseRegion::Inside(poly),
                })
            }
            Shape::Disk { .. } | Shape::Ellipse { .. } | Shape::Star { .. } => {
                let n = count(self.perimeter());
                if n < min_vertices {
                    return Err(unresolved());
                }
                let poly = self.sample(n);
                Ok(InterfaceLoops {
                    loops: vec![poly.clone()],
                    region: PhaseRegion::Inside(poly),
                })
            }
            Shape::Crescent { outer, inner } => {
                let poly =
                    crescent_polygon(outer, inner, h, min_vertices / 2).ok_or_else(unresolved)?;
                Ok(InterfaceLoops {
                    loops: vec![poly.clone()],
                    region: PhaseRegion::Inside(poly),
                })
            }
            Shape::AnnulusPhase1 { radii } => {
                let ring = |r: f64| -> Result<Vec<Point>, SceneError> {
                    let n = count(2.0 * PI * r);
                    if n < min_vertices {
                        return Err(unresolved());
                    }
                    Ok((0..n)
                        .map(|i| circle_point([0.0, 0.0], r, 2.0 * PI * i as f64 / n as f64))
                        .collect())
                };
                let core = ring(radii[0])?;
                let ring_inner = ring(radii[1])?;
                Ok(InterfaceLoops {
                    loops: vec![core.clone(), ring_inner.clone()],
                    region: PhaseRegion::Annulus { core, ring_inner },
                })
            }
        }
    }
}

fn distance_to_polyline(p: Point, poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
            let len2 = ex * ex + ey * ey;
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            geometry::dist(p, [a[0] + t * ex, a[1] + t * ey])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Counterclockwise polygon of `outer \ inner`: the arc of `outer` lying
/// outside `inner`, then the arc of `inner` lying inside `outer`.
fn crescent_polygon(outer: &Disk, inner: &Disk, h: f64, min_per_arc: usize) -> Option<Vec<Point>> {
    let (ca, ra) = (outer.center, outer.radius);
    let (cb, rb) = (inner.center, inner.radius);
    let d = geometry::dist(ca, cb);
    let u = [(cb[0] - ca[0]) / d, (cb[1] - ca[1]) / d];
    let x = (d * d + ra * ra - rb * rb) / (2.0 * d);
    let y = (ra * ra - x * x).max(0.0).sqrt();
    // `left` is on the counterclockwise side of the center line.
    let left = [ca[0] + x * u[0] - y * u[1], ca[1] + x * u[1] + y * u[0]];
    let right = [ca[0] + x * u[0] + y * u[1], ca[1] + x * u[1] - y * u[0]];
    let angle = |c: Point, p: Point| (p[1] - c[1]).atan2(p[0] - c[0]);

    // Outer arc: counterclockwise from `left` round the far side to `right`.
    let a0 = angle(ca, left);
    let mut a1 = angle(ca, right);
    while a1 <= a0 {
        a1 += 2.0 * PI;
    }
    // Inner arc: clockwise from `right` back to `left`, inside `outer`.
    let b0 = angle(cb, right);
    let mut b1 = angle(cb, left);
    while b1 >= b0 {
        b1 -= 2.0 * PI;
    }
    let na = ((ra * (a1 - a0)) / h).ceil() as usize;
    let nb = ((rb * (b0 - b1)) / h).ceil() as usize;
    if na < min_per_arc.max(2) || nb < min_per_arc.max(2) {
        return None;
    }
    let mut poly = Vec::with_capacity(na + nb);
    for i in 0..na {
        poly.push(circle_point(ca, ra, a0 + (a1 - a0) * i as f64 / na as f64));
    }
    for i in 0..nb {
        poly.push(circle_point(cb, rb, b0 + (b1 - b0) * i as f64 / nb as f64));
    }
    Some(poly)
}

/// A synthetic two-phase body.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub outer: Shape,
    pub inclusions: Vec<Shape>,
    pub phases: PhasePair,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    name: String,
    outer: Shape,
    #[serde(default)]
    inclusions: Vec<Shape>,
    sigma1: [f64; 2],
    sigma2: [f64; 2],
}

impl Scene {
    /// Geometric validation: shape parameters, containment, disjointness and
    /// an area fraction strictly between 0 and 1.
    pub fn validate(&self) -> Result<(), SceneError> {
        let f1 = area_fraction(self)?;
        if !(f1 > 0.0 && f1 < 1.0) {
            return Err(SceneError::DegenerateFraction(f1));
        }
        Ok(())
    }

    /// Center of the outer boundary when it is a disk.
    pub fn outer_disk(&self) -> Option<(Point, f64)> {
        match &self.outer {
            Shape::Disk { center, radius } => Some((*center, *radius)),
            _ => None,
        }
    }

    /// Interface loops of every inclusion, with inclusion-local coordinates
    /// shifted to the body frame.
    pub fn interface_loops(
        &self,
        h: f64,
        min_vertices: usize,
    ) -> Result<Vec<InterfaceLoops>, SceneError> {
        let offset = self.outer_disk().map(|(c, _)| c).unwrap_or([0.0, 0.0]);
        self.inclusions
            .iter()
            .map(|s| {
                let mut l = s.interface_loops(h, min_vertices)?;
                if let Shape::AnnulusPhase1 { .. } = s {
                    let shift = |poly: &mut Vec<Point>| {
                        for p in poly.iter_mut() {
                            p[0] += offset[0];
                            p[1] += offset[1];
                        }
                    };
                    l.loops.iter_mut().for_each(shift);
                    if let PhaseRegion::Annulus { core, ring_inner } = &mut l.region {
                        shift(core);
                        shift(ring_inner);
                    }
                }
                Ok(l)
            })
            .collect()
    }

    fn inclusion_contains(&self, idx: usize, p: Point, tol: f64) -> bool {
        match &self.inclusions[idx] {
            s @ Shape::AnnulusPhase1 { .. } => {
                let c = self.outer_disk().map(|(c, _)| c).unwrap_or([0.0, 0.0]);
                s.contains([p[0] - c[0], p[1] - c[1]], tol)
            }
            s => s.contains(p, tol),
        }
    }

    fn inclusion_outline(&self, idx: usize) -> Vec<Point> {
        let s = &self.inclusions[idx];
        match s {
            Shape::AnnulusPhase1 { .. } => Vec::new(),
            Shape::Crescent { .. } => {
                let h = s.perimeter_estimate() / VALIDATION_SAMPLES as f64;
                s.interface_loops(h, 3)
                    .map(|l| l.loops.into_iter().flatten().collect())
                    .unwrap_or_default()
            }
            Shape::Polygon { .. } => {
                let h = s.perimeter_estimate() / VALIDATION_SAMPLES as f64;
                geometry::subdivide_closed(&s.sample(0), h)
            }
            _ => s.sample(VALIDATION_SAMPLES),
        }
    }

    pub fn to_json(&self) -> String {
        let file = SceneFile {
            name: self.name.clone(),
            outer: self.outer.clone(),
            inclusions: self.inclusions.clone(),
            sigma1: [self.phases.sigma1.re, self.phases.sigma1.im],
            sigma2: [self.phases.sigma2.re, self.phases.sigma2.im],
        };
        serde_json::to_string_pretty(&file).expect("scene serialization cannot fail")
    }
}

/// Exact area of the inclusions divided by the area of the body.
pub fn area_fraction(s: &Scene) -> Result<f64, SceneError> {
    if !s.outer.is_closed_curve() {
        return Err(SceneError::InvalidShape(format!(
            "outer boundary cannot be a {}",
            s.outer.kind()
        )));
    }
    s.outer.check_parameters()?;
    for inc in &s.inclusions {
        inc.check_parameters()?;
    }
    let outer_area = s.outer.area();
    let scale = s.outer.perimeter_estimate();
    let tol = CONTAINMENT_TOL * scale;

    for (i, inc) in s.inclusions.iter().enumerate() {
        if let Shape::AnnulusPhase1 { radii } = inc {
            match s.outer_disk() {
                Some((_, r)) if (r - radii[2]).abs() <= 1e-12 * r => {}
                _ => return Err(SceneError::OutsideDomain { index: i }),
            }
            continue;
        }
        if s.inclusion_outline(i)
            .iter()
            .any(|&p| !s.outer.contains(p, tol))
        {
            return Err(SceneError::OutsideDomain { index: i });
        }
    }
    for i in 0..s.inclusions.len() {
        for j in (i + 1)..s.inclusions.len() {
            let oi = s.inclusion_outline(i);
            let oj = s.inclusion_outline(j);
            let overlap = oi.iter().any(|&p| s.inclusion_contains(j, p, -tol))
                || oj.iter().any(|&p| s.inclusion_contains(i, p, -tol))
                || (!oi.is_empty() && !oj.is_empty() && geometry::polygons_cross(&oi, &oj));
            if overlap {
                return Err(SceneError::Overlap {
                    first: i,
                    second: j,
                });
            }
        }
    }
    let inner: f64 = s.inclusions.iter().map(Shape::area).sum();
    Ok(inner / outer_area)
}

fn json_location(err: &serde_json::Error) -> (usize, usize) {
    (err.line(), err.column())
}

/// Parses a scene description from its JSON text form.
pub fn parse_scene(config: &str) -> Result<Scene, SceneError> {
    let value: Value = serde_json::from_str(config).map_err(|e| {
        let (line, column) = json_location(&e);
        SceneError::Parse {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let obj = value.as_object().ok_or_else(|| SceneError::Parse {
        line: 1,
        column: 1,
        message: "top level must be an object".into(),
    })?;
    for field in ["name", "outer", "sigma1", "sigma2"] {
        if !obj.contains_key(field) {
            return Err(SceneError::MissingField(field.into()));
        }
    }
    let check_kind = |v: &Value, location: String| -> Result<(), SceneError> {
        match v.get("kind").and_then(Value::as_str) {
            Some(k) if SHAPE_KINDS.contains(&k) => Ok(()),
            Some(k) => Err(SceneError::UnknownShape {
                kind: k.to_string(),
                location,
            }),
            None => Err(SceneError::MissingField(format!("{location}.kind"))),
        }
    };
    check_kind(&obj["outer"], "outer".into())?;
    if let Some(list) = obj.get("inclusions").and_then(Value::as_array) {
        for (i, v) in list.iter().enumerate() {
            check_kind(v, format!("inclusions[{i}]"))?;
        }
    }
    let file: SceneFile = serde_json::from_value(value).map_err(|e| SceneError::Field {
        field: "scene".into(),
        message: e.to_string(),
    })?;
    let scene = Scene {
        name: file.name,
        outer: file.outer,
        inclusions: file.inclusions,
        phases: PhasePair::new(
            Complex64::new(file.sigma1[0], file.sigma1[1]),
            Complex64::new(file.sigma2[0], file.sigma2[1]),
        ),
    };
    scene.validate()?;
    Ok(scene)
}

/// Names of the preconfigured experiment scenes.
pub const BUILTIN_SCENES: [&str; 8] = [
    "table1_row1",
    "table1_row2",
    "table1_row3",
    "table1_row4",
    "table2",
    "table3",
    "table4",
    "table5",
];

/// Radius of the lower disk of the table3 crescent.
pub const CRESCENT_OUTER_RADIUS: f64 = 0.25;
/// Radius of the disk removed from it.
pub const CRESCENT_INNER_RADIUS: f64 = 0.4;
/// Center of the lower disk of the table3 crescent.
pub const CRESCENT_CENTER: Point = [0.0, -0.45];
/// Area fraction of the crescent inside the unit disk.
pub const CRESCENT_FRACTION: f64 = 0.0225;

/// Center offset of the removed disk giving a crescent of area `target`.
pub fn crescent_offset_for_area(ra: f64, rb: f64, target: f64) -> f64 {
    let lune = |d: f64| PI * ra * ra - lens_area(ra, rb, d);
    let (mut lo, mut hi) = ((ra - rb).abs(), ra + rb);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lune(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Star outline used for table4: three lobes of relative amplitude 0.2.
pub const STAR_AMPLITUDE: f64 = 0.2;
pub const STAR_LOBES: u32 = 3;
/// Area fraction of the table4 inclusion.
pub const TABLE4_FRACTION: f64 = 0.029281;

pub fn builtin_scene(name: &str) -> Option<Scene> {
    let c = Complex64::new;
    let unit = Shape::Disk {
        center: [0.0, 0.0],
        radius: 1.0,
    };
    let concentric = |sigma1: Complex64| Scene {
        name: name.to_string(),
        outer: unit.clone(),
        inclusions: vec![Shape::Disk {
            center: [0.0, 0.0],
            radius: 0.4,
        }],
        phases: PhasePair::new(sigma1, c(1.0, 0.0)),
    };
    let scene = match name {
        "table1_row1" => concentric(c(1.0, 1.0)),
        "table1_row2" => concentric(c(2.0, 0.5)),
        "table1_row3" => concentric(c(2.0, 5.0)),
        "table1_row4" => concentric(c(4.0, 100.0)),
        "table2" => Scene {
            name: name.into(),
            outer: unit,
            inclusions: vec![Shape::Ellipse {
                center: [-0.1, -0.3],
                a: 0.4,
                b: 0.3,
                angle: 0.0,
            }],
            phases: PhasePair::new(c(2.0, 1.0), c(1.0, 0.0)),
        },
        "table3" => {
            let d = crescent_offset_for_area(
                CRESCENT_OUTER_RADIUS,
                CRESCENT_INNER_RADIUS,
                CRESCENT_FRACTION * PI,
            );
            Scene {
                name: name.into(),
                outer: unit,
                inclusions: vec![
                    Shape::Disk {
                        center: [-0.4, 0.3],
                        radius: 0.25,
                    },
                    Shape::Disk {
                        center: [0.4, 0.3],
                        radius: 0.25,
                    },
                    Shape::Crescent {
                        outer: Disk::new(CRESCENT_CENTER, CRESCENT_OUTER_RADIUS),
                        inner: Disk::new(
                            [CRESCENT_CENTER[0], CRESCENT_CENTER[1] + d],
                            CRESCENT_INNER_RADIUS,
                        ),
                    },
                ],
                phases: PhasePair::new(c(2.0, 1.0), c(1.0, 0.0)),
            }
        }
        "table4" => {
            let outer = Shape::Star {
                center: [0.0, 0.0],
                radius: 1.0,
                amplitude: STAR_AMPLITUDE,
                lobes: STAR_LOBES,
                phase: 0.0,
            };
            // Ellipse with aspect ratio 1.5 sized to the target fraction.
            let ab = TABLE4_FRACTION * outer.area() / PI;
            let b = (ab / 1.5).sqrt();
            Scene {
                name: name.into(),
                outer,
                inclusions: vec![Shape::Ellipse {
                    center: [-0.15, 0.1],
                    a: 1.5 * b,
                    b,
                    angle: 0.5,
                }],
                phases: PhasePair::new(c(1.0, 2.0), c(1.0, 0.0)),
            }
        }
        "table5" => Scene {
            name: name.into(),
            outer: Shape::Disk {
                center: [0.0, 0.0],
                radius: 5.0,
            },
            inclusions: vec![Shape::AnnulusPhase1 {
                radii: [2.0, 3.0, 5.0],
            }],
            phases: PhasePair::new(c(3.0, 8.0), c(8.0, 6.0)),
        },
        _ => return None,
    };
    Some(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn phase_validation_examples() {
        assert!(validate_phases(&PhasePair::new(c(1.0, 1.0), c(1.0, 0.0))).is_ok());
        let v = validate_phases(&PhasePair::new(c(2.0, 0.0), c(1.0, 0.0))).unwrap_err();
        assert_eq!(v, vec![PhaseViolation::RealRatio]);
        let v = validate_phases(&PhasePair::new(c(-1.0, 1.0), c(1.0, 0.0))).unwrap_err();
        assert!(v.contains(&PhaseViolation::NonPositiveReal { phase: 1 }));
        let v = validate_phases(&PhasePair::new(c(1.0, 1.0), c(1.0, -1.0))).unwrap_err();
        assert_eq!(v, vec![PhaseViolation::EqualModulus]);
    }

    #[test]
    fn all_builtin_phase_pairs_are_admissible() {
        for name in BUILTIN_SCENES {
            let s = builtin_scene(name).unwrap();
            assert!(validate_phases(&s.phases).is_ok(), "{name}");
        }
    }

    #[test]
    fn builtin_area_fractions() {
        let expect = [
            ("table1_row1", 0.16),
            ("table1_row4", 0.16),
            ("table2", 0.12),
            ("table3", 0.1475),
            ("table4", 0.029281),
            ("table5", 0.8),
        ];
        for (name, f1) in expect {
            let s = builtin_scene(name).unwrap();
            let got = area_fraction(&s).unwrap();
            assert!((got - f1).abs() < 1e-6, "{name}: {got}");
            s.validate().unwrap();
        }
    }

    #[test]
    fn full_domain_inclusion_has_fraction_one() {
        let s = Scene {
            name: "full".into(),
            outer: Shape::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            inclusions: vec![Shape::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            }],
            phases: PhasePair::new(c(1.0, 1.0), c(1.0, 0.0)),
        };
        assert!((area_fraction(&s).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            s.validate(),
            Err(SceneError::DegenerateFraction(_))
        ));
    }

    #[test]
    fn overlap_and_outside_are_rejected() {
        let mut s = builtin_scene("table1_row1").unwrap();
        s.inclusions = vec![
            Shape::Disk {
                center: [0.0, 0.0],
                radius: 0.3,
            },
            Shape::Disk {
                center: [0.2, 0.0],
                radius: 0.3,
            },
        ];
        assert_eq!(
            area_fraction(&s),
            Err(SceneError::Overlap {
                first: 0,
                second: 1
            })
        );
        s.inclusions = vec![Shape::Disk {
            center: [0.8, 0.0],
            radius: 0.3,
        }];
        assert_eq!(
            area_fraction(&s),
            Err(SceneError::OutsideDomain { index: 0 })
        );
    }

    #[test]
    fn crescent_polygon_matches_exact_area() {
        let s = builtin_scene("table3").unwrap();
        let cres = &s.inclusions[2];
        let loops = cres.interface_loops(0.002, 12).unwrap();
        let poly = &loops.loops[0];
        let a = geometry::signed_area(poly);
        assert!(a > 0.0, "crescent polygon must be counterclockwise");
        assert!((a - cres.area()).abs() / cres.area() < 1e-4);
        assert!((cres.area() - CRESCENT_FRACTION * PI).abs() < 1e-12);
    }

    #[test]
    fn ellipse_unresolved_at_coarse_h() {
        let s = builtin_scene("table2").unwrap();
        assert!(s.inclusions[0].interface_loops(1.0, 12).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for name in BUILTIN_SCENES {
            let s = builtin_scene(name).unwrap();
            let back = parse_scene(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn parse_concentric_config() {
        let text = r#"{
            "name": "table1_row1",
            "outer": {"kind": "disk", "center": [0, 0], "radius": 1},
            "inclusions": [{"kind": "disk", "center": [0, 0], "radius": 0.4}],
            "sigma1": [1, 1],
            "sigma2": [1, 0]
        }"#;
        let s = parse_scene(text).unwrap();
        assert_eq!(s.name, "table1_row1");
        assert_eq!(s, builtin_scene("table1_row1").unwrap());
    }

    #[test]
    fn parse_errors() {
        let blob = r#"{"name": "x", "outer": {"kind": "disk", "center": [0,0], "radius": 1},
            "inclusions": [{"kind": "blob"}], "sigma1": [1,1], "sigma2": [1,0]}"#;
        assert!(matches!(
            parse_scene(blob),
            Err(SceneError::UnknownShape { ref kind, .. }) if kind == "blob"
        ));
        let missing = r#"{"name": "x", "outer": {"kind": "disk", "center": [0,0], "radius": 1},
            "inclusions": [], "sigma1": [1,1]}"#;
        assert_eq!(
            parse_scene(missing),
            Err(SceneError::MissingField("sigma2".into()))
        );
        let broken = "{\"name\": \n 3,,}";
        assert!(matches!(
            parse_scene(broken),
            Err(SceneError::Parse { line: 2, .. })
        ));
    }
}
