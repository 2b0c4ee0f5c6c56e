//! Boundary samples of Cauchy data and the line integrals built on them.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Point};

#[derive(Debug, Error)]
pub enum CauchyError {
    #[error("boundary grid needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("sample count mismatch: grid has {grid}, data has {data}")]
    LengthMismatch { grid: usize, data: usize },
    #[error("the two excitations are sampled on different boundary grids")]
    GridMismatch,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Counterclockwise quadrature nodes on the outer boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub points: Vec<Point>,
    pub normals: Vec<Point>,
    pub tangents: Vec<Point>,
    /// Arc-length weight attached to each node.
    pub weights: Vec<f64>,
    /// Length of the piece from node i to node i+1.
    pub segments: Vec<f64>,
    pub domain_area: f64,
}

impl BoundaryGrid {
    /// Circle of radius `radius`, `n` nodes uniform in angle starting at angle 0.
    pub fn circle(center: Point, radius: f64, n: usize) -> Self {
        let h = 2.0 * std::f64::consts::PI * radius / n as f64;
        let mut points = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        for i in 0..n {
            let w = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let (s, c) = w.sin_cos();
            points.push([center[0] + radius * c, center[1] + radius * s]);
            normals.push([c, s]);
            tangents.push([-s, c]);
        }
        Self {
            points,
            normals,
            tangents,
            weights: vec![h; n],
            segments: vec![h; n],
            domain_area: std::f64::consts::PI * radius * radius,
        }
    }

    /// Polygonal boundary. Normals are the outward unit normals of the chord
    /// joining the two neighbours; weights are half the adjacent edge lengths.
    pub fn from_polygon(points: Vec<Point>, domain_area: Option<f64>) -> Result<Self, CauchyError> {
        let n = points.len();
        if n < 3 {
            return Err(CauchyError::TooFewPoints { min: 3, got: n });
        }
        let segments: Vec<f64> = (0..n)
            .map(|i| geometry::dist(points[i], points[(i + 1) % n]))
            .collect();
        let mut normals = Vec::with_capacity(n);
        let mut tangents = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let prev = points[(i + n - 1) % n];
            let next = points[(i + 1) % n];
            let (dx, dy) = (next[0] - prev[0], next[1] - prev[1]);
            let len = dx.hypot(dy);
            tangents.push([dx / len, dy / len]);
            normals.push([dy / len, -dx / len]);
            weights.push(0.5 * (segments[(i + n - 1) % n] + segments[i]));
        }
        let area = domain_area.unwrap_or_else(|| geometry::signed_area(&points));
        Ok(Self {
            points,
            normals,
            tangents,
            weights,
            segments,
            domain_area: area,
        })
    }

    /// Grid from externally supplied nodes, normals and weights.
    pub fn from_parts(
        points: Vec<Point>,
        normals: Vec<Point>,
        weights: Vec<f64>,
    ) -> Result<Self, CauchyError> {
        let n = points.len();
        if n < 3 {
            return Err(CauchyError::TooFewPoints { min: 3, got: n });
        }
        if normals.len() != n || weights.len() != n {
            return Err(CauchyError::LengthMismatch {
                grid: n,
                data: normals.len().min(weights.len()),
            });
        }
        let normals: Vec<Point> = normals
            .into_iter()
            .map(|v| {
                let l = v[0].hypot(v[1]);
                [v[0] / l, v[1] / l]
            })
            .collect();
        let tangents = normals.iter().map(|v| [-v[1], v[0]]).collect();
        let segments = (0..n)
            .map(|i| geometry::dist(points[i], points[(i + 1) % n]))
            .collect();
        let domain_area = geometry::signed_area(&points);
        Ok(Self {
            points,
            normals,
            tangents,
            weights,
            segments,
            domain_area,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.segments.iter().sum()
    }

    /// `∮ f ds` by the weights.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }
}

/// One excitation: Dirichlet trace `phi` and flux density `q = σ ∂u/∂n`.
#[derive(Clone, Debug)]
pub struct CauchyPair {
    pub grid: Arc<BoundaryGrid>,
    pub phi: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// Exact tangential derivative of `phi` when known in closed form.
    pub dphi_dt: Option<Vec<Complex64>>,
    pub label: String,
}

impl CauchyPair {
    pub fn new(
        grid: Arc<BoundaryGrid>,
        phi: Vec<Complex64>,
        q: Vec<Complex64>,
        label: impl Into<String>,
    ) -> Result<Self, CauchyError> {
        for len in [phi.len(), q.len()] {
            if len != grid.len() {
                return Err(CauchyError::LengthMismatch {
                    grid: grid.len(),
                    data: len,
                });
            }
        }
        Ok(Self {
            grid,
            phi,
            q,
            dphi_dt: None,
            label: label.into(),
        })
    }

    pub fn with_dphi_dt(mut self, d: Vec<Complex64>) -> Self {
        assert_eq!(d.len(), self.grid.len());
        self.dphi_dt = Some(d);
        self
    }

    /// `|∮ q ds| / ∮ |q| ds`, zero for exactly conserved data.
    pub fn conservation_defect(&self) -> f64 {
        let g = &self.grid;
        let mut net = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for (q, w) in self.q.iter().zip(&g.weights) {
            net += q * w;
            mag += q.norm() * w;
        }
        if mag == 0.0 {
            0.0
        } else {
            net.norm() / mag
        }
    }

    /// Same data multiplied by `e^{iτ}`.
    pub fn rotated(&self, tau: f64) -> Self {
        let e = Complex64::from_polar(1.0, tau);
        Self {
            grid: self.grid.clone(),
            phi: self.phi.iter().map(|v| v * e).collect(),
            q: self.q.iter().map(|v| v * e).collect(),
            dphi_dt: self
                .dphi_dt
                .as_ref()
                .map(|d| d.iter().map(|v| v * e).collect()),
            label: self.label.clone(),
        }
    }
}

fn central_slope(values: &[Complex64], seg: &[f64], i: usize) -> Complex64 {
    let n = values.len();
    let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
    (values[next] - values[prev]) / (seg[prev] + seg[i])
}

/// Cumulative integral of `q ds` from the first node, ψ⁰(x₀) = 0.
///
/// Trapezoid steps with the endpoint-derivative correction
/// `−ℓ²/12·(q'_{i+1} − q'_i)`, which raises the order from 2 to 4 on smooth
/// data. On uniform grids this is the four-point rule
/// `h/24·(−q_{i−1} + 13q_i + 13q_{i+1} − q_{i+2})`.
pub fn stream_potential(c: &CauchyPair) -> Vec<Complex64> {
    let n = c.q.len();
    let seg = &c.grid.segments;
    let slope: Vec<Complex64> = (0..n).map(|i| central_slope(&c.q, seg, i)).collect();
    let mut psi = Vec::with_capacity(n);
    let mut acc = Complex64::new(0.0, 0.0);
    psi.push(acc);
    for i in 0..n - 1 {
        let l = seg[i];
        acc += 0.5 * l * (c.q[i] + c.q[i + 1]) - (l * l / 12.0) * (slope[i + 1] - slope[i]);
        psi.push(acc);
    }
    psi
}

/// Value of the stream potential after one full turn; zero for conserved flux.
pub fn stream_closure(c: &CauchyPair) -> Complex64 {
    let n = c.q.len();
    let psi = stream_potential(c);
    let seg = &c.grid.segments;
    let l = seg[n - 1];
    let s_last = central_slope(&c.q, seg, n - 1);
    let s_first = central_slope(&c.q, seg, 0);
    psi[n - 1] + 0.5 * l * (c.q[n - 1] + c.q[0]) - (l * l / 12.0) * (s_first - s_last)
}

/// ∂φ/∂t: the exact derivative when stored, otherwise central differences on the loop.
pub fn tangential_derivative(c: &CauchyPair) -> Result<Vec<Complex64>, CauchyError> {
    let n = c.phi.len();
    if n < 3 {
        return Err(CauchyError::TooFewPoints { min: 3, got: n });
    }
    if let Some(d) = &c.dphi_dt {
        return Ok(d.clone());
    }
    Ok((0..n)
        .map(|i| central_slope(&c.phi, &c.grid.segments, i))
        .collect())
}

/// Multiplies the real and imaginary parts of each flux sample by
/// independent factors `1 + p·g`, `g` standard normal, drawn in node order
/// (real part first) from a ChaCha8 stream seeded with `seed`.
pub fn add_noise(c: &CauchyPair, p: f64, seed: u64) -> CauchyPair {
    let mut out = c.clone();
    if p == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for q in out.q.iter_mut() {
        let g1: f64 = StandardNormal.sample(&mut rng);
        let g2: f64 = StandardNormal.sample(&mut rng);
        *q = Complex64::new((1.0 + p * g1) * q.re, (1.0 + p * g2) * q.im);
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
    nx: f64,
    ny: f64,
    w: f64,
    phi_re: f64,
    phi_im: f64,
    q_re: f64,
    q_im: f64,
}

pub fn write_csv<W: Write>(c: &CauchyPair, out: W) -> Result<(), CauchyError> {
    let mut wr = csv::Writer::from_writer(out);
    let g = &c.grid;
    for i in 0..g.len() {
        wr.serialize(CsvRow {
            x: g.points[i][0],
            y: g.points[i][1],
            nx: g.normals[i][0],
            ny: g.normals[i][1],
            w: g.weights[i],
            phi_re: c.phi[i].re,
            phi_im: c.phi[i].im,
            q_re: c.q[i].re,
            q_im: c.q[i].im,
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, label: &str) -> Result<CauchyPair, CauchyError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut weights = Vec::new();
    let mut phi = Vec::new();
    let mut q = Vec::new();
    for row in rd.deserialize() {
        let r: CsvRow = row?;
        points.push([r.x, r.y]);
        normals.push([r.nx, r.ny]);
        weights.push(r.w);
        phi.push(Complex64::new(r.phi_re, r.phi_im));
        q.push(Complex64::new(r.q_re, r.q_im));
    }
    let grid = BoundaryGrid::from_parts(points, normals, weights)?;
    CauchyPair::new(Arc::new(grid), phi, q, label)
}

/// Reads one file per excitation; both must list the same nodes.
pub fn read_pair_files(
    first: &Path,
    second: &Path,
) -> Result<(CauchyPair, CauchyPair), CauchyError> {
    let c1 = read_csv(std::fs::File::open(first)?, "phi1")?;
    let mut c2 = read_csv(std::fs::File::open(second)?, "phi2")?;
    if c1.grid.points != c2.grid.points || c1.grid.weights != c2.grid.weights {
        return Err(CauchyError::GridMismatch);
    }
    c2.grid = c1.grid.clone();
    Ok((c1, c2))
}

/// Cauchy data of a closed-form linear potential `u = c·x` in a homogeneous body.
pub fn linear_field_pair(
    grid: Arc<BoundaryGrid>,
    sigma: Complex64,
    c: [Complex64; 2],
    label: &str,
) -> CauchyPair {
    let phi = grid
        .points
        .iter()
        .map(|p| c[0] * p[0] + c[1] * p[1])
        .collect();
    let q = grid
        .normals
        .iter()
        .map(|n| sigma * (c[0] * n[0] + c[1] * n[1]))
        .collect();
    let d = grid
        .tangents
        .iter()
        .map(|t| c[0] * t[0] + c[1] * t[1])
        .collect();
    CauchyPair::new(grid, phi, q, label)
        .expect("lengths match by construction")
        .with_dphi_dt(d)
}
