//! Boundary functionals of two Cauchy data pairs.
//!
//! Every quantity is bilinear (or linear) in `z e^{iθ}` with `z` one of φ, q,
//! ψ⁰, ∂φ/∂t, and
//!
//! ```text
//! Re(z e^{iθ}) = [z′, −z″]·(cos θ, sin θ)
//! Im(z e^{iθ}) = [z″,  z′]·(cos θ, sin θ)
//! ```
//!
//! so each one is `c₁ᵀ M c₂` for a θ-free 2×2 moment matrix `M` and
//! `c = (cos θ, sin θ)`. The moments are integrated once; a grid point then
//! costs a few dozen flops.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;
use thiserror::Error;

use crate::cauchy::{self, BoundaryGrid, CauchyError, CauchyPair};
use crate::translation::TranslationParams;

#[derive(Debug, Error)]
pub enum FunctionalsError {
    #[error("the two excitations are sampled on different boundary grids")]
    GridMismatch,
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
    #[error("block structure violated: {0}")]
    BlockStructure(String),
}

/// θ-independent moments of both excitations.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    /// `a_jk = c_jᵀ a[j][k] c_k`.
    pub a: [[Matrix2<f64>; 2]; 2],
    /// `s_jk = c_jᵀ s[j][k] c_k`.
    pub s: [[Matrix2<f64>; 2]; 2],
    /// `α₁ = c₁ᵀ alpha1 c₂`.
    pub alpha1: Matrix2<f64>,
    /// `α₂ = c₁ᵀ alpha2 c₂`.
    pub alpha2: Matrix2<f64>,
    /// `⟨j̃′_k⟩ = avg_j[k] c_k`.
    pub avg_j: [Matrix2<f64>; 2],
    /// `⟨ẽ″_k⟩ = avg_e[k] c_k`.
    pub avg_e: [Matrix2<f64>; 2],
    pub domain_area: f64,
}

/// Measured quantities at one (θ₁, θ₂).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub a0: Matrix2<f64>,
    pub s: Matrix2<f64>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub avg_j: [Vector2<f64>; 2],
    pub avg_e: [Vector2<f64>; 2],
}

fn re_parts(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|v| [v.re, -v.im]).collect()
}

fn im_parts(z: &[Complex64]) -> Vec<[f64; 2]> {
    z.iter().map(|v| [v.im, v.re]).collect()
}

/// `M[a][b] = ⟨u_a v_b⟩`.
fn moment(w: &[f64], area: f64, u: &[[f64; 2]], v: &[[f64; 2]]) -> Matrix2<f64> {
    let mut m = Matrix2::zeros();
    for i in 0..w.len() {
        for a in 0..2 {
            for b in 0..2 {
                m[(a, b)] += w[i] * u[i][a] * v[i][b];
            }
        }
    }
    m / area
}

fn same_grid(a: &Arc<BoundaryGrid>, b: &Arc<BoundaryGrid>) -> bool {
    Arc::ptr_eq(a, b) || (a.points == b.points && a.weights == b.weights)
}

pub fn build_moments(c1: &CauchyPair, c2: &CauchyPair) -> Result<MomentTable, FunctionalsError> {
    if !same_grid(&c1.grid, &c2.grid) {
        return Err(FunctionalsError::GridMismatch);
    }
    let g = &c1.grid;
    let (w, area) = (&g.weights[..], g.domain_area);
    let re_q = [re_parts(&c1.q), re_parts(&c2.q)];
    let im_q = [im_parts(&c1.q), im_parts(&c2.q)];
    let re_phi = [re_parts(&c1.phi), re_parts(&c2.phi)];
    let im_phi = [im_parts(&c1.phi), im_parts(&c2.phi)];

    let mut a = [[Matrix2::zeros(); 2]; 2];
    let mut s = [[Matrix2::zeros(); 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            a[j][k] = moment(w, area, &re_q[j], &re_phi[k])
                + moment(w, area, &im_q[k], &im_phi[j]).transpose();
            s[j][k] = moment(w, area, &re_q[j], &im_phi[k])
                + moment(w, area, &re_q[k], &im_phi[j]).transpose();
        }
    }

    let psi2 = re_parts(&cauchy::stream_potential(c2));
    let dphi2 = im_parts(&cauchy::tangential_derivative(c2)?);
    let alpha1 = -moment(w, area, &re_q[0], &psi2);
    let alpha2 = moment(w, area, &im_phi[0], &dphi2);

    let xs: Vec<[f64; 2]> = g.points.clone();
    let ns: Vec<[f64; 2]> = g.normals.clone();
    let avg_j = [0, 1].map(|k| -moment(w, area, &xs, &re_q[k]));
    let avg_e = [0, 1].map(|k| -moment(w, area, &ns, &im_phi[k]));

    Ok(MomentTable {
        a,
        s,
        alpha1,
        alpha2,
        avg_j,
        avg_e,
        domain_area: area,
    })
}

fn trig(theta: f64) -> Vector2<f64> {
    let (s, c) = theta.sin_cos();
    Vector2::new(c, s)
}

fn bilinear(u: &Vector2<f64>, m: &Matrix2<f64>, v: &Vector2<f64>) -> f64 {
    u.dot(&(m * v))
}

pub fn evaluate_measurements(t: &MomentTable, theta1: f64, theta2: f64) -> MeasurementSet {
    evaluate_at(t, &trig(theta1), &trig(theta2))
}

/// Same as [`evaluate_measurements`] with `(cos θ, sin θ)` precomputed.
pub fn evaluate_at(t: &MomentTable, c1: &Vector2<f64>, c2: &Vector2<f64>) -> MeasurementSet {
    let c = [*c1, *c2];
    let mut a0 = Matrix2::zeros();
    let mut s = Matrix2::zeros();
    for j in 0..2 {
        for k in 0..2 {
            a0[(j, k)] = bilinear(&c[j], &t.a[j][k], &c[k]);
            s[(j, k)] = bilinear(&c[j], &t.s[j][k], &c[k]);
        }
    }
    MeasurementSet {
        a0,
        s,
        alpha1: bilinear(&c[0], &t.alpha1, &c[1]),
        alpha2: bilinear(&c[0], &t.alpha2, &c[1]),
        avg_j: [t.avg_j[0] * c[0], t.avg_j[1] * c[1]],
        avg_e: [t.avg_e[0] * c[0], t.avg_e[1] * c[1]],
    }
}

/// Per-point quadrature of the same functionals, without moments. Kept as a
/// reference path for testing and timing.
pub struct DirectQuadrature {
    c1: CauchyPair,
    c2: CauchyPair,
    psi2: Vec<Complex64>,
    dphi2: Vec<Complex64>,
}

impl DirectQuadrature {
    pub fn new(c1: &CauchyPair, c2: &CauchyPair) -> Result<Self, FunctionalsError> {
        if !same_grid(&c1.grid, &c2.grid) {
            return Err(FunctionalsError::GridMismatch);
        }
        Ok(Self {
            c1: c1.clone(),
            c2: c2.clone(),
            psi2: cauchy::stream_potential(c2),
            dphi2: cauchy::tangential_derivative(c2)?,
        })
    }

    pub fn evaluate(&self, theta1: f64, theta2: f64) -> MeasurementSet {
        let g = &self.c1.grid;
        let inv = 1.0 / g.domain_area;
        let e = [
            Complex64::from_polar(1.0, theta1),
            Complex64::from_polar(1.0, theta2),
        ];
        let data = [&self.c1, &self.c2];
        let mut a0 = Matrix2::zeros();
        let mut s = Matrix2::zeros();
        let (mut alpha1, mut alpha2) = (0.0, 0.0);
        let mut avg_j = [Vector2::zeros(); 2];
        let mut avg_e = [Vector2::zeros(); 2];
        for i in 0..g.len() {
            let w = g.weights[i] * inv;
            let q = [data[0].q[i] * e[0], data[1].q[i] * e[1]];
            let phi = [data[0].phi[i] * e[0], data[1].phi[i] * e[1]];
            for j in 0..2 {
                for k in 0..2 {
                    a0[(j, k)] += w * (q[j].re * phi[k].re + q[k].im * phi[j].im);
                    s[(j, k)] += w * (q[j].re * phi[k].im + q[k].re * phi[j].im);
                }
                let x = Vector2::new(g.points[i][0], g.points[i][1]);
                let n = Vector2::new(g.normals[i][0], g.normals[i][1]);
                avg_j[j] -= x * (w * q[j].re);
                avg_e[j] -= n * (w * phi[j].im);
            }
            alpha1 -= w * q[0].re * (self.psi2[i] * e[1]).re;
            alpha2 += w * phi[0].im * (self.dphi2[i] * e[1]).im;
        }
        MeasurementSet {
            a0,
            s,
            alpha1,
            alpha2,
            avg_j,
            avg_e,
        }
    }
}

/// Inputs of the bound formulas at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub atilde: Matrix2<f64>,
    pub b: f64,
    pub m_mat: Matrix2<f64>,
    pub m: f64,
    pub g: Matrix4<f64>,
}

/// `R⊥ = [[0, 1], [−1, 0]]`.
pub fn r_perp() -> Matrix2<f64> {
    Matrix2::new(0.0, 1.0, -1.0, 0.0)
}

/// The 4×4 matrix of averages, rows (j̃′-block, ẽ″-block, rotated j̃′, rotated ẽ″).
pub fn c_matrix(ms: &MeasurementSet) -> Matrix4<f64> {
    let (j1, j2) = (ms.avg_j[0], ms.avg_j[1]);
    let (e1, e2) = (ms.avg_e[0], ms.avg_e[1]);
    Matrix4::new(
        j1[0], j2[0], j1[1], j2[1], //
        e1[0], e2[0], e1[1], e2[1], //
        -j1[1], -j2[1], j1[0], j2[0], //
        -e1[1], -e2[1], e1[0], e2[0],
    ) * FRAC_1_SQRT_2
}

/// `[[X, yR⊥], [−yR⊥, X]]`.
pub fn block_rperp(x: &Matrix2<f64>, y: f64) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    let r = r_perp() * y;
    out.fixed_view_mut::<2, 2>(0, 0).copy_from(x);
    out.fixed_view_mut::<2, 2>(2, 2).copy_from(x);
    out.fixed_view_mut::<2, 2>(0, 2).copy_from(&r);
    out.fixed_view_mut::<2, 2>(2, 0).copy_from(&(-r));
    out
}

/// Ã, b, M and m without forming or checking G. With `u`, `w` the two rows
/// `pᵀ` picks out of C, G = uuᵀ + wwᵀ.
pub fn projected_scalars(
    ms: &MeasurementSet,
    tp: &TranslationParams,
) -> (Matrix2<f64>, f64, Matrix2<f64>, f64) {
    let (j1, j2) = (ms.avg_j[0], ms.avg_j[1]);
    let (e1, e2) = (ms.avg_e[0], ms.avg_e[1]);
    let p = tp.p * FRAC_1_SQRT_2;
    let mix = |a: f64, b: f64| p[0] * a + p[1] * b;
    let u = [mix(j1[0], e1[0]), mix(j2[0], e2[0]), mix(j2[1], e2[1])];
    let w = [mix(-j1[1], -e1[1]), mix(-j2[1], -e2[1]), mix(j2[0], e2[0])];
    let m_mat = Matrix2::new(
        u[0] * u[0] + w[0] * w[0],
        u[0] * u[1] + w[0] * w[1],
        u[0] * u[1] + w[0] * w[1],
        u[1] * u[1] + w[1] * w[1],
    );
    let m = u[0] * u[2] + w[0] * w[2];
    (
        ms.a0 + ms.s * tp.t3,
        ms.alpha1 * tp.t1 + ms.alpha2 * tp.t2,
        m_mat,
        m,
    )
}

pub fn assemble_bound_inputs(
    ms: &MeasurementSet,
    tp: &TranslationParams,
) -> Result<BoundInputs, FunctionalsError> {
    let atilde = ms.a0 + ms.s * tp.t3;
    let b = ms.alpha1 * tp.t1 + ms.alpha2 * tp.t2;
    let c = c_matrix(ms);
    let p = tp.projector();
    let mut bd = Matrix4::zeros();
    bd.fixed_view_mut::<2, 2>(0, 0).copy_from(&p);
    bd.fixed_view_mut::<2, 2>(2, 2).copy_from(&p);
    let g = c.transpose() * bd * c;
    let m_mat: Matrix2<f64> = g.fixed_view::<2, 2>(0, 0).into_owned();
    let m = g[(0, 3)];

    let tol = 1e-10 * (1.0 + g.norm());
    let expect = block_rperp(&m_mat, m);
    let dev = (g - expect).abs().max();
    if dev > tol {
        return Err(FunctionalsError::BlockStructure(format!(
            "G deviates from [[M, mR], [-mR, M]] by {dev:e}"
        )));
    }
    let det = m_mat.determinant();
    if (m * m - det).abs() > 1e-8 * (1.0 + det.abs()) {
        return Err(FunctionalsError::BlockStructure(format!(
            "m^2 = {:e} but det M = {det:e}",
            m * m
        )));
    }
    Ok(BoundInputs {
        atilde,
        b,
        m_mat,
        m,
        g,
    })
}
