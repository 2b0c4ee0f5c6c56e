//! Piecewise-linear finite elements for `∇·σ∇u = 0` with Dirichlet data.
//!
//! Boundary values are eliminated, so the interior system is the stiffness
//! matrix restricted to interior nodes. The full stiffness rows at boundary
//! nodes then give the consistent boundary flux.

use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use thiserror::Error;

use crate::cauchy::{BoundaryGrid, CauchyError, CauchyPair};
use crate::functionals::{r_perp, MeasurementSet};
use crate::geometry::{self, Point};
use crate::mesher::Mesh;
use crate::scene::PhasePair;
use crate::sparse::{EnvelopeLdlt, SolverError, SymCsr};

/// Relative residual required of every interior solve.
pub const SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("expected {expected} boundary values, got {got}")]
    BoundaryLength { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solutions live on different meshes")]
    MeshMismatch,
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
}

/// Gradients of the three barycentric coordinates and the area of a triangle.
#[derive(Clone, Copy, Debug)]
struct Element {
    grad: [[f64; 2]; 3],
    area: f64,
}

fn element(a: Point, b: Point, c: Point) -> Element {
    let area = geometry::triangle_signed_area(a, b, c);
    let inv = 1.0 / (2.0 * area);
    let p = [a, b, c];
    let mut grad = [[0.0; 2]; 3];
    for k in 0..3 {
        let (q, r) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        grad[k] = [(q[1] - r[1]) * inv, (r[0] - q[0]) * inv];
    }
    Element { grad, area }
}

/// Factored interior system for one mesh and conductivity pair, reusable
/// across excitations.
pub struct FemSolver {
    pub mesh: Arc<Mesh>,
    pub phases: PhasePair,
    elements: Vec<Element>,
    sigma: Vec<Complex64>,
    full: SymCsr,
    interior: SymCsr,
    /// Node → interior unknown index.
    interior_index: Vec<Option<usize>>,
    interior_nodes: Vec<usize>,
    factor: EnvelopeLdlt,
}

#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub mesh: Arc<Mesh>,
    pub phases: PhasePair,
    pub nodal_potentials: Vec<Complex64>,
    /// ∇u on each triangle.
    pub gradients: Vec<[Complex64; 2]>,
    /// Consistent flux `Q_i = (K u)_i` at the boundary loop nodes.
    boundary_flux: Vec<Complex64>,
    pub label: String,
}

impl FemSolver {
    pub fn new(mesh: Arc<Mesh>, phases: PhasePair) -> Result<Self, FemError> {
        let n = mesh.nodes.len();
        let elements: Vec<Element> = mesh
            .triangles
            .iter()
            .map(|&[a, b, c]| element(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]))
            .collect();
        let sigma: Vec<Complex64> = mesh
            .phase_tag
            .iter()
            .map(|&t| if t == 1 { phases.sigma1 } else { phases.sigma2 })
            .collect();
        let mut on_boundary = vec![false; n];
        for &i in &mesh.boundary_loop {
            on_boundary[i] = true;
        }
        let mut interior_index = vec![None; n];
        let mut interior_nodes = Vec::new();
        for i in 0..n {
            if !on_boundary[i] {
                interior_index[i] = Some(interior_nodes.len());
                interior_nodes.push(i);
            }
        }
        let mut all = Vec::with_capacity(9 * elements.len());
        let mut inner = Vec::with_capacity(9 * elements.len());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let e = &elements[t];
            for a in 0..3 {
                for b in 0..3 {
                    let k = e.area * (e.grad[a][0] * e.grad[b][0] + e.grad[a][1] * e.grad[b][1]);
                    let v = sigma[t] * k;
                    all.push((tri[a], tri[b], v));
                    if let (Some(i), Some(j)) = (interior_index[tri[a]], interior_index[tri[b]]) {
                        inner.push((i, j, v));
                    }
                }
            }
        }
        let full = SymCsr::from_triplets(n, all);
        let interior = SymCsr::from_triplets(interior_nodes.len(), inner);
        let factor = EnvelopeLdlt::factor(&interior)?;
        Ok(Self {
            mesh,
            phases,
            elements,
            sigma,
            full,
            interior,
            interior_index,
            interior_nodes,
            factor,
        })
    }

    /// Solves with `phi[k]` prescribed at `mesh.boundary_loop[k]`.
    pub fn solve(&self, phi: &[Complex64], label: &str) -> Result<FieldSolution, FemError> {
        let mesh = &self.mesh;
        if phi.len() != mesh.boundary_loop.len() {
            return Err(FemError::BoundaryLength {
                expected: mesh.boundary_loop.len(),
                got: phi.len(),
            });
        }
        let n = mesh.nodes.len();
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for (k, &i) in mesh.boundary_loop.iter().enumerate() {
            u[i] = phi[k];
        }
        let rhs: Vec<Complex64> = self
            .interior_nodes
            .iter()
            .map(|&i| {
                -self
                    .full
                    .row(i)
                    .filter(|(j, _)| self.interior_index[*j].is_none())
                    .map(|(j, v)| v * u[j])
                    .sum::<Complex64>()
            })
            .collect();
        let x = self.factor.solve(&self.interior, &rhs, SOLVER_TOL)?;
        for (k, &i) in self.interior_nodes.iter().enumerate() {
            u[i] = x[k];
        }
        let gradients = mesh
            .triangles
            .iter()
            .zip(&self.elements)
            .map(|(tri, e)| {
                let mut g = [Complex64::new(0.0, 0.0); 2];
                for k in 0..3 {
                    g[0] += u[tri[k]] * e.grad[k][0];
                    g[1] += u[tri[k]] * e.grad[k][1];
                }
                g
            })
            .collect();
        let boundary_flux = mesh
            .boundary_loop
            .iter()
            .map(|&i| self.full.row(i).map(|(j, v)| v * u[j]).sum())
            .collect();
        Ok(FieldSolution {
            mesh: mesh.clone(),
            phases: self.phases,
            nodal_potentials: u,
            gradients,
            boundary_flux,
            label: label.to_string(),
        })
    }

    /// `max_i |(K u)_i| / max |K u|` over interior nodes, the weak-form residual.
    pub fn interior_residual(&self, sol: &FieldSolution) -> f64 {
        let ku = self.full.mul(&sol.nodal_potentials);
        let scale: f64 = self.full.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
            * sol
                .nodal_potentials
                .iter()
                .map(|v| v.norm())
                .fold(0.0, f64::max);
        let worst = self
            .interior_nodes
            .iter()
            .map(|&i| ku[i].norm())
            .fold(0.0, f64::max);
        worst / scale.max(f64::MIN_POSITIVE)
    }

    pub fn element_sigma(&self) -> &[Complex64] {
        &self.sigma
    }
}

pub fn solve_dirichlet(
    m: Arc<Mesh>,
    p: PhasePair,
    phi: &[Complex64],
) -> Result<FieldSolution, FemError> {
    FemSolver::new(m, p)?.solve(phi, "")
}

/// Half the lengths of the two boundary edges at each boundary-loop node.
pub fn boundary_weights(mesh: &Mesh) -> Vec<f64> {
    let pts = mesh.boundary_points();
    let n = pts.len();
    (0..n)
        .map(|i| {
            0.5 * (geometry::dist(pts[(i + n - 1) % n], pts[i])
                + geometry::dist(pts[i], pts[(i + 1) % n]))
        })
        .collect()
}

/// Flux density at the boundary-loop nodes: consistent flux over lumped arc weight.
pub fn recover_neumann(sol: &FieldSolution) -> Vec<Complex64> {
    sol.boundary_flux
        .iter()
        .zip(boundary_weights(&sol.mesh))
        .map(|(q, w)| q / w)
        .collect()
}

/// Boundary grid of the mesh outline.
pub fn mesh_boundary_grid(mesh: &Mesh) -> Result<BoundaryGrid, FemError> {
    Ok(BoundaryGrid::from_polygon(mesh.boundary_points(), None)?)
}

/// Cauchy data of a solution on the given outline grid.
pub fn to_cauchy_pair(
    sol: &FieldSolution,
    grid: Arc<BoundaryGrid>,
) -> Result<CauchyPair, FemError> {
    let phi = sol
        .mesh
        .boundary_loop
        .iter()
        .map(|&i| sol.nodal_potentials[i])
        .collect();
    Ok(CauchyPair::new(
        grid,
        phi,
        recover_neumann(sol),
        sol.label.clone(),
    )?)
}

fn re2(g: [Complex64; 2]) -> Vector2<f64> {
    Vector2::new(g[0].re, g[1].re)
}

fn im2(g: [Complex64; 2]) -> Vector2<f64> {
    Vector2::new(g[0].im, g[1].im)
}

/// Area averages of the field products whose boundary forms the functionals
/// module computes, by exact integration of the piecewise-constant gradients.
///
/// With `e = −∇u`, `j = −σ∇u` and tildes for the factor `e^{iθ}`:
/// `a_jk = ⟨j̃′_j·ẽ′_k + j̃″_k·ẽ″_j⟩`, `s_jk = ⟨j̃′_j·ẽ″_k + j̃′_k·ẽ″_j⟩`,
/// `α₁ = ⟨j̃′₁·R⊥j̃′₂⟩`, `α₂ = ⟨ẽ″₁·R⊥ẽ″₂⟩`.
pub fn volume_functionals(
    sol1: &FieldSolution,
    sol2: &FieldSolution,
    theta1: f64,
    theta2: f64,
) -> Result<MeasurementSet, FemError> {
    if !Arc::ptr_eq(&sol1.mesh, &sol2.mesh) && *sol1.mesh != *sol2.mesh {
        return Err(FemError::MeshMismatch);
    }
    let mesh = &sol1.mesh;
    let e = [
        Complex64::from_polar(1.0, theta1),
        Complex64::from_polar(1.0, theta2),
    ];
    let rp: Matrix2<f64> = r_perp();
    let mut a0 = Matrix2::zeros();
    let mut s = Matrix2::zeros();
    let (mut alpha1, mut alpha2) = (0.0, 0.0);
    let mut avg_j = [Vector2::zeros(); 2];
    let mut avg_e = [Vector2::zeros(); 2];
    let mut area = 0.0;
    for t in 0..mesh.triangles.len() {
        let w = mesh.triangle_area(t);
        area += w;
        let sigma = if mesh.phase_tag[t] == 1 {
            sol1.phases.sigma1
        } else {
            sol1.phases.sigma2
        };
        let g = [sol1.gradients[t], sol2.gradients[t]];
        let gt = [0, 1].map(|k| [g[k][0] * e[k], g[k][1] * e[k]]);
        let jt = [0, 1].map(|k| [sigma * gt[k][0], sigma * gt[k][1]]);
        // Both e and j carry a minus sign; bilinear products cancel it.
        for j in 0..2 {
            for k in 0..2 {
                a0[(j, k)] += w * (re2(jt[j]).dot(&re2(gt[k])) + im2(jt[k]).dot(&im2(gt[j])));
                s[(j, k)] += w * (re2(jt[j]).dot(&im2(gt[k])) + re2(jt[k]).dot(&im2(gt[j])));
            }
            avg_j[j] -= re2(jt[j]) * w;
            avg_e[j] -= im2(gt[j]) * w;
        }
        alpha1 += w * re2(jt[0]).dot(&(rp * re2(jt[1])));
        alpha2 += w * im2(gt[0]).dot(&(rp * im2(gt[1])));
    }
    Ok(MeasurementSet {
        a0: a0 / area,
        s: s / area,
        alpha1: alpha1 / area,
        alpha2: alpha2 / area,
        avg_j: avg_j.map(|v| v / area),
        avg_e: avg_e.map(|v| v / area),
    })
}
