//! Closed-form Cauchy data for concentric layered disks under linear
//! Dirichlet data `φ = c·x`.
//!
//! In layer k the potential is `(A_k ρ + B_k/ρ)(c·x̂)`, with `B_1 = 0` so the
//! core stays regular. Continuity of `u` and `σ ∂u/∂ρ` across each interface
//! gives a two-term transfer step, and the result is scaled so `u = c·x` on
//! the outer circle.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::cauchy::{BoundaryGrid, CauchyPair};
use crate::geometry::Point;
use crate::scene::{Scene, Shape};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("radii must be positive and strictly increasing")]
    BadRadii,
    #[error("need one conductivity per layer ({layers} radii, {sigmas} conductivities)")]
    LayerCount { layers: usize, sigmas: usize },
    #[error("layer {0} has Re(sigma) <= 0")]
    NonPositiveReal(usize),
    #[error("at least 16 samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("singular transfer system")]
    Singular,
    #[error("scene is not a concentric layered disk centered at the origin")]
    NotLayered,
}

/// Concentric disks centered at the origin; `radii.last()` is the body.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredDiskSpec {
    pub radii: Vec<f64>,
    /// Innermost layer first.
    pub layer_sigma: Vec<Complex64>,
    pub dirichlet_coeff: [Complex64; 2],
}

impl LayeredDiskSpec {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        if self.radii.is_empty()
            || self.radii[0] <= 0.0
            || self.radii.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(AnalyticError::BadRadii);
        }
        if self.layer_sigma.len() != self.radii.len() {
            return Err(AnalyticError::LayerCount {
                layers: self.radii.len(),
                sigmas: self.layer_sigma.len(),
            });
        }
        if let Some(k) = self.layer_sigma.iter().position(|s| !(s.re > 0.0)) {
            return Err(AnalyticError::NonPositiveReal(k));
        }
        Ok(())
    }

    /// Per-layer (A_k, B_k) after scaling to the boundary data.
    pub fn coefficients(&self) -> Result<Vec<(Complex64, Complex64)>, AnalyticError> {
        self.validate()?;
        let mut a = Complex64::new(1.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        let mut out = vec![(a, b)];
        for k in 0..self.radii.len() - 1 {
            let r = self.radii[k];
            let u = a * r + b / r;
            let s = self.layer_sigma[k] * (a - b / (r * r)) / self.layer_sigma[k + 1];
            a = (u / r + s) / 2.0;
            b = r * (u - s * r) / 2.0;
            out.push((a, b));
        }
        let rn = *self.radii.last().unwrap();
        let edge = a * rn + b / rn;
        if !(edge.norm() > 0.0) || !edge.re.is_finite() {
            return Err(AnalyticError::Singular);
        }
        let scale = rn / edge;
        Ok(out
            .into_iter()
            .map(|(a, b)| (a * scale, b * scale))
            .collect())
    }

    /// Potential at an interior point.
    pub fn potential_at(&self, p: Point) -> Result<Complex64, AnalyticError> {
        let coef = self.coefficients()?;
        let rho = p[0].hypot(p[1]);
        let k = self
            .radii
            .iter()
            .position(|&r| rho <= r)
            .unwrap_or(self.radii.len() - 1);
        let (a, b) = coef[k];
        let cx = self.dirichlet_coeff[0] * p[0] + self.dirichlet_coeff[1] * p[1];
        if rho == 0.0 {
            return Ok(a * cx);
        }
        Ok((a + b / (rho * rho)) * cx)
    }

    /// Layered description of a concentric scene, if it is one.
    pub fn from_scene(scene: &Scene, c: [Complex64; 2]) -> Result<Self, AnalyticError> {
        let (center, outer_r) = scene.outer_disk().ok_or(AnalyticError::NotLayered)?;
        if center != [0.0, 0.0] {
            return Err(AnalyticError::NotLayered);
        }
        let (s1, s2) = (scene.phases.sigma1, scene.phases.sigma2);
        let (radii, layer_sigma) = match scene.inclusions.as_slice() {
            [] => (vec![outer_r], vec![s2]),
            [Shape::Disk { center, radius }] if *center == [0.0, 0.0] && *radius < outer_r => {
                (vec![*radius, outer_r], vec![s1, s2])
            }
            [Shape::AnnulusPhase1 { radii }] if radii[2] == outer_r => {
                (radii.to_vec(), vec![s1, s2, s1])
            }
            _ => return Err(AnalyticError::NotLayered),
        };
        Ok(Self {
            radii,
            layer_sigma,
            dirichlet_coeff: c,
        })
    }
}

/// Cauchy data at `n_samples` uniform angles on the outer circle, including
/// the exact tangential derivative of φ.
pub fn layered_cauchy(
    spec: &LayeredDiskSpec,
    n_samples: usize,
) -> Result<CauchyPair, AnalyticError> {
    if n_samples < 16 {
        return Err(AnalyticError::TooFewSamples(n_samples));
    }
    let grid = Arc::new(BoundaryGrid::circle(
        [0.0, 0.0],
        *spec.radii.last().unwrap_or(&1.0),
        n_samples,
    ));
    layered_cauchy_on(spec, grid)
}

/// As [`layered_cauchy`], on an existing circular grid.
pub fn layered_cauchy_on(
    spec: &LayeredDiskSpec,
    grid: Arc<BoundaryGrid>,
) -> Result<CauchyPair, AnalyticError> {
    let coef = spec.coefficients()?;
    let rn = *spec.radii.last().unwrap();
    let (a, b) = *coef.last().unwrap();
    let sigma = *spec.layer_sigma.last().unwrap();
    let radial = sigma * (a - b / (rn * rn));
    let c = spec.dirichlet_coeff;
    let dot = |v: Point| c[0] * v[0] + c[1] * v[1];
    let phi = grid.normals.iter().map(|n| dot(*n) * rn).collect();
    let q = grid.normals.iter().map(|n| radial * dot(*n)).collect();
    let d = grid.tangents.iter().map(|t| dot(*t)).collect();
    let label = if c[1] == Complex64::new(0.0, 0.0) {
        "phi1"
    } else {
        "phi2"
    };
    Ok(CauchyPair::new(grid, phi, q, label)
        .map_err(|_| AnalyticError::Singular)?
        .with_dphi_dt(d))
}
