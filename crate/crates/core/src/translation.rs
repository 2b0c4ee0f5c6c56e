//! Translation parameters (t₁, t₂, t₃) for the lower and upper bounds, and
//! the projected harmonic-mean minimum used to verify them.
//!
//! On the lower side three of the four matrices `D_{t₃}(σ_j) ± T` are
//! singular and only `P₁⁺` keeps full rank; the upper side is the same
//! construction with the phases exchanged, leaving `P₂⁺` regular.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::scene::{validate_phases, PhasePair, PhaseViolation};

#[derive(Debug, Error, PartialEq)]
pub enum TranslationError {
    #[error("inadmissible conductivity pair: {0:?}")]
    Inadmissible(Vec<PhaseViolation>),
    #[error("Re(sigma) must be positive, got {0}")]
    NonPositiveReal(f64),
    #[error("no root for t1 satisfies the sign criterion")]
    NoAdmissibleRoot,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix has negative eigenvalue {0}")]
    NotPsd(f64),
    #[error("dimension mismatch")]
    Dimension,
    #[error("f1 and f2 must be positive")]
    NonPositiveWeight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranslationParams {
    pub side: Side,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    /// `D_{t₃}` for phase 1 and phase 2.
    pub d1: Matrix2<f64>,
    pub d2: Matrix2<f64>,
    pub p1p: Matrix2<f64>,
    pub p1m: Matrix2<f64>,
    pub p2p: Matrix2<f64>,
    pub p2m: Matrix2<f64>,
    /// Unit vector spanning the range of the rank-one `P₂⁺` (lower) or `P₁⁺` (upper).
    pub p: Vector2<f64>,
    /// tr P₂⁺ (lower) or tr P₁⁺ (upper).
    pub coef_tr_p: f64,
    /// det P₁⁺ (lower) or det P₂⁺ (upper).
    pub coef_det_p: f64,
    /// det(P₁⁺ − P₂⁺).
    pub coef_det_diff: f64,
}

pub fn d_matrix(sigma: Complex64, t3: f64) -> Result<Matrix2<f64>, TranslationError> {
    let (a, b) = (sigma.re, sigma.im);
    if !(a > 0.0) {
        return Err(TranslationError::NonPositiveReal(a));
    }
    let off = b / a + t3;
    Ok(Matrix2::new(1.0 / a, off, off, (a * a + b * b) / a))
}

pub fn compute_r(p: &PhasePair) -> Result<f64, TranslationError> {
    validate_phases(p).map_err(TranslationError::Inadmissible)?;
    let (s1, s2) = (p.sigma1, p.sigma2);
    Ok((s1.norm_sqr() - s2.norm_sqr()) / (2.0 * (s1.re * s2.im - s2.re * s1.im)))
}

/// `−((σ₁′−σ₂′)² + (σ₁″−σ₂″)²)/(σ₁′σ₂′)`.
pub fn det_diff_formula(p: &PhasePair) -> f64 {
    let (s1, s2) = (p.sigma1, p.sigma2);
    -((s1 - s2).norm_sqr()) / (s1.re * s2.re)
}

/// Unit eigenvector of the largest eigenvalue, first nonzero component positive.
fn principal_direction(m: &Matrix2<f64>) -> Vector2<f64> {
    let eig = SymmetricEigen::new(*m);
    let k = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    let mut v: Vector2<f64> = eig.eigenvectors.column(k).into_owned();
    let lead = if v[0].abs() > 1e-14 { v[0] } else { v[1] };
    if lead < 0.0 {
        v = -v;
    }
    v.normalize()
}

pub fn lower_params(p: &PhasePair) -> Result<TranslationParams, TranslationError> {
    side_params(p, Side::Lower)
}

pub fn upper_params(p: &PhasePair) -> Result<TranslationParams, TranslationError> {
    side_params(p, Side::Upper)
}

/// Builds the parameter set for fixed (t₁, t₂, t₃).
pub fn params_from_t(
    p: &PhasePair,
    side: Side,
    r: f64,
    t: [f64; 3],
) -> Result<TranslationParams, TranslationError> {
    let [t1, t2, t3] = t;
    let d1 = d_matrix(p.sigma1, t3)?;
    let d2 = d_matrix(p.sigma2, t3)?;
    let tm = Matrix2::new(t1, 0.0, 0.0, t2);
    let (p1p, p1m, p2p, p2m) = (d1 + tm, d1 - tm, d2 + tm, d2 - tm);
    let (rank_one, tr, det) = match side {
        Side::Lower => (p2p, p2p.trace(), p1p.determinant()),
        Side::Upper => (p1p, p1p.trace(), p2p.determinant()),
    };
    Ok(TranslationParams {
        side,
        r,
        t1,
        t2,
        t3,
        d1,
        d2,
        p1p,
        p1m,
        p2p,
        p2m,
        p: principal_direction(&rank_one),
        coef_tr_p: tr,
        coef_det_p: det,
        coef_det_diff: (p1p - p2p).determinant(),
    })
}

fn side_params(p: &PhasePair, side: Side) -> Result<TranslationParams, TranslationError> {
    let r = compute_r(p)?;
    // `sa` keeps full rank; `sb` is the phase whose circle fixes t₁.
    let (sa, sb) = match side {
        Side::Lower => (p.sigma1, p.sigma2),
        Side::Upper => (p.sigma2, p.sigma1),
    };
    let root = ((r * r + 1.0) * sb.norm_sqr()).sqrt();
    let mut best: Option<TranslationParams> = None;
    for sign in [1.0, -1.0] {
        let t1 = 1.0 / (r * sb.im + sign * root);
        if !t1.is_finite() {
            continue;
        }
        let crit = (1.0 / sa.re - t1) * t1 * (sa.norm_sqr() - sb.norm_sqr());
        let scale = (t1 / sa.re).abs() * (sa.norm_sqr() + sb.norm_sqr());
        if crit < -1e-14 * scale {
            continue;
        }
        let t = [t1, -sb.norm_sqr() * t1, r * sb.re * t1];
        let cand = params_from_t(p, side, r, t)?;
        // Ties go to the root with the larger regular determinant.
        if best
            .as_ref()
            .map_or(true, |b| cand.coef_det_p > b.coef_det_p)
        {
            best = Some(cand);
        }
    }
    best.ok_or(TranslationError::NoAdmissibleRoot)
}

fn det_tol(m: &Matrix2<f64>) -> f64 {
    1e-10 * m.norm_squared().max(1e-300)
}

impl TranslationParams {
    /// Checks every structural property of the parameter set; returns the
    /// list of failures.
    pub fn check_invariants(&self, phases: &PhasePair) -> Result<(), Vec<String>> {
        let mut bad = Vec::new();
        let (zero, positive): (Vec<(&str, &Matrix2<f64>)>, (&str, &Matrix2<f64>)) = match self.side
        {
            Side::Lower => (
                vec![("P1-", &self.p1m), ("P2+", &self.p2p), ("P2-", &self.p2m)],
                ("P1+", &self.p1p),
            ),
            Side::Upper => (
                vec![("P1+", &self.p1p), ("P1-", &self.p1m), ("P2-", &self.p2m)],
                ("P2+", &self.p2p),
            ),
        };
        for (name, m) in zero {
            if m.determinant().abs() > det_tol(m) {
                bad.push(format!("det {name} = {} is not zero", m.determinant()));
            }
        }
        if !(positive.1.determinant() > det_tol(positive.1)) {
            bad.push(format!(
                "det {} = {} is not positive",
                positive.0,
                positive.1.determinant()
            ));
        }
        for (name, m) in [
            ("P1+", &self.p1p),
            ("P1-", &self.p1m),
            ("P2+", &self.p2p),
            ("P2-", &self.p2m),
        ] {
            let lo = m.symmetric_eigenvalues().min();
            if lo < -1e-12 * m.norm().max(1.0) {
                bad.push(format!("{name} has eigenvalue {lo}"));
            }
        }
        for s in [phases.sigma1, phases.sigma2] {
            if self.t1.abs() > (1.0 / s.re) * (1.0 + 1e-12) {
                bad.push(format!(
                    "|t1| = {} exceeds 1/Re(sigma) = {}",
                    self.t1.abs(),
                    1.0 / s.re
                ));
            }
        }
        let formula = det_diff_formula(phases);
        if !(self.coef_det_diff < 0.0)
            || (self.coef_det_diff - formula).abs() > 1e-10 * formula.abs()
        {
            bad.push(format!(
                "det(P1+ - P2+) = {} differs from {formula}",
                self.coef_det_diff
            ));
        }
        let (sa, sb) = match self.side {
            Side::Lower => (phases.sigma1, phases.sigma2),
            Side::Upper => (phases.sigma2, phases.sigma1),
        };
        let crit = (1.0 / sa.re - self.t1) * self.t1 * (sa.norm_sqr() - sb.norm_sqr());
        if crit < -1e-12 * (sa.norm_sqr() + sb.norm_sqr()) / sa.re.powi(2) {
            bad.push(format!("sign criterion violated: {crit}"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(bad)
        }
    }

    /// `P = ppᵀ`, the projection onto the range of the rank-one matrix.
    pub fn projector(&self) -> Matrix2<f64> {
        self.p * self.p.transpose()
    }

    /// `F(f₁)`: the coefficient multiplying the projected averages in the
    /// positivity condition at volume fraction `f1`.
    pub fn f_of(&self, f1: f64) -> f64 {
        1.0 / (-f1 * self.coef_det_diff / (self.coef_tr_p * self.coef_det_p) + 1.0 / self.coef_tr_p)
    }

    /// Circle `t₁(x²+y²) + (1+t₁t₂−t₃²)x − 2t₃y + t₂` evaluated at (x, y).
    pub fn circle_residual(&self, x: f64, y: f64) -> f64 {
        let (t1, t2, t3) = (self.t1, self.t2, self.t3);
        t1 * (x * x + y * y) + (1.0 + t1 * t2 - t3 * t3) * x - 2.0 * t3 * y + t2
    }
}

/// Eigen-decomposition based helpers for symmetric PSD matrices.
struct SymSpectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    tol: f64,
}

impl SymSpectrum {
    fn new(m: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(m.clone());
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let tol = 1e-10 * top.max(1e-300) * m.nrows() as f64;
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
            tol,
        }
    }

    fn pinv(&self) -> DMatrix<f64> {
        let n = self.values.len();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            if self.values[k] > self.tol {
                let v = self.vectors.column(k);
                out += (v * v.transpose()) / self.values[k];
            }
        }
        out
    }

    fn kernel(&self) -> Vec<DVector<f64>> {
        (0..self.values.len())
            .filter(|&k| self.values[k] <= self.tol)
            .map(|k| self.vectors.column(k).into_owned())
            .collect()
    }
}

fn check_psd(m: &DMatrix<f64>) -> Result<(), TranslationError> {
    let scale = m.norm().max(1.0);
    if (m - m.transpose()).norm() > 1e-12 * scale {
        return Err(TranslationError::NotSymmetric);
    }
    let lo = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if lo < -1e-12 * scale {
        return Err(TranslationError::NotPsd(lo));
    }
    Ok(())
}

/// Symmetric pseudo-inverse with a relative eigenvalue cut-off.
pub fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    SymSpectrum::new(m).pinv()
}

/// `min { f₁E₁·L₁E₁ + f₂E₂·L₂E₂ : f₁E₁ + f₂E₂ = E₀ }` in closed form:
/// `(πE₀)·[π(f₁L₁⁺ + f₂L₂⁺)π]⁺(πE₀)` with π the orthogonal projection onto
/// `range L₁ ∩ range L₂` and ⁺ the pseudo-inverse.
pub fn constrained_quadratic_min(
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    f1: f64,
    f2: f64,
    e0: &DVector<f64>,
) -> Result<f64, TranslationError> {
    let n = e0.len();
    if l1.shape() != (n, n) || l2.shape() != (n, n) {
        return Err(TranslationError::Dimension);
    }
    if !(f1 > 0.0 && f2 > 0.0) {
        return Err(TranslationError::NonPositiveWeight);
    }
    check_psd(l1)?;
    check_psd(l2)?;
    let (s1, s2) = (SymSpectrum::new(l1), SymSpectrum::new(l2));

    // ker L₁ + ker L₂ is the orthogonal complement of the range intersection.
    let kernel: Vec<DVector<f64>> = s1.kernel().into_iter().chain(s2.kernel()).collect();
    let mut pi = DMatrix::<f64>::identity(n, n);
    if !kernel.is_empty() {
        let k = DMatrix::from_columns(&kernel);
        let svd = k.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.max();
        for (j, sv) in svd.singular_values.iter().enumerate() {
            if *sv > 1e-10 * top {
                let c = u.column(j);
                pi -= c * c.transpose();
            }
        }
    }
    let pe = &pi * e0;
    if pe.norm() <= 1e-14 * e0.norm().max(1e-300) {
        return Ok(0.0);
    }
    let h = &pi * (s1.pinv() * f1 + s2.pinv() * f2) * &pi;
    let h = (&h + h.transpose()) * 0.5;
    Ok(pe.dot(&(pinv_sym(&h) * &pe)))
}
