//! Bound formulas L₁, L₂, U₁, U₂ and their optimization over (θ₁, θ₂).

use std::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::functionals::{
    assemble_bound_inputs, block_rperp, evaluate_at, evaluate_measurements, projected_scalars,
    BoundInputs, FunctionalsError, MeasurementSet, MomentTable,
};
use crate::translation::{Side, TranslationParams};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("grid_n must be at least 1")]
    EmptyGrid,
    #[error("translation parameters are for the {0:?} side")]
    WrongSide(Side),
    #[error("every grid point was skipped for the {0} bound")]
    AllSkipped(&'static str),
    #[error(transparent)]
    Functionals(#[from] FunctionalsError),
}

fn adjugate(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// The two ratios that replace `1/tr P` in the bounds, or `None` where the
/// denominator is not safely positive.
fn ratios(bi: &BoundInputs) -> (Option<f64>, Option<f64>) {
    ratios_of(&bi.atilde, bi.b, &bi.m_mat, bi.m)
}

fn ratios_of(a: &Matrix2<f64>, b: f64, m_mat: &Matrix2<f64>, m: f64) -> (Option<f64>, Option<f64>) {
    let scale = a.norm().max(b.abs()).max(f64::MIN_POSITIVE);
    let tr = a.trace();
    let first = (tr > 1e-12 * scale).then(|| m_mat.trace() / tr);
    let den = a.determinant() - b * b;
    let second =
        (den > 1e-12 * scale * scale).then(|| ((a * adjugate(m_mat)).trace() - 2.0 * b * m) / den);
    (first, second)
}

/// L₁, L₂ from assembled inputs; −∞ marks a skipped formula.
pub fn lower_from_inputs(bi: &BoundInputs, tp: &TranslationParams) -> (f64, f64) {
    lower_from_ratios(ratios(bi), tp)
}

fn lower_from_ratios((r1, r2): (Option<f64>, Option<f64>), tp: &TranslationParams) -> (f64, f64) {
    let k = -tp.coef_tr_p * tp.coef_det_p / tp.coef_det_diff;
    let f = |r: Option<f64>| r.map_or(f64::NEG_INFINITY, |r| k * (r - 1.0 / tp.coef_tr_p));
    (f(r1), f(r2))
}

/// U₁, U₂ from assembled inputs; +∞ marks a skipped formula.
pub fn upper_from_inputs(bi: &BoundInputs, tp: &TranslationParams) -> (f64, f64) {
    upper_from_ratios(ratios(bi), tp)
}

fn upper_from_ratios((r1, r2): (Option<f64>, Option<f64>), tp: &TranslationParams) -> (f64, f64) {
    let k = tp.coef_tr_p * tp.coef_det_p / tp.coef_det_diff;
    let f = |r: Option<f64>| r.map_or(f64::INFINITY, |r| 1.0 + k * (r - 1.0 / tp.coef_tr_p));
    (f(r1), f(r2))
}

pub fn lower_bounds_at(
    ms: &MeasurementSet,
    tp: &TranslationParams,
) -> Result<(f64, f64), BoundsError> {
    if tp.side != Side::Lower {
        return Err(BoundsError::WrongSide(tp.side));
    }
    Ok(lower_from_inputs(&assemble_bound_inputs(ms, tp)?, tp))
}

pub fn upper_bounds_at(
    ms: &MeasurementSet,
    tp: &TranslationParams,
) -> Result<(f64, f64), BoundsError> {
    if tp.side != Side::Upper {
        return Err(BoundsError::WrongSide(tp.side));
    }
    Ok(upper_from_inputs(&assemble_bound_inputs(ms, tp)?, tp))
}

/// Bound grids and the optimized interval.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub grid_n: usize,
    pub thetas: Vec<f64>,
    /// Row-major grids, index `i1 * grid_n + i2`.
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub raw_lower: f64,
    pub raw_upper: f64,
    /// `raw_lower`, `raw_upper` clamped to [0, 1].
    pub lower: f64,
    pub upper: f64,
    pub lower_clamped: bool,
    pub upper_clamped: bool,
    pub arg_lower: (usize, usize),
    pub arg_upper: (usize, usize),
    pub skipped_lower: usize,
    pub skipped_upper: usize,
}

impl BoundsReport {
    pub fn at(&self, grid: &[f64], i1: usize, i2: usize) -> f64 {
        grid[i1 * self.grid_n + i2]
    }
}

pub fn theta_grid(grid_n: usize) -> Vec<f64> {
    (0..grid_n)
        .map(|i| 2.0 * PI * i as f64 / grid_n as f64)
        .collect()
}

type Row = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

pub fn optimize_grid(
    mt: &MomentTable,
    lower_tp: &TranslationParams,
    upper_tp: &TranslationParams,
    grid_n: usize,
) -> Result<BoundsReport, BoundsError> {
    if grid_n == 0 {
        return Err(BoundsError::EmptyGrid);
    }
    if lower_tp.side != Side::Lower {
        return Err(BoundsError::WrongSide(lower_tp.side));
    }
    if upper_tp.side != Side::Upper {
        return Err(BoundsError::WrongSide(upper_tp.side));
    }
    let thetas = theta_grid(grid_n);
    let cs: Vec<Vector2<f64>> = thetas
        .iter()
        .map(|t| Vector2::new(t.cos(), t.sin()))
        .collect();
    // The inner loop skips the per-point structure check of
    // `assemble_bound_inputs`; tests compare it against that path.
    let rows: Vec<Row> = (0..grid_n)
        .into_par_iter()
        .map(|i1| -> Result<Row, BoundsError> {
            let mut row = (
                Vec::with_capacity(grid_n),
                Vec::with_capacity(grid_n),
                Vec::with_capacity(grid_n),
                Vec::with_capacity(grid_n),
            );
            for c2 in &cs {
                let ms = evaluate_at(mt, &cs[i1], c2);
                let (a, b, m_mat, m) = projected_scalars(&ms, lower_tp);
                let (l1, l2) = lower_from_ratios(ratios_of(&a, b, &m_mat, m), lower_tp);
                let (a, b, m_mat, m) = projected_scalars(&ms, upper_tp);
                let (u1, u2) = upper_from_ratios(ratios_of(&a, b, &m_mat, m), upper_tp);
                row.0.push(l1);
                row.1.push(l2);
                row.2.push(u1);
                row.3.push(u2);
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;

    let cap = grid_n * grid_n;
    let (mut l1, mut l2, mut u1, mut u2) = (
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
        Vec::with_capacity(cap),
    );
    for r in rows {
        l1.extend(r.0);
        l2.extend(r.1);
        u1.extend(r.2);
        u2.extend(r.3);
    }

    // Sequential row-major scan: the first extremum wins ties.
    let (mut raw_lower, mut arg_lower, mut skipped_lower) = (f64::NEG_INFINITY, None, 0);
    let (mut raw_upper, mut arg_upper, mut skipped_upper) = (f64::INFINITY, None, 0);
    for idx in 0..cap {
        let lo = l1[idx].max(l2[idx]);
        if lo == f64::NEG_INFINITY {
            skipped_lower += 1;
        } else if lo > raw_lower {
            raw_lower = lo;
            arg_lower = Some(idx);
        }
        let up = u1[idx].min(u2[idx]);
        if up == f64::INFINITY {
            skipped_upper += 1;
        } else if up < raw_upper {
            raw_upper = up;
            arg_upper = Some(idx);
        }
    }
    let arg_lower = arg_lower.ok_or(BoundsError::AllSkipped("lower"))?;
    let arg_upper = arg_upper.ok_or(BoundsError::AllSkipped("upper"))?;
    let lower = raw_lower.clamp(0.0, 1.0);
    let upper = raw_upper.clamp(0.0, 1.0);
    Ok(BoundsReport {
        grid_n,
        thetas,
        l1,
        l2,
        u1,
        u2,
        raw_lower,
        raw_upper,
        lower,
        upper,
        lower_clamped: lower != raw_lower,
        upper_clamped: upper != raw_upper,
        arg_lower: (arg_lower / grid_n, arg_lower % grid_n),
        arg_upper: (arg_upper / grid_n, arg_upper % grid_n),
        skipped_lower,
        skipped_upper,
    })
}

/// Outcome of the positivity test at one grid point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PositivityPoint {
    pub theta1: f64,
    pub theta2: f64,
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

/// Smallest eigenvalue of `[[Ã, bR⊥], [−bR⊥, Ã]] − F(f₁)·[[M, mR⊥], [−mR⊥, M]]`
/// with the tolerance it is judged against. `f` is the fraction of the phase
/// the side degenerates on: f₁ for the lower side, 1 − f₁ for the upper.
pub fn positivity_margin(
    ms: &MeasurementSet,
    tp: &TranslationParams,
    f1: f64,
) -> Result<(f64, f64), BoundsError> {
    let bi = assemble_bound_inputs(ms, tp)?;
    let d = block_rperp(&bi.atilde, bi.b);
    let x = d - bi.g * tp.f_of(f1);
    let x = (x + x.transpose()) * 0.5;
    let lo = SymmetricEigen::new(x).eigenvalues.min();
    Ok((lo, 1e-8 * d.norm().max(1.0)))
}

/// Checks the positivity condition at the true volume fraction.
pub fn positivity_check(
    ms: &MeasurementSet,
    lower_tp: &TranslationParams,
    f1_true: f64,
) -> Result<Result<(), f64>, BoundsError> {
    let (lo, tol) = positivity_margin(ms, lower_tp, f1_true)?;
    Ok(if lo >= -tol { Ok(()) } else { Err(lo) })
}

/// Positivity on an `n × n` spot grid; returns the failing points.
pub fn positivity_spot_grid(
    mt: &MomentTable,
    tp: &TranslationParams,
    f1_true: f64,
    n: usize,
) -> Result<Vec<PositivityPoint>, BoundsError> {
    let thetas = theta_grid(n);
    let mut failures = Vec::new();
    for &t1 in &thetas {
        for &t2 in &thetas {
            let ms = evaluate_measurements(mt, t1, t2);
            let (lo, tol) = positivity_margin(&ms, tp, f1_true)?;
            if lo < -tol {
                failures.push(PositivityPoint {
                    theta1: t1,
                    theta2: t2,
                    min_eigenvalue: lo,
                    tolerance: tol,
                });
            }
        }
    }
    Ok(failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::PhasePair;
    use crate::translation::{lower_params, upper_params};
    use nalgebra::{Matrix4, Vector2};
    use num_complex::Complex64;

    fn phases() -> PhasePair {
        PhasePair::new(Complex64::new(1.0, 1.0), Complex64::new(1.0, 0.0))
    }

    fn inputs(atilde: Matrix2<f64>, b: f64, m_mat: Matrix2<f64>, m: f64) -> BoundInputs {
        BoundInputs {
            atilde,
            b,
            m_mat,
            m,
            g: block_rperp(&m_mat, m),
        }
    }

    #[test]
    fn zero_projection_limits() {
        // With no projected averages the bounds degenerate to trivial ones
        // outside [0, 1].
        let (lo, up) = (
            lower_params(&phases()).unwrap(),
            upper_params(&phases()).unwrap(),
        );
        let bi = inputs(Matrix2::new(2.0, 0.1, 0.1, 1.0), 0.2, Matrix2::zeros(), 0.0);
        let (l1, l2) = lower_from_inputs(&bi, &lo);
        let expect = lo.coef_det_p / lo.coef_det_diff;
        assert!((l1 - expect).abs() < 1e-14);
        assert!((l2 - expect).abs() < 1e-14);
        assert!(expect < 0.0);
        let (u1, _) = upper_from_inputs(&bi, &up);
        let expect = 1.0 - up.coef_det_p / up.coef_det_diff;
        assert!((u1 - expect).abs() < 1e-14);
        assert!(u1 > 1.0);
    }

    #[test]
    fn vanishing_bracket() {
        let (lo, up) = (
            lower_params(&phases()).unwrap(),
            upper_params(&phases()).unwrap(),
        );
        let a = Matrix2::new(1.5, 0.0, 0.0, 0.5);
        let m_lo = Matrix2::identity() * (a.trace() / lo.coef_tr_p / 2.0);
        let (l1, _) = lower_from_inputs(&inputs(a, 0.0, m_lo, 0.0), &lo);
        assert!(l1.abs() < 1e-14);
        let m_up = Matrix2::identity() * (a.trace() / up.coef_tr_p / 2.0);
        let (u1, _) = upper_from_inputs(&inputs(a, 0.0, m_up, 0.0), &up);
        assert!((u1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_positive_denominators_are_skipped() {
        let lo = lower_params(&phases()).unwrap();
        let bi = inputs(
            Matrix2::new(1.0, 0.0, 0.0, -1.0),
            0.0,
            Matrix2::zeros(),
            0.0,
        );
        let (l1, l2) = lower_from_inputs(&bi, &lo);
        assert_eq!(l1, f64::NEG_INFINITY);
        assert_eq!(l2, f64::NEG_INFINITY);
        let up = upper_params(&phases()).unwrap();
        let (u1, u2) = upper_from_inputs(&bi, &up);
        assert_eq!((u1, u2), (f64::INFINITY, f64::INFINITY));
    }

    #[test]
    fn wrong_side_rejected() {
        let lo = lower_params(&phases()).unwrap();
        let ms = MeasurementSet {
            a0: Matrix2::identity(),
            s: Matrix2::zeros(),
            alpha1: 0.0,
            alpha2: 0.0,
            avg_j: [Vector2::zeros(); 2],
            avg_e: [Vector2::zeros(); 2],
        };
        assert!(matches!(
            upper_bounds_at(&ms, &lo),
            Err(BoundsError::WrongSide(Side::Lower))
        ));
        assert!(positivity_check(&ms, &lo, 0.3).unwrap().is_ok());
    }

    #[test]
    fn block_helper_layout() {
        let b = block_rperp(&Matrix2::new(1.0, 2.0, 2.0, 3.0), 5.0);
        let expect = Matrix4::new(
            1.0, 2.0, 0.0, 5.0, //
            2.0, 3.0, -5.0, 0.0, //
            0.0, -5.0, 1.0, 2.0, //
            5.0, 0.0, 2.0, 3.0,
        );
        assert_eq!(b, expect);
    }
}
