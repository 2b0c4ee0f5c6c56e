#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use volfrac::C64;

/// The 8×8 translated matrix `[[D̃, R], [−R, D̃]]` built entry by entry from
/// its definition, with `D̃ = D_JE + t₃[[0, I], [I, 0]]` and
/// `R = blockdiag(t₁R⊥, t₂R⊥)`.
pub fn translated_l(sigma: C64, t: [f64; 3]) -> DMatrix<f64> {
    let (s1, s2) = (sigma.re, sigma.im);
    let mut d = DMatrix::zeros(4, 4);
    for i in 0..2 {
        d[(i, i)] = 1.0 / s1;
        d[(i + 2, i + 2)] = (s1 * s1 + s2 * s2) / s1;
        d[(i, i + 2)] = s2 / s1 + t[2];
        d[(i + 2, i)] = s2 / s1 + t[2];
    }
    let mut r = DMatrix::zeros(4, 4);
    r[(0, 1)] = t[0];
    r[(1, 0)] = -t[0];
    r[(2, 3)] = t[1];
    r[(3, 2)] = -t[1];
    let mut l = DMatrix::zeros(8, 8);
    l.view_mut((0, 0), (4, 4)).copy_from(&d);
    l.view_mut((4, 4), (4, 4)).copy_from(&d);
    l.view_mut((0, 4), (4, 4)).copy_from(&r);
    l.view_mut((4, 0), (4, 4)).copy_from(&(-&r));
    l
}

/// Minimum of `f₁E₁·L₁E₁ + f₂E₂·L₂E₂` over `f₁E₁ + f₂E₂ = E₀` from the
/// stationarity condition `L₁E₁ = L₂E₂`, i.e. `(f₂L₁ + f₁L₂)E₁ = L₂E₀`,
/// solved in the least-squares sense.
pub fn kkt_minimum(
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    f1: f64,
    f2: f64,
    e0: &DVector<f64>,
) -> f64 {
    let a = l1 * f2 + l2 * f1;
    let rhs = l2 * e0;
    let svd = a.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1e-300);
    let e1 = svd.solve(&rhs, eps).expect("svd solve");
    let e2 = (e0 - &e1 * f1) / f2;
    f1 * e1.dot(&(l1 * &e1)) + f2 * e2.dot(&(l2 * &e2))
}

/// `V = [k₁⟨v₁⟩ + k₂⟨v₂⟩; k₃⟨v₁⟩ + k₄⟨v₂⟩]` with `⟨v_j⟩ = (⟨j̃′_j⟩, ⟨ẽ″_j⟩)`.
pub fn stacked_average(k: [f64; 4], avg_j: [[f64; 2]; 2], avg_e: [[f64; 2]; 2]) -> DVector<f64> {
    let v = |j: usize| [avg_j[j][0], avg_j[j][1], avg_e[j][0], avg_e[j][1]];
    let (v1, v2) = (v(0), v(1));
    DVector::from_iterator(
        8,
        (0..4)
            .map(|i| k[0] * v1[i] + k[1] * v2[i])
            .chain((0..4).map(|i| k[2] * v1[i] + k[3] * v2[i])),
    )
}
