mod common;

use common::{kkt_minimum, stacked_average, translated_l};
use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2};
use volfrac::bounds::{lower_bounds_at, upper_bounds_at};
use volfrac::functionals::{assemble_bound_inputs, block_rperp, MeasurementSet};
use volfrac::translation::{
    constrained_quadratic_min, d_matrix, lower_params, params_from_t, upper_params, Side,
};
use volfrac::{PhasePair, C64};

fn pairs() -> Vec<PhasePair> {
    [
        (1.0, 1.0, 1.0, 0.0),
        (2.0, 1.0, 1.0, 0.0),
        (4.0, 100.0, 1.0, 0.0),
        (3.0, 8.0, 8.0, 6.0),
        (1.0, 2.0, 1.0, 0.0),
    ]
    .iter()
    .map(|&(a, b, c, d)| PhasePair::new(C64::new(a, b), C64::new(c, d)))
    .collect()
}

fn j_matrix() -> DMatrix<f64> {
    #[rustfmt::skip]
    let rows: [[f64; 8]; 8] = [
        [1., 0., 0., 0., 0., 0., 1., 0.],
        [0., 0., 1., 0., -1., 0., 0., 0.],
        [0., 1., 0., 0., 0., 0., 0., 1.],
        [0., 0., 0., 1., 0., -1., 0., 0.],
        [0., 0., 1., 0., 1., 0., 0., 0.],
        [1., 0., 0., 0., 0., 0., -1., 0.],
        [0., 0., 0., 1., 0., 1., 0., 0.],
        [0., 1., 0., 0., 0., 0., 0., -1.],
    ];
    DMatrix::from_fn(8, 8, |i, j| rows[i][j] * std::f64::consts::FRAC_1_SQRT_2)
}

#[test]
fn j_is_orthogonal_and_block_diagonalises() {
    let j = j_matrix();
    assert!(
        (&j * j.transpose() - DMatrix::<f64>::identity(8, 8))
            .abs()
            .max()
            < 1e-15
    );
    for p in pairs() {
        let tp = lower_params(&p).unwrap();
        let t = [tp.t1, tp.t2, tp.t3];
        for (sigma, plus, minus) in [(p.sigma1, tp.p1p, tp.p1m), (p.sigma2, tp.p2p, tp.p2m)] {
            let mut b = DMatrix::zeros(8, 8);
            for (k, m) in [plus, minus, plus, minus].iter().enumerate() {
                b.view_mut((2 * k, 2 * k), (2, 2)).copy_from(m);
            }
            let l = translated_l(sigma, t);
            assert!((&j * b * j.transpose() - &l).abs().max() < 1e-12);
            let diag = d_matrix(sigma, tp.t3).unwrap();
            assert!(
                (diag + Matrix2::new(tp.t1, 0.0, 0.0, tp.t2) - plus)
                    .abs()
                    .max()
                    < 1e-14
            );
        }
    }
}

fn random_measurements(seed: u64) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    // Small LCG so the test has no RNG dependency of its own.
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    let mut next = || {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    (
        [[next(), next()], [next(), next()]],
        [[next(), next()], [next(), next()]],
    )
}

fn ms_with_averages(avg_j: [[f64; 2]; 2], avg_e: [[f64; 2]; 2]) -> MeasurementSet {
    MeasurementSet {
        a0: Matrix2::new(2.0, 0.3, 0.3, 1.5),
        s: Matrix2::new(0.2, -0.1, -0.1, 0.4),
        alpha1: 0.25,
        alpha2: -0.4,
        avg_j: avg_j.map(|v| Vector2::new(v[0], v[1])),
        avg_e: avg_e.map(|v| Vector2::new(v[0], v[1])),
    }
}

/// The harmonic-mean minimum over the 8×8 phase matrices equals the closed
/// form `F(f)·kᵀ[[M, mR⊥], [−mR⊥, M]]k` used by the bound formulas.
#[test]
fn closed_form_matches_constrained_minimum() {
    for (n, p) in pairs().into_iter().enumerate() {
        let lo = lower_params(&p).unwrap();
        let up = upper_params(&p).unwrap();
        for seed in 0..4u64 {
            let (aj, ae) = random_measurements(seed + 10 * n as u64);
            let ms = ms_with_averages(aj, ae);
            let k = [0.7, -0.2, 0.4, 1.1];
            let kv = nalgebra::Vector4::from(k);
            for f1 in [0.16, 0.5, 0.8] {
                let e0 = stacked_average(k, aj, ae);
                // Lower side: phase 1 carries f₁.
                let t = [lo.t1, lo.t2, lo.t3];
                let (l1, l2) = (translated_l(p.sigma1, t), translated_l(p.sigma2, t));
                let oracle = kkt_minimum(&l1, &l2, f1, 1.0 - f1, &e0);
                let direct = constrained_quadratic_min(&l1, &l2, f1, 1.0 - f1, &e0).unwrap();
                let g = assemble_bound_inputs(&ms, &lo).unwrap().g;
                let closed = lo.f_of(f1) * kv.dot(&(g * kv));
                let scale = 1.0 + oracle.abs();
                assert!((direct - oracle).abs() < 1e-9 * scale, "{direct} {oracle}");
                assert!((closed - oracle).abs() < 1e-9 * scale, "{closed} {oracle}");

                // Upper side: the same with the phases interchanged.
                let t = [up.t1, up.t2, up.t3];
                let (l1, l2) = (translated_l(p.sigma2, t), translated_l(p.sigma1, t));
                let oracle = kkt_minimum(&l1, &l2, 1.0 - f1, f1, &e0);
                let g = assemble_bound_inputs(&ms, &up).unwrap().g;
                let closed = up.f_of(1.0 - f1) * kv.dot(&(g * kv));
                assert!(
                    (closed - oracle).abs() < 1e-9 * (1.0 + oracle.abs()),
                    "{closed} {oracle}"
                );
            }
        }
    }
}

/// Quadratic form `k ↦ V(k)·L*V(k)` as a 4×4 matrix, by polarization.
fn min_form(
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    f1: f64,
    aj: [[f64; 2]; 2],
    ae: [[f64; 2]; 2],
) -> Matrix4<f64> {
    let val = |k: [f64; 4]| kkt_minimum(l1, l2, f1, 1.0 - f1, &stacked_average(k, aj, ae));
    Matrix4::from_fn(|a, b| {
        let mut plus = [0.0; 4];
        let mut minus = [0.0; 4];
        plus[a] += 1.0;
        plus[b] += 1.0;
        minus[a] += 1.0;
        minus[b] -= 1.0;
        (val(plus) - val(minus)) / 4.0
    })
}

/// Flipping the signs of t₁, t₂ swaps the roles of P⁺ and P⁻. The inequality
/// `𝓓 − Q(f) ⪰ 0` it produces has the same spectrum, so the same bounds.
#[test]
fn sign_flipped_translation_gives_same_inequality() {
    let p = PhasePair::new(C64::new(2.0, 1.0), C64::new(1.0, 0.0));
    let lo = lower_params(&p).unwrap();
    let (aj, ae) = random_measurements(7);
    let ms = ms_with_averages(aj, ae);
    let flipped = params_from_t(&p, Side::Lower, lo.r, [-lo.t1, -lo.t2, lo.t3]).unwrap();
    assert!(flipped.p1p.determinant().abs() < 1e-12 && flipped.p1m.determinant() > 0.0);
    for f1 in [0.1, 0.3, 0.6] {
        let spectrum = |t: [f64; 3]| {
            let (l1, l2) = (translated_l(p.sigma1, t), translated_l(p.sigma2, t));
            let b = ms.alpha1 * t[0] + ms.alpha2 * t[1];
            let d = block_rperp(&(ms.a0 + ms.s * t[2]), b);
            let x = d - min_form(&l1, &l2, f1, aj, ae);
            let mut e: Vec<f64> = nalgebra::SymmetricEigen::new((x + x.transpose()) * 0.5)
                .eigenvalues
                .iter()
                .copied()
                .collect();
            e.sort_by(f64::total_cmp);
            e
        };
        let a = spectrum([lo.t1, lo.t2, lo.t3]);
        let b = spectrum([-lo.t1, -lo.t2, lo.t3]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{a:?} {b:?}");
        }
    }
}

/// For the rank-minimizing translation, the closed-form bounds are where
/// the inequality from the constrained minimum first fails along the two scalar tests.
#[test]
fn bounds_sit_on_the_feasibility_edge() {
    let p = PhasePair::new(C64::new(2.0, 1.0), C64::new(1.0, 0.0));
    let lo = lower_params(&p).unwrap();
    let up = upper_params(&p).unwrap();
    let (aj, ae) = random_measurements(3);
    let ms = ms_with_averages(aj, ae);
    let (l1, l2) = lower_bounds_at(&ms, &lo).unwrap();
    let (u1, u2) = upper_bounds_at(&ms, &up).unwrap();
    assert!([l1, l2, u1, u2].iter().all(|v| v.is_finite()));
    let trace_gap = |tp, f: f64| {
        let bi = assemble_bound_inputs(&ms, tp).unwrap();
        (bi.atilde - bi.m_mat * f).trace()
    };
    let det_gap = |tp, f: f64| {
        let bi = assemble_bound_inputs(&ms, tp).unwrap();
        (bi.atilde - bi.m_mat * f).determinant() - (bi.b - f * bi.m).powi(2)
    };
    // tr(Ã − F M) vanishes at the first bound, det(Ã − F M) − (b − F m)² at the second.
    assert!(trace_gap(&lo, lo.f_of(l1)).abs() < 1e-9);
    assert!(det_gap(&lo, lo.f_of(l2)).abs() < 1e-9);
    assert!(trace_gap(&up, up.f_of(1.0 - u1)).abs() < 1e-9);
    assert!(det_gap(&up, up.f_of(1.0 - u2)).abs() < 1e-9);
}

#[test]
fn constrained_min_handles_rank_deficient_phase_matrices() {
    let p = PhasePair::new(C64::new(1.0, 1.0), C64::new(1.0, 0.0));
    let lo = lower_params(&p).unwrap();
    let t = [lo.t1, lo.t2, lo.t3];
    let (l1, l2) = (translated_l(p.sigma1, t), translated_l(p.sigma2, t));
    // Both phase matrices are singular for this translation.
    let rank = |m: &DMatrix<f64>| m.singular_values().iter().filter(|s| **s > 1e-10).count();
    assert!(rank(&l1) < 8 && rank(&l2) < 8);
    let e0 = DVector::from_fn(8, |i, _| (i as f64 * 0.37).sin());
    let a = constrained_quadratic_min(&l1, &l2, 0.3, 0.7, &e0).unwrap();
    let b = kkt_minimum(&l1, &l2, 0.3, 0.7, &e0);
    assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
}
