mod common;

use std::sync::{Arc, OnceLock};

use common::kkt_minimum;
use nalgebra::{DMatrix, DVector, Vector2};
use proptest::prelude::*;
use volfrac::analytic::{layered_cauchy, layered_cauchy_on, LayeredDiskSpec};
use volfrac::cauchy::{BoundaryGrid, CauchyPair};
use volfrac::functionals::{
    assemble_bound_inputs, build_moments, evaluate_measurements, MeasurementSet,
};
use volfrac::translation::{constrained_quadratic_min, lower_params, upper_params};
use volfrac::{validate_phases, PhasePair, C64};

fn sigma() -> impl Strategy<Value = C64> {
    (0.1f64..20.0, -20.0f64..20.0).prop_map(|(a, b)| C64::new(a, b))
}

/// Admissible pairs kept away from the excluded sets by a relative margin.
fn admissible() -> impl Strategy<Value = PhasePair> {
    (sigma(), sigma())
        .prop_map(|(a, b)| PhasePair::new(a, b))
        .prop_filter("admissible with margin", |p| {
            let ratio = p.sigma1 / p.sigma2;
            validate_phases(p).is_ok()
                && (p.sigma1.norm() - p.sigma2.norm()).abs()
                    > 1e-3 * p.sigma1.norm().max(p.sigma2.norm())
                && ratio.im.abs() > 1e-3 * ratio.norm()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn translation_invariants_hold(p in admissible()) {
        let lo = lower_params(&p).unwrap();
        let up = upper_params(&p).unwrap();
        prop_assert!(lo.check_invariants(&p).is_ok(), "{:?}", lo.check_invariants(&p));
        prop_assert!(up.check_invariants(&p).is_ok(), "{:?}", up.check_invariants(&p));
        let (s1, s2) = (p.sigma1, p.sigma2);
        let scale = 1.0 + s1.norm_sqr() + s2.norm_sqr();
        for (x, y) in [(-s1.re, -s1.im), (s2.re, s2.im), (-s2.re, -s2.im)] {
            prop_assert!(lo.circle_residual(x, y).abs() < 1e-10 * scale * (1.0 + lo.t1.abs()));
        }
        let r = lo.r;
        let f = s1.re * s1.re - 2.0 * r * s2.im * s1.re - r * r * s2.re * s2.re - s2.norm_sqr();
        prop_assert!(f <= 1e-10 * scale * (1.0 + r * r));
    }

    #[test]
    fn projected_averages_have_rank_one_block_form(
        p in admissible(),
        v in prop::array::uniform8(-3.0f64..3.0),
    ) {
        let ms = MeasurementSet {
            a0: nalgebra::Matrix2::identity(),
            s: nalgebra::Matrix2::zeros(),
            alpha1: 0.0,
            alpha2: 0.0,
            avg_j: [Vector2::new(v[0], v[1]), Vector2::new(v[2], v[3])],
            avg_e: [Vector2::new(v[4], v[5]), Vector2::new(v[6], v[7])],
        };
        for tp in [lower_params(&p).unwrap(), upper_params(&p).unwrap()] {
            let bi = assemble_bound_inputs(&ms, &tp).unwrap();
            let det = bi.m_mat.determinant();
            prop_assert!((bi.m * bi.m - det).abs() <= 1e-8 * (1.0 + det.abs()));
            prop_assert!(bi.m_mat.symmetric_eigenvalues().min() >= -1e-12 * (1.0 + bi.m_mat.norm()));
        }
    }
}

fn psd(seed: &[f64], n: usize, rank: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, rank, |i, j| {
        seed[(i * 7 + j * 3) % seed.len()] * ((i + 2 * j + 1) as f64).sin()
    });
    &a * a.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn constrained_min_matches_stationarity_oracle(
        n in 2usize..7,
        r1 in 1usize..7,
        r2 in 1usize..7,
        seed in prop::collection::vec(-2.0f64..2.0, 16),
        e in prop::collection::vec(-2.0f64..2.0, 6),
        f1 in 0.05f64..1.5,
        f2 in 0.05f64..1.5,
    ) {
        let l1 = psd(&seed, n, r1.min(n));
        let rev: Vec<f64> = seed.iter().rev().map(|x| x * 0.9 + 0.1).collect();
        let l2 = psd(&rev, n, r2.min(n));
        let e0 = DVector::from_fn(n, |i, _| e[i]);
        let got = constrained_quadratic_min(&l1, &l2, f1, f2, &e0).unwrap();
        let want = kkt_minimum(&l1, &l2, f1, f2, &e0);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

struct Data {
    c1: CauchyPair,
    c2: CauchyPair,
}

fn concentric() -> &'static Data {
    static D: OnceLock<Data> = OnceLock::new();
    D.get_or_init(|| {
        let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let spec = |c| LayeredDiskSpec {
            radii: vec![0.4, 1.0],
            layer_sigma: vec![C64::new(2.0, 1.0), one],
            dirichlet_coeff: c,
        };
        let c1 = layered_cauchy(&spec([one, zero]), 96).unwrap();
        let c2 = layered_cauchy_on(&spec([zero, one]), c1.grid.clone()).unwrap();
        Data { c1, c2 }
    })
}

fn close(a: &MeasurementSet, b: &MeasurementSet, tol: f64) -> bool {
    let v = |m: &MeasurementSet| {
        let mut out: Vec<f64> = m.a0.iter().chain(m.s.iter()).copied().collect();
        out.extend([m.alpha1, m.alpha2]);
        for k in 0..2 {
            out.extend(m.avg_j[k].iter().chain(m.avg_e[k].iter()));
        }
        out
    };
    v(a).iter()
        .zip(v(b))
        .all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

/// Grid and data started at node `k` instead of node 0.
fn rotate_start(c: &CauchyPair, grid: &Arc<BoundaryGrid>, k: usize) -> CauchyPair {
    fn rot<T: Clone>(v: &[T], k: usize) -> Vec<T> {
        v[k..].iter().chain(&v[..k]).cloned().collect()
    }
    let d = c.dphi_dt.as_ref().map(|d| rot(d, k));
    let out = CauchyPair::new(grid.clone(), rot(&c.phi, k), rot(&c.q, k), c.label.clone()).unwrap();
    match d {
        Some(d) => out.with_dphi_dt(d),
        None => out,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_shift_covariance(tau in 0.0f64..6.3, t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
        let d = concentric();
        let base = build_moments(&d.c1, &d.c2).unwrap();
        let rotated = build_moments(&d.c1.rotated(tau), &d.c2).unwrap();
        let a = evaluate_measurements(&rotated, t1, t2);
        let b = evaluate_measurements(&base, t1 + tau, t2);
        prop_assert!(close(&a, &b, 1e-12));
        let rotated = build_moments(&d.c1, &d.c2.rotated(tau)).unwrap();
        let a = evaluate_measurements(&rotated, t1, t2);
        let b = evaluate_measurements(&base, t1, t2 + tau);
        prop_assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn b_is_linear_in_translation(p in admissible(), lambda in -5.0f64..5.0, t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
        let d = concentric();
        let ms = evaluate_measurements(&build_moments(&d.c1, &d.c2).unwrap(), t1, t2);
        let tp = lower_params(&p).unwrap();
        let b = |l: f64| ms.alpha1 * l * tp.t1 + ms.alpha2 * l * tp.t2;
        let from_inputs = assemble_bound_inputs(&ms, &tp).unwrap().b;
        prop_assert!((from_inputs - b(1.0)).abs() < 1e-14 * (1.0 + b(1.0).abs()));
        prop_assert!((b(lambda) - lambda * b(1.0)).abs() < 1e-12 * (1.0 + b(1.0).abs()));
    }

    #[test]
    fn alpha1_independent_of_base_point(k in 1usize..96, t1 in 0.0f64..6.3, t2 in 0.0f64..6.3) {
        let d = concentric();
        let g = &d.c1.grid;
        let rot = |v: &[[f64; 2]]| -> Vec<[f64; 2]> { v[k..].iter().chain(&v[..k]).copied().collect() };
        let grid = Arc::new(BoundaryGrid {
            points: rot(&g.points),
            normals: rot(&g.normals),
            tangents: rot(&g.tangents),
            weights: g.weights[k..].iter().chain(&g.weights[..k]).copied().collect(),
            segments: g.segments[k..].iter().chain(&g.segments[..k]).copied().collect(),
            domain_area: g.domain_area,
        });
        let base = evaluate_measurements(&build_moments(&d.c1, &d.c2).unwrap(), t1, t2);
        let shifted = build_moments(&rotate_start(&d.c1, &grid, k), &rotate_start(&d.c2, &grid, k)).unwrap();
        let shifted = evaluate_measurements(&shifted, t1, t2);
        prop_assert!((base.alpha1 - shifted.alpha1).abs() <= 1e-10 * (1.0 + base.alpha1.abs()));
        prop_assert!(close(&base, &shifted, 1e-10));
    }
}
