use std::sync::Arc;

use proptest::prelude::*;

use robust_adp::dynsys::{CostSpec, InitialState, SimulatedPlant, SystemModel};
use robust_adp::experiments::linear2;
use robust_adp::linear::lyapunov;
use robust_adp::online_pi::{collect_window, residual_profile, run_online_pi, BasisPair, Exploration, OnlinePiConfig};
use robust_adp::pi_oracle::{collocation_grid, run_policy_iteration, OracleConfig};
use robust_adp::robust::{gamma_from_rho, robust_redesign, ClassKFunction, Rho};
use robust_adp::sampling::BoxRegion;
use robust_adp::{homogeneous_basis, make_polynomial_basis, Approximant};

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vanishing_bases_are_zero_at_origin(dim in 1usize..4, deg in 1u32..6) {
        let b = make_polynomial_basis(dim, deg, true, false);
        prop_assert!(b.vanishes_at_origin());
        for v in b.eval(&vec![0.0; dim]).unwrap() {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn bases_are_linearly_independent(dim in 1usize..3, deg in 1u32..5, constant in any::<bool>()) {
        let b = make_polynomial_basis(dim, deg, false, constant);
        let cloud = BoxRegion::symmetric(&vec![1.0; dim]).unwrap().halton_points(8 * b.len());
        prop_assert!(b.gram_min_eigenvalue(&cloud).unwrap() > 0.0);
    }

    #[test]
    fn basis_construction_is_reproducible(dim in 1usize..4, deg in 1u32..5) {
        let a = make_polynomial_basis(dim, deg, true, false);
        let b = make_polynomial_basis(dim, deg, true, false);
        prop_assert_eq!(a.terms(), b.terms());
        // graded order
        for w in a.terms().windows(2) {
            prop_assert!(w[0].degree() <= w[1].degree());
        }
    }

    #[test]
    fn gradient_matches_central_difference(
        weights in prop::collection::vec(-1.0f64..1.0, 20),
        x in point(2),
    ) {
        let b = make_polynomial_basis(2, 5, true, false);
        let a = Approximant::new(b, weights).unwrap();
        let g = a.gradient(&x).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = (a.evaluate(&xp).unwrap() - a.evaluate(&xm).unwrap()) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-6 * g[k].abs().max(1.0), "{} vs {}", g[k], fd);
        }
    }

    #[test]
    fn embedding_preserves_values(weights in prop::collection::vec(-1.0f64..1.0, 5), x in point(2)) {
        let small = make_polynomial_basis(2, 2, true, false);
        let big = make_polynomial_basis(2, 4, true, false);
        let a = Approximant::new(small, weights).unwrap();
        let e = a.embed(&big).unwrap();
        prop_assert!((a.evaluate(&x).unwrap() - e.evaluate(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn class_k_inverse_round_trips(k in 0.1f64..10.0, p in 0.5f64..3.0, s in 1e-3f64..50.0) {
        let f = ClassKFunction::power(k, p).compose(&ClassKFunction::linear(2.0));
        let v = f.eval(s);
        let back = f.inverse(v).unwrap();
        prop_assert!((back - s).abs() <= 1e-6 * s.max(1.0));
    }

    #[test]
    fn gamma_is_class_k_for_positive_rho(c in 0.01f64..20.0, eps in 0.01f64..1.0) {
        let g = gamma_from_rho(&Rho::constant(c).unwrap(), eps).unwrap();
        let ladder: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64).collect();
        prop_assert!(g.validate(&ladder).is_ok());
        prop_assert_eq!(g.eval(0.0), 0.0);
    }

    #[test]
    fn redesign_only_amplifies(c in 0.1f64..10.0, r in 0.1f64..5.0, k in -3.0f64..3.0, x in point(1)) {
        let base = Approximant::linear(homogeneous_basis(1, 1), &[k]).unwrap();
        let p = robust_redesign(&base, &Rho::constant(c).unwrap(), r).unwrap();
        let m = p.multiplier(&x);
        prop_assert!(m >= 1.0);
        prop_assert!((p.eval(&x) - m * k * x[0]).abs() < 1e-12 * (1.0 + m * k.abs() * x[0].abs()));
    }

    #[test]
    fn exploration_respects_peak_bound(amp in 0.0f64..5.0, seed in any::<u64>(), t in 0.0f64..100.0) {
        let e = Exploration::sinusoids(amp, seed);
        prop_assert!(e.eval(t).abs() <= e.peak_bound() + 1e-12);
        prop_assert_eq!(e.eval(t), Exploration::sinusoids(amp, seed).eval(t));
    }

    #[test]
    fn lyapunov_solution_satisfies_equation(a11 in -3.0f64..-0.5, a12 in -1.0f64..1.0, a22 in -3.0f64..-0.5) {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[a11, a12, 0.0, a22]);
        let q = nalgebra::DMatrix::identity(2, 2);
        let p = lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &p + &p * &a + &q;
        prop_assert!(res.norm() < 1e-9);
        prop_assert!((&p - p.transpose()).norm() < 1e-9);
    }

    #[test]
    fn halton_points_stay_in_box(lo in -3.0f64..0.0, w in 0.1f64..3.0, n in 1usize..200) {
        let b = BoxRegion::new(vec![lo, lo], vec![lo + w, lo + 2.0 * w]).unwrap();
        for p in b.halton_points(n) {
            prop_assert!(b.contains(&p));
        }
    }
}

fn scalar_model(a: f64) -> SystemModel {
    SystemModel::new(1, Arc::new(move |x: &[f64]| vec![a * x[0]]), Arc::new(|_: &[f64]| vec![1.0])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_iterates_vanish_at_origin_and_decrease(a in -2.0f64..1.0, q in 0.5f64..4.0) {
        let model = scalar_model(a);
        let cost = CostSpec::diagonal(vec![q], 1.0, 0.5).unwrap();
        let bu = homogeneous_basis(1, 1);
        let u0 = Approximant::linear(bu.clone(), &[-(a.max(0.0) + 1.0)]).unwrap();
        let bv = make_polynomial_basis(1, 4, true, false);
        let region = BoxRegion::symmetric(&[1.0]).unwrap();
        let grid = collocation_grid(&region, bv.len());
        let states = run_policy_iteration(&model, &cost, &u0, &bv, &bu, &grid, &OracleConfig::default()).unwrap();
        for s in &states {
            prop_assert_eq!(s.value.evaluate(&[0.0]).unwrap(), 0.0);
        }
        for w in states.windows(2) {
            for x in &grid {
                prop_assert!(w[1].value.evaluate(x).unwrap() <= w[0].value.evaluate(x).unwrap() + 1e-6);
            }
            prop_assert!(w[1].hjb_residual <= w[0].hjb_residual + 1e-9);
        }
        // Riccati fixed point
        let p = a + (a * a + q).sqrt();
        let last = states.last().unwrap();
        prop_assert!((last.value.coefficient(&[2]) - p).abs() < 1e-6 * p);
    }

    #[test]
    fn residual_never_grows_with_nested_bases(seed in 0u64..1000, amp in 0.5f64..2.0) {
        let b = linear2(seed).unwrap();
        let schedule: Vec<BasisPair> = (1..=4u32)
            .map(|d| BasisPair {
                value: make_polynomial_basis(2, d, true, false),
                policy: make_polynomial_basis(2, d.saturating_sub(1).max(1), true, false),
            })
            .collect();
        let mut plant = SimulatedPlant::new(b.model.clone(), None, b.initial.clone(), 1e-3);
        let e = Exploration::sinusoids(amp, seed);
        let u0 = b.u0.clone();
        let ctrl = |x: &[f64], _: Option<f64>, t: f64| u0.evaluate(x).unwrap() + e.eval(t);
        let window = collect_window(&mut plant, &ctrl, 0.1, 60).unwrap();
        let prof = residual_profile(&window, &b.u0, &schedule, &b.cost).unwrap();
        for w in prof.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-14, "{:?}", prof);
        }
    }

    #[test]
    fn seeded_online_runs_repeat_exactly(seed in any::<u64>()) {
        let run = || {
            let mut plant = SimulatedPlant::new(scalar_model(-1.0), None, InitialState::plain(vec![1.0]), 1e-3);
            let bu = homogeneous_basis(1, 1);
            run_online_pi(
                &mut plant,
                &Approximant::zero(bu.clone()),
                &Exploration::sinusoids(1.0, seed),
                &homogeneous_basis(1, 2),
                &bu,
                &CostSpec::diagonal(vec![1.0], 1.0, 0.5).unwrap(),
                &OnlinePiConfig { intervals: Some(20), ..Default::default() },
            )
            .unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.iterations.len(), b.iterations.len());
        for (x, y) in a.iterations.iter().zip(&b.iterations) {
            prop_assert_eq!(x.value.weights(), y.value.weights());
            prop_assert_eq!(x.next_policy.weights(), y.next_policy.weights());
        }
    }
}
