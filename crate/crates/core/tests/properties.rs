mod common;

use proptest::prelude::*;
use riskgrowth::generators::random_positive_model;
use riskgrowth::{
    apply_t, apply_tn, cw_bounds, dual_bound, objective_psi0, random_feasible, solve_eigen,
    stationarity_residual, validate, EigenOptions, MdpModel,
};

fn model() -> impl Strategy<Value = MdpModel> {
    (1usize..=5, 1usize..=3, any::<u64>(), 0.0f64..1.5)
        .prop_map(|(s, a, seed, spread)| random_positive_model(s, a, seed, spread))
}

fn model_and_vectors() -> impl Strategy<Value = (MdpModel, Vec<f64>, Vec<f64>)> {
    model().prop_flat_map(|m| {
        let s = m.n_states();
        (
            Just(m),
            prop::collection::vec(0.01f64..10.0, s),
            prop::collection::vec(0.01f64..10.0, s),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn operator_is_monotone((m, f, d) in model_and_vectors()) {
        let g: Vec<f64> = f.iter().zip(&d).map(|(a, b)| a + b).collect();
        let (tf, _) = apply_t(&m, &f).unwrap();
        let (tg, _) = apply_t(&m, &g).unwrap();
        prop_assert!(tf.iter().zip(&tg).all(|(a, b)| a <= b));
    }

    #[test]
    fn operator_is_homogeneous((m, f, _) in model_and_vectors()) {
        let (tf, _) = apply_t(&m, &f).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
            let (tcf, _) = apply_t(&m, &cf).unwrap();
            for (a, b) in tcf.iter().zip(&tf) {
                prop_assert!((a - c * b).abs() <= 1e-12 * (c * b).abs());
            }
        }
    }

    #[test]
    fn operator_is_lipschitz((m, f, g) in model_and_vectors()) {
        let (tf, _) = apply_t(&m, &f).unwrap();
        let (tg, _) = apply_t(&m, &g).unwrap();
        let lhs = tf.iter().zip(&tg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d = f.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(lhs <= m.max_weight() * d * (1.0 + 1e-12));
    }

    #[test]
    fn semigroup((m, f, _) in model_and_vectors(), k in 0usize..6, l in 0usize..6) {
        let whole = apply_tn(&m, &f, k + l).unwrap();
        let split = apply_tn(&m, &apply_tn(&m, &f, l).unwrap(), k).unwrap();
        for (a, b) in whole.iter().zip(&split) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs());
        }
    }

    #[test]
    fn brackets_contain_rho((m, f, _) in model_and_vectors()) {
        let sol = solve_eigen(&m, &EigenOptions::default()).unwrap();
        let (lo, hi) = cw_bounds(&m, &f).unwrap();
        prop_assert!(lo <= sol.rho * (1.0 + 1e-10) && sol.rho <= hi * (1.0 + 1e-10));
    }

    #[test]
    fn brackets_tighten_along_iteration(m in model()) {
        let b: Vec<(f64, f64)> = riskgrowth::eigen::brackets(&m).take(40).collect();
        for w in b.windows(2).skip(1) {
            prop_assert!(w[1].0 >= w[0].0 * (1.0 - 1e-14));
            prop_assert!(w[1].1 <= w[0].1 * (1.0 + 1e-14));
        }
    }

    #[test]
    fn solve_is_deterministic(m in model()) {
        let a = solve_eigen(&m, &EigenOptions::default()).unwrap();
        let b = solve_eigen(&m, &EigenOptions::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn weak_duality(m in model(), seed in any::<u64>(), g in prop::collection::vec(-3.0f64..3.0, 5)) {
        let eta = random_feasible(&m, seed).unwrap();
        prop_assert!(stationarity_residual(&eta).1 <= 1e-10);
        let lower = objective_psi0(&m, &eta).unwrap().to_f64();
        let upper = dual_bound(&m, &g[..m.n_states()]).unwrap();
        prop_assert!(lower <= upper + 1e-9);
    }

    #[test]
    fn concavity_probe(m in model(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random_feasible(&m, s1).unwrap();
        let b = random_feasible(&m, s2).unwrap();
        let (pa, pb) = (objective_psi0(&m, &a).unwrap().to_f64(), objective_psi0(&m, &b).unwrap().to_f64());
        for t in [0.25, 0.5, 0.75] {
            let c = a.mix(&b, t).unwrap();
            prop_assert!(stationarity_residual(&c).1 <= 1e-10);
            let pc = objective_psi0(&m, &c).unwrap().to_f64();
            prop_assert!(pc >= t * pa + (1.0 - t) * pb - 1e-10);
        }
    }

    #[test]
    fn validate_is_idempotent(m in model()) {
        let r = validate(&m).unwrap();
        prop_assert!(r.a0_plus && r.a1_plus && r.dead_states.is_empty() && r.gain_irreducible);
        prop_assert_eq!(r, validate(&m).unwrap());
    }
}
