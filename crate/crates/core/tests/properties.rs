//! Randomized properties checked against the independent oracles.

use aircomp::fading::{dual_eval, outer_solve, OuterOptions};
use aircomp::model::{mse_ensemble, mse_single_state};
use aircomp::oracle::{single_device_fading, static_grid_search};
use aircomp::static_solver::{solve_static, solve_static_by_enumeration};
use aircomp::{ChannelVector, FadingEnsemble, SystemConfig};
use proptest::prelude::*;

fn static_instance() -> impl Strategy<Value = (SystemConfig, ChannelVector)> {
    (1usize..=6).prop_flat_map(|k| {
        (
            prop::collection::vec(-1.0f64..1.0, k),
            prop::collection::vec(-2.0f64..2.0, k),
            -3.0f64..2.0,
        )
            .prop_map(|(b, g, n)| {
                let budgets = b.iter().map(|x| 10f64.powf(*x)).collect();
                let gains: Vec<f64> = g.iter().map(|x| 10f64.powf(*x)).collect();
                (SystemConfig::new(10f64.powf(n), budgets).unwrap(), ChannelVector::from_power_gains(&gains).unwrap())
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn static_solution_is_feasible_and_beats_the_grid((cfg, ch) in static_instance()) {
        let sol = solve_static(&cfg, &ch).unwrap();
        for (p, b) in sol.powers.iter().zip(cfg.budgets()) {
            prop_assert!(*p >= 0.0 && *p <= b * (1.0 + 1e-12));
        }
        let report = mse_single_state(&cfg, &ch, &sol.powers, sol.denoise()).unwrap();
        prop_assert!((report.total_unscaled - sol.objective).abs() <= 1e-12 * sol.objective.max(1.0));
        let (_, grid) = static_grid_search(&cfg, &ch, 20_000);
        prop_assert!(sol.objective <= grid * (1.0 + 1e-12));
        let other = solve_static_by_enumeration(&cfg, &ch).unwrap();
        prop_assert_eq!(sol.k_star, other.k_star);
    }

    #[test]
    fn dual_value_never_exceeds_a_feasible_policy(seed in any::<u64>(), k in 1usize..=3, mu in prop::collection::vec(0.01f64..0.25, 3)) {
        let cfg = SystemConfig::uniform(k, 0.5, 1.0).unwrap();
        let ens = FadingEnsemble::rayleigh(k, 200, 1.0, seed).unwrap();
        let d = dual_eval(&cfg, &ens, &mu[..k]).unwrap();
        let sol = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        prop_assert!(d.dual_value <= sol.primal_value * (1.0 + 1e-9));
        let report = mse_ensemble(&cfg, &ens, &sol.policy).unwrap();
        prop_assert!((report.total_unscaled - sol.primal_value).abs() <= 1e-12 * sol.primal_value);
    }

    #[test]
    fn single_device_matches_scalar_oracle(seed in any::<u64>(), budget in 0.05f64..5.0, noise in 0.05f64..5.0) {
        let cfg = SystemConfig::new(noise, vec![budget]).unwrap();
        let ens = FadingEnsemble::rayleigh(1, 300, 1.0, seed).unwrap();
        let gains: Vec<f64> = ens.states().iter().map(|c| c.power_gains()[0]).collect();
        let (mu, powers) = single_device_fading(&gains, ens.weights(), noise, budget);
        let sol = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        prop_assert!((sol.mu_opt[0] - mu).abs() <= 1e-6 * mu.max(1e-3));
        for (s, p) in powers.iter().enumerate() {
            prop_assert!((sol.policy.powers(s)[0] - p).abs() <= 1e-6 * budget.max(1.0));
        }
    }
}
