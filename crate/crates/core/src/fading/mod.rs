//! Optimal power control over a finite fading ensemble by Lagrange duality.
//!
//! For dual prices `mu` on the average-power budgets, the Lagrangian splits
//! into independent per-state problems (see [`inner`]). The concave dual
//! function is maximized over a box of prices (see [`OuterMethod`]), and a
//! primal policy is recovered from the final prices.

mod dual;
mod inner;
mod outer;

use serde::Serialize;

pub use dual::{dual_eval, DualEvaluation};
pub use inner::{inner_gamma_solve, inner_power, stationarity_lhs, InnerSolution};
pub(crate) use outer::kkt_residual;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::model::{mse_ensemble, optimal_denoise, PowerPolicy, SystemConfig};

/// Largest K for which [`OuterMethod::Auto`] picks the ellipsoid method.
pub const ELLIPSOID_MAX_K: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterMethod {
    /// Ellipsoid for small K, projected Newton otherwise.
    Auto,
    Ellipsoid,
    ProjectedNewton,
    ProjectedSubgradient,
}

#[derive(Clone, Debug)]
pub struct OuterOptions {
    /// Relative dual suboptimality target of the ellipsoid bound.
    pub tol: f64,
    /// Target for the scaled KKT residual (feasibility and complementary slackness).
    pub kkt_tol: f64,
    /// Iteration cap; `None` picks a method-dependent default.
    pub max_iter: Option<usize>,
    pub mu_max: f64,
    pub method: OuterMethod,
}

impl Default for OuterOptions {
    fn default() -> Self {
        Self { tol: 1e-6, kkt_tol: 1e-8, max_iter: None, mu_max: 1e6, method: OuterMethod::Auto }
    }
}

/// Snapshot of the outer iteration.
///
/// For the ellipsoid method `ellipsoid_shape` is the row-major K x K shape
/// matrix; the other methods leave it empty and store their last iterate in
/// `ellipsoid_center`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub ellipsoid_center: Vec<f64>,
    pub ellipsoid_shape: Vec<f64>,
    pub iteration: usize,
    pub best_dual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Dual value at this iterate; infeasible ellipsoid centers are not recorded.
    pub dual_value: f64,
    pub best_dual: f64,
    /// Certified upper bound on the optimal dual value, `inf` if unavailable.
    pub upper_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverWarning {
    NotConverged { iterations: usize, kkt_residual: f64 },
    /// Device powers were scaled down to meet the budget; `violation` is relative.
    FeasibilityRestored { device: usize, violation: f64 },
    /// A budget is slack at the returned point.
    BudgetSlack { device: usize, residual: f64 },
}

#[derive(Clone, Debug)]
pub struct FadingSolution {
    pub policy: PowerPolicy,
    pub mu_opt: Vec<f64>,
    pub dual_value: f64,
    /// Unscaled ensemble MSE of `policy`.
    pub primal_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// `E[p_k] - P_k` of the returned policy.
    pub constraint_residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: OuterMethod,
    pub final_state: DualState,
    pub history: Vec<IterationRecord>,
    pub warnings: Vec<SolverWarning>,
}

impl FadingSolution {
    pub fn total_scaled(&self) -> f64 {
        let k = self.mu_opt.len() as f64;
        self.primal_value / (k * k)
    }
}

/// Solves the fading power-control problem on `ens`.
pub fn outer_solve(cfg: &SystemConfig, ens: &FadingEnsemble, opts: &OuterOptions) -> Result<FadingSolution> {
    cfg.check_k(ens.k())?;
    if !(opts.tol > 0.0 && opts.kkt_tol > 0.0 && opts.mu_max > 0.0) {
        return Err(Error::invalid("tolerances and mu_max must be positive"));
    }
    let k = cfg.k();
    for device in 0..k {
        let reachable = ens.iter().any(|(ch, w)| w > 0.0 && ch.power_gains()[device] > 0.0);
        if !reachable {
            return Err(Error::DegenerateChannel { device, state: None });
        }
    }
    // an inversion power a gamma / (a gamma + mu)^2 never exceeds 1 / (4 mu),
    // so optimal prices satisfy mu_k <= 1 / (4 P_k)
    let upper: Vec<f64> = cfg.budgets().iter().map(|b| opts.mu_max.min(0.25 / b)).collect();
    let method = match opts.method {
        OuterMethod::Auto if k <= ELLIPSOID_MAX_K => OuterMethod::Ellipsoid,
        OuterMethod::Auto => OuterMethod::ProjectedNewton,
        m => m,
    };
    let max_iter = opts.max_iter.unwrap_or(match method {
        OuterMethod::ProjectedNewton => 200,
        _ => 500 * k * k,
    });
    let prob = outer::Problem { cfg, ens, upper, tol: opts.tol, kkt_tol: opts.kkt_tol, max_iter };
    let run = match method {
        OuterMethod::Ellipsoid => outer::ellipsoid(&prob)?,
        OuterMethod::ProjectedNewton => outer::projected_newton(&prob)?,
        OuterMethod::ProjectedSubgradient => outer::projected_subgradient(&prob)?,
        OuterMethod::Auto => unreachable!(),
    };

    let mut warnings = Vec::new();
    let eval = dual_eval(cfg, ens, &run.mu)?;
    let residual = kkt_residual(&run.mu, &eval.subgradient, cfg.budgets());
    if !run.converged {
        log::warn!("dual ascent stopped after {} iterations, KKT residual {residual:.3e}", run.iterations);
        warnings.push(SolverWarning::NotConverged { iterations: run.iterations, kkt_residual: residual });
    }
    let (policy, restored) = restore_feasibility(cfg, ens, eval.policy, opts.tol, &mut warnings)?;
    let expected = policy.expected_powers(ens.weights());
    let constraint_residuals: Vec<f64> = expected.iter().zip(cfg.budgets()).map(|(e, b)| e - b).collect();
    for (device, (r, b)) in constraint_residuals.iter().zip(cfg.budgets()).enumerate() {
        if !restored && *r < -1e-3 * b {
            warnings.push(SolverWarning::BudgetSlack { device, residual: *r });
        }
    }
    let primal_value = mse_ensemble(cfg, ens, &policy)?.total_unscaled;
    let gap = primal_value - run.dual_value;
    Ok(FadingSolution {
        policy,
        mu_opt: run.mu,
        dual_value: run.dual_value,
        primal_value,
        gap,
        relative_gap: gap / primal_value.abs().max(f64::MIN_POSITIVE),
        constraint_residuals,
        iterations: run.iterations,
        converged: run.converged,
        method: run.method,
        final_state: run.state,
        history: run.history,
        warnings,
    })
}

/// Scales down every over-budget device and re-optimizes the denoising
/// factors for the new powers.
fn restore_feasibility(
    cfg: &SystemConfig,
    ens: &FadingEnsemble,
    policy: PowerPolicy,
    tol: f64,
    warnings: &mut Vec<SolverWarning>,
) -> Result<(PowerPolicy, bool)> {
    let expected = policy.expected_powers(ens.weights());
    let factors: Vec<f64> = expected.iter().zip(cfg.budgets()).map(|(e, b)| if e > b { b / e } else { 1.0 }).collect();
    if factors.iter().all(|f| *f == 1.0) {
        return Ok((policy, false));
    }
    for (device, f) in factors.iter().enumerate() {
        if *f < 1.0 {
            let violation = 1.0 / f - 1.0;
            if violation > tol {
                log::warn!("device {device} exceeds its budget by {violation:.3e} (relative); scaling down");
                warnings.push(SolverWarning::FeasibilityRestored { device, violation });
            }
        }
    }
    let mut powers = policy.all_powers().to_vec();
    let mut denoise = Vec::with_capacity(powers.len());
    for (s, p) in powers.iter_mut().enumerate() {
        for (x, f) in p.iter_mut().zip(&factors) {
            *x *= f;
        }
        denoise.push(optimal_denoise(ens.state(s).power_gains(), p, cfg.noise_var()));
    }
    Ok((PowerPolicy::new(powers, denoise)?, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state() -> (SystemConfig, FadingEnsemble) {
        let cfg = SystemConfig::new(1.0, vec![0.2]).unwrap();
        let ens = FadingEnsemble::from_power_gains(&[vec![1.0], vec![4.0]], vec![0.5, 0.5]).unwrap();
        (cfg, ens)
    }

    #[test]
    fn two_state_example() {
        let (cfg, ens) = two_state();
        let sol = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        assert!(sol.converged);
        assert_relative_eq!(sol.mu_opt[0], (10.0f64 / 11.0).powi(2), max_relative = 1e-7);
        assert_relative_eq!(sol.policy.powers(0)[0], 0.1, max_relative = 1e-6);
        assert_relative_eq!(sol.policy.powers(1)[0], 0.3, max_relative = 1e-6);
        assert!(sol.gap >= -1e-9);
    }

    #[test]
    fn methods_agree_on_a_small_ensemble() {
        let cfg = SystemConfig::new(0.2, vec![1.0, 0.5, 2.0]).unwrap();
        let ens = FadingEnsemble::rayleigh(3, 400, 1.0, 3).unwrap();
        let solve = |method| outer_solve(&cfg, &ens, &OuterOptions { method, ..Default::default() }).unwrap();
        let e = solve(OuterMethod::Ellipsoid);
        let n = solve(OuterMethod::ProjectedNewton);
        assert!(e.converged && n.converged);
        for k in 0..3 {
            assert_relative_eq!(e.mu_opt[k], n.mu_opt[k], max_relative = 1e-5);
        }
        assert_relative_eq!(e.primal_value, n.primal_value, max_relative = 1e-6);
    }

    #[test]
    fn subgradient_fallback_gets_close() {
        let cfg = SystemConfig::uniform(2, 0.5, 1.0).unwrap();
        let ens = FadingEnsemble::rayleigh(2, 200, 1.0, 8).unwrap();
        let exact = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        let sub = outer_solve(
            &cfg,
            &ens,
            &OuterOptions { method: OuterMethod::ProjectedSubgradient, max_iter: Some(3000), ..Default::default() },
        )
        .unwrap();
        assert!(sub.primal_value >= exact.dual_value - 1e-9);
        assert!((sub.primal_value - exact.primal_value) / exact.primal_value < 0.05);
    }

    #[test]
    fn budgets_are_tight_and_slackness_holds() {
        let cfg = SystemConfig::new(0.1, vec![1.0, 2.0, 0.5, 1.5]).unwrap();
        let ens = FadingEnsemble::rayleigh(4, 1000, 1.0, 21).unwrap();
        let sol = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        assert!(sol.converged, "{:?}", sol.warnings);
        for k in 0..4 {
            let b = cfg.budgets()[k];
            assert!(sol.constraint_residuals[k] <= 1e-6 * b);
            assert!(sol.constraint_residuals[k].abs() <= 0.01 * b);
            assert!(sol.mu_opt[k] * sol.constraint_residuals[k].abs() <= 1e-6 * (1.0 + sol.mu_opt[k] * b));
        }
        assert!(sol.relative_gap <= 1e-4 && sol.gap >= -1e-9);
    }

    #[test]
    fn best_dual_never_decreases() {
        let cfg = SystemConfig::uniform(3, 0.3, 1.0).unwrap();
        let ens = FadingEnsemble::rayleigh(3, 300, 1.0, 4).unwrap();
        let sol = outer_solve(&cfg, &ens, &OuterOptions::default()).unwrap();
        for w in sol.history.windows(2) {
            assert!(w[1].best_dual >= w[0].best_dual);
        }
        for rec in &sol.history {
            assert!(rec.dual_value <= sol.primal_value + 1e-9);
        }
        assert!(sol.mu_opt.iter().all(|m| *m >= 0.0));
    }

    #[test]
    fn rejects_device_that_is_never_heard() {
        let cfg = SystemConfig::uniform(2, 1.0, 1.0).unwrap();
        let ens = FadingEnsemble::from_power_gains(&[vec![1.0, 0.0], vec![2.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(outer_solve(&cfg, &ens, &OuterOptions::default()), Err(Error::DegenerateChannel { device: 1, .. })));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let cfg = SystemConfig::uniform(3, 0.3, 1.0).unwrap();
        let ens = FadingEnsemble::rayleigh(3, 300, 1.0, 4).unwrap();
        let sol = outer_solve(&cfg, &ens, &OuterOptions { max_iter: Some(3), ..Default::default() }).unwrap();
        assert!(!sol.converged);
        assert!(sol.warnings.iter().any(|w| matches!(w, SolverWarning::NotConverged { .. })));
        assert!(sol.constraint_residuals.iter().all(|r| *r <= 1e-12));
    }
}
