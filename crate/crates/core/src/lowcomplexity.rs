//! Truncated channel inversion with one fading-independent denoising factor.
//!
//! Each device inverts its channel (`p = eta/|h|^2`) whenever `|h|^2 >= xi_k`
//! and stays silent otherwise. Inverted devices align exactly and silent ones
//! contribute a misalignment of one, so the MSE is `K - sum_k E[I_k] + sigma^2/eta`.
//! For a given `eta` each threshold is the smallest one whose inversion cost
//! fits the budget; `eta` itself comes from a one-dimensional scan.

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::model::{mse_ensemble, Denoise, MseReport, PowerPolicy, SystemConfig};

/// Relative slack when comparing an accumulated cost with a budget.
const COST_SLACK: f64 = 1e-12;
pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationPolicy {
    pub eta: f64,
    /// Thresholds on `|h_k|^2`.
    pub xi: Vec<f64>,
    pub inversion_prob: Vec<f64>,
    /// `K - sum_k E[I_k] + sigma^2/eta`.
    pub objective: f64,
}

impl TruncationPolicy {
    pub fn inverts(&self, device: usize, power_gain: f64) -> bool {
        power_gain > 0.0 && power_gain >= self.xi[device]
    }

    /// The per-state powers of this rule on `ens`.
    pub fn to_policy(&self, ens: &FadingEnsemble) -> Result<PowerPolicy> {
        if ens.k() != self.xi.len() {
            return Err(Error::DimensionMismatch { expected: self.xi.len(), got: ens.k() });
        }
        let powers = ens
            .states()
            .iter()
            .map(|ch| {
                ch.power_gains()
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| if self.inverts(k, a) { self.eta / a } else { 0.0 })
                    .collect()
            })
            .collect();
        PowerPolicy::new(powers, vec![Denoise::Finite(self.eta); ens.len()])
    }

    pub fn report(&self, cfg: &SystemConfig, ens: &FadingEnsemble) -> Result<MseReport> {
        mse_ensemble(cfg, ens, &self.to_policy(ens)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XiChoice {
    pub xi: f64,
    pub inversion_prob: f64,
    /// `E[I eta / |h|^2]`, never above the budget.
    pub cost: f64,
}

/// Inversion profile of one device: states grouped by equal `|h|^2`, sorted
/// by decreasing gain, with running sums of `w/|h|^2` and `w`.
struct DeviceProfile {
    gains: Vec<f64>,
    inv_cum: Vec<f64>,
    weight_cum: Vec<f64>,
    /// Whether every state has a positive gain (so all can be inverted).
    covers_all: bool,
}

impl DeviceProfile {
    fn new(ens: &FadingEnsemble, device: usize) -> Self {
        let mut rows: Vec<(f64, f64)> = ens
            .iter()
            .map(|(ch, w)| (ch.power_gains()[device], w))
            .filter(|(a, w)| *a > 0.0 && *w > 0.0)
            .collect();
        let covers_all = rows.len() == ens.iter().filter(|(_, w)| *w > 0.0).count();
        rows.sort_by(|x, y| y.0.total_cmp(&x.0));
        let mut profile = DeviceProfile { gains: Vec::new(), inv_cum: Vec::new(), weight_cum: Vec::new(), covers_all };
        let (mut inv, mut wsum) = (0.0, 0.0);
        for (i, (a, w)) in rows.iter().enumerate() {
            inv += w / a;
            wsum += w;
            if rows.get(i + 1).is_none_or(|next| next.0 != *a) {
                profile.gains.push(*a);
                profile.inv_cum.push(inv);
                profile.weight_cum.push(wsum);
            }
        }
        profile
    }

    /// Number of leading groups whose inversion at `eta` fits `budget`.
    fn groups_within(&self, eta: f64, budget: f64) -> usize {
        let cap = budget * (1.0 + COST_SLACK);
        self.inv_cum.partition_point(|c| eta * c <= cap)
    }

    fn choice(&self, eta: f64, budget: f64) -> XiChoice {
        let n = self.groups_within(eta, budget);
        if n == 0 {
            let top = self.gains.first().copied().unwrap_or(0.0);
            return XiChoice { xi: next_up(top), inversion_prob: 0.0, cost: 0.0 };
        }
        let xi = if n == self.gains.len() && self.covers_all { 0.0 } else { self.gains[n - 1] };
        XiChoice { xi, inversion_prob: self.weight_cum[n - 1], cost: eta * self.inv_cum[n - 1] }
    }

    fn inversion_prob(&self, eta: f64, budget: f64) -> f64 {
        match self.groups_within(eta, budget) {
            0 => 0.0,
            n => self.weight_cum[n - 1],
        }
    }
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::MIN_POSITIVE
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Smallest threshold on `|h_k|^2` whose inversion cost at `eta` stays within `budget`.
pub fn xi_for_eta(ens: &FadingEnsemble, device: usize, eta: f64, budget: f64) -> Result<XiChoice> {
    if device >= ens.k() {
        return Err(Error::invalid(format!("device {device} out of range for K = {}", ens.k())));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
    }
    Ok(DeviceProfile::new(ens, device).choice(eta, budget))
}

/// Log-spaced `eta` candidates spanning `[1e-2 sigma^2, 1e4 max_k E[P_k |h_k|^2]]`.
pub fn default_eta_grid(cfg: &SystemConfig, ens: &FadingEnsemble) -> Vec<f64> {
    let top = ens
        .mean_power_gains()
        .iter()
        .zip(cfg.budgets())
        .map(|(g, b)| g * b)
        .fold(0.0, f64::max);
    let lo = 1e-2 * cfg.noise_var();
    let hi = (1e4 * top).max(lo * 10.0);
    let n = DEFAULT_GRID_POINTS;
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Picks the `eta` minimizing `K - sum_k E[I_k] + sigma^2/eta`.
///
/// Besides `eta_grid` (the default grid when `None`), every `eta` at which a
/// device's inversion set is just about to shrink is scanned: between two such
/// points the objective only falls with `eta`, so the minimum over the
/// augmented candidates is exact.
pub fn solve_lowcomplexity(cfg: &SystemConfig, ens: &FadingEnsemble, eta_grid: Option<&[f64]>) -> Result<TruncationPolicy> {
    cfg.check_k(ens.k())?;
    let grid = match eta_grid {
        Some([]) => return Err(Error::invalid("eta grid must not be empty")),
        Some(g) => {
            if let Some(x) = g.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::invalid(format!("eta candidates must be positive, got {x}")));
            }
            g.to_vec()
        }
        None => default_eta_grid(cfg, ens),
    };
    let profiles: Vec<DeviceProfile> = (0..cfg.k()).map(|k| DeviceProfile::new(ens, k)).collect();
    let mut candidates = grid;
    for (p, b) in profiles.iter().zip(cfg.budgets()) {
        candidates.extend(p.inv_cum.iter().map(|c| b / c));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let k = cfg.k() as f64;
    let noise = cfg.noise_var();
    let objective = |eta: f64| {
        let inverted: f64 = profiles.iter().zip(cfg.budgets()).map(|(p, b)| p.inversion_prob(eta, *b)).sum();
        k - inverted + noise / eta
    };
    let values: Vec<f64> = candidates.par_iter().map(|&eta| objective(eta)).collect();
    // first minimum in ascending eta order
    let (best, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if *v < bv { (i, *v) } else { (bi, bv) });
    let eta = candidates[best];
    let choices: Vec<XiChoice> = profiles.iter().zip(cfg.budgets()).map(|(p, b)| p.choice(eta, *b)).collect();
    Ok(TruncationPolicy {
        eta,
        xi: choices.iter().map(|c| c.xi).collect(),
        inversion_prob: choices.iter().map(|c| c.inversion_prob).collect(),
        objective: values[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_state() -> FadingEnsemble {
        FadingEnsemble::from_power_gains(&[vec![1.0], vec![4.0]], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn xi_examples() {
        let ens = two_state();
        let c = xi_for_eta(&ens, 0, 1.0, 0.125).unwrap();
        assert!(c.xi > 1.0 && c.xi <= 4.0);
        assert_eq!(c.inversion_prob, 0.5);
        assert_relative_eq!(c.cost, 0.125);

        let c = xi_for_eta(&ens, 0, 1.0, 1e9).unwrap();
        assert_eq!(c.xi, 0.0);
        assert_eq!(c.inversion_prob, 1.0);

        let c = xi_for_eta(&ens, 0, 1.0, 0.1).unwrap();
        assert!(c.xi > 4.0);
        assert_eq!(c.inversion_prob, 0.0);
        assert_eq!(c.cost, 0.0);
    }

    #[test]
    fn zero_gain_states_keep_threshold_positive() {
        let ens = FadingEnsemble::from_power_gains(&[vec![0.0], vec![4.0]], vec![0.5, 0.5]).unwrap();
        let c = xi_for_eta(&ens, 0, 1.0, 1e9).unwrap();
        assert_eq!(c.xi, 4.0);
        assert_eq!(c.inversion_prob, 0.5);
    }

    #[test]
    fn tie_groups_enter_together() {
        let ens = FadingEnsemble::from_power_gains(&[vec![2.0], vec![2.0], vec![1.0]], vec![1.0, 1.0, 1.0]).unwrap();
        // one of the tied states alone would fit, both do not
        let c = xi_for_eta(&ens, 0, 1.0, 0.2).unwrap();
        assert_eq!(c.inversion_prob, 0.0);
    }

    #[test]
    fn two_state_optimum_is_sixteen() {
        let cfg = SystemConfig::new(1.0, vec![10.0]).unwrap();
        let sol = solve_lowcomplexity(&cfg, &two_state(), None).unwrap();
        assert_relative_eq!(sol.eta, 16.0, max_relative = 1e-12);
        assert_relative_eq!(sol.objective, 0.0625, max_relative = 1e-12);
        assert_eq!(sol.xi, vec![0.0]);
    }

    #[test]
    fn identity_matches_evaluator_and_budgets_hold() {
        let cfg = SystemConfig::new(0.05, vec![1.0, 2.0, 0.5]).unwrap();
        let ens = FadingEnsemble::rayleigh(3, 2000, 1.0, 9).unwrap();
        let sol = solve_lowcomplexity(&cfg, &ens, None).unwrap();
        let report = sol.report(&cfg, &ens).unwrap();
        assert_relative_eq!(report.total_unscaled, sol.objective, max_relative = 1e-12);
        let expected = sol.to_policy(&ens).unwrap().expected_powers(ens.weights());
        for (e, b) in expected.iter().zip(cfg.budgets()) {
            assert!(*e <= b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn beats_every_grid_point() {
        let cfg = SystemConfig::uniform(4, 0.1, 1.0).unwrap();
        let ens = FadingEnsemble::rayleigh(4, 500, 1.0, 1).unwrap();
        let sol = solve_lowcomplexity(&cfg, &ens, None).unwrap();
        for eta in default_eta_grid(&cfg, &ens) {
            let inverted: f64 = (0..4).map(|k| xi_for_eta(&ens, k, eta, 1.0).unwrap().inversion_prob).sum();
            assert!(sol.objective <= 4.0 - inverted + 0.1 / eta);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let cfg = SystemConfig::uniform(1, 1.0, 1.0).unwrap();
        assert!(solve_lowcomplexity(&cfg, &two_state(), Some(&[])).is_err());
        assert!(solve_lowcomplexity(&cfg, &two_state(), Some(&[-1.0])).is_err());
    }
}
