//! Closed-form optimal power control for a static channel.
//!
//! Devices are ranked by their quality indicator `q_k = P_k |h_k|^2`. With the
//! prefix sums `S_k = sum_{i<=k} q_i` and `R_k = sum_{i<=k} sqrt(q_i)` the
//! stationary points of the per-interval objectives are
//! `eta~_k = ((sigma^2 + S_k) / R_k)^2`; the optimal threshold index is the
//! (smallest) minimizer of `eta~_k`, the optimal denoising factor is
//! `eta~_{k*}`, the `k*` weakest devices transmit at full power and the rest
//! invert their channels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{mse_single_state, ChannelVector, Denoise, SystemConfig};

/// Relative tolerance of the structural self-checks in [`solve_static`].
const CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticDiagnostics {
    /// Quality indicators in ascending order.
    pub quality: Vec<f64>,
    /// `eta~_k` for `k = 1..=K` (index 0 holds `eta~_1`).
    pub eta_tilde: Vec<f64>,
    /// `J(k)` for `k = 1..=K`, with `J(1) = -sigma^2`.
    pub j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticSolution {
    /// `order[i]` is the original device id of the `i`-th weakest device.
    pub order: Vec<usize>,
    /// Number of full-power devices, `1..=K`.
    pub k_star: usize,
    pub eta_star: f64,
    /// Powers in original device order.
    pub powers: Vec<f64>,
    /// Unscaled objective at the returned policy.
    pub objective: f64,
    pub diagnostics: StaticDiagnostics,
}

impl StaticSolution {
    pub fn denoise(&self) -> Denoise {
        Denoise::Finite(self.eta_star)
    }

    /// Whether the device (original id) transmits at full power.
    pub fn is_full_power(&self, device: usize) -> bool {
        self.order[..self.k_star].contains(&device)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnrRegime {
    /// `sigma^2 -> 0`: channel inversion aligned to the weakest device.
    High,
    /// `sigma^2 -> inf`: everybody at full power.
    Low,
}

/// Quality indicators in ascending order with the sorting permutation.
/// The sort is stable, so ties keep original index order.
fn ranked(cfg: &SystemConfig, ch: &ChannelVector) -> Result<(Vec<usize>, Vec<f64>)> {
    cfg.check_k(ch.k())?;
    let a = ch.power_gains();
    if let Some(device) = a.iter().position(|&g| g == 0.0) {
        return Err(Error::DegenerateChannel { device, state: None });
    }
    let q: Vec<f64> = cfg.budgets().iter().zip(a).map(|(p, g)| p * g).collect();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&i, &j| q[i].total_cmp(&q[j]));
    let sorted = order.iter().map(|&i| q[i]).collect();
    Ok((order, sorted))
}

/// `eta~_k` for `k = 1..=K` from ascending quality indicators. `noise_var`
/// may be zero here.
pub fn eta_tilde_all(quality: &[f64], noise_var: f64) -> Vec<f64> {
    let (mut s, mut r) = (0.0, 0.0);
    quality
        .iter()
        .map(|q| {
            s += q;
            r += q.sqrt();
            ((noise_var + s) / r).powi(2)
        })
        .collect()
}

/// `J(k) = sum_{i<k} sqrt(q_i) (sqrt(q_k) - sqrt(q_i)) - sigma^2` for `k = 1..=K`.
pub fn j_values(quality: &[f64], noise_var: f64) -> Vec<f64> {
    let (mut s, mut r) = (0.0, 0.0);
    quality
        .iter()
        .map(|q| {
            let j = q.sqrt() * r - s - noise_var;
            s += q;
            r += q.sqrt();
            j
        })
        .collect()
}

/// Stationary point `eta~_k` (1-based `k`) of the problem after ranking the
/// devices by quality indicator.
pub fn eta_tilde(cfg: &SystemConfig, ch: &ChannelVector, k: usize) -> Result<f64> {
    let (_, q) = ranked(cfg, ch)?;
    if k == 0 || k > q.len() {
        return Err(Error::invalid(format!("k must be in 1..={}, got {k}", q.len())));
    }
    Ok(eta_tilde_all(&q[..k], cfg.noise_var())[k - 1])
}

/// Objective of the `k`-th interval subproblem: the `k` weakest devices at
/// full power, the others perfectly aligned.
pub fn prefix_objective(quality: &[f64], noise_var: f64, k: usize, eta: f64) -> f64 {
    let inv = 1.0 / eta.sqrt();
    quality[..k].iter().map(|q| (q.sqrt() * inv - 1.0).powi(2)).sum::<f64>() + noise_var / eta
}

/// Objective after optimizing each power for a given `eta`:
/// `sum_k min(sqrt(q_k/eta) - 1, 0)^2 + sigma^2/eta`.
pub fn reduced_objective(quality: &[f64], noise_var: f64, eta: f64) -> f64 {
    let inv = 1.0 / eta.sqrt();
    quality.iter().map(|q| (q.sqrt() * inv - 1.0).min(0.0).powi(2)).sum::<f64>() + noise_var / eta
}

fn build(
    cfg: &SystemConfig,
    ch: &ChannelVector,
    order: Vec<usize>,
    quality: Vec<f64>,
    k_star: usize,
    eta_star: f64,
    full_power: impl Fn(usize) -> bool,
) -> Result<StaticSolution> {
    let a = ch.power_gains();
    let mut powers = vec![0.0; cfg.k()];
    for (rank, &dev) in order.iter().enumerate() {
        powers[dev] = if full_power(rank) { cfg.budgets()[dev] } else { eta_star / a[dev] };
    }
    let objective = mse_single_state(cfg, ch, &powers, Denoise::Finite(eta_star))?.total_unscaled;
    let diagnostics = StaticDiagnostics {
        eta_tilde: eta_tilde_all(&quality, cfg.noise_var()),
        j: j_values(&quality, cfg.noise_var()),
        quality,
    };
    Ok(StaticSolution { order, k_star, eta_star, powers, objective, diagnostics })
}

fn le_tol(a: f64, b: f64) -> bool {
    a <= b + CHECK_TOL * a.abs().max(b.abs())
}

/// Optimal static policy via the minimum of the stationary points.
pub fn solve_static(cfg: &SystemConfig, ch: &ChannelVector) -> Result<StaticSolution> {
    let (order, q) = ranked(cfg, ch)?;
    let et = eta_tilde_all(&q, cfg.noise_var());
    let mut k_idx = 0;
    for (i, &e) in et.iter().enumerate() {
        if e < et[k_idx] {
            k_idx = i;
        }
    }
    let eta_star = et[k_idx];
    let k_star = k_idx + 1;

    // interval membership of the threshold
    if !le_tol(q[k_idx], eta_star) || (k_star < q.len() && !le_tol(eta_star, q[k_star])) {
        return Err(Error::InternalConsistency(format!(
            "threshold eta* = {eta_star} is outside its interval for k* = {k_star}"
        )));
    }
    // full-power devices below the previous stationary point, inverting ones above
    for (i, &qk) in q.iter().enumerate() {
        let prev = if i == 0 { f64::INFINITY } else { et[i - 1] };
        let ok = if i < k_star { le_tol(qk, prev) } else { le_tol(prev, qk) };
        if !ok {
            return Err(Error::InternalConsistency(format!(
                "device rank {} breaks the threshold ordering (q = {qk}, eta~_prev = {prev})",
                i + 1
            )));
        }
    }
    build(cfg, ch, order, q, k_star, eta_star, |rank| rank < k_star)
}

/// Optimal static policy by solving every interval subproblem with its
/// clamped stationary point and keeping the best one (smallest `k` on ties).
pub fn solve_static_by_enumeration(cfg: &SystemConfig, ch: &ChannelVector) -> Result<StaticSolution> {
    let (order, q) = ranked(cfg, ch)?;
    let kk = q.len();
    let et = eta_tilde_all(&q, cfg.noise_var());
    let mut best: Option<(usize, f64, f64)> = None;
    for k in 1..=kk {
        let upper = if k < kk { q[k] } else { f64::INFINITY };
        let eta_k = et[k - 1].max(q[k - 1]).min(upper);
        let val = reduced_objective(&q, cfg.noise_var(), eta_k);
        let better = match best {
            None => true,
            Some((_, _, b)) => val < b * (1.0 - 1e-13),
        };
        if better {
            best = Some((k, eta_k, val));
        }
    }
    let (k_star, eta_star, _) = best.expect("at least one device");
    build(cfg, ch, order, q, k_star, eta_star, |rank| rank < k_star)
}

/// Limiting policies for vanishing or dominating noise.
pub fn asymptotic_static(cfg: &SystemConfig, ch: &ChannelVector, regime: SnrRegime) -> Result<StaticSolution> {
    let (order, q) = ranked(cfg, ch)?;
    match regime {
        SnrRegime::High => {
            let eta = q[0];
            // the weakest device's inversion power equals its budget
            build(cfg, ch, order, q, 1, eta, |_| false)
        }
        SnrRegime::Low => {
            let kk = q.len();
            let eta = eta_tilde_all(&q, cfg.noise_var())[kk - 1];
            build(cfg, ch, order, q, kk, eta, |_| true)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(noise: f64, budgets: &[f64], gains: &[f64]) -> (SystemConfig, ChannelVector) {
        (
            SystemConfig::new(noise, budgets.to_vec()).unwrap(),
            ChannelVector::from_power_gains(gains).unwrap(),
        )
    }

    #[test]
    fn eta_tilde_examples() {
        let (c, h) = setup(1.0, &[1.0], &[1.0]);
        assert_eq!(eta_tilde(&c, &h, 1).unwrap(), 4.0);
        let (c, h) = setup(2.0, &[1.0, 1.0], &[1.0, 4.0]);
        assert_relative_eq!(eta_tilde(&c, &h, 1).unwrap(), 9.0, max_relative = 1e-15);
        assert_relative_eq!(eta_tilde(&c, &h, 2).unwrap(), 49.0 / 9.0, max_relative = 1e-15);
        assert!(eta_tilde(&c, &h, 0).is_err());
        assert!(eta_tilde(&c, &h, 3).is_err());
        // zero noise collapses the first stationary point onto the weakest quality
        assert_relative_eq!(eta_tilde_all(&[0.7, 2.0], 0.0)[0], 0.7, max_relative = 1e-15);
    }

    #[test]
    fn two_device_moderate_noise() {
        let (c, h) = setup(2.0, &[1.0, 1.0], &[1.0, 4.0]);
        let s = solve_static(&c, &h).unwrap();
        assert_eq!(s.k_star, 2);
        assert_relative_eq!(s.eta_star, 49.0 / 9.0, max_relative = 1e-15);
        assert_eq!(s.powers, vec![1.0, 1.0]);
        assert_relative_eq!(s.objective, 5.0 / 7.0, max_relative = 1e-14);
        assert_eq!(s.diagnostics.j[0], -2.0);
    }

    #[test]
    fn two_device_low_noise() {
        let (c, h) = setup(0.01, &[1.0, 1.0], &[1.0, 4.0]);
        let s = solve_static(&c, &h).unwrap();
        assert_eq!(s.k_star, 1);
        assert_relative_eq!(s.eta_star, 1.0201, max_relative = 1e-14);
        assert_eq!(s.powers[0], 1.0);
        assert_relative_eq!(s.powers[1], 0.255025, max_relative = 1e-14);
    }

    #[test]
    fn single_device_uses_full_power() {
        let (c, h) = setup(0.3, &[2.0], &[0.8]);
        let s = solve_static(&c, &h).unwrap();
        assert_eq!(s.k_star, 1);
        assert_eq!(s.powers, vec![2.0]);
        assert_eq!(s.eta_star, eta_tilde(&c, &h, 1).unwrap());
    }

    #[test]
    fn enumeration_agrees_on_examples() {
        for (noise, gains) in [(2.0, [1.0, 4.0]), (0.01, [1.0, 4.0]), (0.5, [3.0, 0.2])] {
            let (c, h) = setup(noise, &[1.0, 1.0], &gains);
            let a = solve_static(&c, &h).unwrap();
            let b = solve_static_by_enumeration(&c, &h).unwrap();
            assert_eq!(a.k_star, b.k_star);
            assert_eq!(a.eta_star, b.eta_star);
            assert_eq!(a.powers, b.powers);
        }
    }

    #[test]
    fn asymptotic_examples() {
        let (c, h) = setup(1.0, &[1.0, 1.0], &[1.0, 4.0]);
        let hi = asymptotic_static(&c, &h, SnrRegime::High).unwrap();
        assert_eq!(hi.eta_star, 1.0);
        assert_eq!(hi.powers, vec![1.0, 0.25]);
        let lo = asymptotic_static(&c, &h, SnrRegime::Low).unwrap();
        assert_eq!(lo.powers, vec![1.0, 1.0]);
        assert_eq!(lo.eta_star, eta_tilde(&c, &h, 2).unwrap());
        assert_eq!(lo.k_star, 2);
    }

    #[test]
    fn tiny_noise_approaches_channel_inversion() {
        let (c, h) = setup(1e-8, &[1.0, 1.0], &[1.0, 4.0]);
        let s = solve_static(&c, &h).unwrap();
        let hi = asymptotic_static(&c, &h, SnrRegime::High).unwrap();
        for (a, b) in s.powers.iter().zip(&hi.powers) {
            assert_relative_eq!(*a, *b, max_relative = 1e-4);
        }
    }

    #[test]
    fn zero_channel_is_rejected() {
        let (c, h) = setup(1.0, &[1.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(solve_static(&c, &h), Err(Error::DegenerateChannel { device: 1, .. })));
        assert!(solve_static_by_enumeration(&c, &h).is_err());
        assert!(asymptotic_static(&c, &h, SnrRegime::High).is_err());
    }

    #[test]
    fn ties_sort_stably() {
        let (c, h) = setup(0.5, &[1.0, 4.0, 1.0], &[4.0, 1.0, 4.0]);
        let s = solve_static(&c, &h).unwrap();
        assert_eq!(s.order, vec![0, 1, 2]);
    }

    #[test]
    fn j_matches_definition() {
        let q = [0.2, 0.9, 1.7, 4.0];
        let j = j_values(&q, 0.3);
        for k in 0..q.len() {
            let direct: f64 = (0..k).map(|i| q[i].sqrt() * (q[k].sqrt() - q[i].sqrt())).sum::<f64>() - 0.3;
            assert_relative_eq!(j[k], direct, max_relative = 1e-12, epsilon = 1e-14);
        }
    }
}
