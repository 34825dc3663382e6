//! Closed-form policy when a single device is power limited.
//!
//! If every device except one has an effectively unlimited budget, the
//! unconstrained devices invert their channels exactly and the limited device
//! follows a channel-inversion water-filling rule
//! `p(|h|) = sigma / (sqrt(mu) |h|^2) * (|h| - sqrt(mu sigma^2))^+`,
//! with the water level `mu` set by its budget.

use serde::Serialize;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::model::{Denoise, PowerPolicy, SystemConfig};

/// Relative budget tolerance of the water-level search.
const BUDGET_TOL: f64 = 1e-10;
const MAX_ITER: usize = 400;

#[derive(Clone, Debug, Serialize)]
pub struct WaterfillingSolution {
    pub limited_device: usize,
    /// Water level (dual price) of the limited device.
    pub mu1: f64,
    #[serde(skip)]
    pub policy: PowerPolicy,
    /// Channel magnitude below which the limited device (and hence everyone) is silent.
    pub threshold: f64,
    /// Channel magnitude at which the limited device transmits its peak power `1/(4 mu1)`.
    pub peak_gain: f64,
    /// Realized `E[p_k]` of every device; only the limited one is budgeted.
    pub expected_powers: Vec<f64>,
}

/// Transmit power of the limited device at channel magnitude `h1_mag`.
pub fn p1_closed_form(h1_mag: f64, mu1: f64, noise_var: f64) -> f64 {
    if h1_mag <= 0.0 {
        return 0.0;
    }
    let cut = (mu1 * noise_var).sqrt();
    if h1_mag <= cut {
        return 0.0;
    }
    noise_var.sqrt() / (mu1.sqrt() * h1_mag * h1_mag) * (h1_mag - cut)
}

/// Denoising factor that aligns the limited device at power `p1`.
pub fn eta_for_p1(h1_mag: f64, p1: f64, noise_var: f64) -> Denoise {
    if p1 <= 0.0 || h1_mag <= 0.0 {
        return Denoise::Silent;
    }
    let rx = p1 * h1_mag * h1_mag;
    Denoise::Finite((noise_var + rx).powi(2) / rx)
}

fn expected_p1(mags: &[f64], weights: &[f64], mu1: f64, noise_var: f64) -> f64 {
    mags.iter().zip(weights).map(|(h, w)| w * p1_closed_form(*h, mu1, noise_var)).sum()
}

/// Solves for the water level that exhausts the limited device's budget and
/// builds the full policy.
pub fn solve_p3(cfg: &SystemConfig, ens: &FadingEnsemble, limited_device: usize) -> Result<WaterfillingSolution> {
    cfg.check_k(ens.k())?;
    if limited_device >= cfg.k() {
        return Err(Error::invalid(format!("limited device {limited_device} out of range for K = {}", cfg.k())));
    }
    let noise = cfg.noise_var();
    let budget = cfg.budgets()[limited_device];
    let mags: Vec<f64> = ens.states().iter().map(|ch| ch.magnitude(limited_device)).collect();
    if !mags.iter().zip(ens.weights()).any(|(h, w)| *h > 0.0 && *w > 0.0) {
        return Err(Error::DegenerateChannel { device: limited_device, state: None });
    }

    // E[p1] is continuous and strictly decreasing in mu1 wherever positive
    let excess = |mu: f64| expected_p1(&mags, ens.weights(), mu, noise) - budget;
    let mut lo = 1e-12;
    while excess(lo) < 0.0 {
        lo *= 1e-3;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::InternalConsistency("water level search failed to bracket the budget".into()));
        }
    }
    let mut hi = 1.0;
    while excess(hi) >= 0.0 {
        hi *= 2.0;
    }
    let mut mu1 = (lo * hi).sqrt();
    for _ in 0..MAX_ITER {
        mu1 = (lo * hi).sqrt();
        let e = excess(mu1);
        if e.abs() <= BUDGET_TOL * budget {
            break;
        }
        if e > 0.0 {
            lo = mu1;
        } else {
            hi = mu1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            // the step function of a finite ensemble has no exact root here;
            // keep the feasible side
            mu1 = hi;
            break;
        }
    }

    let k = cfg.k();
    let mut powers = Vec::with_capacity(ens.len());
    let mut denoise = Vec::with_capacity(ens.len());
    for (s, ch) in ens.states().iter().enumerate() {
        let p1 = p1_closed_form(mags[s], mu1, noise);
        let eta = eta_for_p1(mags[s], p1, noise);
        let mut p = vec![0.0; k];
        if let Denoise::Finite(v) = eta {
            for (j, (pj, a)) in p.iter_mut().zip(ch.power_gains()).enumerate() {
                if j == limited_device {
                    *pj = p1;
                } else if *a > 0.0 {
                    *pj = v / a;
                } else {
                    return Err(Error::DegenerateChannel { device: j, state: Some(s) });
                }
            }
        }
        powers.push(p);
        denoise.push(eta);
    }
    let policy = PowerPolicy::new(powers, denoise)?;
    let expected_powers = policy.expected_powers(ens.weights());
    let cut = (mu1 * noise).sqrt();
    Ok(WaterfillingSolution { limited_device, mu1, policy, threshold: cut, peak_gain: 2.0 * cut, expected_powers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_examples() {
        assert_eq!(p1_closed_form(1.0, 1.0, 1.0), 0.0);
        assert_relative_eq!(p1_closed_form(2.0, 1.0, 1.0), 0.25, max_relative = 1e-15);
        assert!(p1_closed_form(1e9, 1.0, 1.0) < 1e-8);
        assert_eq!(p1_closed_form(0.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn two_state_example() {
        let cfg = SystemConfig::new(1.0, vec![0.2]).unwrap();
        let ens = FadingEnsemble::from_power_gains(&[vec![1.0], vec![4.0]], vec![0.5, 0.5]).unwrap();
        let sol = solve_p3(&cfg, &ens, 0).unwrap();
        assert_relative_eq!(sol.mu1, (10.0f64 / 11.0).powi(2), max_relative = 1e-9);
        assert_relative_eq!(sol.policy.powers(0)[0], 0.1, max_relative = 1e-9);
        assert_relative_eq!(sol.policy.powers(1)[0], 0.3, max_relative = 1e-9);
        assert_relative_eq!(sol.policy.denoise(0).value(), 12.1, max_relative = 1e-8);
        assert_relative_eq!(sol.policy.denoise(1).value(), 2.2f64.powi(2) / 1.2, max_relative = 1e-8);
    }

    #[test]
    fn single_state_example() {
        let cfg = SystemConfig::new(1.0, vec![0.25]).unwrap();
        let ens = FadingEnsemble::from_power_gains(&[vec![1.0]], vec![1.0]).unwrap();
        let sol = solve_p3(&cfg, &ens, 0).unwrap();
        assert_relative_eq!(sol.mu1, 0.64, max_relative = 1e-9);
        assert_relative_eq!(sol.threshold, 0.8, max_relative = 1e-9);
    }

    #[test]
    fn others_align_exactly_and_silence_propagates() {
        let cfg = SystemConfig::new(0.5, vec![1.0, 0.2, 9.0]).unwrap();
        let ens = FadingEnsemble::rayleigh(3, 500, 1.0, 2).unwrap();
        let sol = solve_p3(&cfg, &ens, 1).unwrap();
        let mut silent = 0;
        for (s, ch) in ens.states().iter().enumerate() {
            match sol.policy.denoise(s) {
                Denoise::Silent => {
                    silent += 1;
                    assert!(ch.magnitude(1) <= sol.threshold);
                }
                Denoise::Finite(eta) => {
                    for (j, a) in ch.power_gains().iter().enumerate().filter(|(j, _)| *j != 1) {
                        assert_relative_eq!((sol.policy.powers(s)[j] * a).sqrt(), eta.sqrt(), max_relative = 1e-12);
                    }
                }
            }
        }
        assert!(silent > 0);
        assert_relative_eq!(sol.expected_powers[1], 0.2, max_relative = 1e-9);
    }

    #[test]
    fn zero_channel_of_unlimited_device_is_degenerate() {
        let cfg = SystemConfig::new(1.0, vec![1.0, 1.0]).unwrap();
        let ens = FadingEnsemble::from_power_gains(&[vec![4.0, 0.0]], vec![1.0]).unwrap();
        assert!(matches!(solve_p3(&cfg, &ens, 0), Err(Error::DegenerateChannel { device: 1, state: Some(0) })));
        assert!(solve_p3(&cfg, &ens, 2).is_err());
    }
}
