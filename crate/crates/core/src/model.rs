//! Core data types and the closed-form MSE objective.
//!
//! With transmit powers `p_k`, channel power gains `|h_k|^2`, noise variance
//! `sigma^2` and denoising factor `eta`, the per-state computation error is
//!
//! ```text
//! sum_k (sqrt(p_k) |h_k| / sqrt(eta) - 1)^2  +  sigma^2 / eta
//! ```
//!
//! (the "unscaled" objective); dividing by `K^2` gives the MSE of the
//! recovered average.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};

/// Number of devices, receiver noise variance and per-device average power budgets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemConfig {
    noise_var: f64,
    budgets: Vec<f64>,
}

impl SystemConfig {
    pub fn new(noise_var: f64, budgets: Vec<f64>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(Error::invalid("at least one device is required"));
        }
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
        }
        if let Some((k, b)) = budgets.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::invalid(format!("power budget of device {k} must be positive, got {b}")));
        }
        Ok(Self { noise_var, budgets })
    }

    /// `k` devices sharing the same budget.
    pub fn uniform(k: usize, noise_var: f64, budget: f64) -> Result<Self> {
        Self::new(noise_var, vec![budget; k])
    }

    pub fn k(&self) -> usize {
        self.budgets.len()
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    /// Expected receive SNR `budget_k / sigma^2` of every device.
    pub fn receive_snr(&self) -> Vec<f64> {
        self.budgets.iter().map(|b| b / self.noise_var).collect()
    }

    pub(crate) fn check_k(&self, got: usize) -> Result<()> {
        if got != self.k() {
            return Err(Error::DimensionMismatch { expected: self.k(), got });
        }
        Ok(())
    }
}

/// One fading state: the complex channel coefficient of every device.
///
/// Solvers only use the power gains `|h_k|^2`, which are cached at
/// construction; the phases are kept for export and the signal-level oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelVector {
    gains: Vec<Complex64>,
    power_gains: Vec<f64>,
}

impl ChannelVector {
    pub fn new(gains: Vec<Complex64>) -> Result<Self> {
        if gains.is_empty() {
            return Err(Error::invalid("channel vector must not be empty"));
        }
        if gains.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(Error::invalid("channel coefficients must be finite"));
        }
        let power_gains = gains.iter().map(|h| h.norm_sqr()).collect();
        Ok(Self { gains, power_gains })
    }

    /// Real, nonnegative coefficients with the given power gains `|h_k|^2`.
    pub fn from_power_gains(power_gains: &[f64]) -> Result<Self> {
        if let Some(g) = power_gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::invalid(format!("power gain must be nonnegative, got {g}")));
        }
        Self::new(power_gains.iter().map(|g| Complex64::new(g.sqrt(), 0.0)).collect())
    }

    pub fn k(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    /// `|h_k|^2` for every device.
    pub fn power_gains(&self) -> &[f64] {
        &self.power_gains
    }

    pub fn magnitude(&self, k: usize) -> f64 {
        self.power_gains[k].sqrt()
    }
}

/// Receive-side denoising factor, `eta` in `(0, inf]`.
///
/// `Silent` is the explicit `eta = inf` state in which every device is off
/// and the per-state error is exactly `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Denoise {
    Finite(f64),
    Silent,
}

impl Denoise {
    pub fn finite(eta: f64) -> Result<Self> {
        if eta.is_finite() && eta > 0.0 {
            Ok(Denoise::Finite(eta))
        } else if eta == f64::INFINITY {
            Ok(Denoise::Silent)
        } else {
            Err(Error::invalid(format!("denoising factor must be positive, got {eta}")))
        }
    }

    /// `eta` as a float, `+inf` when silent.
    pub fn value(self) -> f64 {
        match self {
            Denoise::Finite(v) => v,
            Denoise::Silent => f64::INFINITY,
        }
    }

    /// `1 / eta`, zero when silent.
    pub fn inverse(self) -> f64 {
        match self {
            Denoise::Finite(v) => 1.0 / v,
            Denoise::Silent => 0.0,
        }
    }

    pub fn is_silent(self) -> bool {
        matches!(self, Denoise::Silent)
    }
}

impl fmt::Display for Denoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Denoise::Finite(v) => write!(f, "{v}"),
            Denoise::Silent => f.write_str("inf"),
        }
    }
}

/// Per-state transmit powers and denoising factors.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerPolicy {
    powers: Vec<Vec<f64>>,
    denoise: Vec<Denoise>,
}

impl PowerPolicy {
    pub fn new(powers: Vec<Vec<f64>>, denoise: Vec<Denoise>) -> Result<Self> {
        if powers.len() != denoise.len() {
            return Err(Error::DimensionMismatch { expected: powers.len(), got: denoise.len() });
        }
        if powers.is_empty() {
            return Err(Error::invalid("policy must cover at least one state"));
        }
        let k = powers[0].len();
        for (s, (p, eta)) in powers.iter().zip(&denoise).enumerate() {
            if p.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: p.len() });
            }
            if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::invalid(format!("power {x} in state {s} is not a nonnegative number")));
            }
            if eta.is_silent() && p.iter().any(|&x| x != 0.0) {
                return Err(Error::invalid(format!("state {s} is silent but has nonzero power")));
            }
            if let Denoise::Finite(v) = eta {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::invalid(format!("denoising factor {v} in state {s} is not positive")));
                }
            }
        }
        Ok(Self { powers, denoise })
    }

    /// Policy for a single (static) state.
    pub fn single(powers: Vec<f64>, eta: Denoise) -> Result<Self> {
        Self::new(vec![powers], vec![eta])
    }

    pub fn num_states(&self) -> usize {
        self.powers.len()
    }

    pub fn k(&self) -> usize {
        self.powers[0].len()
    }

    pub fn powers(&self, state: usize) -> &[f64] {
        &self.powers[state]
    }

    pub fn denoise(&self, state: usize) -> Denoise {
        self.denoise[state]
    }

    pub fn all_powers(&self) -> &[Vec<f64>] {
        &self.powers
    }

    pub fn all_denoise(&self) -> &[Denoise] {
        &self.denoise
    }

    /// Weighted average power of every device.
    pub fn expected_powers(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (p, w) in self.powers.iter().zip(weights) {
            for (o, x) in out.iter_mut().zip(p) {
                *o += w * x;
            }
        }
        out
    }
}

/// Decomposed computation error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MseReport {
    pub misalignment: f64,
    pub noise_term: f64,
    /// `misalignment + noise_term`, the quantity the solvers minimize.
    pub total_unscaled: f64,
    /// `total_unscaled / K^2`, the MSE of the recovered average.
    pub total_scaled: f64,
}

impl MseReport {
    pub(crate) fn from_terms(misalignment: f64, noise_term: f64, k: usize) -> Self {
        let total_unscaled = misalignment + noise_term;
        Self {
            misalignment,
            noise_term,
            total_unscaled,
            total_scaled: total_unscaled / (k * k) as f64,
        }
    }
}

/// Misalignment and noise terms of one state; no validation.
pub(crate) fn state_terms(power_gains: &[f64], powers: &[f64], eta: Denoise, noise_var: f64) -> (f64, f64) {
    match eta {
        Denoise::Silent => (power_gains.len() as f64, 0.0),
        Denoise::Finite(eta) => {
            let inv_sqrt = 1.0 / eta.sqrt();
            let mis = power_gains
                .iter()
                .zip(powers)
                .map(|(a, p)| {
                    let d = (p * a).sqrt() * inv_sqrt - 1.0;
                    d * d
                })
                .sum();
            (mis, noise_var / eta)
        }
    }
}

/// Instantaneous error of one fading state.
pub fn mse_single_state(cfg: &SystemConfig, ch: &ChannelVector, powers: &[f64], eta: Denoise) -> Result<MseReport> {
    cfg.check_k(ch.k())?;
    cfg.check_k(powers.len())?;
    if let Some((k, p)) = powers.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::invalid(format!("power of device {k} must be nonnegative, got {p}")));
    }
    if eta.is_silent() && powers.iter().any(|&p| p != 0.0) {
        return Err(Error::invalid("eta = inf requires every power to be zero"));
    }
    let (mis, noise) = state_terms(ch.power_gains(), powers, eta, cfg.noise_var());
    Ok(MseReport::from_terms(mis, noise, cfg.k()))
}

/// Ensemble-average error of a policy.
pub fn mse_ensemble(cfg: &SystemConfig, ens: &FadingEnsemble, policy: &PowerPolicy) -> Result<MseReport> {
    cfg.check_k(ens.k())?;
    if policy.num_states() != ens.len() {
        return Err(Error::DimensionMismatch { expected: ens.len(), got: policy.num_states() });
    }
    cfg.check_k(policy.k())?;
    let (mut mis, mut noise) = (0.0, 0.0);
    for (s, (ch, w)) in ens.iter().enumerate() {
        let (m, n) = state_terms(ch.power_gains(), policy.powers(s), policy.denoise(s), cfg.noise_var());
        mis += w * m;
        noise += w * n;
    }
    Ok(MseReport::from_terms(mis, noise, cfg.k()))
}

/// Best denoising factor for fixed powers in one state:
/// `eta = ((sum p a + sigma^2) / sum sqrt(p a))^2`, silent when all powers vanish.
pub fn optimal_denoise(power_gains: &[f64], powers: &[f64], noise_var: f64) -> Denoise {
    let (mut num, mut den) = (noise_var, 0.0);
    for (a, p) in power_gains.iter().zip(powers) {
        num += p * a;
        den += (p * a).sqrt();
    }
    if den > 0.0 {
        Denoise::Finite((num / den).powi(2))
    } else {
        Denoise::Silent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(noise: f64, budgets: &[f64]) -> SystemConfig {
        SystemConfig::new(noise, budgets.to_vec()).unwrap()
    }

    #[test]
    fn perfect_alignment_leaves_noise_only() {
        let ch = ChannelVector::from_power_gains(&[1.0, 4.0]).unwrap();
        let r = mse_single_state(&cfg(1.0, &[1.0, 1.0]), &ch, &[1.0, 0.25], Denoise::Finite(1.0)).unwrap();
        assert_eq!(r.misalignment, 0.0);
        assert_eq!(r.noise_term, 1.0);
        assert_eq!(r.total_unscaled, 1.0);
        assert_eq!(r.total_scaled, 0.25);
    }

    #[test]
    fn silent_state_costs_k() {
        let ch = ChannelVector::from_power_gains(&[0.3, 2.0, 7.0]).unwrap();
        let r = mse_single_state(&cfg(1.0, &[1.0; 3]), &ch, &[0.0; 3], Denoise::Silent).unwrap();
        assert_eq!(r.total_unscaled, 3.0);
        assert_eq!(r.noise_term, 0.0);
    }

    #[test]
    fn two_device_full_power_value() {
        // (3/7 - 1)^2 + (6/7 - 1)^2 + 2 * 9/49 = 5/7
        let ch = ChannelVector::from_power_gains(&[1.0, 4.0]).unwrap();
        let r = mse_single_state(&cfg(2.0, &[1.0, 1.0]), &ch, &[1.0, 1.0], Denoise::Finite(49.0 / 9.0)).unwrap();
        assert_relative_eq!(r.total_unscaled, 5.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = cfg(1.0, &[1.0, 1.0]);
        let ch = ChannelVector::from_power_gains(&[1.0, 4.0]).unwrap();
        assert!(matches!(
            mse_single_state(&c, &ch, &[1.0], Denoise::Finite(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mse_single_state(&c, &ch, &[1.0, -0.1], Denoise::Finite(1.0)).is_err());
        assert!(mse_single_state(&c, &ch, &[1.0, 0.0], Denoise::Silent).is_err());
        assert!(SystemConfig::new(0.0, vec![1.0]).is_err());
        assert!(SystemConfig::new(1.0, vec![]).is_err());
        assert!(SystemConfig::new(1.0, vec![1.0, 0.0]).is_err());
        assert!(Denoise::finite(-1.0).is_err());
        assert_eq!(Denoise::finite(f64::INFINITY).unwrap(), Denoise::Silent);
    }

    #[test]
    fn policy_rejects_power_on_silent_state() {
        assert!(PowerPolicy::single(vec![0.1], Denoise::Silent).is_err());
        assert!(PowerPolicy::single(vec![0.0], Denoise::Silent).is_ok());
    }

    #[test]
    fn larger_eta_trades_noise_for_misalignment() {
        let c = cfg(0.5, &[1.0, 1.0, 1.0]);
        let ch = ChannelVector::from_power_gains(&[0.5, 1.0, 2.0]).unwrap();
        let p = [0.5, 0.6, 0.7];
        // every p_k |h_k|^2 < 1.5, so eta > 1.5 is below full alignment
        let mut prev = mse_single_state(&c, &ch, &p, Denoise::Finite(1.5)).unwrap();
        for eta in [2.0, 3.0, 5.0, 10.0] {
            let r = mse_single_state(&c, &ch, &p, Denoise::Finite(eta)).unwrap();
            assert!(r.misalignment > prev.misalignment);
            assert!(r.noise_term < prev.noise_term);
            prev = r;
        }
    }

    #[test]
    fn optimal_denoise_beats_neighbours() {
        let a = [0.4, 1.3, 2.2];
        let p = [0.9, 0.2, 0.5];
        let eta = optimal_denoise(&a, &p, 0.3).value();
        let f = |e: f64| {
            let (m, n) = state_terms(&a, &p, Denoise::Finite(e), 0.3);
            m + n
        };
        assert!(f(eta) <= f(eta * 1.001));
        assert!(f(eta) <= f(eta * 0.999));
        assert!(optimal_denoise(&a, &[0.0; 3], 0.3).is_silent());
    }
}
