//! Reference policies used for comparison.

use rayon::prelude::*;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::model::{mse_ensemble, optimal_denoise, ChannelVector, Denoise, PowerPolicy, SystemConfig};

/// Cutoffs tried by [`best_traditional_inversion`], relative to the mean `|h|^2`.
pub const DEFAULT_CUTOFF_GRID: [f64; 11] = [0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Every device at full power, with the denoising factor that is optimal for
/// those powers.
pub fn full_power_static(cfg: &SystemConfig, ch: &ChannelVector) -> Result<PowerPolicy> {
    cfg.check_k(ch.k())?;
    let powers = cfg.budgets().to_vec();
    let eta = optimal_denoise(ch.power_gains(), &powers, cfg.noise_var());
    if eta.is_silent() {
        return Err(Error::DegenerateChannel { device: 0, state: None });
    }
    PowerPolicy::single(powers, eta)
}

/// Constant powers `p_k = P_k` in every state with one fading-independent
/// `eta = min_k E[P_k |h_k|^2]`.
pub fn uniform_power_fading(cfg: &SystemConfig, ens: &FadingEnsemble) -> Result<PowerPolicy> {
    cfg.check_k(ens.k())?;
    let (device, eta) = ens
        .mean_power_gains()
        .iter()
        .zip(cfg.budgets())
        .map(|(g, b)| g * b)
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("K >= 1");
    if eta <= 0.0 {
        return Err(Error::DegenerateChannel { device, state: None });
    }
    PowerPolicy::new(vec![cfg.budgets().to_vec(); ens.len()], vec![Denoise::Finite(eta); ens.len()])
}

fn truncated_state(budgets: &[f64], gains: &[f64], cutoff: f64) -> (Vec<f64>, Denoise) {
    let eta = gains
        .iter()
        .zip(budgets)
        .filter(|(a, _)| **a > 0.0 && **a >= cutoff)
        .map(|(a, b)| a * b)
        .fold(f64::INFINITY, f64::min);
    if eta.is_infinite() {
        return (vec![0.0; gains.len()], Denoise::Silent);
    }
    let powers = gains.iter().map(|&a| if a > 0.0 && a >= cutoff { eta / a } else { 0.0 }).collect();
    (powers, Denoise::Finite(eta))
}

/// Channel inversion over the devices with `|h_k|^2 >= cutoff`, aligned to
/// the weakest of them at full power; the others stay silent.
pub fn traditional_inversion_static(cfg: &SystemConfig, ch: &ChannelVector, cutoff: f64) -> Result<PowerPolicy> {
    cfg.check_k(ch.k())?;
    check_cutoff(cutoff)?;
    let (p, eta) = truncated_state(cfg.budgets(), ch.power_gains(), cutoff);
    PowerPolicy::single(p, eta)
}

/// [`traditional_inversion_static`] applied state by state, each state
/// capped at the average budget.
pub fn traditional_inversion_fading(cfg: &SystemConfig, ens: &FadingEnsemble, cutoff: f64) -> Result<PowerPolicy> {
    cfg.check_k(ens.k())?;
    check_cutoff(cutoff)?;
    let (powers, denoise): (Vec<_>, Vec<_>) = ens
        .states()
        .par_iter()
        .map(|ch| truncated_state(cfg.budgets(), ch.power_gains(), cutoff))
        .unzip();
    PowerPolicy::new(powers, denoise)
}

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff.is_nan() || cutoff < 0.0 {
        return Err(Error::invalid(format!("cutoff must be nonnegative, got {cutoff}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct CutoffChoice {
    pub cutoff: f64,
    pub policy: PowerPolicy,
    /// Unscaled ensemble MSE.
    pub mse: f64,
}

/// Traditional inversion with the cutoff (from `relative_grid` times the mean
/// `|h|^2` over devices and states) that minimizes the ensemble MSE.
pub fn best_traditional_inversion(cfg: &SystemConfig, ens: &FadingEnsemble, relative_grid: &[f64]) -> Result<CutoffChoice> {
    if relative_grid.is_empty() {
        return Err(Error::invalid("cutoff grid must not be empty"));
    }
    let gains = ens.mean_power_gains();
    let scale = gains.iter().sum::<f64>() / gains.len() as f64;
    let mut best: Option<CutoffChoice> = None;
    for r in relative_grid {
        let cutoff = r * scale;
        let policy = traditional_inversion_fading(cfg, ens, cutoff)?;
        let mse = mse_ensemble(cfg, ens, &policy)?.total_unscaled;
        if best.as_ref().is_none_or(|b| mse < b.mse) {
            best = Some(CutoffChoice { cutoff, policy, mse });
        }
    }
    Ok(best.expect("grid is nonempty"))
}
