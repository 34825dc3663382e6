//! Signal-level Monte Carlo check of the closed-form MSE.
//!
//! Draws zero-mean unit-variance sources `s_k` (standard normal) and receiver
//! noise `w ~ N(0, sigma^2)`, forms the received superposition
//! `y = sum_k sqrt(p_k) |h_k| s_k + w`, the estimate `y / (K sqrt(eta))`
//! and compares it against the true average `sum_k s_k / K`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{ChannelVector, Denoise, SystemConfig};
use crate::rng::rng_from_seed;

/// One draw of the over-the-air aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSample {
    pub s: Vec<f64>,
    pub w: f64,
    pub y: f64,
    pub f_hat: f64,
    pub f: f64,
}

impl SignalSample {
    pub fn error(&self) -> f64 {
        self.f_hat - self.f
    }
}

/// Forms a sample from given sources and noise.
pub fn received(ch: &ChannelVector, powers: &[f64], eta: f64, s: Vec<f64>, w: f64) -> SignalSample {
    let k = s.len() as f64;
    let y = ch
        .power_gains()
        .iter()
        .zip(powers)
        .zip(&s)
        .map(|((a, p), s)| (p * a).sqrt() * s)
        .sum::<f64>()
        + w;
    let f_hat = y / (k * eta.sqrt());
    let f = s.iter().sum::<f64>() / k;
    SignalSample { s, w, y, f_hat, f }
}

/// Empirical scaled MSE and its standard error over `num_draws` draws.
pub fn mse_signal_oracle(
    cfg: &SystemConfig,
    ch: &ChannelVector,
    powers: &[f64],
    eta: Denoise,
    num_draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    cfg.check_k(ch.k())?;
    cfg.check_k(powers.len())?;
    let eta = match eta {
        Denoise::Finite(v) => v,
        Denoise::Silent => return Err(Error::Unsupported("signal oracle needs a finite denoising factor".into())),
    };
    if num_draws < 100 {
        return Err(Error::invalid(format!("signal oracle needs at least 100 draws, got {num_draws}")));
    }
    let mut rng = rng_from_seed(seed);
    let sigma = cfg.noise_var().sqrt();
    let k = cfg.k();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..num_draws {
        let s: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let w = sigma * rng.sample::<f64, _>(StandardNormal);
        let e = received(ch, powers, eta, s, w).error();
        let e2 = e * e;
        sum += e2;
        sum_sq += e2 * e2;
    }
    let n = num_draws as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
