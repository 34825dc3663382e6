//! Per-state Lagrangian minimization for fixed dual prices `mu`.
//!
//! With `gamma = 1/eta` and `lambda_k = |h_k|^2 / mu_k`, the state problem
//! reduces to the convex scalar problem
//! `min_{gamma >= 0} sum_k 1/(lambda_k gamma + 1) + gamma sigma^2`,
//! whose minimizer solves `sum_k lambda_k / (lambda_k gamma + 1)^2 = sigma^2`
//! (or is `gamma = 0`, all devices silent, when `sum_k lambda_k <= sigma^2`).
//! Powers follow the regularized channel inversion
//! `p_k = |h_k|^2 eta / (|h_k|^2 + eta mu_k)^2`.
//!
//! Terms are evaluated in the form `a mu / (a gamma + mu)^2` (with
//! `a = |h_k|^2`) so that `mu_k = 0` is exact: such a device contributes
//! nothing for `gamma > 0` and inverts its channel.

use crate::error::{Error, Result};
use crate::model::{ChannelVector, Denoise};

const MAX_ITER: usize = 300;
/// Target relative residual of the stationarity equation.
const RESIDUAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSolution {
    pub gamma: f64,
    pub eta: Denoise,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum GammaRoot {
    Silent,
    Root { gamma: f64, iterations: usize },
}

impl GammaRoot {
    pub(crate) fn gamma(self) -> f64 {
        match self {
            GammaRoot::Silent => 0.0,
            GammaRoot::Root { gamma, .. } => gamma,
        }
    }
}

/// Left-hand side of the stationarity equation at `gamma > 0`.
pub fn stationarity_lhs(power_gains: &[f64], mu: &[f64], gamma: f64) -> f64 {
    power_gains
        .iter()
        .zip(mu)
        .filter(|(a, m)| **a > 0.0 && **m > 0.0)
        .map(|(a, m)| {
            let t = a * gamma + m;
            a * m / (t * t)
        })
        .sum()
}

fn lhs_and_slope(power_gains: &[f64], mu: &[f64], gamma: f64) -> (f64, f64) {
    let (mut f, mut df) = (0.0, 0.0);
    for (&a, &m) in power_gains.iter().zip(mu) {
        if a > 0.0 && m > 0.0 {
            let t = a * gamma + m;
            let term = a * m / (t * t);
            f += term;
            df -= 2.0 * a * term / t;
        }
    }
    (f, df)
}

/// Solves the stationarity equation. `Err(device)` names a zero-price device
/// that makes the state problem unbounded.
pub(crate) fn solve_gamma(power_gains: &[f64], mu: &[f64], noise_var: f64) -> std::result::Result<GammaRoot, usize> {
    let mut lambda_sum = 0.0;
    let mut inv_sum = 0.0;
    let mut free = None;
    for (k, (&a, &m)) in power_gains.iter().zip(mu).enumerate() {
        if a > 0.0 {
            if m > 0.0 {
                lambda_sum += a / m;
                inv_sum += m / a;
            } else if free.is_none() {
                free = Some(k);
            }
        }
    }
    if lambda_sum <= noise_var {
        return match free {
            Some(k) => Err(k),
            None => Ok(GammaRoot::Silent),
        };
    }

    // f(gamma) = lhs - sigma^2 is convex and strictly decreasing; f(0+) > 0.
    let target = noise_var;
    let mut lo = 0.0;
    // lhs < sum mu/(a gamma^2), so this point already has f < 0
    let mut hi = (inv_sum / target).sqrt();
    while stationarity_lhs(power_gains, mu, hi) >= target {
        hi *= 2.0;
    }
    let mut x = lo;
    let mut f = lambda_sum - target;
    let mut df = lhs_and_slope(power_gains, mu, 0.0).1;
    for it in 1..=MAX_ITER {
        let mut next = x - f / df;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        x = next;
        let (lhs, slope) = lhs_and_slope(power_gains, mu, x);
        f = lhs - target;
        df = slope;
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if f.abs() <= RESIDUAL_TOL * target || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(GammaRoot::Root { gamma: x, iterations: it });
        }
    }
    Ok(GammaRoot::Root { gamma: x, iterations: MAX_ITER })
}

/// Optimal `gamma = 1/eta` of one state for dual prices `mu`.
pub fn inner_gamma_solve(ch: &ChannelVector, mu: &[f64], noise_var: f64) -> Result<InnerSolution> {
    if mu.len() != ch.k() {
        return Err(Error::DimensionMismatch { expected: ch.k(), got: mu.len() });
    }
    if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::invalid(format!("dual prices must be nonnegative, got {m}")));
    }
    if !(noise_var.is_finite() && noise_var > 0.0) {
        return Err(Error::invalid(format!("noise variance must be positive, got {noise_var}")));
    }
    match solve_gamma(ch.power_gains(), mu, noise_var) {
        Ok(GammaRoot::Silent) => Ok(InnerSolution { gamma: 0.0, eta: Denoise::Silent, iterations: 0 }),
        Ok(GammaRoot::Root { gamma, iterations }) => {
            Ok(InnerSolution { gamma, eta: Denoise::Finite(1.0 / gamma), iterations })
        }
        Err(device) => Err(Error::UnboundedInner { state: 0, device }),
    }
}

/// Regularized channel inversion `p = a gamma / (a gamma + mu)^2`, in gamma form.
#[inline]
pub(crate) fn power_at(a: f64, mu: f64, gamma: f64) -> f64 {
    if a == 0.0 || gamma == 0.0 {
        return 0.0;
    }
    let t = a * gamma + mu;
    a * gamma / (t * t)
}

/// Powers of every device for a given denoising factor.
pub fn inner_power(ch: &ChannelVector, mu: &[f64], eta: Denoise) -> Result<Vec<f64>> {
    if mu.len() != ch.k() {
        return Err(Error::DimensionMismatch { expected: ch.k(), got: mu.len() });
    }
    if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::invalid(format!("dual prices must be nonnegative, got {m}")));
    }
    match eta {
        Denoise::Silent => {
            if let Some(k) = mu.iter().zip(ch.power_gains()).position(|(m, a)| *m == 0.0 && *a > 0.0) {
                return Err(Error::invalid(format!(
                    "device {k} has zero dual price and eta = inf: inversion power is indeterminate"
                )));
            }
            Ok(vec![0.0; ch.k()])
        }
        Denoise::Finite(eta) => Ok(ch
            .power_gains()
            .iter()
            .zip(mu)
            .map(|(&a, &m)| {
                if a == 0.0 {
                    0.0
                } else {
                    let t = a + eta * m;
                    a * eta / (t * t)
                }
            })
            .collect()),
    }
}

/// Per-state Lagrangian value `sum_k v_k + gamma sigma^2` at the optimum,
/// where `v_k` is the misalignment-plus-price cost of device `k`.
pub(crate) fn state_value(power_gains: &[f64], mu: &[f64], gamma: f64, noise_var: f64) -> f64 {
    power_gains
        .iter()
        .zip(mu)
        .map(|(&a, &m)| {
            if a == 0.0 {
                1.0
            } else if m == 0.0 {
                if gamma > 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                m / (a * gamma + m)
            }
        })
        .sum::<f64>()
        + gamma * noise_var
}

/// Curvature pieces of one non-silent state:
/// `dp_k/dmu_j = diag_k delta_kj - coupling_k coupling_j / curvature`.
pub(crate) struct StateCurvature {
    pub diag: Vec<f64>,
    pub coupling: Vec<f64>,
    pub curvature: f64,
}

pub(crate) fn state_curvature(power_gains: &[f64], mu: &[f64], gamma: f64) -> StateCurvature {
    let k = power_gains.len();
    let mut diag = vec![0.0; k];
    let mut coupling = vec![0.0; k];
    let mut curvature = 0.0;
    for (i, (&a, &m)) in power_gains.iter().zip(mu).enumerate() {
        if a == 0.0 {
            continue;
        }
        let t = a * gamma + m;
        let t3 = t * t * t;
        diag[i] = -2.0 * a * gamma / t3;
        coupling[i] = a * (m - a * gamma) / t3;
        curvature += 2.0 * a * a * m / t3;
    }
    StateCurvature { diag, coupling, curvature }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ch(gains: &[f64]) -> ChannelVector {
        ChannelVector::from_power_gains(gains).unwrap()
    }

    #[test]
    fn single_device_closed_form_root() {
        // 1/(gamma+1)^2 = 0.25 => gamma = 1
        let s = inner_gamma_solve(&ch(&[1.0]), &[1.0], 0.25).unwrap();
        assert_relative_eq!(s.gamma, 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.eta.value(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn boundary_case_is_silent() {
        let s = inner_gamma_solve(&ch(&[1.0]), &[1.0], 1.0).unwrap();
        assert_eq!(s.gamma, 0.0);
        assert_eq!(s.eta, Denoise::Silent);
    }

    #[test]
    fn lone_zero_price_device_is_unbounded() {
        assert!(matches!(
            inner_gamma_solve(&ch(&[1.0]), &[0.0], 1.0),
            Err(Error::UnboundedInner { device: 0, .. })
        ));
    }

    #[test]
    fn zero_price_device_inverts_its_channel() {
        let c = ch(&[1.0, 2.0, 0.5]);
        let mu = [0.2, 0.0, 0.1];
        let s = inner_gamma_solve(&c, &mu, 0.3).unwrap();
        let p = inner_power(&c, &mu, s.eta).unwrap();
        assert_relative_eq!(p[1], s.eta.value() / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_channels_with_prices_are_silent() {
        let s = inner_gamma_solve(&ch(&[0.0, 0.0]), &[1.0, 2.0], 0.1).unwrap();
        assert!(s.eta.is_silent());
    }

    #[test]
    fn inner_power_examples() {
        let p = inner_power(&ch(&[1.0]), &[1.0], Denoise::Finite(1.0)).unwrap();
        assert_relative_eq!(p[0], 0.25, max_relative = 1e-15);
        let p = inner_power(&ch(&[4.0]), &[0.0], Denoise::Finite(2.0)).unwrap();
        assert_relative_eq!(p[0], 0.5, max_relative = 1e-15);
        let p = inner_power(&ch(&[4.0]), &[0.3], Denoise::Silent).unwrap();
        assert_eq!(p[0], 0.0);
        assert!(inner_power(&ch(&[4.0]), &[0.0], Denoise::Silent).is_err());
    }

    #[test]
    fn rejects_negative_inputs() {
        assert!(inner_gamma_solve(&ch(&[1.0]), &[-1.0], 1.0).is_err());
        assert!(inner_gamma_solve(&ch(&[1.0]), &[1.0], -1.0).is_err());
        assert!(inner_gamma_solve(&ch(&[1.0, 2.0]), &[1.0], 1.0).is_err());
    }

    #[test]
    fn residual_is_tight_across_scales() {
        for (noise, mu) in [(1e-3, [0.01, 0.2, 0.05]), (0.5, [0.1, 0.1, 0.1]), (1e-6, [1e-4, 1e-3, 1e-2])] {
            let gains = [0.02, 1.3, 4.1];
            let s = inner_gamma_solve(&ch(&gains), &mu, noise).unwrap();
            let r = stationarity_lhs(&gains, &mu, s.gamma) - noise;
            assert!(r.abs() <= 1e-10 * noise, "residual {r} at noise {noise}");
        }
    }

    #[test]
    fn value_matches_primal_plus_price() {
        let gains = [0.4, 1.1, 2.5];
        let mu = [0.3, 0.05, 0.2];
        let noise = 0.2;
        let s = inner_gamma_solve(&ch(&gains), &mu, noise).unwrap();
        let p = inner_power(&ch(&gains), &mu, s.eta).unwrap();
        let eta = s.eta.value();
        let mse: f64 = gains.iter().zip(&p).map(|(a, p)| ((p * a).sqrt() / eta.sqrt() - 1.0).powi(2)).sum::<f64>()
            + noise / eta;
        let price: f64 = mu.iter().zip(&p).map(|(m, p)| m * p).sum();
        assert_relative_eq!(state_value(&gains, &mu, s.gamma, noise), mse + price, max_relative = 1e-12);
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let gains = [0.4, 1.1, 2.5];
        let mu = [0.3, 0.05, 0.2];
        let noise = 0.2;
        let g0 = solve_gamma(&gains, &mu, noise).unwrap().gamma();
        let c = state_curvature(&gains, &mu, g0);
        for j in 0..3 {
            let h = 1e-6 * mu[j];
            let mut up = mu;
            up[j] += h;
            let mut dn = mu;
            dn[j] -= h;
            let gu = solve_gamma(&gains, &up, noise).unwrap().gamma();
            let gd = solve_gamma(&gains, &dn, noise).unwrap().gamma();
            for k in 0..3 {
                let fd = (power_at(gains[k], up[k], gu) - power_at(gains[k], dn[k], gd)) / (2.0 * h);
                let an = if k == j { c.diag[k] } else { 0.0 } - c.coupling[k] * c.coupling[j] / c.curvature;
                assert_relative_eq!(an, fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }
}
