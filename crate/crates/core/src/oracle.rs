//! Independent reference computations used to check the solvers.
//!
//! Nothing here calls into the solver modules: each function recomputes its
//! answer from the raw inputs by a different route (brute force, scalar
//! calculus on a reduced problem, direct property checks).

use rayon::prelude::*;

use crate::model::{ChannelVector, SystemConfig};

/// Grid brute force for the static problem.
///
/// For a fixed `eta` each device's best power is `min(P_k, eta/|h_k|^2)`, so
/// the problem reduces to a scalar search over `eta`. The grid holds `points`
/// log-spaced values over `[1e-4 q_min, 1e4 eta~_K]`. Returns the best
/// `(eta, objective)`.
pub fn static_grid_search(cfg: &SystemConfig, ch: &ChannelVector, points: usize) -> (f64, f64) {
    let q: Vec<f64> = cfg.budgets().iter().zip(ch.power_gains()).map(|(p, a)| p * a).collect();
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let full = ((cfg.noise_var() + q.iter().sum::<f64>()) / q.iter().map(|x| x.sqrt()).sum::<f64>()).powi(2);
    let (lo, hi) = (1e-4 * q_min, 1e4 * full);
    let ratio = (hi / lo).ln() / (points - 1) as f64;
    let objective = |eta: f64| {
        let mis: f64 = q
            .iter()
            .map(|qk| {
                let amp = (qk / eta).sqrt().min(1.0);
                (amp - 1.0) * (amp - 1.0)
            })
            .sum();
        mis + cfg.noise_var() / eta
    };
    (0..points)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let eta = lo * (ratio * i as f64).exp();
            (eta, objective(eta))
        })
        .reduce(|| (f64::NAN, f64::INFINITY), |x, y| if y.1 < x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x })
}

/// Single-device fading oracle.
///
/// With one device the best `eta` for a given power leaves the state MSE
/// `sigma^2 / (sigma^2 + p a)`; minimizing that plus `mu p` over `p >= 0`
/// gives `p = (sqrt(sigma^2 a / mu) - sigma^2)^+ / a`, and `mu` is found by
/// bisection on the budget. Returns `(mu, powers per state)`.
pub fn single_device_fading(power_gains: &[f64], weights: &[f64], noise_var: f64, budget: f64) -> (f64, Vec<f64>) {
    let power = |a: f64, mu: f64| {
        if a <= 0.0 {
            0.0
        } else {
            ((noise_var * a / mu).sqrt() - noise_var).max(0.0) / a
        }
    };
    let spend = |mu: f64| power_gains.iter().zip(weights).map(|(a, w)| w * power(*a, mu)).sum::<f64>();
    let (mut lo, mut hi) = (1e-300_f64, 1e300_f64);
    for _ in 0..4000 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if spend(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = hi;
    (mu, power_gains.iter().map(|a| power(*a, mu)).collect())
}

/// Violations of the structural properties of the static optimum, recomputed
/// from scratch for a candidate `(k_star, eta_star)` with `tol` relative slack.
pub fn static_property_violations(cfg: &SystemConfig, ch: &ChannelVector, k_star: usize, eta_star: f64, tol: f64) -> Vec<String> {
    let noise = cfg.noise_var();
    let mut q: Vec<f64> = cfg.budgets().iter().zip(ch.power_gains()).map(|(p, a)| p * a).collect();
    q.sort_by(f64::total_cmp);
    let kk = q.len();
    let mut stationary = Vec::with_capacity(kk);
    let mut j = Vec::with_capacity(kk);
    for k in 1..=kk {
        let s: f64 = q[..k].iter().sum();
        let r: f64 = q[..k].iter().map(|x| x.sqrt()).sum();
        stationary.push(((noise + s) / r).powi(2));
        let prev: f64 = q[..k - 1].iter().map(|x| x.sqrt() * (q[k - 1].sqrt() - x.sqrt())).sum();
        j.push(prev - noise);
    }
    let le = |a: f64, b: f64| a <= b + tol * a.abs().max(b.abs());
    let mut out = Vec::new();

    if !le(q[0], eta_star) {
        out.push(format!("full-power bound: eta* {eta_star} below weakest quality {}", q[0]));
    }
    for k in 1..=kk {
        let eta_k = stationary[k - 1];
        let f = |eta: f64| q[..k].iter().map(|x| ((x / eta).sqrt() - 1.0).powi(2)).sum::<f64>() + noise / eta;
        let grid: Vec<f64> = (0..=200).map(|i| eta_k * 10f64.powf(-2.0 + 4.0 * i as f64 / 200.0)).collect();
        for w in grid.windows(2) {
            let (f0, f1) = (f(w[0]), f(w[1]));
            let slack = tol * f0.abs().max(f1.abs());
            if w[1] <= eta_k && f1 > f0 + slack {
                out.push(format!("unimodality: F_{k} rises at {} left of eta~_{k} = {eta_k}", w[1]));
                break;
            }
            if w[0] >= eta_k && f1 < f0 - slack {
                out.push(format!("unimodality: F_{k} falls at {} right of eta~_{k} = {eta_k}", w[0]));
                break;
            }
        }
    }
    let ks = k_star;
    if !(1..=kk).contains(&ks) {
        out.push(format!("k* = {ks} outside 1..={kk}"));
        return out;
    }
    let eta_ks = stationary[ks - 1];
    if !le(q[ks - 1], eta_ks) || (ks < kk && !le(eta_ks, q[ks])) {
        out.push(format!("interval: eta~_k* = {eta_ks} not within its quality interval"));
    }
    if (eta_star - eta_ks).abs() > tol * eta_ks {
        out.push(format!("eta* = {eta_star} differs from eta~_k* = {eta_ks}"));
    }
    for k in 1..=kk {
        let prev = if k == 1 { f64::INFINITY } else { stationary[k - 2] };
        let ok = if k <= ks { le(q[k - 1], prev) } else { le(prev, q[k - 1]) };
        if !ok {
            out.push(format!("threshold: device rank {k} on the wrong side of eta~_{}", k - 1));
        }
        if j[k - 1].abs() > 1e-9 {
            let sj = j[k - 1].signum();
            let s1 = (q[k - 1] - stationary[k - 1]).signum();
            let s2 = if k == 1 { -1.0 } else { (q[k - 1] - prev).signum() };
            if s1 != sj || s2 != sj {
                out.push(format!("sign equivalence fails at rank {k}: J = {}, signs {s1} {s2}", j[k - 1]));
            }
        }
        if k >= 2 {
            let chain_ok = if k <= ks { le(stationary[k - 1], prev) } else { le(prev, stationary[k - 1]) };
            if !chain_ok {
                out.push(format!("monotone chain broken between eta~_{} and eta~_{k}", k - 1));
            }
        }
    }
    if !j.windows(2).all(|w| le(w[0], w[1])) {
        out.push("J is not nondecreasing".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_recovers_two_device_example() {
        let cfg = SystemConfig::new(2.0, vec![1.0, 1.0]).unwrap();
        let ch = ChannelVector::from_power_gains(&[1.0, 4.0]).unwrap();
        let (eta, obj) = static_grid_search(&cfg, &ch, 1_000_000);
        assert_relative_eq!(obj, 5.0 / 7.0, max_relative = 1e-8);
        assert_relative_eq!(eta, 49.0 / 9.0, max_relative = 1e-4);
    }

    #[test]
    fn single_device_two_state_example() {
        let (mu, p) = single_device_fading(&[1.0, 4.0], &[0.5, 0.5], 1.0, 0.2);
        assert_relative_eq!(mu, (10.0f64 / 11.0).powi(2), max_relative = 1e-12);
        assert_relative_eq!(p[0], 0.1, max_relative = 1e-10);
        assert_relative_eq!(p[1], 0.3, max_relative = 1e-10);
    }

    #[test]
    fn properties_flag_a_wrong_threshold() {
        let cfg = SystemConfig::new(2.0, vec![1.0, 1.0]).unwrap();
        let ch = ChannelVector::from_power_gains(&[1.0, 4.0]).unwrap();
        assert!(static_property_violations(&cfg, &ch, 2, 49.0 / 9.0, 1e-9).is_empty());
        assert!(!static_property_violations(&cfg, &ch, 1, 9.0, 1e-9).is_empty());
    }
}
