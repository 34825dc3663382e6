use rayon::prelude::*;

use super::inner::{power_at, solve_gamma, state_curvature, state_value, GammaRoot};
use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::model::{Denoise, PowerPolicy, SystemConfig};

/// States per parallel work unit. Partial sums are combined in chunk order, so
/// results do not depend on the thread count.
const CHUNK: usize = 256;

/// Dual function value, supergradient and the inner-optimal policy at `mu`.
#[derive(Clone, Debug)]
pub struct DualEvaluation {
    pub dual_value: f64,
    /// `E[p_k] - P_k`; an ascent direction of the (concave) dual function.
    pub subgradient: Vec<f64>,
    pub policy: PowerPolicy,
    /// `gamma* = 1/eta*` per state, zero for silent states.
    pub gammas: Vec<f64>,
}

pub(crate) struct Evaluation {
    pub value: f64,
    pub subgradient: Vec<f64>,
    /// Row-major `d E[p] / d mu`, the dual Hessian where it exists.
    pub hessian: Option<Vec<f64>>,
}

struct Partial {
    value: f64,
    expected: Vec<f64>,
    hessian: Vec<f64>,
}

fn check_mu(cfg: &SystemConfig, ens: &FadingEnsemble, mu: &[f64]) -> Result<()> {
    cfg.check_k(ens.k())?;
    if mu.len() != cfg.k() {
        return Err(Error::DimensionMismatch { expected: cfg.k(), got: mu.len() });
    }
    if let Some(m) = mu.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::invalid(format!("dual prices must be finite and nonnegative, got {m}")));
    }
    Ok(())
}

fn root_at(ens: &FadingEnsemble, mu: &[f64], noise_var: f64, state: usize) -> Result<GammaRoot> {
    solve_gamma(ens.state(state).power_gains(), mu, noise_var).map_err(|device| Error::UnboundedInner { state, device })
}

pub(crate) fn evaluate(cfg: &SystemConfig, ens: &FadingEnsemble, mu: &[f64], with_hessian: bool) -> Result<Evaluation> {
    check_mu(cfg, ens, mu)?;
    let k = cfg.k();
    let noise = cfg.noise_var();
    let partials: Vec<Result<Partial>> = ens
        .weights()
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, weights)| {
            let mut part = Partial {
                value: 0.0,
                expected: vec![0.0; k],
                hessian: if with_hessian { vec![0.0; k * k] } else { Vec::new() },
            };
            for (i, &w) in weights.iter().enumerate() {
                let state = c * CHUNK + i;
                let a = ens.state(state).power_gains();
                let gamma = root_at(ens, mu, noise, state)?.gamma();
                part.value += w * state_value(a, mu, gamma, noise);
                if gamma == 0.0 {
                    continue;
                }
                for (e, (&ak, &mk)) in part.expected.iter_mut().zip(a.iter().zip(mu)) {
                    *e += w * power_at(ak, mk, gamma);
                }
                if with_hessian {
                    let curv = state_curvature(a, mu, gamma);
                    for r in 0..k {
                        let row = &mut part.hessian[r * k..(r + 1) * k];
                        let scale = w * curv.coupling[r] / curv.curvature;
                        for (h, q) in row.iter_mut().zip(&curv.coupling) {
                            *h -= scale * q;
                        }
                        row[r] += w * curv.diag[r];
                    }
                }
            }
            Ok(part)
        })
        .collect();

    let mut value = 0.0;
    let mut expected = vec![0.0; k];
    let mut hessian = if with_hessian { vec![0.0; k * k] } else { Vec::new() };
    for part in partials {
        let part = part?;
        value += part.value;
        for (e, p) in expected.iter_mut().zip(&part.expected) {
            *e += p;
        }
        for (h, p) in hessian.iter_mut().zip(&part.hessian) {
            *h += p;
        }
    }
    let price: f64 = mu.iter().zip(cfg.budgets()).map(|(m, b)| m * b).sum();
    let subgradient = expected.iter().zip(cfg.budgets()).map(|(e, b)| e - b).collect();
    Ok(Evaluation {
        value: value - price,
        subgradient,
        hessian: with_hessian.then_some(hessian),
    })
}

/// Evaluates the dual function at `mu` and returns the per-state minimizers.
pub fn dual_eval(cfg: &SystemConfig, ens: &FadingEnsemble, mu: &[f64]) -> Result<DualEvaluation> {
    let eval = evaluate(cfg, ens, mu, false)?;
    let noise = cfg.noise_var();
    let per_state: Vec<Result<(f64, Vec<f64>)>> = (0..ens.len())
        .into_par_iter()
        .map(|s| {
            let gamma = root_at(ens, mu, noise, s)?.gamma();
            let a = ens.state(s).power_gains();
            Ok((gamma, a.iter().zip(mu).map(|(&ak, &mk)| power_at(ak, mk, gamma)).collect()))
        })
        .collect();
    let mut gammas = Vec::with_capacity(ens.len());
    let mut powers = Vec::with_capacity(ens.len());
    let mut denoise = Vec::with_capacity(ens.len());
    for r in per_state {
        let (gamma, p) = r?;
        gammas.push(gamma);
        denoise.push(if gamma > 0.0 { Denoise::Finite(1.0 / gamma) } else { Denoise::Silent });
        powers.push(p);
    }
    Ok(DualEvaluation {
        dual_value: eval.value,
        subgradient: eval.subgradient,
        policy: PowerPolicy::new(powers, denoise)?,
        gammas,
    })
}
