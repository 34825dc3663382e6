//! Maximization of the concave dual function over the price box.

use nalgebra::{DMatrix, DVector};

use super::dual::{evaluate, Evaluation};
use super::{DualState, IterationRecord, OuterMethod};
use crate::ensemble::FadingEnsemble;
use crate::error::Result;
use crate::model::SystemConfig;

pub(crate) struct Problem<'a> {
    pub cfg: &'a SystemConfig,
    pub ens: &'a FadingEnsemble,
    pub upper: Vec<f64>,
    pub tol: f64,
    pub kkt_tol: f64,
    pub max_iter: usize,
}

pub(crate) struct OuterResult {
    pub mu: Vec<f64>,
    pub dual_value: f64,
    pub state: DualState,
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub method: OuterMethod,
}

/// Scaled violation of the optimality conditions: primal infeasibility and
/// complementary slackness, each relative to the budget.
pub(crate) fn kkt_residual(mu: &[f64], subgradient: &[f64], budgets: &[f64]) -> f64 {
    mu.iter()
        .zip(subgradient)
        .zip(budgets)
        .map(|((m, s), b)| (s / b).max(m * s.abs() / (1.0 + m * b)))
        .fold(0.0, f64::max)
}

/// Candidate answer: the evaluated point with the smallest KKT residual.
struct Incumbent {
    mu: Vec<f64>,
    value: f64,
    residual: f64,
}

impl Incumbent {
    fn new(k: usize) -> Self {
        Self { mu: vec![0.0; k], value: f64::NEG_INFINITY, residual: f64::INFINITY }
    }

    fn offer(&mut self, mu: &[f64], eval: &Evaluation, budgets: &[f64]) {
        let r = kkt_residual(mu, &eval.subgradient, budgets);
        if r < self.residual {
            self.mu.copy_from_slice(mu);
            self.value = eval.value;
            self.residual = r;
        }
    }
}

impl Problem<'_> {
    fn eval(&self, mu: &[f64], hessian: bool) -> Result<Evaluation> {
        evaluate(self.cfg, self.ens, mu, hessian)
    }

    fn budgets(&self) -> &[f64] {
        self.cfg.budgets()
    }

    fn finish(&self, inc: Incumbent, state: DualState, history: Vec<IterationRecord>, converged: bool, method: OuterMethod) -> OuterResult {
        OuterResult {
            mu: inc.mu,
            dual_value: inc.value,
            iterations: history.len(),
            state,
            history,
            converged,
            method,
        }
    }
}

/// Central-cut ellipsoid method with box cuts for infeasible centers.
pub(crate) fn ellipsoid(prob: &Problem) -> Result<OuterResult> {
    let n = prob.upper.len();
    if n == 1 {
        return interval_bisection(prob);
    }
    let nf = n as f64;
    let mut center: Vec<f64> = prob.upper.iter().map(|u| u / 2.0).collect();
    let mut shape = DMatrix::<f64>::zeros(n, n);
    for (k, u) in prob.upper.iter().enumerate() {
        shape[(k, k)] = nf * (u / 2.0).powi(2);
    }
    let mut inc = Incumbent::new(n);
    let mut best_dual = f64::NEG_INFINITY;
    let mut upper_bound = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut last_feasible = center.clone();

    for it in 1..=prob.max_iter {
        let cut = match box_cut(&center, &prob.upper) {
            Some(a) => a,
            None => {
                let eval = prob.eval(&center, false)?;
                let s = DVector::from_column_slice(&eval.subgradient);
                let spread = (s.transpose() * &shape * &s)[(0, 0)].max(0.0).sqrt();
                upper_bound = upper_bound.min(eval.value + spread);
                best_dual = best_dual.max(eval.value);
                inc.offer(&center, &eval, prob.budgets());
                last_feasible.copy_from_slice(&center);
                history.push(IterationRecord { iteration: it, dual_value: eval.value, best_dual, upper_bound });
                if upper_bound - best_dual <= prob.tol * (1.0 + best_dual.abs()) && inc.residual <= prob.kkt_tol {
                    converged = true;
                    break;
                }
                -s
            }
        };
        let pa = &shape * &cut;
        let apa = cut.dot(&pa);
        if !(apa > 0.0 && apa.is_finite()) {
            log::debug!("ellipsoid degenerated after {it} iterations");
            break;
        }
        let b = pa / apa.sqrt();
        for (c, bk) in center.iter_mut().zip(b.iter()) {
            *c -= bk / (nf + 1.0);
        }
        shape = (&shape - (2.0 / (nf + 1.0)) * &b * b.transpose()) * (nf * nf / (nf * nf - 1.0));
        // keep the shape symmetric against rounding drift
        shape = 0.5 * (&shape + shape.transpose());
    }
    if inc.value == f64::NEG_INFINITY {
        let eval = prob.eval(&last_feasible, false)?;
        inc.offer(&last_feasible, &eval, prob.budgets());
    }
    let state = DualState {
        mu: inc.mu.clone(),
        ellipsoid_center: center,
        ellipsoid_shape: shape.transpose().as_slice().to_vec(),
        iteration: history.len(),
        best_dual,
    };
    Ok(prob.finish(inc, state, history, converged, OuterMethod::Ellipsoid))
}

fn box_cut(center: &[f64], upper: &[f64]) -> Option<DVector<f64>> {
    let n = center.len();
    for (k, (&c, &u)) in center.iter().zip(upper).enumerate() {
        if c <= 0.0 {
            let mut a = DVector::zeros(n);
            a[k] = -1.0;
            return Some(a);
        }
        if c >= u {
            let mut a = DVector::zeros(n);
            a[k] = 1.0;
            return Some(a);
        }
    }
    None
}

/// One-dimensional specialization of the ellipsoid method.
fn interval_bisection(prob: &Problem) -> Result<OuterResult> {
    let (mut lo, mut hi) = (0.0, prob.upper[0]);
    let mut inc = Incumbent::new(1);
    let mut best_dual = f64::NEG_INFINITY;
    let mut upper_bound = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    for it in 1..=prob.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let eval = prob.eval(&[mid], false)?;
        let s = eval.subgradient[0];
        upper_bound = upper_bound.min(eval.value + s.abs() * (hi - lo) / 2.0);
        best_dual = best_dual.max(eval.value);
        inc.offer(&[mid], &eval, prob.budgets());
        history.push(IterationRecord { iteration: it, dual_value: eval.value, best_dual, upper_bound });
        if upper_bound - best_dual <= prob.tol * (1.0 + best_dual.abs()) && inc.residual <= prob.kkt_tol {
            converged = true;
            break;
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let state = DualState {
        mu: inc.mu.clone(),
        ellipsoid_center: vec![0.5 * (lo + hi)],
        ellipsoid_shape: vec![(0.5 * (hi - lo)).powi(2)],
        iteration: history.len(),
        best_dual,
    };
    Ok(prob.finish(inc, state, history, converged, OuterMethod::Ellipsoid))
}

/// Projected Newton ascent with Armijo backtracking along the projection arc.
pub(crate) fn projected_newton(prob: &Problem) -> Result<OuterResult> {
    const ARMIJO: f64 = 1e-4;
    const MAX_HALVINGS: usize = 50;
    let n = prob.upper.len();
    let lower: Vec<f64> = prob.upper.iter().map(|u| 1e-12 * u).collect();
    let project = |x: &mut [f64]| {
        for ((v, l), u) in x.iter_mut().zip(&lower).zip(&prob.upper) {
            *v = v.clamp(*l, *u);
        }
    };

    let mut mu: Vec<f64> = prob.upper.iter().map(|u| u / 2.0).collect();
    let mut eval = prob.eval(&mu, true)?;
    let mut inc = Incumbent::new(n);
    let mut best_dual = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut converged = false;

    for it in 1..=prob.max_iter {
        best_dual = best_dual.max(eval.value);
        inc.offer(&mu, &eval, prob.budgets());
        history.push(IterationRecord { iteration: it, dual_value: eval.value, best_dual, upper_bound: f64::INFINITY });
        if inc.residual <= prob.kkt_tol {
            converged = true;
            break;
        }
        let s = &eval.subgradient;
        let neg_h = -DMatrix::from_row_slice(n, n, eval.hessian.as_deref().expect("hessian requested"));
        let at_bound = |k: usize| (mu[k] <= lower[k] && s[k] < 0.0) || (mu[k] >= prob.upper[k] && s[k] > 0.0);
        let free: Vec<usize> = (0..n).filter(|&k| !at_bound(k)).collect();

        let mut dir = vec![0.0; n];
        let max_diag = (0..n).map(|k| neg_h[(k, k)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            if at_bound(k) {
                dir[k] = s[k] / neg_h[(k, k)].max(1e-12 * max_diag);
            }
        }
        if !free.is_empty() {
            let m = free.len();
            let mut sub = DMatrix::from_fn(m, m, |i, j| neg_h[(free[i], free[j])]);
            let rhs = DVector::from_iterator(m, free.iter().map(|&k| s[k]));
            let mut shift = 1e-12 * max_diag;
            let step = loop {
                for i in 0..m {
                    sub[(i, i)] += shift;
                }
                if let Some(ch) = sub.clone().cholesky() {
                    break ch.solve(&rhs);
                }
                shift *= 100.0;
            };
            for (i, &k) in free.iter().enumerate() {
                dir[k] = step[i];
            }
        }

        let mut t = 1.0;
        let mut accepted = None;
        let mut fallback: Option<(Vec<f64>, Evaluation, f64)> = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial: Vec<f64> = mu.iter().zip(&dir).map(|(m, d)| m + t * d).collect();
            project(&mut trial);
            if trial == mu {
                break;
            }
            let trial_eval = prob.eval(&trial, true)?;
            let predicted: f64 = s.iter().zip(trial.iter().zip(&mu)).map(|(g, (x, m))| g * (x - m)).sum();
            if trial_eval.value >= eval.value + ARMIJO * predicted {
                accepted = Some((trial, trial_eval));
                break;
            }
            // near the optimum the dual value stops resolving; fall back to
            // the residual as the merit function
            let r = kkt_residual(&trial, &trial_eval.subgradient, prob.budgets());
            if r < inc.residual && fallback.as_ref().is_none_or(|f| r < f.2) {
                fallback = Some((trial, trial_eval, r));
            }
            t *= 0.5;
        }
        match accepted.or(fallback.map(|(x, e, _)| (x, e))) {
            Some((x, e)) => {
                mu = x;
                eval = e;
            }
            None => {
                log::debug!("projected Newton stalled after {it} iterations");
                break;
            }
        }
    }
    if !converged {
        best_dual = best_dual.max(eval.value);
        inc.offer(&mu, &eval, prob.budgets());
    }
    let state = DualState { mu: inc.mu.clone(), ellipsoid_center: mu, ellipsoid_shape: Vec::new(), iteration: history.len(), best_dual };
    Ok(prob.finish(inc, state, history, converged, OuterMethod::ProjectedNewton))
}

/// Projected supergradient ascent with diminishing steps `c / sqrt(t)`.
pub(crate) fn projected_subgradient(prob: &Problem) -> Result<OuterResult> {
    const STEP: f64 = 0.5;
    let n = prob.upper.len();
    let mut mu: Vec<f64> = prob.upper.iter().map(|u| u / 2.0).collect();
    let mut inc = Incumbent::new(n);
    let mut best_dual = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    for it in 1..=prob.max_iter {
        let eval = prob.eval(&mu, false)?;
        best_dual = best_dual.max(eval.value);
        inc.offer(&mu, &eval, prob.budgets());
        history.push(IterationRecord { iteration: it, dual_value: eval.value, best_dual, upper_bound: f64::INFINITY });
        if inc.residual <= prob.kkt_tol {
            converged = true;
            break;
        }
        let scaled: Vec<f64> = eval.subgradient.iter().zip(prob.budgets()).map(|(s, b)| s / b).collect();
        let norm = scaled.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            converged = true;
            break;
        }
        let alpha = STEP / (it as f64).sqrt();
        for ((m, g), u) in mu.iter_mut().zip(&scaled).zip(&prob.upper) {
            *m = (*m + alpha * u * g / norm).clamp(1e-12 * u, *u);
        }
    }
    let state = DualState { mu: inc.mu.clone(), ellipsoid_center: mu, ellipsoid_shape: Vec::new(), iteration: history.len(), best_dual };
    Ok(prob.finish(inc, state, history, converged, OuterMethod::ProjectedSubgradient))
}
