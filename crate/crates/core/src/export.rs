//! CSV writers for solver outputs.
//!
//! Numbers are written in shortest round-trip form. The only non-finite
//! token is `inf`, used for the silent denoising factor.

use std::io::Write;

use crate::ensemble::FadingEnsemble;
use crate::error::{Error, Result};
use crate::fading::FadingSolution;
use crate::lowcomplexity::TruncationPolicy;
use crate::model::{Denoise, PowerPolicy};
use crate::static_solver::StaticSolution;
use crate::waterfilling::WaterfillingSolution;

/// Formats a number for CSV output; `+inf` becomes `inf`, NaN is rejected.
pub fn fmt_num(x: f64) -> Result<String> {
    if x.is_nan() {
        return Err(Error::InternalConsistency("attempted to export NaN".into()));
    }
    if x == f64::INFINITY {
        return Ok("inf".into());
    }
    if x.is_infinite() {
        return Err(Error::InternalConsistency("attempted to export -inf".into()));
    }
    Ok(format!("{x:?}"))
}

fn fmt_eta(eta: Denoise) -> Result<String> {
    fmt_num(eta.value())
}

fn indexed(prefix: &str, k: usize) -> impl Iterator<Item = String> + '_ {
    (1..=k).map(move |i| format!("{prefix}_{i}"))
}

fn check_shape(ens: &FadingEnsemble, policy: &PowerPolicy) -> Result<()> {
    if ens.len() != policy.num_states() {
        return Err(Error::DimensionMismatch { expected: ens.len(), got: policy.num_states() });
    }
    if ens.k() != policy.k() {
        return Err(Error::DimensionMismatch { expected: ens.k(), got: policy.k() });
    }
    Ok(())
}

fn write_policy_rows<W: Write>(
    out: &mut csv::Writer<W>,
    ens: &FadingEnsemble,
    policy: &PowerPolicy,
    extra: impl Fn(usize) -> Result<Vec<String>>,
) -> Result<()> {
    for s in 0..ens.len() {
        let mut row = vec![s.to_string(), fmt_num(ens.weights()[s])?, fmt_eta(policy.denoise(s))?];
        for p in policy.powers(s) {
            row.push(fmt_num(*p)?);
        }
        row.extend(extra(s)?);
        out.write_record(&row)?;
    }
    Ok(())
}

/// Per-state policy table: `state_index, weight, eta, p_1..p_K`.
pub fn write_policy_csv<W: Write>(w: W, ens: &FadingEnsemble, policy: &PowerPolicy) -> Result<()> {
    check_shape(ens, policy)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["state_index".to_string(), "weight".into(), "eta".into()];
    header.extend(indexed("p", policy.k()));
    out.write_record(&header)?;
    write_policy_rows(&mut out, ens, policy, |_| Ok(Vec::new()))?;
    out.flush()?;
    Ok(())
}

/// Fading solution in two blocks separated by a blank line: a one-row summary
/// `mu_1..mu_K, dual, primal, gap`, then the per-state policy table.
pub fn write_fading_solution_csv<W: Write>(mut w: W, ens: &FadingEnsemble, sol: &FadingSolution) -> Result<()> {
    {
        let mut out = csv::Writer::from_writer(&mut w);
        let mut header: Vec<String> = indexed("mu", sol.mu_opt.len()).collect();
        header.extend(["dual".into(), "primal".into(), "gap".into()]);
        out.write_record(&header)?;
        let mut row = sol.mu_opt.iter().map(|m| fmt_num(*m)).collect::<Result<Vec<_>>>()?;
        row.extend([fmt_num(sol.dual_value)?, fmt_num(sol.primal_value)?, fmt_num(sol.gap)?]);
        out.write_record(&row)?;
        out.flush()?;
    }
    w.write_all(b"\n")?;
    write_policy_csv(w, ens, &sol.policy)
}

/// Policy table with the limited device's magnitude and the constant
/// `threshold, peak_gain` columns appended.
pub fn write_waterfilling_csv<W: Write>(w: W, ens: &FadingEnsemble, sol: &WaterfillingSolution) -> Result<()> {
    check_shape(ens, &sol.policy)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["state_index".to_string(), "weight".into(), "eta".into()];
    header.extend(indexed("p", sol.policy.k()));
    header.extend(["h_limited_mag".into(), "threshold".into(), "peak_gain".into()]);
    out.write_record(&header)?;
    let (threshold, peak) = (fmt_num(sol.threshold)?, fmt_num(sol.peak_gain)?);
    write_policy_rows(&mut out, ens, &sol.policy, |s| {
        Ok(vec![fmt_num(ens.state(s).magnitude(sol.limited_device))?, threshold.clone(), peak.clone()])
    })?;
    out.flush()?;
    Ok(())
}

/// One row: `eta, xi_1..xi_K, inversion_prob_1..K, objective`.
pub fn write_truncation_csv<W: Write>(w: W, policy: &TruncationPolicy) -> Result<()> {
    let k = policy.xi.len();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["eta".to_string()];
    header.extend(indexed("xi", k));
    header.extend(indexed("inversion_prob", k));
    header.push("objective".into());
    out.write_record(&header)?;
    let mut row = vec![fmt_num(policy.eta)?];
    for x in policy.xi.iter().chain(&policy.inversion_prob) {
        row.push(fmt_num(*x)?);
    }
    row.push(fmt_num(policy.objective)?);
    out.write_record(&row)?;
    out.flush()?;
    Ok(())
}

/// Per-device table of a static solution in sorted (quality) order.
pub fn write_static_csv<W: Write>(w: W, sol: &StaticSolution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "device", "quality", "eta_tilde", "j", "power", "full_power", "k_star", "eta_star"])?;
    let d = &sol.diagnostics;
    for (rank, &device) in sol.order.iter().enumerate() {
        out.write_record([
            (rank + 1).to_string(),
            device.to_string(),
            fmt_num(d.quality[rank])?,
            fmt_num(d.eta_tilde[rank])?,
            fmt_num(d.j[rank])?,
            fmt_num(sol.powers[device])?,
            u8::from(rank < sol.k_star).to_string(),
            sol.k_star.to_string(),
            fmt_num(sol.eta_star)?,
        ])?;
    }
    out.flush()?;
    Ok(())
}
