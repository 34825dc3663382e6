use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{noise_for_snr, ExperimentConfig, ExperimentKind, Resolved};
use super::plot::{line_plot, Series};
use crate::baselines::{best_traditional_inversion, full_power_static, uniform_power_fading, DEFAULT_CUTOFF_GRID};
use crate::ensemble::FadingEnsemble;
use crate::error::Result;
use crate::export::{fmt_num, write_static_csv, write_waterfilling_csv};
use crate::fading::{outer_solve, OuterOptions, SolverWarning};
use crate::lowcomplexity::solve_lowcomplexity;
use crate::model::{mse_ensemble, mse_single_state, Denoise, SystemConfig};
use crate::rng::derive_seed;
use crate::static_solver::solve_static;
use crate::waterfilling::{eta_for_p1, p1_closed_form, solve_p3};

pub const OPTIMAL: &str = "optimal";
pub const FULL_POWER: &str = "full_power";
pub const TRADITIONAL: &str = "traditional_inversion";
pub const UNIFORM: &str = "uniform_power";
pub const LOW_COMPLEXITY: &str = "low_complexity";

/// One point of a sweep: the scaled MSE of one scheme averaged over replicates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub profile: String,
    pub scheme: String,
    pub mse_mean: f64,
    /// Standard error over replicates (zero with a single replicate).
    pub mse_stderr: f64,
    pub replicates: usize,
    /// Solver warnings seen in any replicate, `;`-separated.
    pub warning: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub bytes: Vec<u8>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<SweepRow>,
    pub artifacts: Vec<Artifact>,
}

impl RunOutput {
    pub fn rows_for(&self, scheme: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.scheme == scheme).collect()
    }
}

struct Sample {
    scheme: &'static str,
    mse: f64,
    warning: Option<String>,
}

impl Sample {
    fn new(scheme: &'static str, mse: f64) -> Self {
        Self { scheme, mse, warning: None }
    }
}

/// Validates the configuration, then writes every artifact into `out_dir`.
/// Nothing is created when validation fails.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let resolved = cfg.resolve()?;
    let output = execute(&resolved, cfg.plots)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for a in &output.artifacts {
        let path = out_dir.join(&a.file_name);
        fs::write(&path, &a.bytes)?;
        log::info!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

/// Runs an experiment in memory.
pub fn execute(res: &Resolved, plots: bool) -> Result<RunOutput> {
    match res.kind {
        ExperimentKind::StaticDemo => static_demo(res, plots),
        ExperimentKind::WaterfillingProfile => waterfilling_profile(res, plots),
        _ => sweep(res, plots),
    }
}

fn ensemble_for(res: &Resolved, k: usize, rep: usize) -> Result<FadingEnsemble> {
    FadingEnsemble::rayleigh(k, res.n, res.sigma_h_sq, derive_seed(res.seed, &[k as u64, rep as u64]))
}

fn sweep(res: &Resolved, plots: bool) -> Result<RunOutput> {
    let points: Vec<(f64, usize, f64)> = match res.kind {
        ExperimentKind::StaticSweepK | ExperimentKind::FadingSweepK => {
            res.k_values.iter().map(|&k| (k as f64, k, res.snr_values[0])).collect()
        }
        _ => res.snr_values.iter().map(|&s| (s, res.k_values[0], s)).collect(),
    };
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..res.replicates).map(move |r| (p, r))).collect();
    let samples: Vec<Result<Vec<Sample>>> = tasks
        .par_iter()
        .map(|&(p, rep)| {
            let (_, k, snr) = points[p];
            let cfg = SystemConfig::new(noise_for_snr(snr), res.profile.budgets(k))?;
            let ens = ensemble_for(res, k, rep)?;
            match res.kind {
                ExperimentKind::StaticSweepK | ExperimentKind::StaticSweepSnr => static_schemes(&cfg, &ens),
                ExperimentKind::LowcomplexityCompare => fading_schemes(&cfg, &ens, false),
                _ => fading_schemes(&cfg, &ens, true),
            }
        })
        .collect();

    let mut rows = Vec::new();
    let mut iter = samples.into_iter();
    for &(x, _, _) in &points {
        let mut per_rep = Vec::with_capacity(res.replicates);
        for _ in 0..res.replicates {
            per_rep.push(iter.next().expect("one result per task")?);
        }
        for (i, first) in per_rep[0].iter().enumerate() {
            let values: Vec<f64> = per_rep.iter().map(|s| s[i].mse).collect();
            let mut warnings: Vec<String> = per_rep.iter().filter_map(|s| s[i].warning.clone()).collect();
            warnings.sort();
            warnings.dedup();
            let (mean, stderr) = mean_and_stderr(&values);
            rows.push(SweepRow {
                x,
                profile: res.profile.name().into(),
                scheme: first.scheme.into(),
                mse_mean: mean,
                mse_stderr: stderr,
                replicates: values.len(),
                warning: warnings.join(";"),
            });
        }
    }

    let name = res.kind.name();
    let mut artifacts = vec![Artifact { file_name: format!("{name}.csv"), bytes: sweep_csv(&rows)? }];
    if plots {
        let x_label = if matches!(res.kind, ExperimentKind::StaticSweepK | ExperimentKind::FadingSweepK) {
            "number of devices K"
        } else {
            "average receive SNR (dB)"
        };
        let mut series: Vec<Series> = Vec::new();
        for r in &rows {
            match series.iter_mut().find(|s| s.name == r.scheme) {
                Some(s) => s.points.push((r.x, r.mse_mean)),
                None => series.push(Series { name: r.scheme.clone(), points: vec![(r.x, r.mse_mean)] }),
            }
        }
        let svg = line_plot(name, x_label, "MSE", &series, true)?;
        artifacts.push(Artifact { file_name: format!("{name}.svg"), bytes: svg.into_bytes() });
    }
    Ok(RunOutput { rows, artifacts })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Each ensemble state is treated as its own static channel; the reported MSE
/// is the average over states.
fn static_schemes(cfg: &SystemConfig, ens: &FadingEnsemble) -> Result<Vec<Sample>> {
    let k2 = (cfg.k() * cfg.k()) as f64;
    let per_state: Vec<Result<(f64, f64)>> = ens
        .states()
        .par_iter()
        .map(|ch| {
            let opt = solve_static(cfg, ch)?.objective;
            let full = full_power_static(cfg, ch)?;
            let full = mse_single_state(cfg, ch, full.powers(0), full.denoise(0))?.total_unscaled;
            Ok((opt, full))
        })
        .collect();
    let (mut opt, mut full) = (0.0, 0.0);
    for (r, w) in per_state.into_iter().zip(ens.weights()) {
        let (o, f) = r?;
        opt += w * o;
        full += w * f;
    }
    let traditional = best_traditional_inversion(cfg, ens, &DEFAULT_CUTOFF_GRID)?.mse;
    Ok(vec![
        Sample::new(OPTIMAL, opt / k2),
        Sample::new(FULL_POWER, full / k2),
        Sample::new(TRADITIONAL, traditional / k2),
    ])
}

fn warning_label(w: &SolverWarning) -> &'static str {
    match w {
        SolverWarning::NotConverged { .. } => "not_converged",
        SolverWarning::FeasibilityRestored { .. } => "feasibility_restored",
        SolverWarning::BudgetSlack { .. } => "budget_slack",
    }
}

fn fading_schemes(cfg: &SystemConfig, ens: &FadingEnsemble, with_traditional: bool) -> Result<Vec<Sample>> {
    let sol = outer_solve(cfg, ens, &OuterOptions::default())?;
    let mut labels: Vec<&str> = sol.warnings.iter().map(warning_label).collect();
    labels.dedup();
    let mut out = vec![Sample {
        scheme: OPTIMAL,
        mse: sol.total_scaled(),
        warning: (!labels.is_empty()).then(|| labels.join(";")),
    }];
    let low = solve_lowcomplexity(cfg, ens, None)?;
    out.push(Sample::new(LOW_COMPLEXITY, low.report(cfg, ens)?.total_scaled));
    let uniform = uniform_power_fading(cfg, ens)?;
    out.push(Sample::new(UNIFORM, mse_ensemble(cfg, ens, &uniform)?.total_scaled));
    if with_traditional {
        let k2 = (cfg.k() * cfg.k()) as f64;
        out.push(Sample::new(TRADITIONAL, best_traditional_inversion(cfg, ens, &DEFAULT_CUTOFF_GRID)?.mse / k2));
    }
    Ok(out)
}

fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["x", "profile", "scheme", "mse_mean", "mse_stderr", "replicates", "warning"])?;
    for r in rows {
        out.write_record([
            fmt_num(r.x)?,
            r.profile.clone(),
            r.scheme.clone(),
            fmt_num(r.mse_mean)?,
            fmt_num(r.mse_stderr)?,
            r.replicates.to_string(),
            r.warning.clone(),
        ])?;
    }
    out.into_inner().map_err(|e| e.into_error().into())
}

fn static_demo(res: &Resolved, plots: bool) -> Result<RunOutput> {
    let k = res.k_values[0];
    let cfg = SystemConfig::new(noise_for_snr(res.snr_values[0]), res.profile.budgets(k))?;
    let ens = FadingEnsemble::rayleigh(k, 1, res.sigma_h_sq, derive_seed(res.seed, &[k as u64]))?;
    let sol = solve_static(&cfg, ens.state(0))?;
    let mut csv_bytes = Vec::new();
    write_static_csv(&mut csv_bytes, &sol)?;
    let mut artifacts = vec![Artifact { file_name: "static_demo.csv".into(), bytes: csv_bytes }];
    if plots {
        let ranked = |f: &dyn Fn(usize, usize) -> f64| -> Vec<(f64, f64)> {
            sol.order.iter().enumerate().map(|(r, &d)| ((r + 1) as f64, f(r, d))).collect()
        };
        let series = vec![
            Series { name: "received power P|h|^2".into(), points: ranked(&|r, _| sol.diagnostics.quality[r]) },
            Series {
                name: "optimal received power p|h|^2".into(),
                points: ranked(&|_, d| sol.powers[d] * ens.state(0).power_gains()[d]),
            },
            Series { name: "eta*".into(), points: ranked(&|_, _| sol.eta_star) },
        ];
        let svg = line_plot("static_demo", "device rank by quality", "received power", &series, true)?;
        artifacts.push(Artifact { file_name: "static_demo.svg".into(), bytes: svg.into_bytes() });
    }
    Ok(RunOutput { rows: Vec::new(), artifacts })
}

fn waterfilling_profile(res: &Resolved, plots: bool) -> Result<RunOutput> {
    let k = res.k_values[0];
    let cfg = SystemConfig::new(noise_for_snr(res.snr_values[0]), vec![1.0; k])?;
    let ens = ensemble_for(res, k, 0)?;
    let sol = solve_p3(&cfg, &ens, 0)?;
    let mut policy_bytes = Vec::new();
    write_waterfilling_csv(&mut policy_bytes, &ens, &sol)?;

    let noise = cfg.noise_var();
    let top = ens.states().iter().map(|c| c.magnitude(0)).fold(3.0 * sol.peak_gain, f64::max);
    let grid: Vec<f64> = (0..=400).map(|i| top * i as f64 / 400.0).collect();
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["h_mag", "p1", "eta"])?;
    let mut p_curve = Vec::new();
    let mut eta_curve = Vec::new();
    for &h in &grid {
        let p = p1_closed_form(h, sol.mu1, noise);
        let eta = eta_for_p1(h, p, noise);
        out.write_record([fmt_num(h)?, fmt_num(p)?, fmt_num(eta.value())?])?;
        p_curve.push((h, p));
        if let Denoise::Finite(v) = eta {
            eta_curve.push((h, v));
        }
    }
    let profile_bytes = out.into_inner().map_err(|e| e.into_error())?;
    let mut artifacts = vec![
        Artifact { file_name: "waterfilling_profile.csv".into(), bytes: profile_bytes },
        Artifact { file_name: "waterfilling_policy.csv".into(), bytes: policy_bytes },
    ];
    if plots {
        let svg = line_plot("waterfilling_profile: p1", "|h_1|", "p_1", &[Series { name: "p1".into(), points: p_curve }], false)?;
        artifacts.push(Artifact { file_name: "waterfilling_profile.svg".into(), bytes: svg.into_bytes() });
        let svg = line_plot("waterfilling_profile: eta", "|h_1|", "eta", &[Series { name: "eta".into(), points: eta_curve }], true)?;
        artifacts.push(Artifact { file_name: "waterfilling_eta.svg".into(), bytes: svg.into_bytes() });
    }
    Ok(RunOutput { rows: Vec::new(), artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(kind: ExperimentKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(kind);
        c.n = Some(200);
        c.replicates = Some(2);
        c.seed = 3;
        c
    }

    #[test]
    fn fading_sweep_rows_are_complete() {
        let mut c = quick(ExperimentKind::FadingSweepSnr);
        c.k = Some(4);
        c.snr_db_list = Some(vec![0.0, 20.0]);
        let out = execute(&c.resolve().unwrap(), true).unwrap();
        assert_eq!(out.rows.len(), 2 * 4);
        assert_eq!(out.artifacts.len(), 2);
        let text = String::from_utf8(out.artifacts[0].bytes.clone()).unwrap();
        assert!(text.starts_with("x,profile,scheme,mse_mean,mse_stderr,replicates,warning\n"));
        for opt in out.rows_for(OPTIMAL) {
            for r in out.rows.iter().filter(|r| r.x == opt.x) {
                assert!(opt.mse_mean <= r.mse_mean * (1.0 + 1e-9), "{r:?}");
            }
        }
    }

    #[test]
    fn static_demo_has_one_row_per_device() {
        let mut c = ExperimentConfig::new(ExperimentKind::StaticDemo);
        c.k = Some(7);
        let out = execute(&c.resolve().unwrap(), false).unwrap();
        assert_eq!(String::from_utf8(out.artifacts[0].bytes.clone()).unwrap().lines().count(), 8);
    }

    #[test]
    fn waterfilling_profile_writes_curve_and_policy() {
        let c = quick(ExperimentKind::WaterfillingProfile);
        let out = execute(&c.resolve().unwrap(), true).unwrap();
        let names: Vec<&str> = out.artifacts.iter().map(|a| a.file_name.as_str()).collect();
        assert_eq!(names, ["waterfilling_profile.csv", "waterfilling_policy.csv", "waterfilling_profile.svg", "waterfilling_eta.svg"]);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let mut c = quick(ExperimentKind::StaticSweepK);
        c.k_list = Some(vec![2, 6]);
        let r = c.resolve().unwrap();
        let a = execute(&r, false).unwrap();
        let b = execute(&r, false).unwrap();
        assert_eq!(a.artifacts, b.artifacts);
    }
}
