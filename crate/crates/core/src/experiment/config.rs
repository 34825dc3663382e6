use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Receive-SNR pattern (dB) of the heterogeneous profile, repeated every five devices.
pub const HETEROGENEOUS_PATTERN_DB: [f64; 5] = [2.7, 4.5, 5.0, 5.4, 6.4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    StaticDemo,
    #[serde(rename = "static_sweep_K", alias = "static_sweep_k")]
    StaticSweepK,
    StaticSweepSnr,
    #[serde(rename = "fading_sweep_K", alias = "fading_sweep_k")]
    FadingSweepK,
    FadingSweepSnr,
    WaterfillingProfile,
    LowcomplexityCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::StaticDemo => "static_demo",
            ExperimentKind::StaticSweepK => "static_sweep_K",
            ExperimentKind::StaticSweepSnr => "static_sweep_snr",
            ExperimentKind::FadingSweepK => "fading_sweep_K",
            ExperimentKind::FadingSweepSnr => "fading_sweep_snr",
            ExperimentKind::WaterfillingProfile => "waterfilling_profile",
            ExperimentKind::LowcomplexityCompare => "lowcomplexity_compare",
        }
    }

    fn sweeps_k(self) -> bool {
        matches!(self, ExperimentKind::StaticSweepK | ExperimentKind::FadingSweepK)
    }

    fn sweeps_snr(self) -> bool {
        matches!(self, ExperimentKind::StaticSweepSnr | ExperimentKind::FadingSweepSnr | ExperimentKind::LowcomplexityCompare)
    }

    pub(crate) fn is_fading(self) -> bool {
        matches!(
            self,
            ExperimentKind::FadingSweepK
                | ExperimentKind::FadingSweepSnr
                | ExperimentKind::WaterfillingProfile
                | ExperimentKind::LowcomplexityCompare
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrProfile {
    #[default]
    Uniform,
    Heterogeneous,
}

impl SnrProfile {
    pub fn name(self) -> &'static str {
        match self {
            SnrProfile::Uniform => "uniform",
            SnrProfile::Heterogeneous => "heterogeneous",
        }
    }

    /// Per-device budgets with mean one, so both profiles share a total budget of K.
    pub fn budgets(self, k: usize) -> Vec<f64> {
        match self {
            SnrProfile::Uniform => vec![1.0; k],
            SnrProfile::Heterogeneous => {
                let linear: Vec<f64> = HETEROGENEOUS_PATTERN_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
                let mean = linear.iter().sum::<f64>() / linear.len() as f64;
                (0..k).map(|i| linear[i % 5] / mean).collect()
            }
        }
    }
}

/// File format of `aircomp run --config`. Unset fields take per-experiment defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, alias = "K")]
    pub k: Option<usize>,
    #[serde(default, alias = "K_list")]
    pub k_list: Option<Vec<usize>>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default, alias = "snr_list")]
    pub snr_db_list: Option<Vec<f64>>,
    #[serde(default)]
    pub snr_profile: SnrProfile,
    #[serde(default, alias = "N")]
    pub n: Option<usize>,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub sigma_h_sq: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub plots: bool,
}

fn one() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            k: None,
            k_list: None,
            snr_db: None,
            snr_db_list: None,
            snr_profile: SnrProfile::Uniform,
            n: None,
            replicates: None,
            seed: 0,
            sigma_h_sq: 1.0,
            out_dir: None,
            plots: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let kind = self.experiment;
        let k_values = if kind.sweeps_k() {
            self.k_list.clone().unwrap_or_else(|| (1..=10).map(|i| 5 * i).collect())
        } else {
            if self.k_list.is_some() {
                return Err(Error::Config(format!("{} takes a single K, not k_list", kind.name())));
            }
            vec![self.k.unwrap_or(match kind {
                ExperimentKind::WaterfillingProfile => 5,
                _ => 20,
            })]
        };
        let snr_values = if kind.sweeps_snr() {
            self.snr_db_list.clone().unwrap_or_else(|| match kind {
                ExperimentKind::StaticSweepSnr => (-2..=6).map(|i| 5.0 * i as f64).collect(),
                _ => (0..=6).map(|i| 5.0 * i as f64).collect(),
            })
        } else {
            if self.snr_db_list.is_some() {
                return Err(Error::Config(format!("{} takes a single snr_db, not snr_db_list", kind.name())));
            }
            vec![self.snr_db.unwrap_or(match kind {
                ExperimentKind::StaticDemo => 10.0,
                _ => 5.0,
            })]
        };
        let n = self.n.unwrap_or(if kind == ExperimentKind::StaticDemo { 1 } else { 5000 });
        let replicates = self.replicates.unwrap_or(if kind == ExperimentKind::StaticDemo { 1 } else { 5 });

        if k_values.is_empty() {
            return Err(Error::Config("k_list must not be empty".into()));
        }
        if snr_values.is_empty() {
            return Err(Error::Config("snr_db_list must not be empty".into()));
        }
        if let Some(k) = k_values.iter().find(|k| **k == 0) {
            return Err(Error::Config(format!("K must be positive, got {k}")));
        }
        if let Some(s) = snr_values.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR must be finite, got {s}")));
        }
        if self.snr_profile == SnrProfile::Heterogeneous {
            if let Some(k) = k_values.iter().find(|k| **k % 5 != 0) {
                return Err(Error::Config(format!("heterogeneous profile needs K divisible by 5, got {k}")));
            }
        }
        if kind.is_fading() && n < 100 {
            return Err(Error::Config(format!("fading experiments need N >= 100, got {n}")));
        }
        if n == 0 || replicates == 0 {
            return Err(Error::Config("N and replicates must be positive".into()));
        }
        if !(self.sigma_h_sq.is_finite() && self.sigma_h_sq > 0.0) {
            return Err(Error::Config(format!("sigma_h_sq must be positive, got {}", self.sigma_h_sq)));
        }
        Ok(Resolved {
            kind,
            k_values,
            snr_values,
            profile: self.snr_profile,
            n,
            replicates,
            seed: self.seed,
            sigma_h_sq: self.sigma_h_sq,
        })
    }
}

/// A validated configuration with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub k_values: Vec<usize>,
    pub snr_values: Vec<f64>,
    pub profile: SnrProfile,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub sigma_h_sq: f64,
}

/// Noise variance giving average receive SNR `snr_db` with unit mean budget.
pub fn noise_for_snr(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "fading_sweep_K"}"#).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.k_values, vec![5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(r.snr_values, vec![5.0]);
        assert_eq!((r.n, r.replicates), (5000, 5));
    }

    #[test]
    fn accepts_uppercase_and_short_keys() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "static_sweep_snr", "K": 10, "snr_list": [0, 10], "N": 200}"#).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.k_values, vec![10]);
        assert_eq!(r.snr_values, vec![0.0, 10.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "static_demo", "typo": 1}"#).is_err());
        let bad = [
            r#"{"experiment": "fading_sweep_snr", "snr_db_list": []}"#,
            r#"{"experiment": "fading_sweep_snr", "N": 50}"#,
            r#"{"experiment": "static_sweep_K", "k_list": [5, 7], "snr_profile": "heterogeneous"}"#,
            r#"{"experiment": "static_demo", "k_list": [5]}"#,
        ];
        for text in bad {
            let c = ExperimentConfig::from_json(text).unwrap();
            assert!(c.resolve().is_err(), "{text}");
        }
    }

    #[test]
    fn heterogeneous_budgets_keep_total() {
        let b = SnrProfile::Heterogeneous.budgets(10);
        assert_relative_eq!(b.iter().sum::<f64>(), 10.0, max_relative = 1e-14);
        assert!(b[0] < b[1] && b[3] < b[4]);
        assert_relative_eq!(b[4] / b[0], 10f64.powf(0.37), max_relative = 1e-12);
    }
}
