//! Experiment configuration: a strict JSON schema plus helpers that turn a
//! config into a problem, a feature distribution and a resolved step size.

use crate::bounds::{step_size_for, BoundsError, Theorem};
use crate::curve::{log_checkpoints, Series};
use crate::spectrum::{
    build_power_law, compute_constants, make_distribution, DistributionKind, FeatureDistribution,
    OptimumMode, SpectrumError, SpectrumProblem,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("gamma mode \"explicit\" requires a \"value\" field")]
    MissingGammaValue,
    #[error("gamma value is only meaningful with mode \"explicit\"")]
    UnexpectedGammaValue,
    #[error("eps is only meaningful with optimum_mode \"tight\"")]
    UnexpectedEps,
    #[error("horizon must be >= 1")]
    BadHorizon,
    #[error("replicates must be >= 1")]
    BadReplicates,
    #[error("checkpoints.count must be >= 1")]
    BadCheckpointCount,
    #[error("series must be non-empty")]
    EmptySeries,
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub d: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `"fig1"` or `"tight"`.
    pub optimum_mode: String,
    /// Extra decay exponent for the tight mode; ignored for fig1.
    #[serde(default)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionConfig {
    pub kind: DistributionKind,
    /// Canonical atom probabilities `p_i ∝ λ_i^q`; defaults to `q = 1 - α`.
    #[serde(default)]
    pub prob_exponent: Option<f64>,
}

/// How the step size is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    Explicit,
    Thm1,
    Thm2,
    Thm3,
    /// `γ = 1/(2 tr H)`, the reference experimental protocol.
    HalfInvTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub mode: GammaMode,
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    pub count: usize,
    /// Only `"log"` spacing is supported.
    pub scale: CheckpointScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointScale {
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv_path: String,
    #[serde(default)]
    pub svg_path: Option<String>,
}

/// Full experiment description; unknown JSON keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub distribution: DistributionConfig,
    pub gamma: GammaConfig,
    pub horizon: u64,
    pub replicates: u32,
    pub base_seed: u64,
    pub checkpoints: CheckpointConfig,
    pub series: Vec<Series>,
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon < 1 {
            return Err(ConfigError::BadHorizon);
        }
        if self.replicates < 1 {
            return Err(ConfigError::BadReplicates);
        }
        if self.checkpoints.count < 1 {
            return Err(ConfigError::BadCheckpointCount);
        }
        if self.series.is_empty() {
            return Err(ConfigError::EmptySeries);
        }
        match self.gamma.mode {
            GammaMode::Explicit if self.gamma.value.is_none() => {
                return Err(ConfigError::MissingGammaValue)
            }
            GammaMode::Explicit => {}
            _ if self.gamma.value.is_some() => return Err(ConfigError::UnexpectedGammaValue),
            _ => {}
        }
        match self.problem.optimum_mode.as_str() {
            "fig1" if self.problem.eps.is_some() => return Err(ConfigError::UnexpectedEps),
            "fig1" => {}
            "tight" => {}
            other => {
                return Err(ConfigError::Spectrum(SpectrumError::BadOptimumMode(
                    other.to_string(),
                )))
            }
        }
        Ok(())
    }

    pub fn optimum_mode(&self) -> OptimumMode {
        match self.problem.optimum_mode.as_str() {
            "tight" => OptimumMode::Tight(self.problem.eps.unwrap_or(0.0)),
            _ => OptimumMode::Fig1,
        }
    }

    pub fn build_problem(&self) -> Result<SpectrumProblem, ConfigError> {
        Ok(build_power_law(
            self.problem.d,
            self.problem.alpha,
            self.problem.beta,
            self.optimum_mode(),
        )?)
    }

    pub fn build_distribution(
        &self,
        problem: &SpectrumProblem,
    ) -> Result<FeatureDistribution, ConfigError> {
        Ok(make_distribution(problem, self.distribution.kind, self.distribution.prob_exponent)?)
    }

    /// Resolve the step size. Returns `(γ, theorem)` where the theorem is
    /// present only for prescribed modes.
    pub fn resolve_gamma(
        &self,
        problem: &SpectrumProblem,
        dist: &FeatureDistribution,
    ) -> Result<(f64, Option<Theorem>), ConfigError> {
        match self.gamma.mode {
            GammaMode::Explicit => Ok((self.gamma.value.expect("validated"), None)),
            GammaMode::HalfInvTrace => Ok((1.0 / (2.0 * problem.trace_h()), None)),
            mode => {
                let theorem = match mode {
                    GammaMode::Thm1 => Theorem::Thm1,
                    GammaMode::Thm2 => Theorem::Thm2,
                    GammaMode::Thm3 => Theorem::Thm3,
                    _ => unreachable!(),
                };
                let constants =
                    compute_constants(problem, dist, problem.alpha(), problem.beta())?;
                let gamma = step_size_for(theorem, &constants, problem.alpha(), self.horizon)?;
                Ok((gamma, Some(theorem)))
            }
        }
    }

    /// Log-spaced checkpoint grid for this config.
    pub fn checkpoint_grid(&self) -> Vec<u64> {
        log_checkpoints(self.horizon, self.checkpoints.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
            "problem": {"d": 10, "alpha": 0.5, "beta": 0.0, "optimum_mode": "fig1"},
            "distribution": {"kind": "gaussian"},
            "gamma": {"mode": "half_inv_trace"},
            "horizon": 1000,
            "replicates": 4,
            "base_seed": 42,
            "checkpoints": {"count": 32, "scale": "log"},
            "series": ["last", "averaged"],
            "outputs": {"csv_path": "run.csv"}
        }"#
        .to_string()
    }

    #[test]
    fn round_trips_and_builds() {
        let cfg = ExperimentConfig::from_json(&sample_json()).unwrap();
        let problem = cfg.build_problem().unwrap();
        let dist = cfg.build_distribution(&problem).unwrap();
        let (gamma, theorem) = cfg.resolve_gamma(&problem, &dist).unwrap();
        assert!((gamma - 1.0 / (2.0 * problem.trace_h())).abs() < 1e-15);
        assert!(theorem.is_none());
        let grid = cfg.checkpoint_grid();
        assert_eq!(grid[0], 1);
        assert_eq!(*grid.last().unwrap(), 1000);

        let text = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.horizon, 1000);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = sample_json().replace("\"horizon\": 1000", "\"horizon\": 1000, \"bogus\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(ConfigError::Json(_))));
    }

    #[test]
    fn explicit_mode_requires_value() {
        let bad = sample_json().replace(
            "{\"mode\": \"half_inv_trace\"}",
            "{\"mode\": \"explicit\"}",
        );
        assert!(matches!(
            ExperimentConfig::from_json(&bad),
            Err(ConfigError::MissingGammaValue)
        ));
        let good = sample_json().replace(
            "{\"mode\": \"half_inv_trace\"}",
            "{\"mode\": \"explicit\", \"value\": 0.0}",
        );
        let cfg = ExperimentConfig::from_json(&good).unwrap();
        let problem = cfg.build_problem().unwrap();
        let dist = cfg.build_distribution(&problem).unwrap();
        assert_eq!(cfg.resolve_gamma(&problem, &dist).unwrap().0, 0.0);
    }

    #[test]
    fn value_outside_explicit_mode_rejected() {
        let bad = sample_json().replace(
            "{\"mode\": \"half_inv_trace\"}",
            "{\"mode\": \"thm1\", \"value\": 0.1}",
        );
        assert!(matches!(
            ExperimentConfig::from_json(&bad),
            Err(ConfigError::UnexpectedGammaValue)
        ));
    }

    #[test]
    fn prescribed_gamma_matches_formula() {
        let json = sample_json().replace("half_inv_trace", "thm1");
        let cfg = ExperimentConfig::from_json(&json).unwrap();
        let problem = cfg.build_problem().unwrap();
        let dist = cfg.build_distribution(&problem).unwrap();
        let (gamma, theorem) = cfg.resolve_gamma(&problem, &dist).unwrap();
        assert_eq!(theorem, Some(Theorem::Thm1));
        let constants = compute_constants(&problem, &dist, 0.5, 0.0).unwrap();
        let expect = 1.0 / (4.0 * constants.r * (1000.0_f64).ln());
        assert!((gamma - expect).abs() < 1e-15);
    }

    #[test]
    fn tight_mode_carries_eps() {
        let json = sample_json().replace(
            "\"optimum_mode\": \"fig1\"",
            "\"optimum_mode\": \"tight\", \"eps\": 0.1",
        );
        let cfg = ExperimentConfig::from_json(&json).unwrap();
        assert_eq!(cfg.optimum_mode(), OptimumMode::Tight(0.1));
    }
}
