//! Checkpointed risk (or bound) curves shared by the simulator, the exact
//! propagator and the bound evaluators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a curve's values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    /// Mean risk of the last iterate `θ_t` across replicates.
    Last,
    /// Mean risk of the Polyak average `(1/t) Σ_{k=1..t} θ_k`.
    Averaged,
    /// Mean of the best risk seen so far along each path.
    RunningMin,
    /// Exact expected risk from the diagonal propagator.
    Exact,
    BoundThm1,
    BoundThm2,
    BoundThm3,
}

impl Series {
    pub fn label(self) -> &'static str {
        match self {
            Series::Last => "last",
            Series::Averaged => "averaged",
            Series::RunningMin => "running_min",
            Series::Exact => "exact",
            Series::BoundThm1 => "bound_thm1",
            Series::BoundThm2 => "bound_thm2",
            Series::BoundThm3 => "bound_thm3",
        }
    }
}

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("checkpoints must be non-empty and strictly increasing")]
    BadCheckpoints,
    #[error("values length {values} does not match checkpoints length {checkpoints}")]
    LengthMismatch { values: usize, checkpoints: usize },
    #[error("risk values must be nonnegative (found {0} at index {1})")]
    NegativeValue(f64, usize),
}

/// Risk (or bound) values at strictly increasing step indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskCurve {
    pub checkpoints: Vec<u64>,
    pub values: Vec<f64>,
    /// Standard errors across replicates; `None` for exact/bound series.
    pub stderrs: Option<Vec<f64>>,
    pub series: Series,
    pub replicates: u32,
}

impl RiskCurve {
    pub fn new(
        series: Series,
        checkpoints: Vec<u64>,
        values: Vec<f64>,
        stderrs: Option<Vec<f64>>,
        replicates: u32,
    ) -> Result<Self, CurveError> {
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CurveError::BadCheckpoints);
        }
        if values.len() != checkpoints.len() {
            return Err(CurveError::LengthMismatch {
                values: values.len(),
                checkpoints: checkpoints.len(),
            });
        }
        if let Some(s) = &stderrs {
            if s.len() != checkpoints.len() {
                return Err(CurveError::LengthMismatch {
                    values: s.len(),
                    checkpoints: checkpoints.len(),
                });
            }
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(CurveError::NegativeValue(v, i));
        }
        Ok(RiskCurve { checkpoints, values, stderrs, series, replicates })
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }
}

/// `count` log-spaced integer checkpoints in `[1, t_max]`, deduplicated,
/// always containing both endpoints.
pub fn log_checkpoints(t_max: u64, count: usize) -> Vec<u64> {
    assert!(t_max >= 1 && count >= 1);
    let n = count.max(2);
    let lo = 0.0_f64;
    let hi = (t_max as f64).ln();
    let mut out: Vec<u64> = (0..n)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            (x.exp().round() as u64).clamp(1, t_max)
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}
