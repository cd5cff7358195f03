//! Synthetic least-squares problems with controlled capacity/source
//! exponents, their feature distributions, and the assumption constants the
//! theorems consume.
//!
//! Everything is expressed in the eigenbasis of the covariance `H`: a
//! problem is the non-increasing spectrum `λ_i` together with the
//! coordinates of the optimum `θ*`. The two supported feature laws share
//! `E[xx^T] = H` exactly:
//!
//! - `Gaussian`: `x = Σ_i √λ_i g_i v_i` with independent standard normals;
//! - `CanonicalAtoms`: `x = s_i v_i` with probability `p_i`, where
//!   `p_i s_i² = λ_i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("dimension must be >= 1")]
    EmptyDimension,
    #[error("capacity exponent alpha must lie in [0, 1), got {0}")]
    BadAlpha(f64),
    #[error("source exponent beta must be > -1, got {0}")]
    BadBeta(f64),
    #[error("tight optimum mode requires eps > 0, got {0}")]
    BadEps(f64),
    #[error("eigenvalues must be strictly positive and non-increasing")]
    BadSpectrum,
    #[error("theta_star length {0} does not match dimension {1}")]
    BadOptimum(usize, usize),
    #[error("atom probabilities must be positive and sum to 1 within 1e-12 (sum = {0})")]
    BadProbabilities(f64),
    #[error("atom constraint p_i s_i^2 = lambda_i violated at index {0}")]
    AtomMismatch(usize),
    #[error("constant {name} is not finite; degenerate alpha/beta/d combination")]
    Overflow { name: &'static str },
    #[error("lambda_o search did not satisfy 7 R_ln <= lambda_o after {0} doublings")]
    LambdaOSearchFailed(u32),
    #[error("optimum_mode must be \"fig1\" or \"tight\", got {0:?}")]
    BadOptimumMode(String),
}

/// How `θ*` is generated for power-law problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "optimum_mode", content = "eps")]
pub enum OptimumMode {
    /// `θ*_i = i^{-(1 - β/(1-α))/2}`, the formula used by the reference
    /// synthetic experiment. For β > 0 this makes `C_β` grow with `d`.
    Fig1,
    /// `θ*_i = i^{-(1 + β/(1-α) + eps)/2}`, which keeps
    /// `C_β = Σ λ_i^{-β} θ*_i²` summable as `d → ∞`.
    Tight(f64),
}

/// A least-squares problem in the eigenbasis of its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumProblem {
    d: usize,
    lambdas: Vec<f64>,
    theta_star: Vec<f64>,
    alpha: f64,
    beta: f64,
    optimum_mode: OptimumMode,
}

impl SpectrumProblem {
    /// Build from explicit parts, validating the spectrum invariants.
    pub fn from_parts(
        lambdas: Vec<f64>,
        theta_star: Vec<f64>,
        alpha: f64,
        beta: f64,
        optimum_mode: OptimumMode,
    ) -> Result<Self, SpectrumError> {
        let d = lambdas.len();
        if d == 0 {
            return Err(SpectrumError::EmptyDimension);
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(SpectrumError::BadAlpha(alpha));
        }
        if beta <= -1.0 {
            return Err(SpectrumError::BadBeta(beta));
        }
        if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite())
            || lambdas.windows(2).any(|w| w[0] < w[1])
        {
            return Err(SpectrumError::BadSpectrum);
        }
        if theta_star.len() != d {
            return Err(SpectrumError::BadOptimum(theta_star.len(), d));
        }
        Ok(SpectrumProblem { d, lambdas, theta_star, alpha, beta, optimum_mode })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn optimum_mode(&self) -> OptimumMode {
        self.optimum_mode
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[self.d - 1]
    }

    pub fn trace_h(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// `½ Σ_i λ_i θ*_i²`, the risk of the zero initial iterate.
    pub fn initial_risk(&self) -> f64 {
        0.5 * self
            .lambdas
            .iter()
            .zip(&self.theta_star)
            .map(|(&l, &t)| l * t * t)
            .sum::<f64>()
    }
}

/// JSON document layout for [`SpectrumProblem`].
///
/// Arrays are conceptually 1-indexed (`lambdas[0]` is `λ_1`).
#[derive(Debug, Serialize, Deserialize)]
struct ProblemDoc {
    d: usize,
    alpha: f64,
    beta: f64,
    lambdas: Vec<f64>,
    theta_star: Vec<f64>,
    optimum_mode: String,
    eps: f64,
}

impl Serialize for SpectrumProblem {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (mode, eps) = match self.optimum_mode {
            OptimumMode::Fig1 => ("fig1", 0.0),
            OptimumMode::Tight(e) => ("tight", e),
        };
        ProblemDoc {
            d: self.d,
            alpha: self.alpha,
            beta: self.beta,
            lambdas: self.lambdas.clone(),
            theta_star: self.theta_star.clone(),
            optimum_mode: mode.to_string(),
            eps,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpectrumProblem {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = ProblemDoc::deserialize(deserializer)?;
        if doc.d != doc.lambdas.len() {
            return Err(D::Error::custom(format!(
                "d = {} does not match lambdas length {}",
                doc.d,
                doc.lambdas.len()
            )));
        }
        let mode = match doc.optimum_mode.as_str() {
            "fig1" => OptimumMode::Fig1,
            "tight" => OptimumMode::Tight(doc.eps),
            other => return Err(D::Error::custom(format!("unknown optimum_mode {other:?}"))),
        };
        SpectrumProblem::from_parts(doc.lambdas, doc.theta_star, doc.alpha, doc.beta, mode)
            .map_err(D::Error::custom)
    }
}

/// Sampling law for the features, with `E[xx^T] = H` exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureDistribution {
    /// `x_i = √λ_i g_i` in eigen-coordinates, `g_i` i.i.d. standard normal.
    Gaussian,
    /// `x = s_i v_i` with probability `p_i`; invariant `p_i s_i² = λ_i`.
    CanonicalAtoms { probs: Vec<f64>, scales: Vec<f64> },
}

/// Tag recording which law a set of constants was computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Gaussian,
    Canonical,
}

impl FeatureDistribution {
    pub fn kind(&self) -> DistributionKind {
        match self {
            FeatureDistribution::Gaussian => DistributionKind::Gaussian,
            FeatureDistribution::CanonicalAtoms { .. } => DistributionKind::Canonical,
        }
    }

    /// Validate the atom invariants against a problem.
    pub fn validate(&self, problem: &SpectrumProblem) -> Result<(), SpectrumError> {
        if let FeatureDistribution::CanonicalAtoms { probs, scales } = self {
            if probs.len() != problem.dimension() || scales.len() != probs.len() {
                return Err(SpectrumError::BadOptimum(probs.len(), problem.dimension()));
            }
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|&p| !(p > 0.0)) || (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(SpectrumError::BadProbabilities(sum));
            }
            for (i, ((&p, &s), &l)) in
                probs.iter().zip(scales).zip(problem.lambdas()).enumerate()
            {
                if !(s > 0.0) || (p * s * s - l).abs() > 1e-12 * l.max(1.0) {
                    return Err(SpectrumError::AtomMismatch(i));
                }
            }
        }
        Ok(())
    }
}

/// All the assumption constants a theorem can consume, computed as the
/// smallest values valid for the given distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub trace_h: f64,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// `‖θ*‖²`
    pub norm_theta_sq: f64,
    /// Fourth-moment constant: `E[‖x‖² xx^T] ⪯ R H`.
    pub r: f64,
    /// Reference scale for the log-regularity constants, `7 R_ln ≤ λ_o`.
    pub lambda_o: f64,
    /// Log-regularity of the features at `λ_o`.
    pub r_ln: f64,
    /// Capacity constant: `E[⟨x, H^{-α}x⟩ xx^T] ⪯ R_α H`.
    pub r_alpha: f64,
    /// `Σ_i θ*_i² ln(λ_o/λ_i)`.
    pub c_ln: f64,
    /// `Σ_i λ_i^{-β} θ*_i²`.
    pub c_beta: f64,
    pub distribution_kind: DistributionKind,
}

/// Power-law problem: `λ_i = i^{-1/(1-α)}`, `θ*` per [`OptimumMode`].
pub fn build_power_law(
    d: usize,
    alpha: f64,
    beta: f64,
    optimum_mode: OptimumMode,
) -> Result<SpectrumProblem, SpectrumError> {
    if d == 0 {
        return Err(SpectrumError::EmptyDimension);
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(SpectrumError::BadAlpha(alpha));
    }
    if beta <= -1.0 {
        return Err(SpectrumError::BadBeta(beta));
    }
    let theta_exponent = match optimum_mode {
        OptimumMode::Fig1 => 0.5 * (1.0 - beta / (1.0 - alpha)),
        OptimumMode::Tight(eps) => {
            if !(eps > 0.0) {
                return Err(SpectrumError::BadEps(eps));
            }
            0.5 * (1.0 + beta / (1.0 - alpha) + eps)
        }
    };
    let lambda_exponent = 1.0 / (1.0 - alpha);
    let mut lambdas = Vec::with_capacity(d);
    let mut theta_star = Vec::with_capacity(d);
    for i in 1..=d {
        let x = i as f64;
        lambdas.push(x.powf(-lambda_exponent));
        theta_star.push(x.powf(-theta_exponent));
    }
    SpectrumProblem::from_parts(lambdas, theta_star, alpha, beta, optimum_mode)
}

/// Attach a feature law to a problem.
///
/// Canonical atoms use `p_i ∝ λ_i^q` with `q = prob_exponent`
/// (default `1 - α`, which attains `R_α = tr(H^{1-α})` with equality)
/// and `s_i = √(λ_i/p_i)`.
pub fn make_distribution(
    problem: &SpectrumProblem,
    kind: DistributionKind,
    prob_exponent: Option<f64>,
) -> Result<FeatureDistribution, SpectrumError> {
    match kind {
        DistributionKind::Gaussian => Ok(FeatureDistribution::Gaussian),
        DistributionKind::Canonical => {
            let q = prob_exponent.unwrap_or(1.0 - problem.alpha());
            let weights: Vec<f64> = problem.lambdas().iter().map(|&l| l.powf(q)).collect();
            let total: f64 = weights.iter().sum();
            if !total.is_finite() || !(total > 0.0) {
                return Err(SpectrumError::Overflow { name: "canonical atom weights" });
            }
            let probs: Vec<f64> = weights.iter().map(|&w| w / total).collect();
            let scales: Vec<f64> = probs
                .iter()
                .zip(problem.lambdas())
                .map(|(&p, &l)| (l / p).sqrt())
                .collect();
            let dist = FeatureDistribution::CanonicalAtoms { probs, scales };
            dist.validate(problem)?;
            Ok(dist)
        }
    }
}

/// `R_ln(λ_o)` for the given law: the smallest constant with
/// `E[⟨x, ln(λ_o H^{-1}) x⟩ xx^T] ⪯ R_ln H`.
///
/// Gaussian uses the fourth-moment identity
/// `E[⟨x,Ax⟩ xx^T] = H tr(AH) + 2HAH`; canonical atoms contribute one
/// direction each.
pub fn r_ln_at(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    lambda_o: f64,
) -> f64 {
    let lambdas = problem.lambdas();
    match dist {
        FeatureDistribution::Gaussian => {
            let trace_term: f64 = lambdas.iter().map(|&l| l * (lambda_o / l).ln()).sum();
            let max_term = lambdas
                .iter()
                .map(|&l| l * (lambda_o / l).ln())
                .fold(f64::NEG_INFINITY, f64::max);
            trace_term + 2.0 * max_term
        }
        FeatureDistribution::CanonicalAtoms { probs, .. } => lambdas
            .iter()
            .zip(probs)
            .map(|(&l, &p)| (l / p) * (lambda_o / l).ln())
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Find the reference scale `λ_o` with `7 R_ln(λ_o) ≤ λ_o` by doubling
/// from `e·λ_max`. `R_ln` grows only logarithmically in `λ_o`, so the
/// first satisfying doubling exists; the search is deterministic.
pub fn select_lambda_o(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
) -> Result<f64, SpectrumError> {
    const MAX_DOUBLINGS: u32 = 200;
    let mut lambda_o = std::f64::consts::E * problem.lambda_max();
    for _ in 0..=MAX_DOUBLINGS {
        let r_ln = r_ln_at(problem, dist, lambda_o);
        if 7.0 * r_ln <= lambda_o {
            return Ok(lambda_o);
        }
        lambda_o *= 2.0;
    }
    Err(SpectrumError::LambdaOSearchFailed(MAX_DOUBLINGS))
}

/// Smallest assumption constants for the problem/distribution pair, with
/// the capacity and source constants evaluated at the given exponents.
pub fn compute_constants(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    alpha: f64,
    beta: f64,
) -> Result<ProblemConstants, SpectrumError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(SpectrumError::BadAlpha(alpha));
    }
    if beta <= -1.0 {
        return Err(SpectrumError::BadBeta(beta));
    }
    dist.validate(problem)?;
    let lambdas = problem.lambdas();
    let lambda_o = select_lambda_o(problem, dist)?;
    let r_ln = r_ln_at(problem, dist, lambda_o);

    let (r, r_alpha) = match dist {
        FeatureDistribution::Gaussian => {
            let tr_h_one_minus_alpha: f64 =
                lambdas.iter().map(|&l| l.powf(1.0 - alpha)).sum();
            (
                problem.trace_h() + 2.0 * problem.lambda_max(),
                tr_h_one_minus_alpha + 2.0 * problem.lambda_max().powf(1.0 - alpha),
            )
        }
        FeatureDistribution::CanonicalAtoms { probs, .. } => {
            let r = lambdas
                .iter()
                .zip(probs)
                .map(|(&l, &p)| l / p)
                .fold(f64::NEG_INFINITY, f64::max);
            let r_alpha = lambdas
                .iter()
                .zip(probs)
                .map(|(&l, &p)| l.powf(1.0 - alpha) / p)
                .fold(f64::NEG_INFINITY, f64::max);
            (r, r_alpha)
        }
    };

    let norm_theta_sq: f64 = problem.theta_star().iter().map(|&t| t * t).sum();
    let c_beta: f64 = lambdas
        .iter()
        .zip(problem.theta_star())
        .map(|(&l, &t)| l.powf(-beta) * t * t)
        .sum();
    let c_ln: f64 = lambdas
        .iter()
        .zip(problem.theta_star())
        .map(|(&l, &t)| t * t * (lambda_o / l).ln())
        .sum();

    let constants = ProblemConstants {
        trace_h: problem.trace_h(),
        lambda_max: problem.lambda_max(),
        lambda_min: problem.lambda_min(),
        norm_theta_sq,
        r,
        lambda_o,
        r_ln,
        r_alpha,
        c_ln,
        c_beta,
        distribution_kind: dist.kind(),
    };
    for (name, v) in [
        ("trace_h", constants.trace_h),
        ("norm_theta_sq", constants.norm_theta_sq),
        ("R", constants.r),
        ("lambda_o", constants.lambda_o),
        ("R_ln", constants.r_ln),
        ("R_alpha", constants.r_alpha),
        ("C_ln", constants.c_ln),
        ("C_beta", constants.c_beta),
    ] {
        if !v.is_finite() {
            return Err(SpectrumError::Overflow { name });
        }
    }
    Ok(constants)
}
