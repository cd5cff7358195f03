//! Right-hand sides of the three convergence theorems, their prescribed
//! step sizes, and exact evaluators plus inequality checkers for the
//! supporting lemmas.
//!
//! Step-size rules:
//! - theorem 1: `γ = (4 R ln T)^{-1}`, bound `3 R ‖θ*‖² ln T / T`;
//! - theorem 2: `γ = (14 R_ln)^{-1}`, bound `10 R_ln C_ln / T`;
//! - theorem 3: `γ^{1-α} ≤ (32 ξ_α R_α)^{-1}` and `γ ≤ (4 λ_max)^{-1}`,
//!   bound `2 C_β ((1+β)/γ)^{1+β} / T^{1+α∧β}`.

use crate::curve::{CurveError, RiskCurve, Series};
use crate::propagator::{risk_trajectory, PropagatorError};
use crate::spectrum::{
    compute_constants, FeatureDistribution, ProblemConstants, SpectrumError, SpectrumProblem,
};
use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("xi_alpha requires alpha > 0, got {0}")]
    BadAlpha(f64),
    #[error("beta must be > -1, got {0}")]
    BadBeta(f64),
    #[error("theorem 1 needs T >= 2, theorems 2 and 3 need T >= 3 (got T = {0})")]
    HorizonTooSmall(u64),
    #[error("theorem 3 requires alpha in (0,1), got {0}")]
    AlphaOutOfRange(f64),
    #[error("S_T(alpha,beta) evaluated literally only for T <= 1e6, got {0}")]
    SumTooLong(u64),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// `ξ_α = Σ_{n≥1} n^{-(1+α)}` to relative accuracy 1e-10.
///
/// Partial Kahan sum to `N` plus the integral-bracketed tail
/// `[(N+1)^{-α}/α, N^{-α}/α]`, taking the midpoint once the bracket is
/// narrow enough. Raw partial sums alone would need ~1e20 terms at
/// α = 0.1.
pub fn xi_alpha(alpha: f64) -> Result<f64, BoundsError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(BoundsError::BadAlpha(alpha));
    }
    const REL_TOL: f64 = 1e-10;
    let s = 1.0 + alpha;
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64; // Kahan compensation
    let mut n: u64 = 0;
    loop {
        for _ in 0..(1 << 15) {
            n += 1;
            let term = (n as f64).powf(-s) - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        let nf = n as f64;
        let tail_hi = nf.powf(-alpha) / alpha;
        let tail_lo = (nf + 1.0).powf(-alpha) / alpha;
        let value = sum + 0.5 * (tail_lo + tail_hi);
        if 0.5 * (tail_hi - tail_lo) <= REL_TOL * value {
            return Ok(value);
        }
    }
}

fn xi_alpha_cached(alpha: f64) -> Result<f64, BoundsError> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = alpha.to_bits();
    if let Some(&v) = cache.lock().unwrap().get(&key) {
        return Ok(v);
    }
    let v = xi_alpha(alpha)?;
    cache.lock().unwrap().insert(key, v);
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    Thm1,
    Thm2,
    Thm3,
}

impl Theorem {
    pub fn bound_series(self) -> Series {
        match self {
            Theorem::Thm1 => Series::BoundThm1,
            Theorem::Thm2 => Series::BoundThm2,
            Theorem::Thm3 => Series::BoundThm3,
        }
    }
}

/// Prescribed step size for a theorem at horizon `T`.
pub fn step_size_for(
    theorem: Theorem,
    constants: &ProblemConstants,
    alpha: f64,
    horizon: u64,
) -> Result<f64, BoundsError> {
    match theorem {
        Theorem::Thm1 => {
            if horizon < 2 {
                return Err(BoundsError::HorizonTooSmall(horizon));
            }
            Ok(1.0 / (4.0 * constants.r * (horizon as f64).ln()))
        }
        Theorem::Thm2 => {
            if horizon < 3 {
                return Err(BoundsError::HorizonTooSmall(horizon));
            }
            Ok(1.0 / (14.0 * constants.r_ln))
        }
        Theorem::Thm3 => {
            if horizon < 3 {
                return Err(BoundsError::HorizonTooSmall(horizon));
            }
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(BoundsError::AlphaOutOfRange(alpha));
            }
            let xi = xi_alpha_cached(alpha)?;
            let from_capacity =
                (32.0 * xi * constants.r_alpha).powf(-1.0 / (1.0 - alpha));
            Ok(from_capacity.min(1.0 / (4.0 * constants.lambda_max)))
        }
    }
}

/// The theorem's right-hand side at horizon `t`, exactly as stated.
pub fn bound_value(
    theorem: Theorem,
    constants: &ProblemConstants,
    alpha: f64,
    beta: f64,
    gamma: f64,
    t: u64,
) -> f64 {
    let tf = t as f64;
    match theorem {
        Theorem::Thm1 => 3.0 * constants.r * constants.norm_theta_sq * tf.ln() / tf,
        Theorem::Thm2 => 10.0 * constants.r_ln * constants.c_ln / tf,
        Theorem::Thm3 => {
            2.0 * constants.c_beta
                * ((1.0 + beta) / gamma).powf(1.0 + beta)
                / tf.powf(1.0 + alpha.min(beta))
        }
    }
}

/// A theorem instance pinned to a problem's constants, with its step size
/// either prescribed (certified) or user-supplied (non-certified).
#[derive(Debug, Clone)]
pub struct BoundSpec {
    pub theorem: Theorem,
    pub constants: ProblemConstants,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `ξ_α`, populated for theorem 3.
    pub xi_alpha: Option<f64>,
    /// False when the step-size precondition was overridden.
    pub certified: bool,
}

impl BoundSpec {
    /// Use the theorem's prescribed step size.
    pub fn prescribed(
        theorem: Theorem,
        constants: ProblemConstants,
        alpha: f64,
        beta: f64,
        horizon: u64,
    ) -> Result<Self, BoundsError> {
        let gamma = step_size_for(theorem, &constants, alpha, horizon)?;
        let xi = match theorem {
            Theorem::Thm3 => Some(xi_alpha_cached(alpha)?),
            _ => None,
        };
        Ok(BoundSpec { theorem, constants, gamma, alpha, beta, xi_alpha: xi, certified: true })
    }

    /// Force a step size; the resulting reports are marked non-certified.
    pub fn forced(
        theorem: Theorem,
        constants: ProblemConstants,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Self {
        BoundSpec { theorem, constants, gamma, alpha, beta, xi_alpha: None, certified: false }
    }

    pub fn value_at(&self, t: u64) -> f64 {
        bound_value(self.theorem, &self.constants, self.alpha, self.beta, self.gamma, t)
    }

    /// Bound curve on a checkpoint grid. Checkpoints below the theorem's
    /// minimal horizon (2 for theorem 1, 3 otherwise) are rejected.
    pub fn curve(&self, checkpoints: &[u64]) -> Result<RiskCurve, BoundsError> {
        let min_t = match self.theorem {
            Theorem::Thm1 => 2,
            _ => 3,
        };
        if let Some(&t) = checkpoints.iter().find(|&&t| t < min_t) {
            return Err(BoundsError::HorizonTooSmall(t));
        }
        let values = checkpoints.iter().map(|&t| self.value_at(t)).collect();
        Ok(RiskCurve::new(
            self.theorem.bound_series(),
            checkpoints.to_vec(),
            values,
            None,
            0,
        )?)
    }
}

/// `S_n(x) = Σ_{k=0}^{n-1} (1-x)^k / (n-k)`, the literal finite sum.
pub fn s_n_exact(x: f64, n: u64) -> f64 {
    assert!(x > 0.0 && x < 1.0 && n >= 1);
    let mut pow = 1.0_f64;
    let mut sum = 0.0_f64;
    for k in 0..n {
        sum += pow / (n - k) as f64;
        pow *= 1.0 - x;
    }
    sum
}

/// Margin of `x S_n(x) ≤ 7 ln(1/x)/n` for `x ∈ (0, 1/4]`; nonnegative iff
/// the inequality holds.
pub fn lemma3_check(x: f64, n: u64) -> f64 {
    assert!(x > 0.0 && x <= 0.25 && n >= 1);
    7.0 * (1.0 / x).ln() / n as f64 - x * s_n_exact(x, n)
}

/// Margin of `x^r (1-x)^t ≤ r^r / t^r` for `x ∈ (0,1)`, `t ≥ 1`, `r > 0`.
pub fn lemma4_check(x: f64, t: u64, r: f64) -> f64 {
    assert!(x > 0.0 && x < 1.0 && t >= 1 && r > 0.0);
    let tf = t as f64;
    r.powf(r) / tf.powf(r) - x.powf(r) * (1.0 - x).powf(tf)
}

/// Literal sum `Σ_{t=1}^{T-1} t^{-(1+β)} (T-t)^{-(1+α)}` with no range
/// checks; symmetric in `(α, β)` by the change of variable `t → T-t`.
pub fn lemma5_sum(alpha: f64, beta: f64, t_max: u64) -> f64 {
    let mut sum = 0.0_f64;
    for t in 1..t_max {
        sum += (t as f64).powf(-(1.0 + beta)) * ((t_max - t) as f64).powf(-(1.0 + alpha));
    }
    sum
}

/// `S_T(α,β) = Σ_{t=1}^{T-1} t^{-(1+β)} (T-t)^{-(1+α)}` and the margin of
/// its bound `2^{2+α∧β} ξ_{α∨β} / T^{1+α∧β}`.
pub fn lemma5_exact_and_check(alpha: f64, beta: f64, t_max: u64) -> Result<(f64, f64), BoundsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BoundsError::AlphaOutOfRange(alpha));
    }
    if !(beta > -1.0) {
        return Err(BoundsError::BadBeta(beta));
    }
    if t_max < 2 {
        return Err(BoundsError::HorizonTooSmall(t_max));
    }
    if t_max > 1_000_000 {
        return Err(BoundsError::SumTooLong(t_max));
    }
    let tf = t_max as f64;
    let sum = lemma5_sum(alpha, beta, t_max);
    let low = alpha.min(beta);
    let high = alpha.max(beta);
    let xi = xi_alpha_cached(high)?;
    let bound = 2.0_f64.powf(2.0 + low) * xi / tf.powf(1.0 + low);
    Ok((sum, bound - sum))
}

/// Minimum margin of the Lyapunov inequality
/// `f_t ≤ tr(M_0)/(4γt) + γ R Σ_{k<t} f_k/(t-k)` along the exact
/// propagator trajectory, over `t = 1..=T`. Nonnegative iff it holds at
/// every step.
pub fn lemma2_check(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    gamma: f64,
    t_max: u64,
) -> Result<f64, BoundsError> {
    let constants = compute_constants(problem, dist, problem.alpha(), problem.beta())?;
    let f = risk_trajectory(problem, dist, gamma, t_max, false)?;
    let trace_m0: f64 = problem.theta_star().iter().map(|&t| t * t).sum();
    let mut min_margin = f64::INFINITY;
    for t in 1..=t_max as usize {
        let mut conv = 0.0_f64;
        for k in 0..t {
            conv += f[k] / (t - k) as f64;
        }
        let rhs = trace_m0 / (4.0 * gamma * t as f64) + gamma * constants.r * conv;
        min_margin = min_margin.min(rhs - f[t]);
    }
    Ok(min_margin)
}
