//! Exact expected-risk propagation in the covariance eigenbasis.
//!
//! The diagonal of the deviation covariance obeys
//! `m_i^{t+1} = m_i^t - 2γλ_i m_i^t + γ² f_i^t` with
//! `f_i^t = E[⟨v_i,X⟩² X^T M_t X]`, started from `m_i^0 = θ*_i²`. For the
//! two supported feature laws `f_i` is a closed linear function of the
//! diagonal, so the recursion is exact (zero variance), not an
//! approximation. A full-matrix oracle propagates the complete covariance
//! on small instances for cross-validation.

use crate::curve::{CurveError, RiskCurve, Series};
use crate::spectrum::{FeatureDistribution, SpectrumProblem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error("step size must be finite and nonnegative, got {0}")]
    BadGamma(f64),
    #[error(
        "gamma = {gamma} exceeds the Lyapunov cap 1/(4 lambda_max) = {cap}; \
         pass allow_large_gamma to override"
    )]
    GammaAboveCap { gamma: f64, cap: f64 },
    #[error("divergence: non-finite second moment at step {step}")]
    Divergence { step: u64 },
    #[error("checkpoint {0} outside [1, {1}]")]
    BadCheckpoint(u64, u64),
    #[error("full oracle limited to d <= {max_d} and T <= {max_t}")]
    InstanceTooLarge { max_d: usize, max_t: u64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Diagonal second moments `m_i^t` of the deviation covariance.
#[derive(Debug, Clone)]
pub struct PropagatorState {
    pub m: Vec<f64>,
    pub t: u64,
    pub gamma: f64,
}

impl PropagatorState {
    /// Initial state `M_0 = θ* θ*^T`, i.e. `m_i^0 = θ*_i²`.
    pub fn initial(problem: &SpectrumProblem, gamma: f64) -> Self {
        PropagatorState {
            m: problem.theta_star().iter().map(|&t| t * t).collect(),
            t: 0,
            gamma,
        }
    }

    /// `½ Σ_i λ_i m_i^t`, the exact expected risk at the current step.
    pub fn risk(&self, problem: &SpectrumProblem) -> f64 {
        0.5 * problem
            .lambdas()
            .iter()
            .zip(&self.m)
            .map(|(&l, &m)| l * m)
            .sum::<f64>()
    }
}

/// Mixing terms `f_i = E[⟨v_i,X⟩² X^T M X]` for a diagonal `M`.
///
/// Gaussian: `f_i = λ_i Σ_j λ_j m_j + 2 λ_i² m_i` (fourth-moment identity).
/// Canonical atoms: `f_i = (λ_i²/p_i) m_i` (only the atom in direction `i`
/// contributes).
pub fn f_terms(problem: &SpectrumProblem, dist: &FeatureDistribution, m: &[f64]) -> Vec<f64> {
    let lambdas = problem.lambdas();
    match dist {
        FeatureDistribution::Gaussian => {
            let trace: f64 = lambdas.iter().zip(m).map(|(&l, &mi)| l * mi).sum();
            lambdas
                .iter()
                .zip(m)
                .map(|(&l, &mi)| l * trace + 2.0 * l * l * mi)
                .collect()
        }
        FeatureDistribution::CanonicalAtoms { probs, .. } => lambdas
            .iter()
            .zip(probs)
            .zip(m)
            .map(|((&l, &p), &mi)| l * l / p * mi)
            .collect(),
    }
}

fn check_gamma(
    problem: &SpectrumProblem,
    gamma: f64,
    allow_large_gamma: bool,
) -> Result<(), PropagatorError> {
    // gamma = 0 is allowed: frozen dynamics, risk constant at R(0).
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(PropagatorError::BadGamma(gamma));
    }
    let cap = 1.0 / (4.0 * problem.lambda_max());
    if gamma > cap && !allow_large_gamma {
        return Err(PropagatorError::GammaAboveCap { gamma, cap });
    }
    Ok(())
}

/// One step of the diagonal recursion. The shared Gaussian trace is
/// recomputed from scratch every step rather than updated incrementally.
pub fn step_diagonal(problem: &SpectrumProblem, dist: &FeatureDistribution, state: &mut PropagatorState) {
    let f = f_terms(problem, dist, &state.m);
    let gamma = state.gamma;
    for ((mi, &l), &fi) in state.m.iter_mut().zip(problem.lambdas()).zip(&f) {
        *mi = *mi - 2.0 * gamma * l * *mi + gamma * gamma * fi;
    }
    state.t += 1;
}

/// Exact expected risk at the requested checkpoints.
pub fn propagate_diagonal(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    gamma: f64,
    t_max: u64,
    checkpoints: &[u64],
    allow_large_gamma: bool,
) -> Result<RiskCurve, PropagatorError> {
    check_gamma(problem, gamma, allow_large_gamma)?;
    for &c in checkpoints {
        if c < 1 || c > t_max {
            return Err(PropagatorError::BadCheckpoint(c, t_max));
        }
    }
    let mut state = PropagatorState::initial(problem, gamma);
    let mut values = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().copied().peekable();
    for t in 1..=t_max {
        step_diagonal(problem, dist, &mut state);
        if state.m.iter().any(|m| !m.is_finite()) {
            return Err(PropagatorError::Divergence { step: t });
        }
        while next.peek() == Some(&t) {
            values.push(state.risk(problem));
            next.next();
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(RiskCurve::new(Series::Exact, checkpoints.to_vec(), values, None, 0)?)
}

/// Exact risk at every step `t = 0..=t_max`. Used by the Lyapunov
/// inequality check and the transition tests.
pub fn risk_trajectory(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    gamma: f64,
    t_max: u64,
    allow_large_gamma: bool,
) -> Result<Vec<f64>, PropagatorError> {
    check_gamma(problem, gamma, allow_large_gamma)?;
    let mut state = PropagatorState::initial(problem, gamma);
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(state.risk(problem));
    for t in 1..=t_max {
        step_diagonal(problem, dist, &mut state);
        if state.m.iter().any(|m| !m.is_finite()) {
            return Err(PropagatorError::Divergence { step: t });
        }
        out.push(state.risk(problem));
    }
    Ok(out)
}

/// Compare the iterated recursion with its unrolled closed form
/// `m_i^t = (1-2γλ_i)^t m_i^0 + γ² Σ_{k<t} (1-2γλ_i)^{t-1-k} f_i^k`
/// and return the maximum relative discrepancy over all `(i, t)`.
///
/// The `f_i^k` history is stored only here; the fast path never keeps it.
pub fn closed_form_check(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    gamma: f64,
    t_max: u64,
) -> Result<f64, PropagatorError> {
    check_gamma(problem, gamma, false)?;
    let d = problem.dimension();
    let mut state = PropagatorState::initial(problem, gamma);
    let m0 = state.m.clone();
    let mut f_history: Vec<Vec<f64>> = Vec::with_capacity(t_max as usize);
    let mut iterated: Vec<Vec<f64>> = Vec::with_capacity(t_max as usize);
    for t in 1..=t_max {
        f_history.push(f_terms(problem, dist, &state.m));
        step_diagonal(problem, dist, &mut state);
        if state.m.iter().any(|m| !m.is_finite()) {
            return Err(PropagatorError::Divergence { step: t });
        }
        iterated.push(state.m.clone());
    }
    let mut max_rel = 0.0_f64;
    for (ti, m_t) in iterated.iter().enumerate() {
        let t = ti + 1;
        for i in 0..d {
            let contraction = 1.0 - 2.0 * gamma * problem.lambdas()[i];
            let mut unrolled = contraction.powi(t as i32) * m0[i];
            for (k, f_k) in f_history.iter().take(t).enumerate() {
                unrolled += gamma * gamma * contraction.powi((t - 1 - k) as i32) * f_k[i];
            }
            let scale = m_t[i].abs().max(unrolled.abs()).max(f64::MIN_POSITIVE);
            max_rel = max_rel.max((m_t[i] - unrolled).abs() / scale);
        }
    }
    Ok(max_rel)
}

const ORACLE_MAX_D: usize = 8;
const ORACLE_MAX_T: u64 = 500;

/// Propagate the full deviation covariance `M_t` with the exact
/// fourth-moment expectation, starting from `M_0 = θ* θ*^T`. Returns
/// `M_0..=M_T` as row-major `d×d` matrices. Small instances only.
pub fn propagate_full_oracle(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    gamma: f64,
    t_max: u64,
) -> Result<Vec<Vec<f64>>, PropagatorError> {
    let d = problem.dimension();
    if d > ORACLE_MAX_D || t_max > ORACLE_MAX_T {
        return Err(PropagatorError::InstanceTooLarge { max_d: ORACLE_MAX_D, max_t: ORACLE_MAX_T });
    }
    check_gamma(problem, gamma, true)?;
    let lambdas = problem.lambdas();
    let theta = problem.theta_star();
    let mut m: Vec<f64> = (0..d * d)
        .map(|idx| theta[idx / d] * theta[idx % d])
        .collect();
    let mut history = Vec::with_capacity(t_max as usize + 1);
    history.push(m.clone());
    for step in 1..=t_max {
        // E[x^T M x * xx^T] in the eigenbasis.
        let fourth: Vec<f64> = match dist {
            FeatureDistribution::Gaussian => {
                // H tr(MH) + 2 HMH with diagonal H.
                let tr_mh: f64 = (0..d).map(|i| m[i * d + i] * lambdas[i]).sum();
                (0..d * d)
                    .map(|idx| {
                        let (i, j) = (idx / d, idx % d);
                        let diag = if i == j { lambdas[i] * tr_mh } else { 0.0 };
                        diag + 2.0 * lambdas[i] * m[idx] * lambdas[j]
                    })
                    .collect()
            }
            FeatureDistribution::CanonicalAtoms { probs, scales } => {
                // Atom i contributes p_i s_i^4 M_ii on the (i,i) entry only.
                let mut out = vec![0.0; d * d];
                for i in 0..d {
                    out[i * d + i] = probs[i] * scales[i].powi(4) * m[i * d + i];
                }
                out
            }
        };
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let idx = i * d + j;
                next[idx] = m[idx] - gamma * (lambdas[i] + lambdas[j]) * m[idx]
                    + gamma * gamma * fourth[idx];
            }
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(PropagatorError::Divergence { step });
        }
        m = next;
        history.push(m.clone());
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{build_power_law, make_distribution, DistributionKind, OptimumMode};

    fn canonical_d1() -> (SpectrumProblem, FeatureDistribution) {
        let p = build_power_law(1, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let d = make_distribution(&p, DistributionKind::Canonical, None).unwrap();
        (p, d)
    }

    #[test]
    fn gaussian_f_terms_d1() {
        let p = build_power_law(1, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let f = f_terms(&p, &FeatureDistribution::Gaussian, &[1.0]);
        assert_eq!(f, vec![3.0]); // matches E[g^4] = 3
    }

    #[test]
    fn canonical_f_terms_d2() {
        let p = crate::spectrum::SpectrumProblem::from_parts(
            vec![1.0, 0.25],
            vec![1.0, 1.0],
            0.5,
            0.0,
            OptimumMode::Fig1,
        )
        .unwrap();
        let dist = make_distribution(&p, DistributionKind::Canonical, Some(1.0)).unwrap();
        let f = f_terms(&p, &dist, &[1.0, 1.0]);
        assert!((f[0] - 1.25).abs() < 1e-15);
        assert!((f[1] - 0.3125).abs() < 1e-15);
    }

    #[test]
    fn zero_moments_are_a_fixed_point() {
        let p = build_power_law(4, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        for dist in [
            FeatureDistribution::Gaussian,
            make_distribution(&p, DistributionKind::Canonical, None).unwrap(),
        ] {
            let f = f_terms(&p, &dist, &[0.0; 4]);
            assert!(f.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn canonical_d1_closed_form() {
        // m_t = (1 - gamma)^{2t} with lambda = p = 1.
        let (p, dist) = canonical_d1();
        let gamma = 0.25;
        let curve =
            propagate_diagonal(&p, &dist, gamma, 8, &[1, 2, 4, 8], false).unwrap();
        for (&t, &v) in curve.checkpoints.iter().zip(&curve.values) {
            let expect = 0.5 * (1.0 - gamma).powi(2 * t as i32);
            assert!((v - expect).abs() < 1e-15, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn gaussian_d1_hand_step() {
        // m_1 = 1 - 0.2 + 0.01 * 3 = 0.83 at gamma = 0.1.
        let p = build_power_law(1, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let curve = propagate_diagonal(&p, &FeatureDistribution::Gaussian, 0.1, 1, &[1], false)
            .unwrap();
        assert!((curve.values[0] - 0.415).abs() < 1e-15);
    }

    #[test]
    fn gamma_cap_enforced_with_override() {
        let p = build_power_law(3, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = FeatureDistribution::Gaussian;
        assert!(matches!(
            propagate_diagonal(&p, &dist, 0.3, 10, &[10], false),
            Err(PropagatorError::GammaAboveCap { .. })
        ));
        assert!(propagate_diagonal(&p, &dist, 0.3, 10, &[10], true).is_ok());
    }

    #[test]
    fn nonnegativity_under_gamma_cap() {
        let p = build_power_law(10, 0.5, 0.5, OptimumMode::Tight(0.01)).unwrap();
        let gamma = 1.0 / (4.0 * p.lambda_max());
        for dist in [
            FeatureDistribution::Gaussian,
            make_distribution(&p, DistributionKind::Canonical, None).unwrap(),
        ] {
            let mut state = PropagatorState::initial(&p, gamma);
            for _ in 0..500 {
                step_diagonal(&p, &dist, &mut state);
                assert!(state.m.iter().all(|&m| m >= 0.0));
            }
        }
    }

    #[test]
    fn closed_form_matches_iteration() {
        let p = build_power_law(5, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let gamma = 1.0 / (4.0 * p.lambda_max());
        for dist in [
            FeatureDistribution::Gaussian,
            make_distribution(&p, DistributionKind::Canonical, None).unwrap(),
        ] {
            let disc = closed_form_check(&p, &dist, gamma, 100).unwrap();
            assert!(disc <= 1e-10, "discrepancy {disc}");
        }
    }

    #[test]
    fn closed_form_single_step_exact() {
        let (p, dist) = canonical_d1();
        let disc = closed_form_check(&p, &dist, 0.25, 1).unwrap();
        assert!(disc <= 1e-15);
    }

    #[test]
    fn oracle_diagonal_matches_recursion_d1() {
        let (p, dist) = canonical_d1();
        let gamma = 0.25;
        let hist = propagate_full_oracle(&p, &dist, gamma, 20).unwrap();
        let mut state = PropagatorState::initial(&p, gamma);
        for m_t in hist.iter().skip(1) {
            step_diagonal(&p, &dist, &mut state);
            assert!((m_t[0] - state.m[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn oracle_off_diagonals_never_feed_the_diagonal() {
        // M_0 has nonzero off-diagonals; the diagonal must still track the
        // decoupled recursion exactly.
        let p = build_power_law(4, 0.5, 0.5, OptimumMode::Fig1).unwrap();
        let gamma = 1.0 / (4.0 * p.lambda_max());
        for dist in [
            FeatureDistribution::Gaussian,
            make_distribution(&p, DistributionKind::Canonical, None).unwrap(),
        ] {
            let hist = propagate_full_oracle(&p, &dist, gamma, 50).unwrap();
            let d = p.dimension();
            // Off-diagonals of M_0 are theta_i theta_j != 0.
            assert!(hist[0][1].abs() > 0.0);
            let mut state = PropagatorState::initial(&p, gamma);
            for m_t in hist.iter().skip(1) {
                super::step_diagonal(&p, &dist, &mut state);
                for i in 0..d {
                    let rel = (m_t[i * d + i] - state.m[i]).abs()
                        / state.m[i].abs().max(f64::MIN_POSITIVE);
                    assert!(rel <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let p = build_power_law(9, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        assert!(matches!(
            propagate_full_oracle(&p, &FeatureDistribution::Gaussian, 0.01, 10),
            Err(PropagatorError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn zero_gamma_freezes_the_risk() {
        let (p, dist) = canonical_d1();
        let curve = propagate_diagonal(&p, &dist, 0.0, 5, &[1, 5], false).unwrap();
        assert_eq!(curve.values, vec![p.initial_risk(); 2]);
        assert!(propagate_diagonal(&p, &dist, -0.1, 5, &[5], false).is_err());
        assert!(propagate_diagonal(&p, &dist, f64::NAN, 5, &[5], false).is_err());
    }
}
