//! Monte Carlo SGD paths on streaming samples with deterministic parallel
//! replicates.
//!
//! The iteration is `θ_{t+1} = θ_t - γ(⟨θ_t, x_t⟩ - y_t) x_t` started at
//! `θ_0 = 0`, with `y_t = ⟨θ*, x_t⟩` (noiseless model). Replicate `r` owns
//! an RNG stream seeded by a splitmix64 mix of `(base_seed, r)`, and the
//! reduction indexes per-replicate results by `r`, so curves are bitwise
//! identical regardless of thread count.

use crate::curve::{CurveError, RiskCurve, Series};
use crate::spectrum::{FeatureDistribution, SpectrumProblem};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("theta has length {0} but the problem has dimension {1}")]
    DimensionMismatch(usize, usize),
    #[error("step size must be finite and nonnegative, got {0}")]
    BadGamma(f64),
    #[error("horizon must be >= 1")]
    BadHorizon,
    #[error("replicates must be >= 1")]
    BadReplicates,
    #[error("checkpoint {0} outside [1, {1}]")]
    BadCheckpoint(u64, u64),
    #[error("series {0:?} cannot be produced by the Monte Carlo runner")]
    UnsupportedSeries(Series),
    #[error("rotation matrix must be d*d = {0} entries, got {1}")]
    BadRotation(usize, usize),
    #[error("divergence in replicate {replicate} at step {step}")]
    Divergence { replicate: u32, step: u64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// `½ Σ_i λ_i (θ_i - θ*_i)²` in eigen-coordinates.
pub fn risk(problem: &SpectrumProblem, theta: &[f64]) -> Result<f64, RunnerError> {
    if theta.len() != problem.dimension() {
        return Err(RunnerError::DimensionMismatch(theta.len(), problem.dimension()));
    }
    Ok(0.5
        * problem
            .lambdas()
            .iter()
            .zip(theta)
            .zip(problem.theta_star())
            .map(|((&l, &t), &s)| l * (t - s) * (t - s))
            .sum::<f64>())
}

/// Current iterate, running average and bookkeeping for one SGD path.
#[derive(Debug, Clone)]
pub struct SgdState {
    pub theta: Vec<f64>,
    /// `(1/t) Σ_{k=1..t} θ_k`; `θ_0 = 0` is excluded from the average.
    pub theta_avg: Vec<f64>,
    pub t: u64,
    pub min_risk_so_far: f64,
}

impl SgdState {
    pub fn new(problem: &SpectrumProblem) -> Self {
        let d = problem.dimension();
        SgdState {
            theta: vec![0.0; d],
            theta_avg: vec![0.0; d],
            t: 0,
            min_risk_so_far: problem.initial_risk(),
        }
    }
}

/// One SGD step. `y` must be the noiseless label `⟨θ*, x⟩` supplied by the
/// stream. Updates the running average and the best risk seen so far.
pub fn sgd_step(
    problem: &SpectrumProblem,
    state: &mut SgdState,
    x: &[f64],
    y: f64,
    gamma: f64,
) -> Result<(), RunnerError> {
    if x.len() != state.theta.len() {
        return Err(RunnerError::DimensionMismatch(x.len(), state.theta.len()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(RunnerError::BadGamma(gamma));
    }
    let residual: f64 = state.theta.iter().zip(x).map(|(&t, &xi)| t * xi).sum::<f64>() - y;
    for (t, &xi) in state.theta.iter_mut().zip(x) {
        *t -= gamma * residual * xi;
    }
    state.t += 1;
    let inv_t = 1.0 / state.t as f64;
    for (a, &t) in state.theta_avg.iter_mut().zip(&state.theta) {
        *a += (t - *a) * inv_t;
    }
    if state.theta.iter().any(|v| !v.is_finite()) {
        return Err(RunnerError::Divergence { replicate: 0, step: state.t });
    }
    state.min_risk_so_far = state.min_risk_so_far.min(risk(problem, &state.theta)?);
    Ok(())
}

/// Fixed 64-bit mixing permutation (splitmix64 finalizer) deriving the
/// RNG seed for replicate `r` from the base seed.
pub fn replicate_seed(base_seed: u64, replicate: u64) -> u64 {
    let mut z = base_seed
        .wrapping_add(replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Configuration for [`run_paths`].
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub gamma: f64,
    pub horizon: u64,
    pub replicates: u32,
    pub base_seed: u64,
    pub checkpoints: Vec<u64>,
    /// Which of `Last`, `Averaged`, `RunningMin` to record.
    pub track: Vec<Series>,
    /// Optional orthogonal matrix (row-major d×d). Samples and `θ*` are
    /// rotated before stepping; risk is evaluated back in the eigenbasis.
    pub rotation: Option<Vec<f64>>,
}

impl RunSpec {
    pub fn new(gamma: f64, horizon: u64, replicates: u32, base_seed: u64, checkpoints: Vec<u64>) -> Self {
        RunSpec {
            gamma,
            horizon,
            replicates,
            base_seed,
            checkpoints,
            track: vec![Series::Last],
            rotation: None,
        }
    }
}

struct Sampler<'a> {
    problem: &'a SpectrumProblem,
    dist: &'a FeatureDistribution,
    rotation: Option<&'a [f64]>,
    /// sqrt(lambda_i) for the Gaussian law, cumulative probabilities for atoms.
    sqrt_lambdas: Vec<f64>,
    cdf: Vec<f64>,
    theta_star_used: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(
        problem: &'a SpectrumProblem,
        dist: &'a FeatureDistribution,
        rotation: Option<&'a [f64]>,
    ) -> Self {
        let d = problem.dimension();
        let sqrt_lambdas = problem.lambdas().iter().map(|&l| l.sqrt()).collect();
        let cdf = match dist {
            FeatureDistribution::CanonicalAtoms { probs, .. } => {
                let mut acc = 0.0;
                probs
                    .iter()
                    .map(|&p| {
                        acc += p;
                        acc
                    })
                    .collect()
            }
            FeatureDistribution::Gaussian => Vec::new(),
        };
        let theta_star_used = match rotation {
            Some(q) => rotate(q, problem.theta_star(), d),
            None => problem.theta_star().to_vec(),
        };
        Sampler { problem, dist, rotation, sqrt_lambdas, cdf, theta_star_used }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut Vec<f64>) -> f64 {
        let d = self.problem.dimension();
        x.clear();
        match self.dist {
            FeatureDistribution::Gaussian => {
                for i in 0..d {
                    let g: f64 = rng.sample(StandardNormal);
                    x.push(self.sqrt_lambdas[i] * g);
                }
            }
            FeatureDistribution::CanonicalAtoms { scales, .. } => {
                let u: f64 = rng.random();
                let i = self.cdf.partition_point(|&c| c < u).min(d - 1);
                x.resize(d, 0.0);
                x[i] = scales[i];
            }
        }
        if let Some(q) = self.rotation {
            let rotated = rotate(q, x, d);
            x.copy_from_slice(&rotated);
        }
        self.theta_star_used.iter().zip(x.iter()).map(|(&s, &xi)| s * xi).sum()
    }

    /// Risk of `theta` (in the stepping basis) evaluated in the eigenbasis.
    fn risk_of(&self, theta: &[f64]) -> f64 {
        match self.rotation {
            None => {
                0.5 * self
                    .problem
                    .lambdas()
                    .iter()
                    .zip(theta)
                    .zip(self.problem.theta_star())
                    .map(|((&l, &t), &s)| l * (t - s) * (t - s))
                    .sum::<f64>()
            }
            Some(q) => {
                let d = self.problem.dimension();
                let deviation: Vec<f64> = theta
                    .iter()
                    .zip(&self.theta_star_used)
                    .map(|(&t, &s)| t - s)
                    .collect();
                let back = rotate_transpose(q, &deviation, d);
                0.5 * self
                    .problem
                    .lambdas()
                    .iter()
                    .zip(&back)
                    .map(|(&l, &e)| l * e * e)
                    .sum::<f64>()
            }
        }
    }
}

fn rotate(q: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| (0..d).map(|j| q[i * d + j] * v[j]).sum())
        .collect()
}

fn rotate_transpose(q: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|j| (0..d).map(|i| q[i * d + j] * v[i]).sum())
        .collect()
}

/// One replicate's risk values: `[series][checkpoint]`.
type ReplicateValues = Vec<Vec<f64>>;

fn run_replicate(
    sampler: &Sampler<'_>,
    spec: &RunSpec,
    replicate: u32,
) -> Result<ReplicateValues, RunnerError> {
    let d = sampler.problem.dimension();
    let mut rng =
        ChaCha8Rng::seed_from_u64(replicate_seed(spec.base_seed, replicate as u64));
    let mut theta = vec![0.0_f64; d];
    let mut theta_avg = vec![0.0_f64; d];
    let need_avg = spec.track.contains(&Series::Averaged);
    let need_min = spec.track.contains(&Series::RunningMin);
    let mut min_risk = sampler.risk_of(&theta);
    let mut out: ReplicateValues =
        spec.track.iter().map(|_| Vec::with_capacity(spec.checkpoints.len())).collect();
    let mut next = spec.checkpoints.iter().copied().peekable();
    let mut x: Vec<f64> = Vec::with_capacity(d);

    for t in 1..=spec.horizon {
        let y = sampler.draw(&mut rng, &mut x);
        let residual: f64 =
            theta.iter().zip(&x).map(|(&th, &xi)| th * xi).sum::<f64>() - y;
        for (th, &xi) in theta.iter_mut().zip(&x) {
            *th -= spec.gamma * residual * xi;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(RunnerError::Divergence { replicate, step: t });
        }
        if need_avg {
            let inv_t = 1.0 / t as f64;
            for (a, &th) in theta_avg.iter_mut().zip(&theta) {
                *a += (th - *a) * inv_t;
            }
        }
        if need_min {
            min_risk = min_risk.min(sampler.risk_of(&theta));
        }
        while next.peek() == Some(&t) {
            for (slot, series) in out.iter_mut().zip(&spec.track) {
                let v = match series {
                    Series::Last => sampler.risk_of(&theta),
                    Series::Averaged => sampler.risk_of(&theta_avg),
                    Series::RunningMin => min_risk,
                    _ => unreachable!(),
                };
                slot.push(v);
            }
            next.next();
        }
        if next.peek().is_none() {
            break;
        }
    }
    Ok(out)
}

/// Seeded random orthogonal `d × d` matrix (row-major): Gram-Schmidt on
/// i.i.d. Gaussian rows. Used to spot-check rotation equivariance of the
/// dynamics.
pub fn random_rotation(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for r in &rows {
            let dot: f64 = r.iter().zip(&v).map(|(&a, &b)| a * b).sum();
            for (vi, &ri) in v.iter_mut().zip(r) {
                *vi -= dot * ri;
            }
        }
        let norm: f64 = v.iter().map(|&x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for vi in &mut v {
                *vi /= norm;
            }
            rows.push(v);
        }
    }
    rows.into_iter().flatten().collect()
}

/// Mean risk (with standard errors) over deterministic parallel replicates
/// for each tracked series.
pub fn run_paths(
    problem: &SpectrumProblem,
    dist: &FeatureDistribution,
    spec: &RunSpec,
) -> Result<Vec<RiskCurve>, RunnerError> {
    if spec.horizon < 1 {
        return Err(RunnerError::BadHorizon);
    }
    if spec.replicates < 1 {
        return Err(RunnerError::BadReplicates);
    }
    if !(spec.gamma >= 0.0) || !spec.gamma.is_finite() {
        return Err(RunnerError::BadGamma(spec.gamma));
    }
    for &c in &spec.checkpoints {
        if c < 1 || c > spec.horizon {
            return Err(RunnerError::BadCheckpoint(c, spec.horizon));
        }
    }
    for s in &spec.track {
        if !matches!(s, Series::Last | Series::Averaged | Series::RunningMin) {
            return Err(RunnerError::UnsupportedSeries(*s));
        }
    }
    if let Some(q) = &spec.rotation {
        let d = problem.dimension();
        if q.len() != d * d {
            return Err(RunnerError::BadRotation(d * d, q.len()));
        }
    }

    let sampler = Sampler::new(problem, dist, spec.rotation.as_deref());
    // Collect preserves replicate order, so the reduction below is
    // independent of scheduling.
    let per_replicate: Result<Vec<ReplicateValues>, RunnerError> = (0..spec.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&sampler, spec, r))
        .collect();
    let per_replicate = per_replicate?;

    let n = spec.replicates as f64;
    let n_cp = spec.checkpoints.len();
    let mut curves = Vec::with_capacity(spec.track.len());
    for (si, &series) in spec.track.iter().enumerate() {
        let mut means = vec![0.0_f64; n_cp];
        let mut stderrs = vec![0.0_f64; n_cp];
        for c in 0..n_cp {
            let mut sum = 0.0;
            for rep in &per_replicate {
                sum += rep[si][c];
            }
            let mean = sum / n;
            means[c] = mean;
            if spec.replicates > 1 {
                let mut ss = 0.0;
                for rep in &per_replicate {
                    let dev = rep[si][c] - mean;
                    ss += dev * dev;
                }
                stderrs[c] = (ss / (n - 1.0)).sqrt() / n.sqrt();
            }
        }
        curves.push(RiskCurve::new(
            series,
            spec.checkpoints.clone(),
            means,
            Some(stderrs),
            spec.replicates,
        )?);
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::propagate_diagonal;
    use crate::spectrum::{build_power_law, make_distribution, DistributionKind, OptimumMode};

    fn canonical_d1() -> (SpectrumProblem, FeatureDistribution) {
        let p = build_power_law(1, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let d = make_distribution(&p, DistributionKind::Canonical, None).unwrap();
        (p, d)
    }

    #[test]
    fn risk_examples() {
        let p = crate::spectrum::SpectrumProblem::from_parts(
            vec![1.0, 0.25],
            vec![1.0, 1.0],
            0.5,
            0.0,
            OptimumMode::Fig1,
        )
        .unwrap();
        assert_eq!(risk(&p, &[1.0, 1.0]).unwrap(), 0.0);
        assert!((risk(&p, &[0.0, 0.0]).unwrap() - 0.625).abs() < 1e-15);
        assert!(risk(&p, &[0.0]).is_err());
    }

    #[test]
    fn risk_scales_linearly_in_lambda() {
        let p1 = crate::spectrum::SpectrumProblem::from_parts(
            vec![1.0, 0.5],
            vec![1.0, -2.0],
            0.5,
            0.0,
            OptimumMode::Fig1,
        )
        .unwrap();
        let p2 = crate::spectrum::SpectrumProblem::from_parts(
            vec![3.0, 1.5],
            vec![1.0, -2.0],
            0.5,
            0.0,
            OptimumMode::Fig1,
        )
        .unwrap();
        let theta = [0.3, 0.7];
        let r1 = risk(&p1, &theta).unwrap();
        let r2 = risk(&p2, &theta).unwrap();
        assert!((r2 - 3.0 * r1).abs() < 1e-14);
    }

    #[test]
    fn deterministic_d1_path() {
        // theta_t = 1 - 0.5^t, risk = 0.5 * 0.25^t at gamma = 0.5.
        let (p, dist) = canonical_d1();
        let mut state = SgdState::new(&p);
        sgd_step(&p, &mut state, &[1.0], 1.0, 0.5).unwrap();
        assert_eq!(state.theta, vec![0.5]);
        sgd_step(&p, &mut state, &[1.0], 1.0, 0.5).unwrap();
        assert_eq!(state.theta, vec![0.75]);
        assert!((risk(&p, &state.theta).unwrap() - 0.03125).abs() < 1e-15);
        let _ = dist;
    }

    #[test]
    fn zero_sample_only_moves_counters() {
        let p = build_power_law(3, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let mut state = SgdState::new(&p);
        sgd_step(&p, &mut state, &[0.0, 0.0, 0.0], 0.0, 0.3).unwrap();
        assert_eq!(state.theta, vec![0.0; 3]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn optimum_is_a_fixed_point_of_every_sample() {
        let p = build_power_law(3, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let mut state = SgdState::new(&p);
        state.theta = p.theta_star().to_vec();
        let x = [0.4, -1.2, 0.9];
        let y: f64 = p.theta_star().iter().zip(&x).map(|(&s, &xi)| s * xi).sum();
        sgd_step(&p, &mut state, &x, y, 0.2).unwrap();
        assert_eq!(state.theta, p.theta_star().to_vec());
    }

    #[test]
    fn run_paths_deterministic_d1() {
        let (p, dist) = canonical_d1();
        let spec = RunSpec::new(0.5, 2, 1, 42, vec![1, 2]);
        let curves = run_paths(&p, &dist, &spec).unwrap();
        assert_eq!(curves[0].values, vec![0.125, 0.03125]);
        assert_eq!(curves[0].stderrs.as_ref().unwrap(), &vec![0.0, 0.0]);
    }

    #[test]
    fn zero_gamma_keeps_initial_risk() {
        let p = build_power_law(4, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = FeatureDistribution::Gaussian;
        let mut spec = RunSpec::new(0.0, 10, 3, 7, vec![1, 5, 10]);
        spec.track = vec![Series::Last, Series::Averaged, Series::RunningMin];
        let curves = run_paths(&p, &dist, &spec).unwrap();
        for curve in curves {
            for &v in &curve.values {
                assert!((v - p.initial_risk()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bitwise_determinism_across_runs() {
        let p = build_power_law(5, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = FeatureDistribution::Gaussian;
        let mut spec = RunSpec::new(0.1, 200, 8, 12345, vec![1, 10, 100, 200]);
        spec.track = vec![Series::Last, Series::Averaged];
        let a = run_paths(&p, &dist, &spec).unwrap();
        let b = run_paths(&p, &dist, &spec).unwrap();
        for (ca, cb) in a.iter().zip(&b) {
            assert_eq!(ca.values, cb.values);
            assert_eq!(ca.stderrs, cb.stderrs);
        }
    }

    #[test]
    fn running_min_is_non_increasing() {
        let p = build_power_law(5, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = FeatureDistribution::Gaussian;
        let mut spec = RunSpec::new(0.2, 500, 4, 99, (1..=500).step_by(25).collect());
        spec.track = vec![Series::RunningMin];
        let curves = run_paths(&p, &dist, &spec).unwrap();
        assert!(curves[0].values.windows(2).all(|w| w[1] <= w[0] + 1e-18));
    }

    #[test]
    fn d1_contraction_matches_square_factor() {
        // Per-step risk contraction in d=1 canonical is (1 - gamma*lambda)^2.
        let (p, dist) = canonical_d1();
        let gamma = 0.2;
        let spec = RunSpec::new(gamma, 10, 1, 3, (1..=10).collect());
        let curves = run_paths(&p, &dist, &spec).unwrap();
        let factor = (1.0 - gamma) * (1.0 - gamma);
        for w in curves[0].values.windows(2) {
            assert!((w[1] / w[0] - factor).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_reported_with_location() {
        let (p, dist) = canonical_d1();
        // gamma = 3 makes |1 - gamma| > 1: geometric blow-up.
        let spec = RunSpec::new(3.0, 2000, 2, 5, vec![2000]);
        match run_paths(&p, &dist, &spec) {
            Err(RunnerError::Divergence { step, .. }) => assert!(step > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn canonical_rotation_invariance_is_tight() {
        let p = build_power_law(4, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = make_distribution(&p, DistributionKind::Canonical, None).unwrap();
        let mut spec = RunSpec::new(0.2, 300, 6, 2024, vec![10, 100, 300]);
        spec.track = vec![Series::Last];
        let base = run_paths(&p, &dist, &spec).unwrap();
        spec.rotation = Some(random_rotation(4, 77));
        let rotated = run_paths(&p, &dist, &spec).unwrap();
        for (a, b) in base[0].values.iter().zip(&rotated[0].values) {
            let rel = (a - b).abs() / a.abs().max(1e-300);
            assert!(rel < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn gaussian_runner_tracks_exact_propagator() {
        let p = build_power_law(4, 0.5, 0.0, OptimumMode::Fig1).unwrap();
        let dist = FeatureDistribution::Gaussian;
        let gamma = 1.0 / (4.0 * p.lambda_max());
        let checkpoints = vec![1, 10, 50, 100];
        let mut spec = RunSpec::new(gamma, 100, 400, 31415, checkpoints.clone());
        spec.track = vec![Series::Last];
        let mc = run_paths(&p, &dist, &spec).unwrap();
        let exact = propagate_diagonal(&p, &dist, gamma, 100, &checkpoints, false).unwrap();
        let se = mc[0].stderrs.as_ref().unwrap();
        for i in 0..checkpoints.len() {
            let gap = (mc[0].values[i] - exact.values[i]).abs();
            assert!(gap <= 4.0 * se[i].max(1e-12), "checkpoint {i}: gap {gap}");
        }
    }

    #[test]
    fn random_rotation_is_orthogonal() {
        let d = 5;
        let q = random_rotation(d, 9);
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| q[i * d + k] * q[j * d + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "({i},{j}): {dot}");
            }
        }
    }
}
