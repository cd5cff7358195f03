//! Randomized invariants that complement the pinned acceptance checks.

use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sgdlab::bounds::lemma5_sum;
use sgdlab::curve::{log_checkpoints, RiskCurve, Series};
use sgdlab::runner::replicate_seed;
use sgdlab::spectrum::{build_power_law, make_distribution, DistributionKind, FeatureDistribution, OptimumMode};

proptest! {
    /// The log-log OLS fit recovers the exponent of any exact power law.
    #[test]
    fn slope_fit_recovers_power_laws(
        p in 0.05_f64..3.0,
        c in 0.01_f64..100.0,
        t_max in 100_u64..1_000_000,
    ) {
        let checkpoints = log_checkpoints(t_max, 48);
        let values = checkpoints.iter().map(|&t| c * (t as f64).powf(-p)).collect();
        let curve = RiskCurve::new(Series::Exact, checkpoints, values, None, 0).unwrap();
        let fit = sgdlab::fit_loglog_slope(&curve, 1, t_max).unwrap();
        prop_assert!((fit.slope + p).abs() < 1e-9, "slope {} vs -{}", fit.slope, p);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-8);
    }

    /// Canonical atoms always satisfy `p_i s_i² = λ_i` and probabilities
    /// sum to one, whatever the probability exponent.
    #[test]
    fn canonical_atoms_preserve_second_moment(
        d in 1_usize..40,
        alpha in 0.0_f64..0.9,
        q in 0.0_f64..2.0,
    ) {
        let problem = build_power_law(d, alpha, 0.0, OptimumMode::Fig1).unwrap();
        let dist = make_distribution(&problem, DistributionKind::Canonical, Some(q)).unwrap();
        match &dist {
            FeatureDistribution::CanonicalAtoms { probs, scales } => {
                let sum: f64 = probs.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                for ((&p, &s), &l) in probs.iter().zip(scales).zip(problem.lambdas()) {
                    prop_assert!((p * s * s - l).abs() < 1e-12 * l);
                }
            }
            other => prop_assert!(false, "unexpected distribution {other:?}"),
        }
    }

    /// The convolution sum is symmetric under swapping its exponents.
    #[test]
    fn convolution_sum_is_symmetric(
        a in -0.9_f64..3.0,
        b in -0.9_f64..3.0,
        t_max in 2_u64..2_000,
    ) {
        let ab = lemma5_sum(a, b, t_max);
        let ba = lemma5_sum(b, a, t_max);
        prop_assert!((ab - ba).abs() <= 1e-11 * ab.max(ba));
    }

    /// Replicate seeds are deterministic and collision-free across a block
    /// of replicate indices for any base seed.
    #[test]
    fn replicate_seeds_distinct(base in any::<u64>()) {
        let seeds: Vec<u64> = (0..64).map(|r| replicate_seed(base, r)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), seeds.len());
        prop_assert_eq!(replicate_seed(base, 17), seeds[17]);
    }

    /// CSV float formatting round-trips f64 exactly.
    #[test]
    fn csv_floats_round_trip(v in prop::num::f64::POSITIVE) {
        let curve = RiskCurve::new(Series::Exact, vec![1], vec![v], None, 0).unwrap();
        let csv = sgdlab::csv_string("rt", &[curve]);
        let field = csv.lines().nth(1).unwrap().split(',').nth(3).unwrap();
        let back: f64 = field.parse().unwrap();
        prop_assert_eq!(back, v);
    }
}

/// Monte Carlo check of the Gaussian fourth-moment identity behind the
/// exact propagator: `E[⟨x, Ax⟩ xx^T] = H tr(AH) + 2 H A H` for diagonal
/// `A` and `x ~ N(0, H)` in the eigenbasis.
#[test]
fn gaussian_fourth_moment_identity_monte_carlo() {
    let problem = build_power_law(3, 0.5, 0.0, OptimumMode::Fig1).unwrap();
    let lambdas = problem.lambdas();
    let d = problem.dimension();
    let a = [0.7, 0.2, 1.3]; // diagonal of A
    let n = 400_000_u64;
    let mut rng = ChaCha8Rng::seed_from_u64(90210);
    let mut mean = vec![0.0_f64; d * d];
    let mut m2 = vec![0.0_f64; d * d];
    for k in 1..=n {
        let x: Vec<f64> = lambdas
            .iter()
            .map(|&l| l.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let quad: f64 = x.iter().zip(&a).map(|(&xi, &ai)| ai * xi * xi).sum();
        for i in 0..d {
            for j in 0..d {
                let v = quad * x[i] * x[j];
                let idx = i * d + j;
                let delta = v - mean[idx];
                mean[idx] += delta / k as f64;
                m2[idx] += delta * (v - mean[idx]);
            }
        }
    }
    let tr_ah: f64 = lambdas.iter().zip(&a).map(|(&l, &ai)| l * ai).sum();
    for i in 0..d {
        for j in 0..d {
            let idx = i * d + j;
            let expected = if i == j {
                lambdas[i] * tr_ah + 2.0 * lambdas[i] * a[i] * lambdas[i]
            } else {
                0.0
            };
            let se = (m2[idx] / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
            let gap = (mean[idx] - expected).abs();
            assert!(
                gap <= 5.0 * se + 1e-12,
                "entry ({i},{j}): mc {} vs analytic {expected} (se {se})",
                mean[idx]
            );
        }
    }
}
