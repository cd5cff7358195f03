//! Fit decay rates on exact risk curves and detect where the polynomial
//! phase gives way to the finite-dimensional linear (geometric) regime.
//!
//! Run with: `cargo run --release --example rate_analysis`

use sgdlab::{
    build_power_law, fit_loglog_slope, linear_regime_transition, log_checkpoints,
    make_distribution, propagate_diagonal, DistributionKind, FeatureDistribution, OptimumMode,
};

fn main() {
    // Hard regime: alpha = 0.5, beta = 0 with the heavy-tailed optimum
    // decays like 1/t; the easy regime alpha = 0.75, beta = 1 like 1/t^1.75.
    for (alpha, beta, expect) in [(0.5, 0.0, -1.0), (0.75, 1.0, -1.75)] {
        let problem = build_power_law(600, alpha, beta, OptimumMode::Tight(0.1)).unwrap();
        let dist = FeatureDistribution::Gaussian;
        let gamma = 1.0 / (2.0 * problem.trace_h());
        let t_max = 300_000;
        let checkpoints = log_checkpoints(t_max, 80);
        let curve =
            propagate_diagonal(&problem, &dist, gamma, t_max, &checkpoints, true).unwrap();
        let fit = fit_loglog_slope(&curve, 1_000, t_max).unwrap();
        println!(
            "alpha = {alpha}, beta = {beta}: fitted slope {:.4} (theory {expect}), \
             stderr {:.1e} over {} points",
            fit.slope, fit.stderr, fit.n_points
        );
    }

    // Transition detection: run far past tau = 1/(gamma * lambda_min) and
    // watch the curve fall off its power law.
    let problem = build_power_law(30, 0.5, 0.0, OptimumMode::Fig1).unwrap();
    let dist = make_distribution(&problem, DistributionKind::Gaussian, None).unwrap();
    let gamma = 1.0 / (2.0 * problem.trace_h());
    let t_max = 200_000;
    let checkpoints = log_checkpoints(t_max, 100);
    let curve = propagate_diagonal(&problem, &dist, gamma, t_max, &checkpoints, true).unwrap();
    let (tau, detected) = linear_regime_transition(&curve, gamma, problem.lambda_min());
    println!(
        "\nd = 30 transition: predicted tau = {tau:.0}, detected near t = {:?}",
        detected.map(|t| t.round())
    );
}
