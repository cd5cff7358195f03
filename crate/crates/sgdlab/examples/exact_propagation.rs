//! Propagate the exact expected risk of constant step-size SGD without
//! sampling, and cross-check the diagonal recursion against the full-matrix
//! oracle and an unrolled closed form.
//!
//! Run with: `cargo run --example exact_propagation`

use sgdlab::{
    build_power_law, closed_form_check, log_checkpoints, make_distribution, propagate_diagonal,
    propagate_full_oracle, DistributionKind, FeatureDistribution, OptimumMode,
};

fn main() {
    let problem = build_power_law(6, 0.5, 0.0, OptimumMode::Fig1).unwrap();
    let gamma = 1.0 / (4.0 * problem.lambda_max());
    let t_max = 200;
    let checkpoints = log_checkpoints(t_max, 12);

    for dist in [
        FeatureDistribution::Gaussian,
        make_distribution(&problem, DistributionKind::Canonical, None).unwrap(),
    ] {
        println!("{:?} features, gamma = {gamma}:", dist.kind());
        let curve = propagate_diagonal(&problem, &dist, gamma, t_max, &checkpoints, false)
            .expect("stable step size");
        for (t, v) in curve.checkpoints.iter().zip(&curve.values) {
            println!("  t = {t:4}: expected risk = {v:.6e}");
        }

        // The full-matrix recursion never mixes off-diagonal mass into the
        // diagonal for these laws, so both must agree to float precision.
        let oracle = propagate_full_oracle(&problem, &dist, gamma, 50).unwrap();
        let d = problem.dimension();
        let risk_full: f64 = 0.5
            * problem
                .lambdas()
                .iter()
                .enumerate()
                .map(|(i, &l)| l * oracle[50][i * d + i])
                .sum::<f64>();
        println!("  full-matrix oracle risk at t = 50: {risk_full:.6e}");

        let worst = closed_form_check(&problem, &dist, gamma, 100).unwrap();
        println!("  unrolled closed form, worst rel discrepancy: {worst:.3e}\n");
    }
}
