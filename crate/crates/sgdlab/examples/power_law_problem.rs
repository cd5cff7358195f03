//! Build a power-law least-squares problem and inspect the constants the
//! convergence bounds consume.
//!
//! Run with: `cargo run --example power_law_problem`

use sgdlab::{build_power_law, compute_constants, make_distribution, DistributionKind, OptimumMode};

fn main() {
    let d = 50;
    let alpha = 0.5;
    let beta = 0.0;
    let problem = build_power_law(d, alpha, beta, OptimumMode::Fig1).expect("valid exponents");

    println!("problem: d = {d}, alpha = {alpha}, beta = {beta}");
    println!("  lambda_1 = {}, lambda_d = {}", problem.lambda_max(), problem.lambda_min());
    println!("  tr H = {:.6}", problem.trace_h());
    println!("  initial risk R(0) = {:.6}", problem.initial_risk());

    for kind in [DistributionKind::Gaussian, DistributionKind::Canonical] {
        let dist = make_distribution(&problem, kind, None).expect("valid distribution");
        let c = compute_constants(&problem, &dist, alpha, beta).expect("finite constants");
        println!("\n{kind:?} features:");
        println!("  R        = {:.6}  (fourth-moment constant)", c.r);
        println!("  lambda_o = {:.6}  (7 R_ln <= lambda_o)", c.lambda_o);
        println!("  R_ln     = {:.6}", c.r_ln);
        println!("  R_alpha  = {:.6}", c.r_alpha);
        println!("  C_ln     = {:.6}", c.c_ln);
        println!("  C_beta   = {:.6}", c.c_beta);
    }

    // The tight optimum mode keeps C_beta summable as d grows.
    let tight = build_power_law(d, alpha, 1.0, OptimumMode::Tight(0.1)).unwrap();
    let dist = make_distribution(&tight, DistributionKind::Canonical, None).unwrap();
    let c = compute_constants(&tight, &dist, alpha, 1.0).unwrap();
    println!("\ntight optimum at beta = 1: C_beta = {:.6} (bounded in d)", c.c_beta);
}
