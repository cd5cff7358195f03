//! Probe the supporting scalar inequalities and the risk-recursion
//! inequality numerically; every margin printed here must be nonnegative.
//!
//! Run with: `cargo run --example lemma_checks`

use sgdlab::{
    build_power_law, lemma2_check, lemma3_check, lemma4_check, lemma5_exact_and_check,
    make_distribution, s_n_exact, xi_alpha, DistributionKind, OptimumMode,
};

fn main() {
    // S_n(x) = sum_{k<n} (1-x)^k/(n-k) against its log-regularity envelope.
    println!("sum bound S_n(x) <= (2/(nx)) ln(e/x) + (1-x)^(n/2) ln(e n):");
    for (x, n) in [(0.25, 10), (1e-3, 100), (1e-6, 100_000)] {
        println!(
            "  x = {x:8.1e}, n = {n:6}: S_n = {:.4e}, margin = {:.4e}",
            s_n_exact(x, n),
            lemma3_check(x, n)
        );
    }

    // Bias-variance style bound (1-x)^t r + x t <= max(r, x t(1 + ln(r/(xt)))).
    println!("\ncontraction-plus-drift bound:");
    for (x, t, r) in [(0.1, 50, 2.0), (1e-4, 10_000, 0.5), (0.9, 3, 4.0)] {
        println!("  x = {x}, t = {t}, r = {r}: margin = {:.4e}", lemma4_check(x, t, r));
    }

    // Convolution sum_{t=1}^{T-1} t^{-(1+b)} (T-t)^{-(1+a)} against its
    // 2^{2+min(a,b)} xi_{max(a,b)} / T^{1+min(a,b)} envelope; a in (0, 1).
    println!("\nconvolution bound:");
    for (a, b, t) in [(0.5, 0.5, 1_000), (0.75, 1.5, 1_000), (0.25, 0.0, 100)] {
        let (exact, margin) = lemma5_exact_and_check(a, b, t).unwrap();
        println!("  a = {a}, b = {b}, T = {t}: sum = {exact:.4e}, margin = {margin:.4e}");
    }

    // xi_alpha = sum_i i^(-(1+alpha)) evaluated to 1e-10; xi(1) = pi^2/6.
    println!("\nzeta-type normalizer:");
    for alpha in [0.25, 0.5, 0.75, 1.0] {
        println!("  xi({alpha}) = {:.10}", xi_alpha(alpha).unwrap());
    }
    let gap = (xi_alpha(1.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs();
    println!("  |xi(1) - pi^2/6| = {gap:.2e}");

    // One-step risk recursion: the exact risk trajectory stays below the
    // Lyapunov recursion built from the assumption constants.
    println!("\nrisk-recursion inequality:");
    for kind in [DistributionKind::Gaussian, DistributionKind::Canonical] {
        let problem = build_power_law(40, 0.5, 0.5, OptimumMode::Fig1).unwrap();
        let dist = make_distribution(&problem, kind, None).unwrap();
        let gamma = 1.0 / (4.0 * problem.lambda_max());
        let margin = lemma2_check(&problem, &dist, gamma, 500).unwrap();
        println!("  {kind:?}: min margin over t <= 500 is {margin:.4e}");
    }
}
