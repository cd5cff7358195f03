//! Run the built-in verification suite at quick scale: ten numbered checks
//! covering oracle equivalence, Monte Carlo consistency, closed forms,
//! decay rates, bound dominance, the inequality suites, transition
//! detection and byte-level determinism.
//!
//! Run with: `cargo run --release --example self_check`

use sgdlab::{run_all, Level};

fn main() {
    let results = run_all(Level::Quick);
    let mut failures = 0;
    for r in &results {
        println!("{}", r.line());
        if !r.passed {
            failures += 1;
        }
    }
    if failures == 0 {
        println!("\nall {} checks passed", results.len());
    } else {
        println!("\n{failures} checks FAILED");
        std::process::exit(1);
    }
}
