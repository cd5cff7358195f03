//! Acceptance gate: every numbered check from the self-verification suite,
//! run at full scale. Each test pins one externally observable property of
//! the library; tolerances live inside the corresponding criterion.

use sgdlab::verify::{CriterionResult, Level};

fn assert_pass(result: CriterionResult) {
    assert!(result.passed, "{}", result.line());
    println!("{}", result.line());
}

#[test]
fn criterion_01_oracle_equivalence() {
    assert_pass(sgdlab::verify::criterion_1(Level::Full));
}

#[test]
fn criterion_02_monte_carlo_consistency() {
    assert_pass(sgdlab::verify::criterion_2(Level::Full));
}

#[test]
fn criterion_03_closed_form_d1() {
    assert_pass(sgdlab::verify::criterion_3(Level::Full));
}

#[test]
fn criterion_04_slow_regime_rate() {
    assert_pass(sgdlab::verify::criterion_4(Level::Full));
}

#[test]
fn criterion_05_fast_regime_rate() {
    assert_pass(sgdlab::verify::criterion_5(Level::Full));
}

#[test]
fn criterion_06_bound_dominance() {
    assert_pass(sgdlab::verify::criterion_6(Level::Full));
}

#[test]
fn criterion_07_risk_recursion_inequality() {
    assert_pass(sgdlab::verify::criterion_7(Level::Full));
}

#[test]
fn criterion_08_scalar_lemma_suites() {
    assert_pass(sgdlab::verify::criterion_8(Level::Full));
}

#[test]
fn criterion_09_linear_regime_transition() {
    assert_pass(sgdlab::verify::criterion_9(Level::Full));
}

#[test]
fn criterion_10_deterministic_output() {
    assert_pass(sgdlab::verify::criterion_10(Level::Full));
}
