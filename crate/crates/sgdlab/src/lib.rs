//! Numerical lab for constant step-size SGD on noiseless least-squares.
//!
//! Everything lives in the eigenbasis of the covariance operator `H`: a
//! problem is a non-increasing spectrum `λ_i` plus the coordinates of the
//! optimum `θ*`, and the expected risk of the `t`-th iterate is
//! `½ Σ_i λ_i m_i^t` where `m_i^t` is the diagonal of the deviation
//! covariance. The crate provides
//!
//! - synthetic power-law problems with controlled capacity (`α`) and source
//!   (`β`) exponents, plus the assumption constants `R`, `R_ln`, `R_α`,
//!   `C_ln`, `C_β` ([`spectrum`]);
//! - seeded Monte Carlo SGD paths for the last iterate, the Polyak average
//!   and the running minimum ([`runner`]);
//! - a zero-variance exact propagator for the expected risk, closed under
//!   the diagonal for Gaussian and canonical-atom feature laws, with a
//!   full-matrix oracle for cross-checks ([`propagator`]);
//! - evaluators for the theorem right-hand sides and the supporting
//!   inequalities ([`bounds`]);
//! - log-log slope fits, bound-dominance reports and linear-regime
//!   transition detection ([`analysis`]);
//! - a CSV/SVG-emitting command layer and a self-check suite
//!   ([`cli`], [`verify`]).
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod curve;
pub mod output;
pub mod propagator;
pub mod runner;
pub mod spectrum;
pub mod verify;

pub use analysis::{dominance_report, fit_loglog_slope, linear_regime_transition, BoundReport, SlopeFit};
pub use bounds::{
    bound_value, lemma2_check, lemma3_check, lemma4_check, lemma5_exact_and_check, s_n_exact,
    step_size_for, xi_alpha, BoundSpec, Theorem,
};
pub use config::ExperimentConfig;
pub use curve::{log_checkpoints, RiskCurve, Series};
pub use output::{csv_string, render_loglog_svg, write_csv, write_svg, SvgLine};
pub use propagator::{
    closed_form_check, f_terms, propagate_diagonal, propagate_full_oracle, risk_trajectory,
    step_diagonal, PropagatorState,
};
pub use runner::{random_rotation, replicate_seed, risk, run_paths, sgd_step, RunSpec, SgdState};
pub use spectrum::{
    build_power_law, compute_constants, make_distribution, select_lambda_o, DistributionKind,
    FeatureDistribution, OptimumMode, ProblemConstants, SpectrumProblem,
};
pub use verify::{run_all, CriterionResult, Level};
