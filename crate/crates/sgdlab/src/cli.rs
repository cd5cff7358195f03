//! Command layer: config ingestion, experiment orchestration, CSV/SVG
//! persistence and the self-verification entry point.
//!
//! Exit codes: 1 for invalid configuration, 2 for numerical failure
//! (divergence or a violated inequality), 3 for a failed verification run.

use crate::analysis::{dominance_report, linear_regime_transition, AnalysisError};
use crate::bounds::{
    lemma3_check, lemma4_check, lemma5_exact_and_check, lemma5_sum, xi_alpha, BoundSpec,
    BoundsError, Theorem,
};
use crate::config::{ConfigError, ExperimentConfig, GammaMode};
use crate::curve::{log_checkpoints, RiskCurve, Series};
use crate::output::{write_csv, write_svg, SvgLine};
use crate::propagator::{propagate_diagonal, PropagatorError};
use crate::runner::{random_rotation, run_paths, RunSpec, RunnerError};
use crate::spectrum::SpectrumError;
use crate::verify::{run_all, Level};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error("invalid config: {0}")]
    Spectrum(#[from] SpectrumError),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(
        "bounds at a non-prescribed step size require --force-gamma; \
         the resulting reports are marked non-certified"
    )]
    ForceGammaRequired,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Propagator(#[from] PropagatorError),
    #[error("{0}")]
    Runner(#[from] RunnerError),
    #[error("{0}")]
    Bounds(#[from] BoundsError),
    #[error("{0}")]
    Analysis(#[from] AnalysisError),
    #[error("inequality violated: {0}")]
    LemmaViolation(String),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_)
            | CliError::Spectrum(_)
            | CliError::Invalid(_)
            | CliError::ForceGammaRequired
            | CliError::Io(_) => 1,
            CliError::Propagator(e) => match e {
                PropagatorError::Divergence { .. } => 2,
                _ => 1,
            },
            CliError::Runner(e) => match e {
                RunnerError::Divergence { .. } => 2,
                _ => 1,
            },
            CliError::Bounds(_) => 1,
            CliError::Analysis(_) | CliError::LemmaViolation(_) => 2,
            CliError::VerifyFailed(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sgdlab", about = "Constant step-size SGD risk curves, bounds and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonOpts {
    /// Path to a JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV/SVG/report files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the config's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the SGDLAB_THREADS environment variable.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Allow step sizes beyond the certified cap; bound reports become
    /// non-certified.
    #[arg(long)]
    pub force_gamma: bool,
    /// Spot-check rotation equivariance: simulate in a random orthogonal
    /// basis instead of the eigenbasis.
    #[arg(long)]
    pub rotate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact expected-risk curve from the diagonal propagator.
    Propagate(CommonOpts),
    /// Monte Carlo risk curves over seeded replicates.
    Simulate(CommonOpts),
    /// Theorem bound curves plus a dominance report against the exact risk.
    Bounds(CommonOpts),
    /// Reproduce the reference figure panel (risk curves on log-log axes).
    Fig1 {
        #[arg(long, value_enum)]
        panel: Panel,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Check the scalar inequality suites over their default grids.
    Lemmas(CommonOpts),
    /// Run the self-verification checks.
    Verify {
        #[arg(long, value_enum, default_value = "quick")]
        level: VerifyLevel,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

impl Command {
    fn common(&self) -> &CommonOpts {
        match self {
            Command::Propagate(o)
            | Command::Simulate(o)
            | Command::Bounds(o)
            | Command::Lemmas(o) => o,
            Command::Fig1 { opts, .. } | Command::Verify { opts, .. } => opts,
        }
    }
}

/// Files produced by a command.
#[derive(Debug, Clone)]
pub struct CmdOutput {
    pub csv_path: PathBuf,
    pub svg_path: Option<PathBuf>,
}

/// Top-level dispatch; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = cli
        .command
        .common()
        .threads
        .or_else(|| std::env::var("SGDLAB_THREADS").ok().and_then(|v| v.parse().ok()));
    let body = || -> Result<(), CliError> { execute(cli.command) };
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(body),
            Err(e) => Err(CliError::Invalid(format!("cannot build thread pool: {e}"))),
        },
        None => body(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig, CliError> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| CliError::Invalid("--config is required for this command".into()))?;
    Ok(ExperimentConfig::from_path(path)?)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Propagate(opts) => {
            let cfg = load_config(&opts)?;
            let out = cmd_propagate(&cfg, &opts.out, opts.force_gamma)?;
            println!("wrote {}", out.csv_path.display());
            Ok(())
        }
        Command::Simulate(opts) => {
            let cfg = load_config(&opts)?;
            let out = cmd_simulate(&cfg, &opts.out, opts.seed, opts.rotate)?;
            println!("wrote {}", out.csv_path.display());
            Ok(())
        }
        Command::Bounds(opts) => {
            let cfg = load_config(&opts)?;
            let out = cmd_bounds(&cfg, &opts.out, opts.force_gamma)?;
            println!("wrote {}", out.csv_path.display());
            Ok(())
        }
        Command::Fig1 { panel, opts } => {
            let out = cmd_fig1(panel, &opts.out, opts.seed)?;
            println!("wrote {}", out.csv_path.display());
            Ok(())
        }
        Command::Lemmas(opts) => {
            let report = cmd_lemmas(&opts.out, opts.seed)?;
            println!("wrote {}", report.display());
            Ok(())
        }
        Command::Verify { level, opts } => {
            let _ = &opts;
            let level = match level {
                VerifyLevel::Quick => Level::Quick,
                VerifyLevel::Full => Level::Full,
            };
            cmd_verify(level)
        }
    }
}

/// Exact expected-risk curve for the configured problem, written as CSV
/// (and optionally SVG).
pub fn cmd_propagate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    force_gamma: bool,
) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let dist = cfg.build_distribution(&problem)?;
    let (gamma, _) = cfg.resolve_gamma(&problem, &dist)?;
    let grid = cfg.checkpoint_grid();
    let curve = propagate_diagonal(&problem, &dist, gamma, cfg.horizon, &grid, force_gamma)?;
    let run_id = format!("propagate-{}", cfg.base_seed);
    write_outputs(cfg, out_dir, &run_id, &[curve], &[])
}

/// Monte Carlo risk curves for the configured series, written as CSV
/// (and optionally SVG). Only sampled series are valid here; use
/// `propagate` for the exact curve.
pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    rotate: bool,
) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let dist = cfg.build_distribution(&problem)?;
    let (gamma, _) = cfg.resolve_gamma(&problem, &dist)?;
    let seed = seed_override.unwrap_or(cfg.base_seed);
    let mut spec = RunSpec::new(gamma, cfg.horizon, cfg.replicates, seed, cfg.checkpoint_grid());
    spec.track = cfg.series.clone();
    if rotate {
        spec.rotation = Some(random_rotation(problem.dimension(), seed ^ 0x5254_4154_494f_4e21));
    }
    let curves = run_paths(&problem, &dist, &spec)?;
    let run_id = format!("simulate-{seed}");
    write_outputs(cfg, out_dir, &run_id, &curves, &[])
}

/// Theorem bound curves against the exact risk at the same step size, with
/// a dominance report per theorem (stdout + JSON next to the CSV).
pub fn cmd_bounds(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    force_gamma: bool,
) -> Result<CmdOutput, CliError> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let dist = cfg.build_distribution(&problem)?;
    let constants =
        crate::spectrum::compute_constants(&problem, &dist, problem.alpha(), problem.beta())?;
    let grid: Vec<u64> = cfg.checkpoint_grid().into_iter().filter(|&t| t >= 3).collect();
    if grid.is_empty() {
        return Err(CliError::Invalid("bounds need a horizon of at least 3".into()));
    }

    let specs: Vec<BoundSpec> = match cfg.gamma.mode {
        GammaMode::Thm1 | GammaMode::Thm2 | GammaMode::Thm3 => {
            let theorem = match cfg.gamma.mode {
                GammaMode::Thm1 => Theorem::Thm1,
                GammaMode::Thm2 => Theorem::Thm2,
                _ => Theorem::Thm3,
            };
            vec![BoundSpec::prescribed(
                theorem,
                constants,
                problem.alpha(),
                problem.beta(),
                cfg.horizon,
            )?]
        }
        _ => {
            // Exploratory step size: every bound is evaluated but none is
            // certified, and the override must be explicit.
            if !force_gamma {
                return Err(CliError::ForceGammaRequired);
            }
            let (gamma, _) = cfg.resolve_gamma(&problem, &dist)?;
            [Theorem::Thm1, Theorem::Thm2, Theorem::Thm3]
                .into_iter()
                .map(|t| {
                    BoundSpec::forced(t, constants.clone(), problem.alpha(), problem.beta(), gamma)
                })
                .collect()
        }
    };

    let gamma = specs[0].gamma;
    let exact = propagate_diagonal(&problem, &dist, gamma, cfg.horizon, &grid, force_gamma)?;
    let mut curves = vec![exact.clone()];
    let mut reports = Vec::new();
    for spec in &specs {
        let bound = spec.curve(&grid)?;
        let report = dominance_report(&exact, &bound, spec.gamma, spec.certified)?;
        println!(
            "{:?}: gamma = {:.6e}, certified = {}, min margin = {:.6e}{}",
            report.theorem,
            report.gamma,
            report.certified,
            report.min_margin,
            match report.violating_t {
                Some(t) => format!(", first violation at t = {t}"),
                None => String::new(),
            }
        );
        reports.push(serde_json::json!({
            "theorem": bound.series.label(),
            "gamma": report.gamma,
            "certified": report.certified,
            "min_margin": report.min_margin,
            "violating_t": report.violating_t,
        }));
        curves.push(bound);
    }
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("bounds_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&reports).expect("json") + "\n")?;
    let run_id = format!("bounds-{}", cfg.base_seed);
    write_outputs(cfg, out_dir, &run_id, &curves, &[])
}

const FIG1_D: usize = 300;
const FIG1_REPLICATES: u32 = 10;
const FIG1_T_MC: u64 = 100_000;
const FIG1_T_EXACT: u64 = 1_000_000;

/// Reproduce a panel of the reference synthetic experiment: d=300 power-law
/// spectrum, Gaussian features, `γ = 1/(2 tr H)`, ten replicates, last and
/// averaged iterates plus the exact expected-risk curve. The left panel is
/// `(α, β) = (0.5, 0)` with the predicted linear-regime transition marked;
/// the right panel is `(α, β) = (0.75, 1)` with a `1/T^{1.75}` reference.
pub fn cmd_fig1(panel: Panel, out_dir: &Path, seed: Option<u64>) -> Result<CmdOutput, CliError> {
    let (alpha, beta, name) = match panel {
        Panel::Left => (0.5, 0.0, "fig1_left"),
        Panel::Right => (0.75, 1.0, "fig1_right"),
    };
    let problem = crate::spectrum::build_power_law(
        FIG1_D,
        alpha,
        beta,
        crate::spectrum::OptimumMode::Fig1,
    )?;
    let dist = crate::spectrum::FeatureDistribution::Gaussian;
    let gamma = 1.0 / (2.0 * problem.trace_h());

    let mc_grid = log_checkpoints(FIG1_T_MC, 60);
    let mut spec = RunSpec::new(
        gamma,
        FIG1_T_MC,
        FIG1_REPLICATES,
        seed.unwrap_or(1234),
        mc_grid,
    );
    spec.track = vec![Series::Last, Series::Averaged];
    let mc = run_paths(&problem, &dist, &spec)?;

    let exact_grid = log_checkpoints(FIG1_T_EXACT, 72);
    let exact = propagate_diagonal(&problem, &dist, gamma, FIG1_T_EXACT, &exact_grid, true)?;

    let mut curves = mc;
    curves.push(exact);

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{name}.csv"));
    write_csv(&csv_path, name, &curves)?;

    let mut lines: Vec<SvgLine> = curves.iter().map(SvgLine::from_curve).collect();
    let mut markers = Vec::new();
    match panel {
        Panel::Left => {
            let (tau, _) = linear_regime_transition(
                curves.last().expect("exact curve"),
                gamma,
                problem.lambda_min(),
            );
            markers.push((tau, "1/(gamma lambda_min)".to_string()));
        }
        Panel::Right => {
            // Reference slope anchored to the exact curve at t = 10^3.
            let exact = curves.last().expect("exact curve");
            let anchor = exact
                .checkpoints
                .iter()
                .position(|&t| t >= 1_000)
                .unwrap_or(0);
            let c = exact.values[anchor] * (exact.checkpoints[anchor] as f64).powf(1.75);
            lines.push(SvgLine {
                label: "1/T^1.75 reference".to_string(),
                points: exact
                    .checkpoints
                    .iter()
                    .map(|&t| (t as f64, c / (t as f64).powf(1.75)))
                    .collect(),
                dashed: true,
            });
        }
    }
    let svg_path = out_dir.join(format!("{name}.svg"));
    write_svg(
        &svg_path,
        &format!("expected risk, alpha = {alpha}, beta = {beta}"),
        &lines,
        &markers,
    )?;
    Ok(CmdOutput { csv_path, svg_path: Some(svg_path) })
}

/// Run the scalar inequality suites over their default grids and write a
/// plain-text report. A violated inequality is a numerical failure.
pub fn cmd_lemmas(out_dir: &Path, seed: Option<u64>) -> Result<PathBuf, CliError> {
    let mut report = String::new();
    let mut violations = Vec::new();

    // Geometric-sum inequality: x S_n(x) <= 7 ln(1/x)/n.
    let mut min3 = f64::INFINITY;
    for k in 2..=40 {
        let x = 2f64.powi(-k);
        for n in [1_u64, 2, 5, 10, 100, 1_000, 10_000, 100_000] {
            let margin = lemma3_check(x, n);
            min3 = min3.min(margin);
            if margin < 0.0 {
                violations.push(format!("geometric-sum margin {margin:.3e} at x=2^-{k}, n={n}"));
            }
        }
    }
    report.push_str(&format!(
        "geometric-sum inequality: grid x = 2^-k (k=2..40), n up to 1e5; min margin {min3:.6e}\n"
    ));

    // Polynomial-vs-geometric inequality: x^r (1-x)^t <= r^r/t^r.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(88));
    let mut min4 = f64::INFINITY;
    for _ in 0..10_000 {
        let x = rng.random_range(f64::MIN_POSITIVE..1.0);
        let t = rng.random_range(1..=1_000_000_u64);
        let r = rng.random_range(0.0_f64..5.0).max(1e-6);
        let margin = lemma4_check(x, t, r);
        min4 = min4.min(margin);
        if margin < 0.0 {
            violations.push(format!(
                "polynomial-vs-geometric margin {margin:.3e} at x={x}, t={t}, r={r}"
            ));
        }
    }
    report.push_str(&format!(
        "polynomial-vs-geometric inequality: 10000 random (x, t, r); min margin {min4:.6e}\n"
    ));

    // Convolution-sum bound and symmetry.
    let mut min5 = f64::INFINITY;
    for alpha in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
        for beta in [-0.5, 0.0, 0.5, 1.0, 2.0] {
            for t_max in [2_u64, 10, 100, 1_000] {
                let (sum, margin) = lemma5_exact_and_check(alpha, beta, t_max)?;
                min5 = min5.min(margin);
                if margin < 0.0 {
                    violations.push(format!(
                        "convolution-sum margin {margin:.3e} at ({alpha}, {beta}, T={t_max})"
                    ));
                }
                let swapped = lemma5_sum(beta, alpha, t_max);
                if (sum - swapped).abs() > 1e-12 * sum.max(swapped) {
                    violations.push(format!(
                        "convolution-sum symmetry broken at ({alpha}, {beta}, T={t_max})"
                    ));
                }
            }
        }
    }
    report.push_str(&format!(
        "convolution-sum bound: alpha/beta/T grid (180 points) with symmetry; \
         min margin {min5:.6e}\n"
    ));

    // Zeta spot checks.
    let pi = std::f64::consts::PI;
    let xi1 = xi_alpha(1.0)?;
    let xi3 = xi_alpha(3.0)?;
    report.push_str(&format!(
        "zeta identities: |xi(1) - pi^2/6| = {:.3e}, |xi(3) - pi^4/90| = {:.3e}\n",
        (xi1 - pi * pi / 6.0).abs(),
        (xi3 - pi.powi(4) / 90.0).abs()
    ));
    if (xi1 - pi * pi / 6.0).abs() > 1e-10 || (xi3 - pi.powi(4) / 90.0).abs() > 1e-10 {
        violations.push("zeta identity mismatch".to_string());
    }

    report.push_str(if violations.is_empty() {
        "all inequalities hold\n"
    } else {
        "VIOLATIONS FOUND\n"
    });
    print!("{report}");

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("lemmas.txt");
    std::fs::write(&path, &report)?;
    if violations.is_empty() {
        Ok(path)
    } else {
        Err(CliError::LemmaViolation(violations.join("; ")))
    }
}

/// Run the self-verification suite, printing one line per check.
pub fn cmd_verify(level: Level) -> Result<(), CliError> {
    let results = run_all(level);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("all {} checks passed", results.len());
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed))
    }
}

fn write_outputs(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    run_id: &str,
    curves: &[RiskCurve],
    markers: &[(f64, String)],
) -> Result<CmdOutput, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(&cfg.outputs.csv_path);
    write_csv(&csv_path, run_id, curves)?;
    let svg_path = match &cfg.outputs.svg_path {
        Some(name) => {
            let path = out_dir.join(name);
            let lines: Vec<SvgLine> = curves.iter().map(SvgLine::from_curve).collect();
            write_svg(&path, run_id, &lines, markers)?;
            Some(path)
        }
        None => None,
    };
    Ok(CmdOutput { csv_path, svg_path })
}
