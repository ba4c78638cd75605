//! Command-line front end.
//!
//! Exit codes: 0 when every contract holds, 1 when a numerical check fails
//! or is inconclusive, 2 for invalid invocations and I/O failures.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bayesverify::{self, run_bayes_suite, BayesSuite};
use crate::error::{Error, Result};
use crate::minimax::{
    alpha_star, alpha_star_maxmin, dominance_scan, run_proof_audits, ProofAudit, ScanReport,
    Verdict, DEFAULT_TAU_GRID, DEFAULT_VIOLATION_TOL,
};
use crate::model::{EstimatorSpec, Noncentrality, PriorHyper, ProblemDims};
use crate::numkernel::SeedSpec;
use crate::report::{format_significant, write_file, Report, Table};
use crate::risk::{risk_exact, risk_mc, McConfig, QuadConfig, RiskEstimate};

/// Cells used by `report` and by `verify` when no `--p/--n` is given.
pub const DEFAULT_CELLS: [(u32, u32); 4] = [(1, 1), (3, 5), (4, 2), (10, 10)];
const STEIN_TOL: f64 = 1e-10;
const MAX_GRID_POINTS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "sbvar",
    version,
    about = "Risk, dominance and Bayes checks for shrinkage estimators of a normal variance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the dominance threshold α*(p, n).
    AlphaStar(DimsArgs),
    /// Tabulate the entropy-loss risk of one estimator over a τ grid.
    Risk(RiskArgs),
    /// Scan Δ(τ) = R(S/n) − R(simple Bayes) and classify the result.
    Dominance(DominanceArgs),
    /// Run the Bayes and/or proof audit suites.
    Verify(VerifyArgs),
    /// Write risk curves, Δ plot data and a JSON verdict summary.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DimsArgs {
    /// Dimension of the mean vector.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    p: u32,
    /// Degrees of freedom of S.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    n: u32,
}

#[derive(Debug, Args)]
struct AlphaArgs {
    /// Shrinkage constant α of the simple Bayes estimator.
    #[arg(long, conflicts_with = "alpha_frac", allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// α as a multiple of α*(p, n) [default: 1.0].
    #[arg(long)]
    alpha_frac: Option<f64>,
}

impl AlphaArgs {
    fn resolve(&self, dims: ProblemDims) -> Result<f64> {
        let alpha = match (self.alpha, self.alpha_frac) {
            (Some(a), _) => a,
            (None, frac) => frac.unwrap_or(1.0) * alpha_star(dims),
        };
        if alpha > 0.0 && alpha.is_finite() {
            Ok(alpha)
        } else {
            Err(Error::Argument(format!(
                "alpha must be finite and > 0, got {alpha}"
            )))
        }
    }
}

#[derive(Debug, Args)]
struct QuadArgs {
    /// Gauss–Legendre order.
    #[arg(long, default_value_t = 128)]
    nodes: usize,
    /// Poisson tail mass allowed to be dropped.
    #[arg(long, default_value_t = 1e-12)]
    tail_tol: f64,
}

impl QuadArgs {
    fn config(&self) -> Result<QuadConfig> {
        let cfg = QuadConfig {
            order: self.nodes,
            tail_tol: self.tail_tol,
            ..QuadConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Quad,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    BestEquivariant,
    Stein,
    SimpleBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Bayes,
    Proof,
    All,
}

#[derive(Debug, Args)]
struct RiskArgs {
    #[command(flatten)]
    dims: DimsArgs,
    #[arg(long, value_enum, default_value_t = EstimatorArg::SimpleBayes)]
    estimator: EstimatorArg,
    #[command(flatten)]
    alpha: AlphaArgs,
    /// `start:stop:step` or a comma-separated list [default: 0,0.25,…,100].
    #[arg(long)]
    tau_grid: Option<String>,
    #[arg(long, value_enum, default_value_t = MethodArg::Quad)]
    method: MethodArg,
    #[command(flatten)]
    quad: QuadArgs,
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct DominanceArgs {
    #[command(flatten)]
    dims: DimsArgs,
    #[command(flatten)]
    alpha: AlphaArgs,
    #[arg(long)]
    tau_grid: Option<String>,
    /// Slack below zero tolerated before Δ counts as negative.
    #[arg(long, default_value_t = DEFAULT_VIOLATION_TOL)]
    tol: f64,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Restrict to one cell; requires --n.
    #[arg(long, requires = "n", value_parser = clap::value_parser!(u32).range(1..))]
    p: Option<u32>,
    #[arg(long, requires = "p", value_parser = clap::value_parser!(u32).range(1..))]
    n: Option<u32>,
    /// Prior hyperparameter; defaults to the value giving the resolved α.
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[command(flatten)]
    alpha: AlphaArgs,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory receiving the output files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha_frac: f64,
    #[command(flatten)]
    quad: QuadArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::AlphaStar(a) => cmd_alpha_star(&a),
        Command::Risk(a) => cmd_risk(&a),
        Command::Dominance(a) => cmd_dominance(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `start:stop:step` or a comma-separated list of non-negative,
/// ascending values.
pub fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Argument(format!("tau grid '{spec}': {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0 && step.is_finite() && stop >= start && stop.is_finite()) {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step * (1.0 + 1e-12) + 1e-9).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(bad("too many points"));
        }
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.len() > MAX_GRID_POINTS {
        return Err(bad("empty or too large"));
    }
    if grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(bad("values must be finite and >= 0"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(bad("values must be ascending"));
    }
    Ok(grid)
}

fn tau_grid(spec: &Option<String>) -> Result<Vec<f64>> {
    match spec {
        Some(s) => parse_tau_grid(s),
        None => Ok(DEFAULT_TAU_GRID.to_vec()),
    }
}

fn dims_of(d: &DimsArgs) -> Result<ProblemDims> {
    ProblemDims::new(d.p, d.n)
}

fn emit(out: &Option<PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    }
}

fn quad_json(cfg: &QuadConfig) -> Value {
    json!({"nodes": cfg.order, "tail_tol": cfg.tail_tol, "j_cap": cfg.j_cap})
}

fn cmd_alpha_star(args: &DimsArgs) -> Result<i32> {
    let dims = dims_of(args)?;
    println!("{}", format_significant(alpha_star(dims), 12));
    Ok(0)
}

fn cmd_risk(args: &RiskArgs) -> Result<i32> {
    let dims = dims_of(&args.dims)?;
    let grid = tau_grid(&args.tau_grid)?;
    let quad = args.quad.config()?;
    let spec = match args.estimator {
        EstimatorArg::BestEquivariant => EstimatorSpec::best_equivariant(),
        EstimatorArg::Stein => EstimatorSpec::stein_truncated(),
        EstimatorArg::SimpleBayes => EstimatorSpec::simple_bayes(args.alpha.resolve(dims)?)?,
    };
    let mc = McConfig {
        samples: args.samples,
        seed: SeedSpec::new(args.seed, 0),
        crn: false,
    };
    if args.method == MethodArg::Mc {
        mc.validate()?;
    }
    let config = json!({
        "p": dims.p(),
        "n": dims.n(),
        "estimator": spec.family().name(),
        "alpha": spec.alpha(),
        "tau_grid": grid,
        "method": match args.method { MethodArg::Quad => "quad", MethodArg::Mc => "mc" },
        "quadrature": quad_json(&quad),
        "samples": mc.samples,
        "seed": args.seed,
    });

    let mut rows: Vec<(f64, RiskEstimate)> = Vec::with_capacity(grid.len());
    let mut failure = None;
    for &t in &grid {
        let tau = Noncentrality::new(t)?;
        let est = match args.method {
            MethodArg::Quad => risk_exact(spec, dims, tau, &quad),
            MethodArg::Mc => risk_mc(spec, dims, tau, &mc),
        };
        match est {
            Ok(e) => rows.push((t, e)),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let mut report = Report::new("risk", config.clone());
    report.tables.push(
        Table::new("risk")
            .with_num("tau", rows.iter().map(|r| r.0).collect())
            .with_num("risk", rows.iter().map(|r| r.1.value).collect())
            .with_num(
                "error_bound",
                rows.iter().map(|r| r.1.error_bound).collect(),
            )
            .with_text(
                "method",
                rows.iter().map(|r| r.1.method.name().to_string()).collect(),
            ),
    );
    let contents = match args.format {
        Format::Csv => report.tables[0].to_csv(&config)?,
        Format::Json => report.to_json()?,
    };
    emit(&args.out, &contents)?;
    match failure {
        None => Ok(0),
        Some(e) => {
            eprintln!(
                "error: {e}; output holds the {} rows computed before the failure",
                rows.len()
            );
            Ok(e.exit_code())
        }
    }
}

fn scan_table(scan: &ScanReport) -> Table {
    Table::new(format!("dominance_p{}_n{}", scan.dims.p(), scan.dims.n()))
        .with_num("tau", scan.cells.iter().map(|c| c.tau).collect())
        .with_num("delta", scan.cells.iter().map(|c| c.delta_value).collect())
        .with_num(
            "error_bound",
            scan.cells.iter().map(|c| c.error_bound).collect(),
        )
        .with_num(
            "truncated",
            scan.cells
                .iter()
                .map(|c| f64::from(u8::from(c.truncated)))
                .collect(),
        )
}

fn push_scan_check(report: &mut Report, scan: &ScanReport) {
    report.push_check(
        format!("dominance_p{}_n{}", scan.dims.p(), scan.dims.n()),
        "minimax::dominance_scan",
        scan.verdict == Verdict::Dominates,
        scan.min_delta,
        json!({
            "verdict": scan.verdict,
            "alpha": scan.alpha,
            "argmin_tau": scan.argmin_tau,
            "violation_tol": scan.violation_tol,
        }),
    );
}

fn cmd_dominance(args: &DominanceArgs) -> Result<i32> {
    let dims = dims_of(&args.dims)?;
    let alpha = args.alpha.resolve(dims)?;
    let grid = tau_grid(&args.tau_grid)?;
    let quad = args.quad.config()?;
    let config = json!({
        "p": dims.p(),
        "n": dims.n(),
        "alpha": alpha,
        "alpha_star": alpha_star(dims),
        "tau_grid": grid,
        "tol": args.tol,
        "quadrature": quad_json(&quad),
    });
    let scan = dominance_scan(alpha, dims, &grid, &quad, args.tol)?;
    let mut report = Report::new("dominance", config);
    report.tables.push(scan_table(&scan));
    push_scan_check(&mut report, &scan);
    if args.out.is_some() {
        emit(&args.out, &render(&report, args.format)?)?;
    }
    println!(
        "{dims} alpha={} verdict={} min_delta={:e} at tau={}",
        format_significant(alpha, 12),
        scan.verdict,
        scan.min_delta,
        scan.argmin_tau
    );
    Ok(match scan.verdict {
        Verdict::Dominates => 0,
        Verdict::Violation => {
            eprintln!("violation: delta falls below -{} on the grid", args.tol);
            1
        }
        Verdict::Inconclusive => {
            let truncated = scan.cells.iter().filter(|c| c.truncated).count();
            eprintln!("inconclusive: minimum within error bound of the tolerance or {truncated} truncated cell(s)");
            1
        }
    })
}

fn push_audit(report: &mut Report, dims: ProblemDims, audit: &ProofAudit) {
    report.push_check(
        format!("proof_{}_p{}_n{}", audit.step.name(), dims.p(), dims.n()),
        format!("minimax::audit_{}", audit.step.name()),
        audit.passed,
        audit.worst_margin,
        json!({ "witness": audit.witness }),
    );
}

fn push_bayes(report: &mut Report, dims: ProblemDims, suite: &BayesSuite) {
    let tag = format!("p{}_n{}", dims.p(), dims.n());
    let detail = json!({ "a": suite.hyper.a(), "alpha": suite.alpha });
    let entries = [
        (
            "marginal_ratio",
            "bayesverify::marginal_ratio_check",
            suite.marginal_passed(),
            bayesverify::RATIO_SPREAD_TOL - suite.marginal.max_rel_spread,
        ),
        (
            "posterior",
            "bayesverify::posterior_estimates_numeric",
            suite.posterior_passed(),
            bayesverify::POSTERIOR_TOL - suite.worst_posterior_error,
        ),
        (
            "gradient",
            "bayesverify::gradient_identity_check",
            suite.gradient_passed(),
            bayesverify::GRADIENT_TOL - suite.worst_gradient_error,
        ),
        (
            "completing_square",
            "bayesverify::completing_square_residual",
            suite.worst_completing_square <= bayesverify::COMPLETING_SQUARE_TOL,
            bayesverify::COMPLETING_SQUARE_TOL - suite.worst_completing_square,
        ),
        (
            "change_of_variables",
            "bayesverify::change_of_variables_check",
            suite.worst_change_of_variables <= bayesverify::CHANGE_OF_VARIABLES_TOL,
            bayesverify::CHANGE_OF_VARIABLES_TOL - suite.worst_change_of_variables,
        ),
    ];
    for (name, op, passed, margin) in entries {
        report.push_check(
            format!("bayes_{name}_{tag}"),
            op,
            passed,
            margin,
            detail.clone(),
        );
    }
}

/// `a` such that `(p/2 + a + 1)/(n/2) = alpha`.
fn hyper_for_alpha(alpha: f64, dims: ProblemDims) -> Result<PriorHyper> {
    PriorHyper::new(0.5 * alpha * dims.nf() - 0.5 * dims.pf() - 1.0, dims)
}

fn print_checks(report: &Report) {
    for c in &report.verdicts {
        println!(
            "{} {} margin={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.margin
        );
    }
}

fn report_failures(report: &Report) -> i32 {
    if report.all_passed() {
        return 0;
    }
    for c in report.failures() {
        eprintln!(
            "failed: {} ({}) margin={:e} detail={}",
            c.name, c.operation, c.margin, c.detail
        );
    }
    1
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let cells: Vec<ProblemDims> = match (args.p, args.n) {
        (Some(p), Some(n)) => vec![ProblemDims::new(p, n)?],
        _ => DEFAULT_CELLS
            .iter()
            .map(|&(p, n)| ProblemDims::new(p, n))
            .collect::<Result<_>>()?,
    };
    if args.a.is_some() && cells.len() > 1 {
        return Err(Error::Argument(
            "--a needs a single cell (--p and --n)".into(),
        ));
    }
    let quad = args.quad.config()?;
    let seed = SeedSpec::new(args.seed, 0);
    let suite_name = match args.suite {
        Suite::Bayes => "bayes",
        Suite::Proof => "proof",
        Suite::All => "all",
    };
    let mut cell_configs = Vec::new();
    let mut report = Report::new(format!("verify {suite_name}"), Value::Null);
    for dims in cells {
        let alpha = args.alpha.resolve(dims)?;
        let hyper = match args.a {
            Some(a) => PriorHyper::new(a, dims)?,
            None => hyper_for_alpha(alpha, dims)?,
        };
        cell_configs.push(json!({"p": dims.p(), "n": dims.n(), "alpha": alpha, "a": hyper.a()}));
        if matches!(args.suite, Suite::Proof | Suite::All) {
            for audit in run_proof_audits(alpha, dims, &quad, seed)? {
                push_audit(&mut report, dims, &audit);
            }
        }
        if matches!(args.suite, Suite::Bayes | Suite::All) {
            push_bayes(&mut report, dims, &run_bayes_suite(hyper, &quad, seed)?);
        }
    }
    report.metadata.config = json!({
        "suite": suite_name,
        "cells": cell_configs,
        "quadrature": quad_json(&quad),
        "seed": args.seed,
    });
    if args.out.is_some() {
        emit(&args.out, &render(&report, args.format)?)?;
    }
    print_checks(&report);
    Ok(report_failures(&report))
}

fn cmd_report(args: &ReportArgs) -> Result<i32> {
    let quad = args.quad.config()?;
    if !(args.alpha_frac > 0.0 && args.alpha_frac.is_finite()) {
        return Err(Error::Argument(format!(
            "alpha_frac must be > 0, got {}",
            args.alpha_frac
        )));
    }
    let seed = SeedSpec::new(args.seed, 0);
    let grid = DEFAULT_TAU_GRID.to_vec();
    let config = json!({
        "cells": DEFAULT_CELLS,
        "alpha_frac": args.alpha_frac,
        "tau_grid": grid,
        "violation_tol": DEFAULT_VIOLATION_TOL,
        "stein_tol": STEIN_TOL,
        "quadrature": quad_json(&quad),
        "seed": args.seed,
    });
    let mut report = Report::new("report", config.clone());

    // Threshold agreement over the small grid.
    let mut worst = 0.0f64;
    for p in 1..=12 {
        for n in 1..=12 {
            let dims = ProblemDims::new(p, n)?;
            worst = worst.max((alpha_star_maxmin(dims, 1e-10)? - alpha_star(dims)).abs());
        }
    }
    report.push_check(
        "threshold_consistency",
        "minimax::alpha_star_maxmin",
        worst <= 1e-8,
        1e-8 - worst,
        json!({"max_abs_diff": worst}),
    );

    for &(p, n) in &DEFAULT_CELLS {
        let dims = ProblemDims::new(p, n)?;
        let alpha = args.alpha_frac * alpha_star(dims);
        let cell_config = json!({"p": p, "n": n, "alpha": alpha, "tau_grid": grid, "quadrature": quad_json(&quad)});

        let families = [
            EstimatorSpec::best_equivariant(),
            EstimatorSpec::stein_truncated(),
            EstimatorSpec::simple_bayes(alpha)?,
        ];
        let mut risk = Table::new(format!("risk_p{p}_n{n}")).with_num("tau", grid.clone());
        let mut curves = Vec::new();
        for spec in families {
            let est: Vec<RiskEstimate> = grid
                .iter()
                .map(|&t| risk_exact(spec, dims, Noncentrality::new(t)?, &quad))
                .collect::<Result<_>>()?;
            let name = spec.family().name();
            risk = risk
                .with_num(
                    format!("risk_{name}"),
                    est.iter().map(|e| e.value).collect(),
                )
                .with_num(
                    format!("error_bound_{name}"),
                    est.iter().map(|e| e.error_bound).collect(),
                );
            curves.push(est);
        }
        write_file(
            &args.out.join(format!("risk_p{p}_n{n}.csv")),
            &risk.to_csv(&cell_config)?,
        )?;

        let stein_margin = curves[0]
            .iter()
            .zip(&curves[1])
            .map(|(base, stein)| base.value + STEIN_TOL - stein.value)
            .fold(f64::INFINITY, f64::min);
        report.push_check(
            format!("stein_baseline_p{p}_n{n}"),
            "risk::risk_exact",
            stein_margin >= 0.0,
            stein_margin,
            json!({"tol": STEIN_TOL}),
        );

        let scan = dominance_scan(alpha, dims, &grid, &quad, DEFAULT_VIOLATION_TOL)?;
        let dat = Table::new(format!("delta_p{p}_n{n}"))
            .with_num("tau", scan.cells.iter().map(|c| c.tau).collect())
            .with_num("delta", scan.cells.iter().map(|c| c.delta_value).collect());
        write_file(
            &args.out.join(format!("delta_p{p}_n{n}.dat")),
            &dat.to_dat(&cell_config)?,
        )?;
        report.tables.push(scan_table(&scan));
        push_scan_check(&mut report, &scan);

        for audit in run_proof_audits(alpha, dims, &quad, seed)? {
            push_audit(&mut report, dims, &audit);
        }
        push_bayes(
            &mut report,
            dims,
            &run_bayes_suite(hyper_for_alpha(alpha, dims)?, &quad, seed)?,
        );
    }
    write_file(&args.out.join("summary.json"), &report.to_json()?)?;
    print_checks(&report);
    println!("wrote {}", args.out.display());
    Ok(report_failures(&report))
}
