//! `truncreg` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage, 3 data or degeneracy,
//! 4 rejection-sampling budget, 5 inference precondition.

mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use truncreg::estimator::{boost, fit, split_three, EarlyStop, FitConfig, FitResult, Schedule, ZetaChoice, DEFAULT_OFFSET};
use truncreg::inference::{asymptotic_covariance, confidence_region, InferenceOptions};
use truncreg::synth::{
    bias_fit_config, experiment_fig1_with, experiment_fig2, generate, rate_fit_config, GenConfig, OlsBaseline, WStar,
    XDist,
};
use truncreg::{Dataset, Error, ModelParams, TruncationSet};

#[derive(Parser)]
#[command(name = "truncreg", version, about = "Truncated linear regression with unknown noise variance")]
struct Cli {
    /// Worker threads for parallel parts (boosting, experiment grids).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic truncated dataset as CSV.
    Generate(GenerateArgs),
    /// Fit (w, sigma^2) by projected SGD and print a JSON report.
    Fit(FitArgs),
    /// Fit with the 1/(zeta t) schedule and print a confidence region.
    Confidence(ConfidenceArgs),
    /// Run an experiment grid and write a CSV table.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Number of observed (kept) samples.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 1.0, value_parser = positive_f64)]
    sigma2: f64,
    /// `ones`, `uniform` (each coordinate on [-1, 1]) or a comma list.
    #[arg(long, default_value = "uniform", value_parser = parse_wstar)]
    wstar: WStar,
    /// `uniform:LO,HI`, `normal` or `normalized` (normal scaled into the unit ball).
    #[arg(long, default_value = "uniform:-5,5", value_parser = parse_xdist)]
    xdist: XDist,
    /// Truncation set, e.g. `[0,inf)` or `(-inf,-1]U[1,inf)`.
    #[arg(long, value_parser = parse_set)]
    set: TruncationSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Give up after this many raw draws (default 1000 n).
    #[arg(long)]
    max_world_draws: Option<usize>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the ground truth `{w, sigma2}` as JSON here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CommonFit {
    /// Input CSV with header x1,...,xk,y.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_set)]
    set: TruncationSet,
    /// Assumed lower bound on the survival probability.
    #[arg(long, default_value_t = 0.1, value_parser = unit_interval)]
    a: f64,
    /// Assumed bound on ||w||^2.
    #[arg(long, default_value_t = 100.0, value_parser = positive_f64)]
    beta: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
    /// Rejection draws per stochastic gradient.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    batch: u64,
    #[arg(long, default_value_t = truncreg::truncset::DEFAULT_MAX_ATTEMPTS as u64, value_parser = clap::value_parser!(u64).range(1..))]
    max_attempts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs to combine by majority vote.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    boost: Option<u64>,
    /// Agreement tolerance for --boost.
    #[arg(long, default_value_t = 0.1, value_parser = nonnegative_f64)]
    eps: f64,
    /// Check the held-out gradient every this many steps.
    #[arg(long, requires = "grad_tol", value_parser = clap::value_parser!(u64).range(1..))]
    check_every: Option<u64>,
    /// Stop once the held-out gradient norm is at most this.
    #[arg(long, requires = "check_every", value_parser = positive_f64)]
    grad_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleKind {
    Sqrt,
    Strong,
    Step,
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long, value_enum)]
    schedule: Option<ScheduleKind>,
    /// Constant of the c/sqrt(t) schedule.
    #[arg(long, value_parser = positive_f64)]
    c: Option<f64>,
    #[command(flatten)]
    strong: StrongArgs,
    #[arg(long, value_parser = positive_f64)]
    lr0: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    factor: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    every: Option<u64>,
}

#[derive(Args, Clone)]
struct StrongArgs {
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_zeta)]
    zeta: ZetaChoice,
    /// Step counter offset t0 in 1/(zeta (t + t0)).
    #[arg(long, default_value_t = DEFAULT_OFFSET, value_parser = nonnegative_f64)]
    offset: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: CommonFit,
    #[command(flatten)]
    schedule: ScheduleArgs,
}

#[derive(Args)]
struct ConfidenceArgs {
    #[command(flatten)]
    common: CommonFit,
    #[command(flatten)]
    strong: StrongArgs,
    #[arg(long, default_value_t = 0.1, value_parser = unit_interval)]
    alpha: f64,
    /// Candidate `w1,...,wk,sigma2` to test for membership.
    #[arg(long, value_parser = parse_list)]
    test: Option<List<f64>>,
    /// Leave the rejection-sampling variance out of the gradient covariance.
    #[arg(long)]
    gamma_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Fig1,
    Fig2,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Intercept,
    NoIntercept,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Seeds as a comma list or an inclusive range `A-B`.
    #[arg(long, default_value = "0-9", value_parser = parse_seeds)]
    seeds: List<u64>,
    /// Noise levels for fig1.
    #[arg(long, default_value = "1,4,9", value_parser = parse_list)]
    sigma_grid: List<f64>,
    /// Observed samples per fig1 cell.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(3..))]
    n: u64,
    /// Sample sizes for fig2, ascending.
    #[arg(long, default_value = "250,500,1000,2000,4000", value_parser = parse_sizes)]
    n_grid: List<usize>,
    /// Seed of the shared fig2 data pool.
    #[arg(long, default_value_t = 0)]
    pool_seed: u64,
    /// OLS variant compared against in fig1.
    #[arg(long, value_enum, default_value = "intercept")]
    baseline: BaselineKind,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    steps: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    batch: Option<u64>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A comma-separated flag value. Wrapped so clap treats it as one value.
#[derive(Clone, Debug)]
struct List<T>(Vec<T>);

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a number strictly between 0 and 1, got {s:?}")),
    }
}

fn parse_set(s: &str) -> Result<TruncationSet, String> {
    s.parse::<TruncationSet>().map_err(|e| e.to_string())
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(format!("expected a comma-separated list of numbers, got {s:?}")),
    }
}

fn parse_list(s: &str) -> Result<List<f64>, String> {
    parse_floats(s).map(List)
}

fn parse_sizes(s: &str) -> Result<List<usize>, String> {
    let v: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    match v {
        Ok(v) if !v.is_empty() && v.iter().all(|&n| n >= 3) && v.windows(2).all(|w| w[0] < w[1]) => Ok(List(v)),
        _ => Err(format!("expected ascending sample sizes of at least 3, got {s:?}")),
    }
}

fn parse_seeds(s: &str) -> Result<List<u64>, String> {
    let bad = || format!("expected seeds like 0,1,2 or 0-9, got {s:?}");
    if let Some((a, b)) = s.split_once('-') {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(List((a..=b).collect()));
    }
    s.split(',').map(|t| t.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<_, _>>().map(List)
}

fn parse_wstar(s: &str) -> Result<WStar, String> {
    match s {
        "ones" => Ok(WStar::Ones),
        "uniform" => Ok(WStar::UniformPm1),
        _ => parse_floats(s).map(WStar::Explicit).map_err(|_| format!("expected ones, uniform or a list, got {s:?}")),
    }
}

fn parse_xdist(s: &str) -> Result<XDist, String> {
    match s {
        "normal" => Ok(XDist::StandardNormal),
        "normalized" => Ok(XDist::NormalizedStandardNormal),
        _ => {
            let bad = || format!("expected uniform:LO,HI, normal or normalized, got {s:?}");
            let body = s.strip_prefix("uniform:").ok_or_else(bad)?;
            match parse_floats(body)?.as_slice() {
                &[lo, hi] if lo < hi => Ok(XDist::UniformBox { lo, hi }),
                _ => Err(bad()),
            }
        }
    }
}

fn parse_zeta(s: &str) -> Result<ZetaChoice, String> {
    if s == "auto" {
        Ok(ZetaChoice::Auto)
    } else {
        positive_f64(s).map(ZetaChoice::Fixed)
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn io(context: &str, e: impl std::fmt::Display) -> Self {
        Self { code: 1, message: format!("{context}: {e}") }
    }

    fn lib(e: Error) -> Self {
        let code = if e.is_sampling_budget() {
            4
        } else if e.is_inference_precondition() {
            5
        } else if e.is_data_degeneracy() {
            3
        } else if matches!(e, Error::InvalidConfig(_) | Error::InvalidSurvivalBound(_)) {
            2
        } else {
            3
        };
        Self { code, message: format!("{}: {e}", stage(&e)) }
    }
}

fn stage(e: &Error) -> &'static str {
    match e {
        Error::FitAborted { .. } => "PSGD",
        Error::SingularDesign | Error::DegenerateVariance(_) | Error::TooFewSamples { .. } => "initialization",
        Error::InferencePrecondition { .. } | Error::SingularSigma { .. } | Error::NotPositiveDefinite { .. } => {
            "inference"
        }
        Error::WorldBudgetExceeded { .. } => "generation",
        Error::InvalidConfig(_) | Error::InvalidSurvivalBound(_) => "configuration",
        _ => "fit",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j as usize).build_global() {
            eprintln!("error: configuration: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Confidence(a) => cmd_confidence(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == 5 {
                eprintln!("hint: pass a smaller --zeta so that the Hessian minus zeta/2 stays positive definite");
            }
            ExitCode::from(f.code)
        }
    }
}

#[derive(Serialize)]
struct Truth<'a> {
    w: &'a [f64],
    sigma2: f64,
}

fn cmd_generate(a: GenerateArgs) -> Result<(), Failure> {
    let cfg = GenConfig {
        k: a.k as usize,
        n_observed: a.n as usize,
        w_star: a.wstar,
        sigma_star_sq: a.sigma2,
        x_dist: a.xdist,
        set: a.set,
        seed: a.seed,
        max_world_draws: a.max_world_draws,
    };
    let data = generate(&cfg).map_err(Failure::lib)?;
    io::write_output(a.out.as_deref(), &io::dataset_to_csv(&data.dataset)).map_err(|e| Failure::io("writing data", e))?;
    if let Some(p) = a.truth_out.as_deref() {
        let t = Truth { w: &data.truth.w, sigma2: data.truth.sigma_sq };
        io::write_output(Some(p), &io::to_json(&t)).map_err(|e| Failure::io("writing truth", e))?;
    }
    eprintln!("acceptance rate: {} ({} of {} draws kept)", data.acceptance_rate, data.dataset.len(), data.world_draws);
    Ok(())
}

fn build_schedule(s: &ScheduleArgs, default: Schedule) -> Result<Schedule, Failure> {
    let kind = match s.schedule {
        Some(k) => k,
        None => match default {
            Schedule::SqrtDecay { .. } => ScheduleKind::Sqrt,
            Schedule::StronglyConvex { .. } => ScheduleKind::Strong,
            Schedule::StepDecay { .. } => ScheduleKind::Step,
        },
    };
    let stray = |flag: &str| Failure::usage(format!("{flag} does not apply to the chosen schedule"));
    match kind {
        ScheduleKind::Sqrt => {
            if s.lr0.is_some() || s.factor.is_some() || s.every.is_some() {
                return Err(stray("--lr0/--factor/--every"));
            }
            let c = match (s.c, default) {
                (Some(c), _) => c,
                (None, Schedule::SqrtDecay { c }) => c,
                (None, _) => 0.1,
            };
            Ok(Schedule::SqrtDecay { c })
        }
        ScheduleKind::Strong => {
            if s.c.is_some() || s.lr0.is_some() || s.factor.is_some() || s.every.is_some() {
                return Err(stray("--c/--lr0/--factor/--every"));
            }
            Ok(Schedule::StronglyConvex { zeta: s.strong.zeta, offset: s.strong.offset })
        }
        ScheduleKind::Step => {
            if s.c.is_some() {
                return Err(stray("--c"));
            }
            let (lr0, factor, every) = match default {
                Schedule::StepDecay { lr0, factor, every } => (lr0, factor, every),
                _ => (0.1, 0.9, 100),
            };
            Ok(Schedule::StepDecay {
                lr0: s.lr0.unwrap_or(lr0),
                factor: s.factor.unwrap_or(factor),
                every: s.every.map_or(every, |e| e as usize),
            })
        }
    }
}

fn fit_config(c: &CommonFit, schedule: Schedule, default_steps: usize) -> FitConfig {
    FitConfig {
        schedule,
        steps: c.steps.map_or(default_steps, |s| s as usize),
        batch: c.batch as usize,
        max_attempts: c.max_attempts as usize,
        survival_bound_a: c.a,
        beta: c.beta,
        seed: c.seed,
        early_stop: c
            .check_every
            .zip(c.grad_tol)
            .map(|(every, tol)| EarlyStop { check_every: every as usize, grad_norm_tol: tol }),
        record_trajectory: false,
    }
}

fn load(c: &CommonFit) -> Result<Dataset, Failure> {
    io::read_dataset(&c.data).map_err(|e| match e {
        io::CsvError::Io(e) => Failure::io(&format!("reading {}", c.data.display()), e),
        io::CsvError::Format(m) => Failure { code: 3, message: format!("loading data: {m}") },
    })
}

fn run_fit(c: &CommonFit, data: &Dataset, cfg: &FitConfig) -> Result<FitResult, Failure> {
    match c.boost {
        Some(runs) => boost(data, &c.set, cfg, runs as usize, c.eps),
        None => fit(data, &c.set, cfg),
    }
    .map_err(Failure::lib)
}

#[derive(Serialize)]
struct DomainJson {
    lambda_min: f64,
    lambda_max: f64,
    beta: f64,
}

#[derive(Serialize)]
struct DiagnosticsJson {
    final_grad_norm: f64,
    projections_applied: usize,
    rejection_draws_total: usize,
    steps_run: usize,
    early_stopped: bool,
    no_majority: bool,
}

#[derive(Serialize)]
struct ConfigEcho {
    data: String,
    set: String,
    schedule: String,
    steps: usize,
    batch: usize,
    max_attempts: usize,
    a: f64,
    beta: f64,
    seed: u64,
    boost: Option<u64>,
    eps: Option<f64>,
    check_every: Option<usize>,
    grad_tol: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    w: Vec<f64>,
    sigma2: f64,
    zeta: Option<f64>,
    domain: DomainJson,
    diagnostics: DiagnosticsJson,
    config_echo: ConfigEcho,
}

fn schedule_text(s: &Schedule) -> String {
    match *s {
        Schedule::SqrtDecay { c } => format!("sqrt(c={c})"),
        Schedule::StronglyConvex { zeta: ZetaChoice::Auto, offset } => format!("strong(zeta=auto,offset={offset})"),
        Schedule::StronglyConvex { zeta: ZetaChoice::Fixed(z), offset } => format!("strong(zeta={z},offset={offset})"),
        Schedule::StepDecay { lr0, factor, every } => format!("step(lr0={lr0},factor={factor},every={every})"),
    }
}

fn report(c: &CommonFit, cfg: &FitConfig, r: &FitResult) -> FitReport {
    let d = &r.diagnostics;
    FitReport {
        w: r.params.w.clone(),
        sigma2: r.params.sigma_sq,
        zeta: r.zeta_used,
        domain: DomainJson { lambda_min: r.domain.lambda_min, lambda_max: r.domain.lambda_max, beta: r.domain.beta },
        diagnostics: DiagnosticsJson {
            final_grad_norm: d.final_grad_norm,
            projections_applied: d.projections_applied,
            rejection_draws_total: d.rejection_draws_total,
            steps_run: d.steps_run,
            early_stopped: d.early_stopped,
            no_majority: d.no_majority,
        },
        config_echo: ConfigEcho {
            data: c.data.display().to_string(),
            set: c.set.to_string(),
            schedule: schedule_text(&cfg.schedule),
            steps: cfg.steps,
            batch: cfg.batch,
            max_attempts: cfg.max_attempts,
            a: cfg.survival_bound_a,
            beta: cfg.beta,
            seed: cfg.seed,
            boost: c.boost,
            eps: c.boost.map(|_| c.eps),
            check_every: cfg.early_stop.map(|e| e.check_every),
            grad_tol: cfg.early_stop.map(|e| e.grad_norm_tol),
        },
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let schedule = build_schedule(&a.schedule, Schedule::default())?;
    let data = load(&a.common)?;
    let cfg = fit_config(&a.common, schedule, FitConfig::default().steps);
    let r = run_fit(&a.common, &data, &cfg)?;
    let out = io::to_json(&report(&a.common, &cfg, &r));
    io::write_output(a.common.out.as_deref(), &out).map_err(|e| Failure::io("writing report", e))
}

#[derive(Serialize)]
struct Center {
    w: Vec<f64>,
    sigma2: f64,
}

#[derive(Serialize)]
struct TestJson {
    point: Vec<f64>,
    contains: bool,
    quadratic_form: f64,
}

#[derive(Serialize)]
struct RegionReport {
    center: Center,
    /// Rows of M in `(θ - center)ᵀ M (θ - center) ≤ radius`, θ = (w, σ²).
    shape: Vec<Vec<f64>>,
    radius: f64,
    alpha: f64,
    zeta: f64,
    /// Effective step count: steps run plus the schedule offset.
    n: usize,
    steps_run: usize,
    /// Asymptotic covariance of `√n((ŵ, σ̂²) - (w*, σ*²))`.
    covariance: Vec<Vec<f64>>,
    test: Option<TestJson>,
    fit: FitReport,
}

fn rows(m: &truncreg::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn cmd_confidence(a: ConfidenceArgs) -> Result<(), Failure> {
    let schedule = Schedule::StronglyConvex { zeta: a.strong.zeta, offset: a.strong.offset };
    let data = load(&a.common)?;
    // One pass over the PSGD part unless told otherwise: every step then
    // sees a fresh sample, as the asymptotic covariance assumes.
    let one_pass = split_three(&data).map_err(Failure::lib)?.2.len();
    let cfg = fit_config(&a.common, schedule, one_pass);
    let r = run_fit(&a.common, &data, &cfg)?;
    let options = InferenceOptions { include_sampling_noise: !a.gamma_only, ..InferenceOptions::default() };
    let cov = asymptotic_covariance(&r, &r.psgd_data, &a.common.set, cfg.batch, options).map_err(Failure::lib)?;
    let n = r.effective_steps();
    let region = confidence_region(&cov, n, a.alpha).map_err(Failure::lib)?;

    let test = match a.test {
        None => None,
        Some(List(point)) => {
            let k = r.params.dim();
            if point.len() != k + 1 {
                return Err(Failure::usage(format!("--test needs {} values (w1..w{k}, sigma2), got {}", k + 1, point.len())));
            }
            if point[k] <= 0.0 {
                return Err(Failure::usage("--test sigma2 must be positive"));
            }
            let candidate = ModelParams::from_slice(&point).map_err(Failure::lib)?;
            let q = region.quadratic_form(&candidate).map_err(Failure::lib)?;
            let contains = q <= region.radius;
            eprintln!("contains: {contains}");
            Some(TestJson { point, contains, quadratic_form: q })
        }
    };
    let out = RegionReport {
        center: Center { w: region.center.w.clone(), sigma2: region.center.sigma_sq },
        shape: rows(&region.shape),
        radius: region.radius,
        alpha: region.alpha,
        zeta: region.zeta,
        n,
        steps_run: r.diagnostics.steps_run,
        covariance: rows(&cov.s_matrix),
        test,
        fit: report(&a.common, &cfg, &r),
    };
    io::write_output(a.common.out.as_deref(), &io::to_json(&out)).map_err(|e| Failure::io("writing region", e))
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let (default_cfg, header): (FitConfig, &[&str]) = match a.which {
        Which::Fig1 => (bias_fit_config(), &["sigma2_true", "method", "w_err", "sigma2_err", "seed", "failed"]),
        Which::Fig2 => (rate_fit_config(), &["n", "median_total_err", "successes", "failed"]),
    };
    let schedule = build_schedule(&a.schedule, default_cfg.schedule)?;
    let cfg = FitConfig {
        schedule,
        steps: a.steps.map_or(default_cfg.steps, |s| s as usize),
        batch: a.batch.map_or(default_cfg.batch, |b| b as usize),
        ..default_cfg
    };
    let table: Vec<Vec<String>> = match a.which {
        Which::Fig1 => {
            let base = GenConfig::bias_setting(a.n as usize, 1.0, 0);
            let baseline = match a.baseline {
                BaselineKind::Intercept => OlsBaseline::WithIntercept,
                BaselineKind::NoIntercept => OlsBaseline::NoIntercept,
            };
            experiment_fig1_with(&a.seeds.0, &a.sigma_grid.0, &base, &cfg, baseline)
                .map_err(Failure::lib)?
                .into_iter()
                .map(|r| {
                    vec![
                        r.sigma_star_sq.to_string(),
                        r.method.as_str().to_string(),
                        fmt_num(r.w_error),
                        fmt_num(r.sigma_error),
                        r.seed.to_string(),
                        r.failed.unwrap_or_default(),
                    ]
                })
                .collect()
        }
        Which::Fig2 => {
            let base = GenConfig::rate_setting(*a.n_grid.0.last().expect("non-empty grid"), a.pool_seed);
            experiment_fig2(&a.n_grid.0, &base, &cfg, &a.seeds.0)
                .map_err(Failure::lib)?
                .into_iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        fmt_num(r.median_total_error),
                        r.errors.len().to_string(),
                        r.failures.to_string(),
                    ]
                })
                .collect()
        }
    };
    io::write_output(a.out.as_deref(), &io::table_to_csv(header, &table)).map_err(|e| Failure::io("writing table", e))
}
