//! The `voa` command line. Scalar results are printed as one JSON object,
//! vector results as CSV with a header row.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analytics::{self, OverlapTable};
use crate::error::VoaError;
use crate::model::{self, ModelParams, Variant};
use crate::optimizer;
use crate::simulator::{self, AbscissaKind, AccessSchedule, SimConfig, SweepSource};
use crate::trace_io::{self, ImpressionLog};

#[derive(Debug, Parser)]
#[command(name = "voa", version, about = "Value of access for social-network timelines")]
pub struct Command {
    #[command(subcommand)]
    pub action: Action,
    /// Write the result to this file instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output encoding; each subcommand has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum Action {
    /// Evaluate the expected novel impressions per access.
    Eval(EvalArgs),
    /// Model curve over a parameter grid, optionally paired with simulation.
    Sweep(SweepArgs),
    /// Utility-maximizing access rate.
    Optimize(OptimizeArgs),
    /// Monte Carlo or trace-driven estimate at one operating point.
    Simulate(SimulateArgs),
    /// VoA per recorded snapshot.
    SnapshotVoa(SnapshotVoaArgs),
    /// Contingency tables of posts seen by pairs of users.
    Overlap(OverlapArgs),
    /// ECDF of the number of users that saw each post.
    Ecdf(EcdfArgs),
    /// Size, span, rate and daily volume of a post trace.
    TraceInfo(TraceInfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Fixed,
    Average,
    Poisson,
    Deterministic,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Fixed => Variant::FixedK,
            VariantArg::Average => Variant::AverageK,
            VariantArg::Poisson => Variant::PoissonK,
            VariantArg::Deterministic => Variant::DeterministicTau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    RandomReference,
    Exponential,
    Deterministic,
}

impl From<ScheduleArg> for AccessSchedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::RandomReference => AccessSchedule::RandomReference,
            ScheduleArg::Exponential => AccessSchedule::ExponentialClock,
            ScheduleArg::Deterministic => AccessSchedule::DeterministicClock,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    InverseMu,
    K,
    Mu,
    Rho,
    Lambda,
}

impl From<SweepAxis> for AbscissaKind {
    fn from(a: SweepAxis) -> Self {
        match a {
            SweepAxis::InverseMu => AbscissaKind::InverseMu,
            SweepAxis::K => AbscissaKind::K,
            SweepAxis::Mu => AbscissaKind::Mu,
            SweepAxis::Rho => AbscissaKind::Rho,
            SweepAxis::Lambda => AbscissaKind::Lambda,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizeAxis {
    K,
    Cost,
    Lambda,
}

/// `start:stop:step` (inclusive of `stop`) or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

/// Digits after the decimal point, or `None` for exponent notation.
fn fraction_digits(t: &str) -> Option<usize> {
    if t.contains(['e', 'E']) {
        return None;
    }
    Some(t.split_once('.').map_or(0, |(_, f)| f.len()))
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let number = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if step.is_nan() || step <= 0.0 || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err("range needs start <= stop and step > 0".into());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return Err("range has more than 1e6 points".into());
            }
            // snap to the decimals written in the bounds so 0.1 steps print as 0.3, not 0.30000000000000004
            let decimals = [parts[0], parts[2]]
                .iter()
                .map(|t| fraction_digits(t.trim()))
                .try_fold(0, |acc, d| d.map(|d| acc.max(d)));
            (0..count)
                .map(|i| {
                    let x = start + i as f64 * step;
                    match decimals {
                        Some(d) if d <= 15 => {
                            let scale = 10f64.powi(d as i32);
                            (x * scale).round() / scale
                        }
                        _ => x,
                    }
                })
                .collect()
        }
        [list] => list.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
        _ => return Err("expected start:stop:step or a comma-separated list".into()),
    };
    Ok(Grid(values))
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    /// Timeline capacity (fixed and deterministic variants).
    #[arg(long)]
    pub k: Option<f64>,
    /// Mean timeline size (average and poisson variants).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "fixed")]
    pub variant: VariantArg,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    #[arg(long, required_unless_present = "posts")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Adds a utility column (model-only sweeps).
    #[arg(long)]
    pub cost: Option<f64>,
    #[arg(long, value_enum)]
    pub over: SweepAxis,
    #[arg(long, value_parser = parse_grid)]
    pub range: Grid,
    #[arg(long, value_enum, default_value = "fixed")]
    pub variant: VariantArg,
    /// Simulate every point with this many rounds.
    #[arg(long, requires = "seed")]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accesses per round for synthetic simulation.
    #[arg(long, default_value_t = 10_000)]
    pub accesses: usize,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    /// Post trace for trace-driven simulation.
    #[arg(long, requires = "rounds")]
    pub posts: Option<PathBuf>,
    /// Simulated period; defaults to the trace span.
    #[arg(long)]
    pub period_hours: Option<f64>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub cost: Option<f64>,
    /// Also run the golden-section search on [0, SEARCH_UPPER].
    #[arg(long)]
    pub search_upper: Option<f64>,
    #[arg(long, value_enum, requires = "range")]
    pub over: Option<OptimizeAxis>,
    #[arg(long, value_parser = parse_grid, requires = "over")]
    pub range: Option<Grid>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10_000)]
    pub accesses: usize,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleArg>,
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub interval_hours: Option<f64>,
    #[arg(long)]
    pub period_hours: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SnapshotVoaArgs {
    #[arg(long)]
    pub impressions: PathBuf,
    #[arg(long)]
    pub truncate_k: Option<usize>,
    /// Re-sort each snapshot newest-first before counting.
    #[arg(long)]
    pub fifo_reorder: bool,
    #[arg(long)]
    pub user: Option<String>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub impressions: PathBuf,
    #[arg(long, requires = "y")]
    pub x: Option<String>,
    #[arg(long, requires = "x")]
    pub y: Option<String>,
    #[arg(long)]
    pub truncate_k: Option<usize>,
    /// File with one post id per line; defaults to every post seen by any user.
    #[arg(long)]
    pub universe: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EcdfArgs {
    #[arg(long)]
    pub impressions: PathBuf,
    /// Comma-separated subset of users.
    #[arg(long, value_delimiter = ',')]
    pub users: Option<Vec<String>>,
    #[arg(long)]
    pub truncate_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceInfoArgs {
    #[arg(long)]
    pub posts: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(VoaError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Run(e) => e.exit_code(),
        }
    }

    /// Writes the diagnostic to standard error.
    pub fn report(&self) {
        match self {
            CliError::Usage(e) => {
                let _ = e.print();
            }
            CliError::Run(e) => eprintln!("error: {e}"),
        }
    }
}

impl From<VoaError> for CliError {
    fn from(e: VoaError) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(VoaError::Io(e))
    }
}

fn usage(kind: ErrorKind, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(Command::command().error(kind, msg))
}

pub fn parse_args<I, T>(argv: I) -> Result<Command, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Command::try_parse_from(argv)
}

/// Parses `argv` and executes it, writing to `--out` or to `stdout`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let command = match parse_args(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            write!(stdout, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e)),
    };
    let mut buffer = Vec::new();
    execute(&command, &mut buffer)?;
    match &command.out {
        Some(path) => std::fs::write(path, &buffer)?,
        None => stdout.write_all(&buffer)?,
    }
    Ok(())
}

fn emit_json(out: &mut dyn Write, value: &Value) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    let format = command.format;
    let only = match &command.action {
        Action::Eval(_) | Action::Simulate(_) => Some(OutputFormat::Json),
        Action::Sweep(_) | Action::Ecdf(_) => Some(OutputFormat::Csv),
        _ => None,
    };
    if let (Some(only), Some(asked)) = (only, format) {
        if only != asked {
            return Err(usage(
                ErrorKind::InvalidValue,
                format!(
                    "this subcommand only writes {}",
                    if only == OutputFormat::Json { "json" } else { "csv" }
                ),
            ));
        }
    }
    match &command.action {
        Action::Eval(a) => eval(a, out),
        Action::Sweep(a) => sweep(a, out),
        Action::Optimize(a) => optimize(a, format, out),
        Action::Simulate(a) => simulate(a, out),
        Action::SnapshotVoa(a) => snapshot_voa(a, format, out),
        Action::Overlap(a) => overlap(a, format, out),
        Action::Ecdf(a) => ecdf(a, out),
        Action::TraceInfo(a) => trace_info(a, format, out),
    }
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let size = match a.variant {
        VariantArg::Fixed | VariantArg::Deterministic => {
            if a.alpha.is_some() {
                return Err(usage(
                    ErrorKind::ArgumentConflict,
                    "--alpha applies to the average and poisson variants; use --k",
                ));
            }
            a.k.ok_or_else(|| usage(ErrorKind::MissingRequiredArgument, "--k is required for this variant"))?
        }
        VariantArg::Average | VariantArg::Poisson => {
            if a.k.is_some() {
                return Err(usage(
                    ErrorKind::ArgumentConflict,
                    "--k applies to the fixed and deterministic variants; use --alpha",
                ));
            }
            a.alpha.ok_or_else(|| {
                usage(
                    ErrorKind::MissingRequiredArgument,
                    "--alpha is required for this variant",
                )
            })?
        }
    };
    let params = ModelParams::new(a.lambda, a.mu, size, 0.0)?;
    let est = model::evaluate(a.variant.into(), &params)?;
    emit_json(
        out,
        &json!({
            "voa": est.mean,
            "variant": est.variant,
            "fill_probability": est.fill_probability,
            "lambda": a.lambda,
            "mu": a.mu,
            "k": size,
            "rho": params.rho(),
        }),
    )
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let axis = a.over;
    let values = &a.range.0;
    // Parameters on the swept axis are overwritten per point; the others must
    // be given.
    let fixed = |flag: &str, value: Option<f64>, swept_by: &[SweepAxis]| -> Result<f64, CliError> {
        match value {
            Some(v) => Ok(v),
            None if swept_by.contains(&axis) => Ok(1.0),
            None => Err(usage(
                ErrorKind::MissingRequiredArgument,
                format!(
                    "--{flag} is required when sweeping over {}",
                    AbscissaKind::from(axis).column_name()
                ),
            )),
        }
    };
    const MU_AXES: [SweepAxis; 3] = [SweepAxis::Mu, SweepAxis::InverseMu, SweepAxis::Rho];
    let k = fixed("k", a.k, &[SweepAxis::K])?;

    let Some(rounds) = a.rounds else {
        let params = ModelParams {
            lambda: fixed("lambda", a.lambda, &[SweepAxis::Lambda])?,
            mu: fixed("mu", a.mu, &MU_AXES)?,
            k,
            cost: a.cost.unwrap_or(0.0),
        };
        return model_sweep(axis, values, params, a.variant.into(), a.cost.is_some(), out);
    };
    if a.variant != VariantArg::Fixed {
        return Err(usage(
            ErrorKind::ArgumentConflict,
            "simulated sweeps compare against the fixed model; drop --variant",
        ));
    }
    if k.fract() != 0.0 || k < 1.0 {
        return Err(VoaError::domain(format!("k must be a positive integer, got {k}")).into());
    }
    let seed = a.seed.expect("clap enforces --seed with --rounds");
    let curve = match &a.posts {
        Some(path) => {
            let posts = trace_io::read_posts_file(path)?;
            let meta = trace_io::trace_meta(&posts)?;
            let config = SimConfig {
                k: k as usize,
                sample_interval_hours: 1.0 / fixed("mu", a.mu, &MU_AXES)?,
                period_hours: a.period_hours.unwrap_or(meta.time_span_hours),
                rounds,
                seed,
                access_schedule: a.schedule.map_or(AccessSchedule::RandomReference, Into::into),
            };
            let lambda = a.lambda.unwrap_or(meta.estimated_lambda);
            simulator::sweep(
                &SweepSource::Trace {
                    posts: &posts,
                    config,
                    lambda,
                },
                axis.into(),
                values,
            )?
        }
        None => {
            let source = SweepSource::Synthetic {
                params: ModelParams {
                    lambda: fixed("lambda", a.lambda, &[SweepAxis::Lambda])?,
                    mu: fixed("mu", a.mu, &MU_AXES)?,
                    k,
                    cost: 0.0,
                },
                accesses_per_round: a.accesses,
                rounds,
                seed,
                schedule: a.schedule.map_or(AccessSchedule::ExponentialClock, Into::into),
            };
            simulator::sweep(&source, axis.into(), values)?
        }
    };
    trace_io::write_curve_csv(out, &curve)?;
    Ok(())
}

fn model_sweep(
    axis: SweepAxis,
    values: &[f64],
    base: ModelParams,
    variant: Variant,
    with_utility: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let kind: AbscissaKind = axis.into();
    let mut header = vec![kind.column_name(), "lambda", "mu", "k", "model_voa"];
    if with_utility {
        header.push("utility");
    }
    let mut rows = Vec::with_capacity(values.len());
    for &x in values {
        let mut p = base;
        match axis {
            SweepAxis::InverseMu => p.mu = 1.0 / x,
            SweepAxis::Mu => p.mu = x,
            SweepAxis::Rho => p.mu = p.lambda / x,
            SweepAxis::K => p.k = x,
            SweepAxis::Lambda => p.lambda = x,
        }
        let voa = model::evaluate(variant, &p)?.mean;
        let mut row = vec![
            x.to_string(),
            p.lambda.to_string(),
            p.mu.to_string(),
            p.k.to_string(),
            voa.to_string(),
        ];
        if with_utility {
            row.push(optimizer::utility(&p)?.to_string());
        }
        rows.push(row);
    }
    trace_io::write_table(out, &header, rows)?;
    Ok(())
}

fn optimize(a: &OptimizeArgs, format: Option<OutputFormat>, out: &mut dyn Write) -> Result<(), CliError> {
    let missing = |flag: &str| usage(ErrorKind::MissingRequiredArgument, format!("--{flag} is required"));
    let axis = a.over;
    let lambda = match (a.lambda, axis) {
        (_, Some(OptimizeAxis::Lambda)) => f64::NAN,
        (Some(l), _) => l,
        (None, _) => return Err(missing("lambda")),
    };
    let k = match (a.k, axis) {
        (_, Some(OptimizeAxis::K)) => 0,
        (Some(k), _) => k,
        (None, _) => return Err(missing("k")),
    };
    let cost = match (a.cost, axis) {
        (_, Some(OptimizeAxis::Cost)) => f64::NAN,
        (Some(c), _) => c,
        (None, _) => return Err(missing("cost")),
    };

    let Some(axis) = axis else {
        let r = optimizer::optimal_access_rate(lambda, k, cost)?;
        let mut obj = json!({
            "lambda": lambda,
            "k": k,
            "cost": cost,
            "mu_star": r.mu_star,
            "utility_at_star": r.utility_at_star,
            "clamped": r.clamped,
        });
        if let Some(upper) = a.search_upper {
            obj["mu_star_numeric"] = json!(optimizer::optimal_access_rate_numeric(lambda, k, cost, upper)?);
        }
        if format == Some(OutputFormat::Csv) {
            return Err(usage(
                ErrorKind::ArgumentConflict,
                "a single optimum is reported as JSON; add --over/--range for CSV",
            ));
        }
        return emit_json(out, &obj);
    };

    let name = match axis {
        OptimizeAxis::K => "k",
        OptimizeAxis::Cost => "cost",
        OptimizeAxis::Lambda => "lambda",
    };
    let mut header = vec![name, "mu_star", "utility_at_star", "clamped"];
    if a.search_upper.is_some() {
        header.push("mu_star_numeric");
    }
    let mut rows = Vec::new();
    for &x in &a.range.as_ref().expect("clap enforces --range with --over").0 {
        let (l, kk, c) = match axis {
            OptimizeAxis::K => {
                if x.fract() != 0.0 || x < 1.0 || x > f64::from(u32::MAX) {
                    return Err(VoaError::domain(format!("k must be a positive integer, got {x}")).into());
                }
                (lambda, x as u32, cost)
            }
            OptimizeAxis::Cost => (lambda, k, x),
            OptimizeAxis::Lambda => (x, k, cost),
        };
        let r = optimizer::optimal_access_rate(l, kk, c)?;
        let mut row = vec![
            x.to_string(),
            r.mu_star.to_string(),
            r.utility_at_star.to_string(),
            r.clamped.to_string(),
        ];
        if let Some(upper) = a.search_upper {
            row.push(optimizer::optimal_access_rate_numeric(l, kk, c, upper)?.to_string());
        }
        rows.push(row);
    }
    trace_io::write_table(out, &header, rows)?;
    Ok(())
}

fn model_variant(schedule: AccessSchedule) -> Variant {
    if schedule == AccessSchedule::DeterministicClock {
        Variant::DeterministicTau
    } else {
        Variant::FixedK
    }
}

fn simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let missing = |flag: &str| usage(ErrorKind::MissingRequiredArgument, format!("--{flag} is required"));
    let value = match &a.posts {
        Some(path) => {
            let posts = trace_io::read_posts_file(path)?;
            let meta = trace_io::trace_meta(&posts)?;
            let interval = match (a.interval_hours, a.mu) {
                (Some(_), Some(_)) => {
                    return Err(usage(
                        ErrorKind::ArgumentConflict,
                        "give either --interval-hours or --mu",
                    ))
                }
                (Some(i), None) => i,
                (None, Some(mu)) => 1.0 / mu,
                (None, None) => return Err(missing("interval-hours")),
            };
            let config = SimConfig {
                k: a.k,
                sample_interval_hours: interval,
                period_hours: a.period_hours.unwrap_or(meta.time_span_hours),
                rounds: a.rounds,
                seed: a.seed,
                access_schedule: a.schedule.map_or(AccessSchedule::RandomReference, Into::into),
            };
            let stats = simulator::simulate_trace_fifo(&posts, &config)?;
            let lambda = a.lambda.unwrap_or(meta.estimated_lambda);
            let params = ModelParams::new(lambda, 1.0 / interval, a.k as f64, 0.0)?;
            let model_voa = model::evaluate(model_variant(config.access_schedule), &params)?.mean;
            json!({
                "mean": stats.mean,
                "std": stats.std,
                "standard_error": stats.standard_error(),
                "rounds": stats.rounds,
                "snapshots_per_round": config.snapshots_per_round(),
                "lambda": lambda,
                "model_voa": model_voa,
            })
        }
        None => {
            let lambda = a.lambda.ok_or_else(|| missing("lambda"))?;
            let mu = match (a.mu, a.interval_hours) {
                (Some(_), Some(_)) => {
                    return Err(usage(
                        ErrorKind::ArgumentConflict,
                        "give either --interval-hours or --mu",
                    ))
                }
                (Some(mu), None) => mu,
                (None, Some(i)) => 1.0 / i,
                (None, None) => return Err(missing("mu")),
            };
            let schedule: AccessSchedule = a.schedule.map_or(AccessSchedule::ExponentialClock, Into::into);
            let params = ModelParams::new(lambda, mu, a.k as f64, 0.0)?;
            let stats = simulator::simulate_synthetic(&params, a.accesses, a.rounds, a.seed, schedule)?;
            json!({
                "mean": stats.mean,
                "std": stats.std,
                "standard_error": stats.standard_error(),
                "rounds": stats.rounds,
                "model_voa": model::evaluate(model_variant(schedule), &params)?.mean,
            })
        }
    };
    emit_json(out, &value)
}

fn load_log(path: &Path, fifo: bool) -> Result<ImpressionLog, CliError> {
    let mut log = trace_io::read_impressions_file(path)?;
    if fifo {
        log.snapshots = log.snapshots.iter().map(analytics::reorder_fifo).collect();
    }
    Ok(log)
}

fn snapshot_voa(a: &SnapshotVoaArgs, format: Option<OutputFormat>, out: &mut dyn Write) -> Result<(), CliError> {
    let log = load_log(&a.impressions, a.fifo_reorder)?;
    let users: Vec<&str> = match &a.user {
        Some(u) if log.snapshots_for(u).is_empty() => {
            return Err(VoaError::invalid(format!("user `{u}` has no snapshots")).into())
        }
        Some(u) => vec![u.as_str()],
        None => log.users(),
    };
    let mut results = Vec::with_capacity(users.len());
    for user in users {
        let snapshots = log.snapshots_for(user);
        results.push((user, snapshots, analytics::voa_from_snapshots(snapshots, a.truncate_k)?));
    }
    if format == Some(OutputFormat::Json) {
        let users: Vec<Value> = results
            .iter()
            .map(|(user, snaps, r)| {
                json!({
                    "user": user,
                    "snapshots": snaps.len(),
                    "mean_voa": r.mean,
                    "total_voa": r.per_snapshot.iter().sum::<usize>(),
                })
            })
            .collect();
        return emit_json(
            out,
            &json!({ "users": users, "duplicates_removed": log.duplicates_removed }),
        );
    }
    let rows = results.iter().flat_map(|(user, snaps, r)| {
        snaps.iter().zip(&r.per_snapshot).enumerate().map(move |(i, (s, voa))| {
            vec![
                user.to_string(),
                (i + 1).to_string(),
                trace_io::format_timestamp(&s.taken_at),
                s.post_ids(a.truncate_k).count().to_string(),
                voa.to_string(),
            ]
        })
    });
    trace_io::write_table(out, &["user", "snapshot", "taken_at", "impressions", "voa"], rows)?;
    Ok(())
}

fn read_universe(path: &Path) -> Result<HashSet<String>, CliError> {
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

fn overlap_row(x: &str, y: &str, t: &OverlapTable) -> Vec<String> {
    let fmt = |r: crate::Result<f64>| r.map_or_else(|_| String::new(), |v| v.to_string());
    vec![
        x.to_string(),
        y.to_string(),
        t.both.to_string(),
        t.only_x.to_string(),
        t.only_y.to_string(),
        t.neither.to_string(),
        t.universe_size.to_string(),
        fmt(analytics::coverage_fraction(t)),
        fmt(analytics::coverage_fraction(&t.transpose())),
        fmt(analytics::pairwise_overlap_of(t)),
    ]
}

fn overlap(a: &OverlapArgs, format: Option<OutputFormat>, out: &mut dyn Write) -> Result<(), CliError> {
    let log = load_log(&a.impressions, false)?;
    let users = log.users();
    let seen: Vec<HashSet<String>> = users.iter().map(|u| log.posts_seen_by(u, a.truncate_k)).collect();
    let universe = match &a.universe {
        Some(path) => read_universe(path)?,
        None => seen.iter().flatten().cloned().collect(),
    };
    let lookup = |name: &str| {
        users
            .iter()
            .position(|u| *u == name)
            .ok_or_else(|| CliError::Run(VoaError::invalid(format!("user `{name}` not in the log"))))
    };
    if let (Some(x), Some(y)) = (&a.x, &a.y) {
        let (ix, iy) = (lookup(x)?, lookup(y)?);
        let t = analytics::overlap_table(&seen[ix], &seen[iy], &universe)?;
        if format == Some(OutputFormat::Csv) {
            trace_io::write_table(out, &OVERLAP_HEADER, [overlap_row(x, y, &t)])?;
            return Ok(());
        }
        return emit_json(
            out,
            &json!({
                "x": x,
                "y": y,
                "table": t,
                "coverage_x_over_y": analytics::coverage_fraction(&t).ok(),
                "coverage_y_over_x": analytics::coverage_fraction(&t.transpose()).ok(),
                "pairwise_overlap": analytics::pairwise_overlap_of(&t)?,
            }),
        );
    }
    let mut rows = Vec::new();
    for i in 0..users.len() {
        for j in i + 1..users.len() {
            let t = analytics::overlap_table(&seen[i], &seen[j], &universe)?;
            rows.push(overlap_row(users[i], users[j], &t));
        }
    }
    trace_io::write_table(out, &OVERLAP_HEADER, rows)?;
    Ok(())
}

const OVERLAP_HEADER: [&str; 10] = [
    "x",
    "y",
    "both",
    "only_x",
    "only_y",
    "neither",
    "universe_size",
    "coverage_x_over_y",
    "coverage_y_over_x",
    "pairwise_overlap",
];

fn ecdf(a: &EcdfArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let log = load_log(&a.impressions, false)?;
    let all = log.users();
    let users: Vec<&str> = match &a.users {
        Some(list) => {
            for u in list {
                if !all.contains(&u.as_str()) {
                    return Err(VoaError::invalid(format!("user `{u}` not in the log")).into());
                }
            }
            list.iter().map(String::as_str).collect()
        }
        None => all,
    };
    let sets: Vec<HashSet<String>> = users.iter().map(|u| log.posts_seen_by(u, a.truncate_k)).collect();
    trace_io::write_ecdf_csv(out, &analytics::viewer_ecdf(&sets)?)?;
    Ok(())
}

fn trace_info(a: &TraceInfoArgs, format: Option<OutputFormat>, out: &mut dyn Write) -> Result<(), CliError> {
    let posts = trace_io::read_posts_file(&a.posts)?;
    let meta = trace_io::trace_meta(&posts)?;
    if format == Some(OutputFormat::Csv) {
        trace_io::write_daily_counts_csv(out, &meta)?;
        return Ok(());
    }
    emit_json(out, &serde_json::to_value(&meta).map_err(std::io::Error::from)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_invocations() {
        let c = parse_args([
            "voa",
            "eval",
            "--lambda",
            "4.487",
            "--mu",
            "1",
            "--k",
            "10",
            "--variant",
            "fixed",
        ])
        .unwrap();
        assert!(matches!(
            c.action,
            Action::Eval(EvalArgs {
                variant: VariantArg::Fixed,
                ..
            })
        ));
        let c = parse_args(["voa", "optimize", "--lambda", "4.487", "--k", "2", "--cost", "1"]).unwrap();
        assert!(matches!(c.action, Action::Optimize(OptimizeArgs { k: Some(2), .. })));
        let e = parse_args(["voa", "sweep", "--k", "10", "--over", "inverse-mu", "--range", "1:24:1"]).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::MissingRequiredArgument);
        assert!(e.to_string().contains("--lambda"));
        let e = parse_args(["voa", "eval", "--lambda", "1", "--mu", "1", "--bogus"]).unwrap_err();
        assert_eq!(e.kind(), ErrorKind::UnknownArgument);
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("1:4:1").unwrap().0, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_grid("0.1:0.3:0.1").unwrap().0, [0.1, 0.2, 0.3]);
        assert_eq!(parse_grid("0.1:3:0.1").unwrap().0[29], 3.0);
        assert_eq!(parse_grid("1e-3:3e-3:1e-3").unwrap().0.len(), 3);
        assert!(parse_grid("1e-3:3e-3:1e-3").unwrap().0[0] > 0.0);
        assert_eq!(parse_grid("2,5,10").unwrap().0, [2.0, 5.0, 10.0]);
        assert!(parse_grid("3:1:1").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn conflicting_variant_flags_are_usage_errors() {
        let mut out = Vec::new();
        let err = run(
            [
                "voa",
                "eval",
                "--lambda",
                "1",
                "--mu",
                "1",
                "--k",
                "3",
                "--variant",
                "poisson",
            ],
            &mut out,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert_eq!(err.exit_code(), 2);
    }
}
