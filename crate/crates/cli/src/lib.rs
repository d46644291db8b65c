//! Command-line front end for `odl-core`.
//!
//! Every subcommand renders its report into a string so the binary only
//! decides where the bytes go. Exit codes report whether the command ran, not
//! the outcome of a test.

pub mod input;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use odl_core::calibration::CalibrationTable;
use odl_core::dmn::{self, DmnParams, NoiseState};
use odl_core::lifedist::{self, Family, LifeDistribution};
use odl_core::mc::{self, PowerConfig};
use odl_core::ustat::{self, Sample, TestMode, TestResult};
use serde::Serialize;
use thiserror::Error;

use crate::input::{parse_sample, sample_to_tsv, ParseError};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "ODL_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Core(#[from] odl_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for bad input or arguments, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Usage(_) => 2,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                odl_core::Error::QuadratureNonConvergence { .. } => 1,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    NormalApprox,
    Calibrated,
}

impl From<ModeArg> for TestMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::NormalApprox => TestMode::NormalApprox,
            ModeArg::Calibrated => TestMode::Calibrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureArg {
    Leukemia,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateArg {
    Plus,
    Minus,
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let a: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    ustat::check_alpha(a).map_err(|e| e.to_string())?;
    Ok(a)
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
}

fn parse_workers(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k > 0 => Ok(k),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "odl",
    version,
    about = "Exponentiality test against overall-decreasing-life alternatives, power studies and aging-noise simulation",
    after_help = "Worker count defaults to the number of cores; set ODL_WORKERS or --workers to override.\n\
                  Exit status: 0 when the command ran (whatever the test decision), 2 on invalid input, 1 on numerical failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CalibrationArgs {
    /// Null calibration table (TSV from `odl calibrate --format tsv`, or JSON).
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Replicates per sample size when calibrating on the fly.
    #[arg(long, default_value_t = mc::DEFAULT_REPLICATES)]
    pub calibration_replicates: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a sample for exponentiality.
    ///
    /// TSV columns: mode n delta_hat delta_cap z p_value alpha sigma0 reject.
    Test(TestArgs),
    /// Estimate rejection rates over a grid of shape parameters and sample sizes.
    ///
    /// TSV columns: family theta n rejection_rate std_error rejections replicates mode seed.
    Power(PowerArgs),
    /// Simulate the dichotomous noise and the age it drives.
    ///
    /// TSV columns: time state age, preceded by `#` summary lines.
    Simulate(SimulateArgs),
    /// Tabulate null quantiles of the statistic under the unit exponential.
    ///
    /// TSV columns: n level quantile replicates seed null_mean null_sd.
    Calibrate(CalibrateArgs),
    /// Check the overall-decreasing-life inequality on a grid.
    ///
    /// TSV columns: t lhs rhs margin.
    CheckOdl(CheckOdlArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false, args = ["fixture", "input", "values"])]
pub struct TestArgs {
    /// Bundled data set.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureArg>,
    /// File with the sample, `-` for standard input.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sample given inline, e.g. "1 2 3".
    #[arg(long)]
    pub values: Option<String>,
    /// Significance level in (0, 0.5].
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::NormalApprox)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    /// Seed for on-the-fly calibration.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, env = WORKERS_ENV, value_parser = parse_workers)]
    pub workers: Option<usize>,
    /// Also write the parsed sample as one value per line.
    #[arg(long)]
    pub dump_sample: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// weibull, lfr, gamma or exponential.
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    #[arg(long, value_delimiter = ',', required = true)]
    pub theta: Vec<f64>,
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value = "0.05", value_parser = parse_alpha)]
    pub alpha: f64,
    #[arg(long, default_value_t = mc::DEFAULT_REPLICATES)]
    pub replicates: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::NormalApprox)]
    pub mode: ModeArg,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[arg(long, env = WORKERS_ENV, value_parser = parse_workers)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub v_plus: f64,
    #[arg(long)]
    pub v_minus: f64,
    #[arg(long)]
    pub lambda_plus: f64,
    #[arg(long)]
    pub lambda_minus: f64,
    #[arg(long)]
    pub t_end: f64,
    /// Initial age.
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    /// Initial noise state.
    #[arg(long, value_enum, default_value_t = StateArg::Plus)]
    pub start: StateArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub ns: Vec<usize>,
    #[arg(long, default_value_t = mc::DEFAULT_REPLICATES)]
    pub replicates: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, env = WORKERS_ENV, value_parser = parse_workers)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckOdlArgs {
    /// exponential (theta = mean), weibull, lfr or gamma.
    #[arg(long, value_parser = parse_family)]
    pub dist: Family,
    #[arg(long)]
    pub theta: f64,
    /// Margins within this band count as equality.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Number of log-spaced grid points between 0.01 and 10 times the mean.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// A rendered report plus warnings meant for standard error.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Output {
    pub body: String,
    pub warnings: Vec<String>,
    pub out: Option<PathBuf>,
}

pub fn execute(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Power(a) => cmd_power(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::CheckOdl(a) => cmd_check_odl(a),
    }
}

/// Writes `output` to its destination and warnings to standard error.
pub fn emit(output: &Output) -> CliResult<()> {
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    match &output.out {
        Some(path) => fs::write(path, &output.body).map_err(|e| io_error(path, e)),
        None => {
            print!("{}", output.body);
            Ok(())
        }
    }
}

fn io_error(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| io_error(path, e))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| io_error(path, e))
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Loads a calibration table from TSV or JSON.
pub fn load_calibration(path: &Path) -> CliResult<CalibrationTable> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Core(odl_core::Error::MalformedCalibration(e.to_string())))
    } else {
        Ok(CalibrationTable::from_tsv(&text)?)
    }
}

#[derive(Debug, Clone, Serialize)]
struct CalibrationSource {
    origin: String,
    replicates: Vec<u64>,
    seed: Vec<u64>,
}

fn obtain_calibration(
    args: &CalibrationArgs,
    ns: &[usize],
    seed: u64,
    workers: Option<usize>,
) -> CliResult<(CalibrationTable, CalibrationSource)> {
    let (table, origin) = match &args.calibration {
        Some(path) => (load_calibration(path)?, path.display().to_string()),
        None => (
            mc::calibrate(ns, args.calibration_replicates, seed, workers)?,
            "computed".to_string(),
        ),
    };
    let source = CalibrationSource {
        origin,
        replicates: table.entries().map(|e| e.replicates).collect(),
        seed: table.entries().map(|e| e.seed).collect(),
    };
    Ok((table, source))
}

const NORMAL_MODE_WARNING: &str = "normal_approx centres the statistic at 0 with sigma0 = 1.173, \
     but its null mean is about -0.25, so the test is far from its nominal size; \
     use --mode calibrated for a size-correct decision";

#[derive(Debug, Serialize)]
struct Published {
    delta_cap: f64,
    z: f64,
}

#[derive(Debug, Serialize)]
struct TestReport {
    source: String,
    n: usize,
    alpha: f64,
    mode: TestMode,
    delta_hat: f64,
    delta_cap: f64,
    normal_approx: TestResult,
    calibrated: Option<TestResult>,
    calibration: Option<CalibrationSource>,
    published: Option<Published>,
}

impl TestReport {
    fn primary(&self) -> &TestResult {
        match self.mode {
            TestMode::NormalApprox => &self.normal_approx,
            TestMode::Calibrated => self.calibrated.as_ref().expect("calibrated result present"),
        }
    }

    fn results(&self) -> impl Iterator<Item = &TestResult> {
        std::iter::once(&self.normal_approx).chain(self.calibrated.as_ref())
    }
}

fn decision_text(r: &TestResult) -> String {
    if r.reject {
        format!("reject H0 at alpha={}", r.alpha)
    } else {
        format!("do not reject H0 at alpha={}", r.alpha)
    }
}

fn cmd_test(a: &TestArgs) -> CliResult<Output> {
    let (sample, source, published) = if a.fixture.is_some() {
        (
            Sample::new(input::LEUKEMIA.to_vec())?,
            "fixture leukemia".to_string(),
            Some(Published {
                delta_cap: input::LEUKEMIA_PUBLISHED_DELTA_CAP,
                z: input::LEUKEMIA_PUBLISHED_Z,
            }),
        )
    } else if let Some(path) = &a.input {
        (
            parse_sample(&read_text(path)?)?,
            path.display().to_string(),
            None,
        )
    } else {
        let text = a.values.as_deref().unwrap_or_default();
        (parse_sample(text)?, "inline".to_string(), None)
    };
    if let Some(path) = &a.dump_sample {
        fs::write(path, sample_to_tsv(&sample)).map_err(|e| io_error(path, e))?;
    }

    let mode = TestMode::from(a.mode);
    let normal = ustat::run_test(&sample, a.alpha, TestMode::NormalApprox, None)?;
    let want_calibrated = mode == TestMode::Calibrated || a.calibration.calibration.is_some();
    let (calibrated, calibration) = if want_calibrated {
        let (table, src) = obtain_calibration(&a.calibration, &[sample.len()], a.seed, a.workers)?;
        let r = ustat::run_test(&sample, a.alpha, TestMode::Calibrated, Some(&table))?;
        (Some(r), Some(src))
    } else {
        (None, None)
    };
    let report = TestReport {
        source,
        n: sample.len(),
        alpha: a.alpha,
        mode,
        delta_hat: normal.delta_hat,
        delta_cap: normal.delta_cap,
        normal_approx: normal,
        calibrated,
        calibration,
        published,
    };
    let mut warnings = Vec::new();
    if mode == TestMode::NormalApprox {
        warnings.push(NORMAL_MODE_WARNING.to_string());
    }
    let body = match a.output.format {
        Format::Json => to_json(&report),
        Format::Tsv => {
            let mut s =
                String::from("mode\tn\tdelta_hat\tdelta_cap\tz\tp_value\talpha\tsigma0\treject\n");
            for r in report.results() {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    r.mode,
                    r.n,
                    r.delta_hat,
                    r.delta_cap,
                    r.z,
                    r.p_value,
                    r.alpha,
                    r.sigma0_used,
                    r.reject
                );
            }
            s
        }
        Format::Text => render_test_text(&report),
    };
    Ok(Output {
        body,
        warnings,
        out: a.output.out.clone(),
    })
}

fn render_test_text(report: &TestReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sample      {} (n = {})", report.source, report.n);
    let _ = writeln!(s, "delta_hat   {:.6}", report.delta_hat);
    let _ = writeln!(s, "Delta_hat   {:.6}", report.delta_cap);
    if let Some(p) = &report.published {
        let _ = writeln!(s, "published   Delta_hat {}, z {}", p.delta_cap, p.z);
        let _ = writeln!(
            s,
            "            recomputed Delta_hat {:.6} differs from the published value by {:.6}",
            report.delta_cap,
            report.delta_cap - p.delta_cap
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<15}{:>11}{:>11}{:>10}  decision",
        "mode", "z", "p_value", "sigma0"
    );
    for r in report.results() {
        let _ = writeln!(
            s,
            "{:<15}{:>11.4}{:>11.4}{:>10.4}  {}",
            r.mode.to_string(),
            r.z,
            r.p_value,
            r.sigma0_used,
            decision_text(r)
        );
    }
    if let Some(c) = &report.calibration {
        let _ = writeln!(
            s,
            "\ncalibration {} ({} null replicates, seed {})",
            c.origin,
            c.replicates
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            c.seed
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
    }
    let _ = writeln!(
        s,
        "\nresult      {} ({})",
        decision_text(report.primary()),
        report.mode
    );
    s
}

fn cmd_power(a: &PowerArgs) -> CliResult<Output> {
    let cfg = PowerConfig {
        family: a.family,
        thetas: a.theta.clone(),
        ns: a.ns.clone(),
        alpha: a.alpha,
        replicates: a.replicates,
        master_seed: a.seed,
        mode: a.mode.into(),
    };
    cfg.validate()?;
    let mut warnings = Vec::new();
    if !cfg.is_report_grade() {
        warnings.push(format!(
            "{} replicates is below the {} recommended for reported tables",
            cfg.replicates,
            mc::MIN_REPORTED_REPLICATES
        ));
    }
    let calibration = match cfg.mode {
        TestMode::Calibrated => {
            Some(obtain_calibration(&a.calibration, &cfg.ns, a.seed, a.workers)?.0)
        }
        TestMode::NormalApprox => {
            warnings.push(NORMAL_MODE_WARNING.to_string());
            None
        }
    };
    let table = mc::estimate_power(&cfg, calibration.as_ref(), a.workers)?;
    let body = match a.output.format {
        Format::Text => table.to_string(),
        Format::Tsv => table.to_tsv(),
        Format::Json => to_json(&table),
    };
    Ok(Output {
        body,
        warnings,
        out: a.output.out.clone(),
    })
}

#[derive(Debug, Serialize)]
struct SimulationReport<'a> {
    params: &'a DmnParams,
    drift: f64,
    class: dmn::AgingClass,
    steady_state_mean: Option<f64>,
    zero_age_atom: Option<f64>,
    occupancy_plus: f64,
    stationary_plus: f64,
    age: dmn::AgeSummary,
    trajectory: &'a dmn::Trajectory,
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<Output> {
    let params = DmnParams::new(a.v_plus, a.v_minus, a.lambda_plus, a.lambda_minus)?;
    let start = match a.start {
        StateArg::Plus => NoiseState::Plus,
        StateArg::Minus => NoiseState::Minus,
    };
    let traj = dmn::simulate_trajectory(&params, a.x0, a.t_end, start, a.seed)?;
    let report = SimulationReport {
        params: &params,
        drift: dmn::drift(&params),
        class: dmn::classify(&params),
        steady_state_mean: dmn::steady_state_mean(&params).ok(),
        zero_age_atom: dmn::steady_state_zero_atom(&params).ok(),
        occupancy_plus: traj.empirical_occupancy().0,
        stationary_plus: params.lambda_minus() / params.total_rate(),
        age: traj.age_summary(),
        trajectory: &traj,
    };
    let body = match a.output.format {
        Format::Json => to_json(&report),
        Format::Text | Format::Tsv => {
            let mut s = String::new();
            let _ = writeln!(s, "# drift V = {}", report.drift);
            let _ = writeln!(s, "# class {}", report.class);
            match report.steady_state_mean {
                Some(m) => {
                    let _ = writeln!(s, "# steady-state mean age Lambda = {m}");
                    let _ = writeln!(
                        s,
                        "# long-run fraction of time at age 0 = {}",
                        report.zero_age_atom.unwrap_or(0.0)
                    );
                }
                None => {
                    let _ = writeln!(s, "# no steady state (drift is not negative)");
                }
            }
            let _ = writeln!(
                s,
                "# segments {}, seed {}, occupancy(+) {} vs stationary {}",
                traj.segments(),
                traj.seed,
                report.occupancy_plus,
                report.stationary_plus
            );
            let _ = writeln!(
                s,
                "# time-average age {}, over positive-age periods {}, fraction at 0 {}",
                report.age.mean_age, report.age.positive_mean_age, report.age.zero_fraction
            );
            let mut buf = Vec::new();
            traj.write_tsv(&mut buf).expect("writing to memory");
            s.push_str(&String::from_utf8(buf).expect("tsv is utf-8"));
            s
        }
    };
    Ok(Output {
        body,
        warnings: Vec::new(),
        out: a.output.out.clone(),
    })
}

fn cmd_calibrate(a: &CalibrateArgs) -> CliResult<Output> {
    let mut warnings = Vec::new();
    if a.replicates < mc::DEFAULT_REPLICATES {
        warnings.push(format!(
            "{} replicates per n is below the {} recommended for table-grade quantiles",
            a.replicates,
            mc::DEFAULT_REPLICATES
        ));
    }
    let table = mc::calibrate(&a.ns, a.replicates, a.seed, a.workers)?;
    let body = match a.output.format {
        Format::Tsv => table.to_tsv(),
        Format::Json => to_json(&table),
        Format::Text => {
            let mut s = String::from("Null quantiles of Delta_hat under the unit exponential\n");
            let _ = writeln!(
                s,
                "{:>8}{:>12}{:>8}{:>11}{:>10}{:>11}{:>11}{:>11}",
                "n", "replicates", "seed", "mean", "sd", "q0.01", "q0.05", "q0.10"
            );
            for e in table.entries() {
                let q = |p| e.quantile(p).unwrap_or(f64::NAN);
                let _ = writeln!(
                    s,
                    "{:>8}{:>12}{:>8}{:>11.5}{:>10.5}{:>11.5}{:>11.5}{:>11.5}",
                    e.n,
                    e.replicates,
                    e.seed,
                    e.null_mean,
                    e.null_sd,
                    q(0.01),
                    q(0.05),
                    q(0.10)
                );
            }
            s
        }
    };
    Ok(Output {
        body,
        warnings,
        out: a.output.out.clone(),
    })
}

fn cmd_check_odl(a: &CheckOdlArgs) -> CliResult<Output> {
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let dist = a.dist.distribution(a.theta)?;
    let grid = lifedist::log_grid(0.01 * dist.mean(), 10.0 * dist.mean(), a.points);
    let report = lifedist::odl_check(&dist, &grid, a.tol)?;
    let body = match a.output.format {
        Format::Tsv => report.to_tsv(),
        Format::Json => to_json(&report),
        Format::Text => render_odl_text(&dist, &report),
    };
    Ok(Output {
        body,
        warnings: Vec::new(),
        out: a.output.out.clone(),
    })
}

fn render_odl_text(dist: &LifeDistribution, report: &lifedist::OdlReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "distribution {} (mean {})",
        report.distribution,
        dist.mean()
    );
    let _ = writeln!(s, "verdict      {}", report.verdict);
    let _ = writeln!(
        s,
        "min margin   {:e} (tol {:e})",
        report.min_margin(),
        report.tol
    );
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>14}{:>18}{:>18}{:>14}",
        "t", "int_t^inf W", "Lambda W(t)", "margin"
    );
    for i in 0..report.grid.len() {
        let _ = writeln!(
            s,
            "{:>14.6e}{:>18.10e}{:>18.10e}{:>14.4e}",
            report.grid[i], report.lhs[i], report.rhs[i], report.margin[i]
        );
    }
    s
}
