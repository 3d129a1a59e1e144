//! Command-line front end. Every subcommand is a thin layer over the library.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::estimator::{
    EstimatorConfig, WeightedSample, DEFAULT_BRACKET_PAD, DEFAULT_KM_FLOOR, DEFAULT_MAX_ITER,
    DEFAULT_ROOT_TOL,
};
use crate::io::{
    read_dataset, write_report, CiReport, CurveReport, FitReport, FitRow, Format, KmReport, Report,
    SimulatedReport, Table,
};
use crate::kernel_psi::{KernelFamily, PsiSpec};
use crate::km::{CensoredObservation, KmFit};
use crate::simulation::{
    bandwidth_grid, emit_curve_data, run_coverage_study, run_scenario, select_bandwidth,
    simulate_replication, BandwidthPolicy, Contamination, ContaminationMode, Scenario,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;

/// Replications used by `--full`.
pub const FULL_REPLICATIONS: usize = 500;

#[derive(Debug, Parser)]
#[command(
    name = "psireg",
    version,
    about = "Robust kernel regression for right-censored responses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ErrorFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Dataset CSV with columns x1..xd,y,delta.
    #[arg(long, global = true, conflicts_with = "scenario")]
    pub data: Option<PathBuf>,

    /// Scenario JSON describing a simulation.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: FormatArg,

    /// Error reporting on standard error.
    #[arg(long, global = true, value_enum, default_value = "text")]
    pub errors: ErrorFormat,

    /// Worker threads for replications; results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(flatten)]
    pub estimator: EstimatorArgs,

    /// Evaluation point, comma separated for d > 1. Repeatable.
    #[arg(long = "x", global = true, allow_hyphen_values = true)]
    pub x: Vec<String>,

    /// Evenly spaced grid `lo:hi:count` (d = 1).
    #[arg(long, global = true)]
    pub x_grid: Option<String>,

    /// Confidence level of the intervals.
    #[arg(long, global = true, default_value_t = 0.95)]
    pub level: f64,

    /// Overrides the scenario's number of replications.
    #[arg(long, global = true, conflicts_with = "full")]
    pub replications: Option<usize>,

    /// Full-scale run with 500 replications.
    #[arg(long, global = true)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    #[arg(long, global = true, default_value = "gaussian")]
    pub kernel: KernelFamily,

    /// identity, algebraic_sigmoid or huber:<c>
    #[arg(long, global = true, default_value = "algebraic_sigmoid")]
    pub psi: PsiSpec,

    /// Kernel bandwidth; for simulations this replaces the scenario policy.
    #[arg(long, global = true)]
    pub bandwidth: Option<f64>,

    #[arg(long, global = true, default_value_t = DEFAULT_KM_FLOOR)]
    pub km_floor: f64,

    #[arg(long, global = true, default_value_t = DEFAULT_ROOT_TOL)]
    pub root_tol: f64,

    #[arg(long, global = true, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,

    #[arg(long, global = true, default_value_t = DEFAULT_BRACKET_PAD)]
    pub bracket_pad: f64,

    /// Weight the m_hat terms by delta / G_n^2.
    #[arg(long, global = true)]
    pub mhat_with_delta: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// M-estimate and synthetic-data comparator at the evaluation points.
    Fit,
    /// M-estimate with pointwise confidence intervals.
    Ci,
    /// Kaplan-Meier fit of the censoring survival.
    Km,
    /// One simulated replication in dataset layout.
    Simulate {
        #[arg(long, default_value_t = 0)]
        replication: usize,
    },
    /// GMSE of both estimators over the scenario replications.
    Gmse,
    /// GMSE over a bandwidth grid and the selected bandwidths.
    Bandwidth {
        /// `lo:hi:step`; defaults to the scenario grid or 0.05:0.99:0.02.
        #[arg(long)]
        grid: Option<String>,
    },
    /// GMSE under contamination for several multiplication factors.
    Robustness {
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        factors: Vec<f64>,
        /// Contaminated fraction, when the scenario has none.
        #[arg(long, default_value_t = 0.3)]
        fraction: f64,
    },
    /// Empirical coverage of the intervals at the evaluation points.
    Coverage,
    /// Both estimates over an x grid from one replication.
    Curves,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let errors = cli.common.errors;
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let code = failure.exit_code();
            match errors {
                ErrorFormat::Text => eprintln!("error: {failure}"),
                ErrorFormat::Json => eprintln!("{}", failure.to_json()),
            }
            code
        }
    }
}

/// A library error, possibly tagged with the evaluation point it came from.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub x: Option<Vec<f64>>,
    pub usage: bool,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            error: Error::InvalidConfig(message.into()),
            x: None,
            usage: true,
        }
    }

    fn at(x: &[f64]) -> impl FnOnce(Error) -> Failure + '_ {
        move |error| Failure {
            x: Some(error.point().map_or_else(|| x.to_vec(), <[f64]>::to_vec)),
            error,
            usage: false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.usage {
            return EXIT_USAGE;
        }
        match &self.error {
            e if e.is_estimation_failure() => EXIT_ESTIMATION,
            Error::InvalidConfig(_) | Error::InvalidFloor(_) | Error::Dimension { .. } => {
                EXIT_USAGE
            }
            _ => EXIT_DATA,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": self.error.kind(),
            "message": self.error.to_string(),
            "x": self.x,
            "exit_code": self.exit_code(),
        })
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.x {
            Some(x) if self.error.point().is_none() => write!(f, "{} (at x = {x:?})", self.error),
            _ => write!(f, "{}", self.error),
        }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure {
            error,
            x: None,
            usage: false,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

impl Common {
    pub fn estimator_config(&self) -> CliResult<EstimatorConfig> {
        let e = &self.estimator;
        let cfg = EstimatorConfig {
            kernel: e.kernel,
            psi: e.psi,
            bandwidth: e.bandwidth.unwrap_or(EstimatorConfig::default().bandwidth),
            km_floor: e.km_floor,
            root_tol: e.root_tol,
            max_iter: e.max_iter,
            bracket_pad: e.bracket_pad,
            mhat_with_delta: e.mhat_with_delta,
        };
        cfg.validate().map_err(|e| Failure {
            error: e,
            x: None,
            usage: true,
        })?;
        Ok(cfg)
    }

    fn format(&self) -> Format {
        match self.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }

    fn scenario(&self) -> CliResult<Scenario> {
        let path = self
            .scenario
            .as_ref()
            .ok_or_else(|| Failure::usage("this command needs --scenario"))?;
        let mut s = Scenario::from_path(path)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if self.full {
            s.replications = FULL_REPLICATIONS;
        } else if let Some(b) = self.replications {
            s.replications = b;
        }
        if let Some(h) = self.estimator.bandwidth {
            s.bandwidth_policy = BandwidthPolicy::Fixed(h);
        }
        s.validate().map_err(|e| Failure {
            error: e,
            x: None,
            usage: true,
        })?;
        Ok(s)
    }

    /// Observations from `--data`, or replication 0 of `--scenario`.
    fn observations(&self) -> CliResult<Vec<CensoredObservation>> {
        match (&self.data, &self.scenario) {
            (Some(path), None) => Ok(read_dataset(path)?),
            (None, Some(_)) => {
                let s = self.scenario()?;
                let rate = s.censoring_rate()?;
                Ok(simulate_replication(&s, rate, 0)?.observations)
            }
            _ => Err(Failure::usage(
                "exactly one of --data and --scenario is required",
            )),
        }
    }

    fn points(&self) -> CliResult<Vec<Vec<f64>>> {
        let mut points = Vec::new();
        for spec in &self.x {
            let x = spec
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Failure::usage(format!("cannot parse --x '{spec}'")))?;
            points.push(x);
        }
        if let Some(grid) = &self.x_grid {
            points.extend(parse_linspace(grid)?.into_iter().map(|v| vec![v]));
        }
        if points.is_empty() {
            return Err(Failure::usage("no evaluation points; use --x or --x-grid"));
        }
        Ok(points)
    }

    fn emit<R: Report>(&self, report: &R) -> CliResult<()> {
        Ok(write_report(report, self.output.as_deref(), self.format())?)
    }
}

fn parse_triple(spec: &str, what: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Failure::usage(format!("cannot parse {what} '{spec}'")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Failure::usage(format!(
            "{what} must look like a:b:c, got '{spec}'"
        ))),
    }
}

/// `lo:hi:count`, both ends included.
pub fn parse_linspace(spec: &str) -> CliResult<Vec<f64>> {
    let (lo, hi, count) = parse_triple(spec, "--x-grid")?;
    if !(count >= 1.0 && count.fract() == 0.0 && lo <= hi) {
        return Err(Failure::usage(format!("invalid grid '{spec}'")));
    }
    let count = count as usize;
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

/// `lo:hi:step`, `hi` included up to rounding.
pub fn parse_step_grid(spec: &str) -> CliResult<Vec<f64>> {
    let (lo, hi, step) = parse_triple(spec, "--grid")?;
    if !(step > 0.0 && lo > 0.0 && lo <= hi) {
        return Err(Failure::usage(format!("invalid grid '{spec}'")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // snap to 12 decimals so 0.05:0.2:0.05 yields 0.15 rather than 0.15000000000000002
    let snap = |v: f64| (v * 1e12).round() / 1e12;
    Ok((0..count).map(|i| snap(lo + step * i as f64)).collect())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let common = &cli.common;
    if common.data.is_some() && common.scenario.is_some() {
        return Err(Failure::usage(
            "exactly one of --data and --scenario is required",
        ));
    }
    if common.data.is_none() && common.scenario.is_none() {
        return Err(Failure::usage(
            "exactly one of --data and --scenario is required",
        ));
    }
    if common.jobs == Some(0) {
        return Err(Failure::usage("--jobs must be positive"));
    }
    let cfg = common.estimator_config()?;
    match &cli.command {
        Command::Fit => {
            let data = common.observations()?;
            let km = KmFit::from_observations(&data)?;
            let sample = WeightedSample::with_km(&data, &km, cfg.km_floor)?;
            let mut rows = Vec::new();
            for x in common.points()? {
                let local = sample.local(&x, &cfg).map_err(Failure::at(&x))?;
                let theta_hat = local.solve().map_err(Failure::at(&x))?;
                rows.push(FitRow {
                    nw: local.nw(),
                    theta_hat,
                    x,
                });
            }
            common.emit(&FitReport {
                config: cfg.summary(),
                rows,
            })
        }
        Command::Ci => {
            let data = common.observations()?;
            let km = KmFit::from_observations(&data)?;
            let sample = WeightedSample::with_km(&data, &km, cfg.km_floor)?;
            let mut rows = Vec::new();
            for x in common.points()? {
                let ci = sample
                    .confidence_interval(&x, &cfg, common.level)
                    .map_err(Failure::at(&x))?;
                rows.push((x, ci));
            }
            common.emit(&CiReport {
                config: cfg.summary(),
                rows,
            })
        }
        Command::Km => {
            let data = common.observations()?;
            common.emit(&KmReport {
                fit: KmFit::from_observations(&data)?,
            })
        }
        Command::Simulate { replication } => {
            let scenario = common.scenario()?;
            let rate = scenario.censoring_rate()?;
            let data = simulate_replication(&scenario, rate, *replication)?;
            common.emit(&SimulatedReport {
                scenario,
                replication: *replication,
                data,
            })
        }
        Command::Gmse => {
            let scenario = common.scenario()?;
            common.emit(&run_scenario(&scenario, &cfg, common.jobs)?)
        }
        Command::Bandwidth { grid } => {
            let scenario = common.scenario()?;
            let grid = match (grid, &scenario.bandwidth_policy) {
                (Some(spec), _) => parse_step_grid(spec)?,
                (None, BandwidthPolicy::GridSelect(g)) => g.clone(),
                (None, _) => bandwidth_grid(),
            };
            common.emit(&select_bandwidth(&scenario, &cfg, &grid, common.jobs)?)
        }
        Command::Robustness { factors, fraction } => {
            let scenario = common.scenario()?;
            let base = scenario.contamination.unwrap_or(Contamination {
                fraction: *fraction,
                factor: 1.0,
                mode: ContaminationMode::Latent,
            });
            let mut rows = Vec::new();
            for &factor in factors {
                let mut s = scenario.clone();
                s.contamination = Some(Contamination { factor, ..base });
                s.validate().map_err(|e| Failure {
                    error: e,
                    x: None,
                    usage: true,
                })?;
                let report = run_scenario(&s, &cfg, common.jobs)?;
                rows.push((factor, report));
            }
            common.emit(&RobustnessReport {
                scenario,
                fraction: base.fraction,
                rows,
            })
        }
        Command::Coverage => {
            let scenario = common.scenario()?;
            let xs: Vec<f64> = common
                .points()?
                .into_iter()
                .map(|x| match x[..] {
                    [v] => Ok(v),
                    _ => Err(Failure::usage("coverage points are one-dimensional")),
                })
                .collect::<CliResult<_>>()?;
            common.emit(&run_coverage_study(
                &scenario,
                &cfg,
                &xs,
                common.level,
                common.jobs,
            )?)
        }
        Command::Curves => {
            let scenario = common.scenario()?;
            let xs = match (&common.x_grid, common.x.is_empty()) {
                (None, true) => parse_linspace("0:1.6666666666666667:101")?,
                _ => common.points()?.into_iter().map(|x| x[0]).collect(),
            };
            let h = match scenario.bandwidth_policy {
                BandwidthPolicy::Fixed(h) => h,
                _ => scenario.rate_rule_bandwidth(),
            };
            let rows = emit_curve_data(&scenario, &cfg, &xs, h)?;
            common.emit(&CurveReport {
                config: cfg.with_bandwidth(h).summary(),
                scenario,
                rows,
            })
        }
    }
}

/// GMSE per contamination factor.
#[derive(Debug, Clone)]
pub struct RobustnessReport {
    pub scenario: Scenario,
    pub fraction: f64,
    pub rows: Vec<(f64, crate::simulation::GmseReport)>,
}

impl Report for RobustnessReport {
    fn header(&self) -> Vec<(String, String)> {
        vec![
            (
                "scenario".into(),
                serde_json::to_string(&self.scenario).expect("scenario serializes"),
            ),
            ("fraction".into(), self.fraction.to_string()),
        ]
    }

    fn table(&self) -> Table {
        let mut t = Table::new([
            "factor",
            "bandwidth_m",
            "bandwidth_nw",
            "gmse_m",
            "gmse_nw",
            "ratio",
            "realized_cr",
        ]);
        for (k, r) in &self.rows {
            t.push(vec![
                (*k).into(),
                r.bandwidth_m.into(),
                r.bandwidth_nw.into(),
                r.gmse_m.into(),
                r.gmse_nw.into(),
                (r.gmse_nw / r.gmse_m).into(),
                r.realized_cr.into(),
            ]);
        }
        t
    }
}
