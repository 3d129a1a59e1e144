//! Replication studies. Replication `b` draws everything from stream `b` of
//! the scenario seed and results are gathered in replication order, so the
//! output does not depend on the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{child_rng, contaminate, gen_dataset, BandwidthPolicy, Scenario, SimDataset};
use crate::error::{Error, Result};
use crate::estimator::{ConfigSummary, EstimatorConfig, WeightedSample};
use crate::km::KmFit;

/// Replications with more than this fraction of failed points are flagged.
pub const FLAG_FRACTION: f64 = 0.05;

/// Draws replication `b` of the scenario with censoring rate `rate`.
pub fn simulate_replication(scenario: &Scenario, rate: f64, b: usize) -> Result<SimDataset> {
    let mut rng = child_rng(scenario.seed, b as u64);
    let mut data = gen_dataset(scenario.model, scenario.n, scenario.sigma, rate, &mut rng);
    if let Some(c) = scenario.contamination {
        contaminate(&mut data, c.fraction, c.factor, c.mode, &mut rng)?;
    }
    Ok(data)
}

/// Runs `f` on `0..count`, on `jobs` threads when given, and returns the
/// results in index order.
pub fn map_replications<T, F>(count: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match jobs {
        Some(1) => (0..count).map(f).collect(),
        _ => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                builder = builder.num_threads(j);
            }
            let pool = builder
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            pool.install(|| (0..count).into_par_iter().map(f).collect())
        }
    }
}

/// In-sample errors of one replication at one bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationMse {
    pub replication: usize,
    pub bandwidth: f64,
    pub mse_m: f64,
    pub mse_nw: f64,
    pub realized_cr: f64,
    pub skipped_m: usize,
    pub skipped_nw: usize,
    pub flagged: bool,
}

fn in_sample_errors(
    data: &SimDataset,
    km: &KmFit,
    cfg: &EstimatorConfig,
    replication: usize,
) -> Result<ReplicationMse> {
    let sample = WeightedSample::with_km(&data.observations, km, cfg.km_floor)?;
    let (mut sq_m, mut sq_nw) = (0.0, 0.0);
    let (mut skipped_m, mut skipped_nw) = (0, 0);
    for obs in &data.observations {
        let truth = data.model.mean(obs.x[0]);
        let local = match sample.local(&obs.x, cfg) {
            Ok(l) => l,
            Err(e) if e.is_estimation_failure() => {
                skipped_m += 1;
                skipped_nw += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        match local.solve() {
            Ok(theta) => sq_m += (theta - truth).powi(2),
            Err(e) if e.is_estimation_failure() => skipped_m += 1,
            Err(e) => return Err(e),
        }
        sq_nw += (local.nw() - truth).powi(2);
    }
    let n = data.len();
    let mean = |sq: f64, skipped: usize| {
        if skipped == n {
            f64::NAN
        } else {
            sq / (n - skipped) as f64
        }
    };
    let limit = FLAG_FRACTION * n as f64;
    Ok(ReplicationMse {
        replication,
        bandwidth: cfg.bandwidth,
        mse_m: mean(sq_m, skipped_m),
        mse_nw: mean(sq_nw, skipped_nw),
        realized_cr: data.censoring_fraction(),
        skipped_m,
        skipped_nw,
        flagged: skipped_m as f64 > limit || skipped_nw as f64 > limit,
    })
}

// mean over replications with at least one evaluated point
fn finite_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmseReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub config: ConfigSummary,
    pub censoring_rate: f64,
    pub bandwidth_m: f64,
    pub bandwidth_nw: f64,
    pub gmse_m: f64,
    pub gmse_nw: f64,
    pub realized_cr: f64,
    pub flagged_replications: usize,
    /// Per replication: the M-estimator columns are at `bandwidth_m` and the
    /// comparator columns at `bandwidth_nw`.
    pub replications: Vec<ReplicationMse>,
}

impl GmseReport {
    pub fn per_replication_mse_m(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.mse_m).collect()
    }

    pub fn per_replication_mse_nw(&self) -> Vec<f64> {
        self.replications.iter().map(|r| r.mse_nw).collect()
    }

    fn assemble(
        scenario: &Scenario,
        config: ConfigSummary,
        rate: f64,
        bandwidth_m: f64,
        bandwidth_nw: f64,
        replications: Vec<ReplicationMse>,
    ) -> Self {
        GmseReport {
            schema_version: super::SCHEMA_VERSION,
            scenario: scenario.clone(),
            config,
            censoring_rate: rate,
            bandwidth_m,
            bandwidth_nw,
            gmse_m: finite_mean(replications.iter().map(|r| r.mse_m)),
            gmse_nw: finite_mean(replications.iter().map(|r| r.mse_nw)),
            realized_cr: finite_mean(replications.iter().map(|r| r.realized_cr)),
            flagged_replications: replications.iter().filter(|r| r.flagged).count(),
            replications,
        }
    }
}

/// GMSE of both estimators at a single bandwidth.
pub fn run_gmse_study(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    bandwidth: f64,
    jobs: Option<usize>,
) -> Result<GmseReport> {
    let cfg = cfg.with_bandwidth(bandwidth);
    cfg.validate()?;
    let rate = scenario.censoring_rate()?;
    let reps = map_replications(scenario.replications, jobs, |b| {
        let data = simulate_replication(scenario, rate, b)?;
        let km = KmFit::from_observations(&data.observations)?;
        in_sample_errors(&data, &km, &cfg, b)
    })?;
    Ok(GmseReport::assemble(
        scenario,
        cfg.summary(),
        rate,
        bandwidth,
        bandwidth,
        reps,
    ))
}

/// GMSE under the scenario's own bandwidth policy. Grid selection tunes
/// each estimator separately.
pub fn run_scenario(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    jobs: Option<usize>,
) -> Result<GmseReport> {
    match &scenario.bandwidth_policy {
        BandwidthPolicy::Fixed(h) => run_gmse_study(scenario, cfg, *h, jobs),
        BandwidthPolicy::RateRule => {
            run_gmse_study(scenario, cfg, scenario.rate_rule_bandwidth(), jobs)
        }
        BandwidthPolicy::GridSelect(grid) => {
            Ok(select_bandwidth(scenario, cfg, grid, jobs)?.into_report())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTable {
    pub scenario: Scenario,
    pub config: ConfigSummary,
    pub censoring_rate: f64,
    pub grid: Vec<f64>,
    pub gmse_m: Vec<f64>,
    pub gmse_nw: Vec<f64>,
    pub best_m: usize,
    pub best_nw: usize,
    /// `per_replication[b][j]` is replication `b` at `grid[j]`.
    pub per_replication: Vec<Vec<ReplicationMse>>,
}

impl BandwidthTable {
    pub fn bandwidth_m(&self) -> f64 {
        self.grid[self.best_m]
    }

    pub fn bandwidth_nw(&self) -> f64 {
        self.grid[self.best_nw]
    }

    /// Report of each estimator at its own selected bandwidth.
    pub fn into_report(self) -> GmseReport {
        let (jm, jn) = (self.best_m, self.best_nw);
        let reps = self
            .per_replication
            .iter()
            .map(|row| ReplicationMse {
                mse_nw: row[jn].mse_nw,
                skipped_nw: row[jn].skipped_nw,
                flagged: row[jm].flagged || row[jn].flagged,
                ..row[jm]
            })
            .collect();
        let mut config = self.config;
        config.bandwidth = self.grid[jm];
        GmseReport::assemble(
            &self.scenario,
            config,
            self.censoring_rate,
            self.grid[jm],
            self.grid[jn],
            reps,
        )
    }
}

fn argmin(values: &[f64]) -> usize {
    // strict comparison keeps the first (smallest) bandwidth on ties
    let mut best = 0;
    for (j, v) in values.iter().enumerate() {
        if v < &values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = j;
        }
    }
    best
}

/// Evaluates every grid bandwidth on the same replications and picks the
/// GMSE minimizer for each estimator; ties go to the smaller bandwidth.
pub fn select_bandwidth(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    grid: &[f64],
    jobs: Option<usize>,
) -> Result<BandwidthTable> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("bandwidth grid is empty".into()));
    }
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(f64::total_cmp);
    let configs: Vec<EstimatorConfig> = order.iter().map(|&h| cfg.with_bandwidth(h)).collect();
    for c in &configs {
        c.validate()?;
    }
    let rate = scenario.censoring_rate()?;
    let per_replication = map_replications(scenario.replications, jobs, |b| {
        let data = simulate_replication(scenario, rate, b)?;
        let km = KmFit::from_observations(&data.observations)?;
        configs
            .iter()
            .map(|c| in_sample_errors(&data, &km, c, b))
            .collect::<Result<Vec<_>>>()
    })?;
    let column = |j: usize, pick: fn(&ReplicationMse) -> f64| {
        finite_mean(per_replication.iter().map(|row| pick(&row[j])))
    };
    let gmse_m: Vec<f64> = (0..order.len()).map(|j| column(j, |r| r.mse_m)).collect();
    let gmse_nw: Vec<f64> = (0..order.len()).map(|j| column(j, |r| r.mse_nw)).collect();
    Ok(BandwidthTable {
        scenario: scenario.clone(),
        config: cfg.summary(),
        censoring_rate: rate,
        best_m: argmin(&gmse_m),
        best_nw: argmin(&gmse_nw),
        grid: order,
        gmse_m,
        gmse_nw,
        per_replication,
    })
}

/// Bandwidth for single-bandwidth studies: grid selection uses the
/// M-estimator's choice.
pub fn resolve_bandwidth(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    jobs: Option<usize>,
) -> Result<f64> {
    match &scenario.bandwidth_policy {
        BandwidthPolicy::Fixed(h) => Ok(*h),
        BandwidthPolicy::RateRule => Ok(scenario.rate_rule_bandwidth()),
        BandwidthPolicy::GridSelect(grid) => {
            Ok(select_bandwidth(scenario, cfg, grid, jobs)?.bandwidth_m())
        }
    }
}

/// One interval from one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageDraw {
    pub replication: usize,
    pub x: f64,
    pub theta_hat: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pivot: Option<f64>,
    pub covered: Option<bool>,
    /// Error kind when no interval was produced.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub x: f64,
    pub truth: f64,
    pub coverage: f64,
    pub pivot_mean: f64,
    pub pivot_sd: f64,
    pub valid: usize,
    pub degenerate: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub config: ConfigSummary,
    pub censoring_rate: f64,
    pub level: f64,
    pub realized_cr: f64,
    pub points: Vec<CoveragePoint>,
    pub draws: Vec<CoverageDraw>,
}

impl CoverageReport {
    pub fn pivots(&self, x_index: usize) -> Vec<f64> {
        let k = self.points.len();
        self.draws
            .iter()
            .skip(x_index)
            .step_by(k)
            .filter_map(|d| d.pivot)
            .collect()
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Empirical coverage of the pointwise intervals for the true regression
/// function at each of `x_points`.
pub fn run_coverage_study(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    x_points: &[f64],
    level: f64,
    jobs: Option<usize>,
) -> Result<CoverageReport> {
    if x_points.is_empty() {
        return Err(Error::InvalidConfig("no evaluation points".into()));
    }
    let bandwidth = resolve_bandwidth(scenario, cfg, jobs)?;
    let cfg = cfg.with_bandwidth(bandwidth);
    cfg.validate()?;
    let rate = scenario.censoring_rate()?;
    let per_rep = map_replications(scenario.replications, jobs, |b| {
        let data = simulate_replication(scenario, rate, b)?;
        let km = KmFit::from_observations(&data.observations)?;
        let sample = WeightedSample::with_km(&data.observations, &km, cfg.km_floor)?;
        let mut draws = Vec::with_capacity(x_points.len());
        for &x in x_points {
            let truth = scenario.model.mean(x);
            let draw = match sample.confidence_interval(&[x], &cfg, level) {
                Ok(ci) => CoverageDraw {
                    replication: b,
                    x,
                    theta_hat: Some(ci.theta_hat),
                    lower: Some(ci.lower()),
                    upper: Some(ci.upper()),
                    pivot: Some(ci.standardize(truth)),
                    covered: Some(ci.covers(truth)),
                    failure: None,
                },
                Err(e) if e.is_estimation_failure() => CoverageDraw {
                    replication: b,
                    x,
                    theta_hat: None,
                    lower: None,
                    upper: None,
                    pivot: None,
                    covered: None,
                    failure: Some(e.kind().to_string()),
                },
                Err(e) => return Err(e),
            };
            draws.push(draw);
        }
        Ok((data.censoring_fraction(), draws))
    })?;
    let realized_cr = finite_mean(per_rep.iter().map(|(cr, _)| *cr));
    let draws: Vec<CoverageDraw> = per_rep.into_iter().flat_map(|(_, d)| d).collect();
    let points = x_points
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let column: Vec<&CoverageDraw> = draws.iter().skip(j).step_by(x_points.len()).collect();
            let pivots: Vec<f64> = column.iter().filter_map(|d| d.pivot).collect();
            let covered = column.iter().filter(|d| d.covered == Some(true)).count();
            let valid = pivots.len();
            let degenerate = column.len() - valid;
            let (pivot_mean, pivot_sd) = mean_sd(&pivots);
            CoveragePoint {
                x,
                truth: scenario.model.mean(x),
                coverage: if valid == 0 {
                    f64::NAN
                } else {
                    covered as f64 / valid as f64
                },
                pivot_mean,
                pivot_sd,
                valid,
                degenerate,
                flagged: degenerate as f64 > FLAG_FRACTION * column.len() as f64,
            }
        })
        .collect();
    Ok(CoverageReport {
        schema_version: super::SCHEMA_VERSION,
        scenario: scenario.clone(),
        config: cfg.summary(),
        censoring_rate: rate,
        level,
        realized_cr,
        points,
        draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub x: f64,
    pub truth: f64,
    pub theta_hat: Option<f64>,
    pub nw: Option<f64>,
}

/// Both estimates over `x_grid` from the first replication. Points outside
/// the observed covariate range, or where estimation fails, are missing.
pub fn emit_curve_data(
    scenario: &Scenario,
    cfg: &EstimatorConfig,
    x_grid: &[f64],
    bandwidth: f64,
) -> Result<Vec<CurveRow>> {
    let cfg = cfg.with_bandwidth(bandwidth);
    cfg.validate()?;
    let rate = scenario.censoring_rate()?;
    let data = simulate_replication(scenario, rate, 0)?;
    let km = KmFit::from_observations(&data.observations)?;
    let sample = WeightedSample::with_km(&data.observations, &km, cfg.km_floor)?;
    let (lo, hi) = data
        .covariates()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
            (a.min(x), b.max(x))
        });
    x_grid
        .iter()
        .map(|&x| {
            let mut row = CurveRow {
                x,
                truth: scenario.model.mean(x),
                theta_hat: None,
                nw: None,
            };
            if x < lo || x > hi {
                return Ok(row);
            }
            match sample.local(&[x], &cfg) {
                Ok(local) => {
                    row.nw = Some(local.nw());
                    match local.solve() {
                        Ok(t) => row.theta_hat = Some(t),
                        Err(e) if e.is_estimation_failure() => {}
                        Err(e) => return Err(e),
                    }
                }
                Err(e) if e.is_estimation_failure() => {}
                Err(e) => return Err(e),
            }
            Ok(row)
        })
        .collect()
}
