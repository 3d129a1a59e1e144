//! Dataset ingestion and report output.
//!
//! Datasets are comma-separated with a header whose last two names are `y`
//! and `delta`; every preceding column is a covariate. Reports are written as
//! CSV, preceded by `#` comment lines echoing the configuration, or as a
//! single JSON document. Floats use the shortest decimal form that parses
//! back to the same value.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::estimator::{CiResult, ConfigSummary};
use crate::km::{CensoredObservation, KmFit};
use crate::simulation::{
    BandwidthTable, CoverageReport, CurveRow, GmseReport, Scenario, SimDataset, SCHEMA_VERSION,
};

/// Reads a dataset file; see the module docs for the layout.
pub fn read_dataset(path: &Path) -> Result<Vec<CensoredObservation>> {
    let file = File::open(path)?;
    read_dataset_from(file, path)
}

/// As [`read_dataset`] from any reader; `path` only labels errors.
pub fn read_dataset_from<R: Read>(reader: R, path: &Path) -> Result<Vec<CensoredObservation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let width = header.len();
    if width < 3 || &header[width - 2] != "y" || &header[width - 1] != "delta" {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "header must name at least one covariate followed by y,delta".into(),
        });
    }
    let d = width - 2;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let number = |j: usize| -> Result<f64> {
            let field = &record[j];
            let value: f64 = field.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: if field.is_empty() {
                    format!("missing value in column '{}'", &header[j])
                } else {
                    format!("'{field}' in column '{}' is not a number", &header[j])
                },
            })?;
            if !value.is_finite() {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("non-finite value in column '{}'", &header[j]),
                });
            }
            Ok(value)
        };
        let x = (0..d).map(number).collect::<Result<Vec<_>>>()?;
        let y = number(d)?;
        let delta = match &record[d + 1] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::BadDelta {
                    line,
                    value: other.to_string(),
                })
            }
        };
        out.push(CensoredObservation::new(x, y, delta));
    }
    if out.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::InvalidConfig(format!("unknown format '{s}'"))),
        }
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => u8::from(*b).to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Bool(b) => json!(b),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Anything that can be written by [`write_report`].
pub trait Report {
    /// Key/value pairs echoed as `#` comments above the CSV table.
    fn header(&self) -> Vec<(String, String)>;
    fn table(&self) -> Table;
    /// Written next to the CSV as `<file>.summary.json` when present.
    fn summary(&self) -> Option<Value> {
        None
    }
    /// The JSON document; defaults to the header, summary and rows.
    fn to_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
        for (k, v) in self.header() {
            let value = serde_json::from_str(&v).unwrap_or(Value::String(v));
            doc.entry(k).or_insert(value);
        }
        if let Some(s) = self.summary() {
            doc.insert("summary".into(), s);
        }
        let table = self.table();
        let rows: Vec<Value> = table
            .rows
            .iter()
            .map(|r| {
                Value::Object(
                    table
                        .columns
                        .iter()
                        .cloned()
                        .zip(r.iter().map(Cell::json))
                        .collect(),
                )
            })
            .collect();
        doc.insert("rows".into(), Value::Array(rows));
        Value::Object(doc)
    }
}

pub fn render_csv<R: Report + ?Sized>(report: &R) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# schema_version: {SCHEMA_VERSION}");
    for (k, v) in report.header() {
        let _ = writeln!(out, "# {k}: {}", v.replace('\n', " "));
    }
    let table = report.table();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))
            .expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8"));
    out
}

pub fn render_json<R: Report + ?Sized>(report: &R) -> String {
    let mut s = serde_json::to_string_pretty(&report.to_json()).expect("json value serializes");
    s.push('\n');
    s
}

pub fn summary_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

/// Writes `report` to `path`, or to stdout when `path` is `None`. CSV output
/// to a file also writes the JSON summary sidecar when the report has one.
pub fn write_report<R: Report + ?Sized>(
    report: &R,
    path: Option<&Path>,
    format: Format,
) -> Result<()> {
    let text = match format {
        Format::Csv => render_csv(report),
        Format::Json => render_json(report),
    };
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            if format == Format::Csv {
                if let Some(summary) = report.summary() {
                    let mut s = serde_json::to_string_pretty(&summary)?;
                    s.push('\n');
                    std::fs::write(summary_path(p), s)?;
                }
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads a CSV table written by [`write_report`]. Cells come back as numbers
/// when they parse as such, `Missing` when empty and text otherwise.
pub fn read_table(path: &Path) -> Result<(Vec<(String, String)>, Table)> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<(Vec<(String, String)>, Table)> {
    let header = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l[1..].trim().split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut table = Table::new(rdr.headers()?.iter());
    for record in rdr.records() {
        let record = record?;
        table.rows.push(
            record
                .iter()
                .map(|f| {
                    if f.is_empty() {
                        Cell::Missing
                    } else if let Ok(v) = f.parse::<f64>() {
                        Cell::Num(v)
                    } else {
                        Cell::Text(f.to_string())
                    }
                })
                .collect(),
        );
    }
    Ok((header, table))
}

fn config_header(config: &ConfigSummary) -> Vec<(String, String)> {
    vec![
        ("kernel".into(), config.kernel.clone()),
        ("psi".into(), config.psi.clone()),
        ("bandwidth".into(), config.bandwidth.to_string()),
        ("km_floor".into(), config.km_floor.to_string()),
        ("root_tol".into(), config.root_tol.to_string()),
        ("max_iter".into(), config.max_iter.to_string()),
        ("bracket_pad".into(), config.bracket_pad.to_string()),
        ("mhat_with_delta".into(), config.mhat_with_delta.to_string()),
    ]
}

fn scenario_header(scenario: &Scenario) -> Vec<(String, String)> {
    vec![(
        "scenario".into(),
        serde_json::to_string(scenario).expect("scenario serializes"),
    )]
}

fn x_columns(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|j| format!("x{j}")).collect()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

/// One row of `fit` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRow {
    pub x: Vec<f64>,
    pub theta_hat: f64,
    pub nw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub config: ConfigSummary,
    pub rows: Vec<FitRow>,
}

impl Report for FitReport {
    fn header(&self) -> Vec<(String, String)> {
        config_header(&self.config)
    }

    fn table(&self) -> Table {
        let dim = self.rows.first().map_or(1, |r| r.x.len());
        let mut t = Table::new(
            x_columns(dim)
                .into_iter()
                .chain(["theta_hat".into(), "nw".into()]),
        );
        for r in &self.rows {
            let mut row: Vec<Cell> = r.x.iter().map(|&v| v.into()).collect();
            row.extend([r.theta_hat.into(), r.nw.into()]);
            t.push(row);
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiReport {
    pub config: ConfigSummary,
    pub rows: Vec<(Vec<f64>, CiResult)>,
}

impl Report for CiReport {
    fn header(&self) -> Vec<(String, String)> {
        config_header(&self.config)
    }

    fn table(&self) -> Table {
        let dim = self.rows.first().map_or(1, |r| r.0.len());
        let extra = [
            "theta_hat",
            "lo",
            "hi",
            "level",
            "half_width",
            "m_hat",
            "gamma1_hat",
            "ball_prob",
            "n_used",
        ];
        let mut t = Table::new(x_columns(dim).into_iter().chain(extra.map(String::from)));
        for (x, ci) in &self.rows {
            let mut row: Vec<Cell> = x.iter().map(|&v| v.into()).collect();
            row.extend([
                ci.theta_hat.into(),
                ci.lower().into(),
                ci.upper().into(),
                ci.level.into(),
                ci.half_width.into(),
                ci.m_hat.into(),
                ci.gamma1_hat.into(),
                ci.ball_prob.into(),
                ci.n_used.into(),
            ]);
            t.push(row);
        }
        t
    }
}

/// The fitted censoring survival as a step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KmReport {
    pub fit: KmFit,
}

impl Report for KmReport {
    fn header(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.fit.len().to_string()),
            ("y_max".into(), self.fit.y_max().to_string()),
        ]
    }

    fn table(&self) -> Table {
        let mut t = Table::new(["time", "survival"]);
        for (time, s) in self.fit.steps() {
            t.push(vec![time.into(), s.into()]);
        }
        t
    }
}

impl Report for GmseReport {
    fn header(&self) -> Vec<(String, String)> {
        let mut h = scenario_header(&self.scenario);
        h.extend(config_header(&self.config));
        h.push(("censoring_rate".into(), self.censoring_rate.to_string()));
        h
    }

    fn table(&self) -> Table {
        let mut t = Table::new([
            "replication",
            "bandwidth_m",
            "bandwidth_nw",
            "mse_m",
            "mse_nw",
            "realized_cr",
            "skipped_m",
            "skipped_nw",
            "flagged",
        ]);
        for r in &self.replications {
            t.push(vec![
                r.replication.into(),
                self.bandwidth_m.into(),
                self.bandwidth_nw.into(),
                r.mse_m.into(),
                r.mse_nw.into(),
                r.realized_cr.into(),
                r.skipped_m.into(),
                r.skipped_nw.into(),
                r.flagged.into(),
            ]);
        }
        t
    }

    fn summary(&self) -> Option<Value> {
        Some(json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": to_value(&self.scenario),
            "config": to_value(&self.config),
            "censoring_rate": self.censoring_rate,
            "bandwidth_m": self.bandwidth_m,
            "bandwidth_nw": self.bandwidth_nw,
            "gmse_m": self.gmse_m,
            "gmse_nw": self.gmse_nw,
            "realized_cr": self.realized_cr,
            "flagged_replications": self.flagged_replications,
        }))
    }

    fn to_json(&self) -> Value {
        to_value(self)
    }
}

impl Report for BandwidthTable {
    fn header(&self) -> Vec<(String, String)> {
        let mut h = scenario_header(&self.scenario);
        h.extend(config_header(&self.config));
        h.push(("censoring_rate".into(), self.censoring_rate.to_string()));
        h
    }

    fn table(&self) -> Table {
        let mut t = Table::new(["bandwidth", "gmse_m", "gmse_nw"]);
        for j in 0..self.grid.len() {
            t.push(vec![
                self.grid[j].into(),
                self.gmse_m[j].into(),
                self.gmse_nw[j].into(),
            ]);
        }
        t
    }

    fn summary(&self) -> Option<Value> {
        Some(json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": to_value(&self.scenario),
            "config": to_value(&self.config),
            "censoring_rate": self.censoring_rate,
            "bandwidth_m": self.bandwidth_m(),
            "bandwidth_nw": self.bandwidth_nw(),
            "gmse_m": self.gmse_m[self.best_m],
            "gmse_nw": self.gmse_nw[self.best_nw],
        }))
    }

    fn to_json(&self) -> Value {
        to_value(self)
    }
}

impl Report for CoverageReport {
    fn header(&self) -> Vec<(String, String)> {
        let mut h = scenario_header(&self.scenario);
        h.extend(config_header(&self.config));
        h.push(("censoring_rate".into(), self.censoring_rate.to_string()));
        h.push(("level".into(), self.level.to_string()));
        h
    }

    fn table(&self) -> Table {
        let mut t = Table::new([
            "replication",
            "x",
            "theta_hat",
            "lo",
            "hi",
            "pivot",
            "covered",
            "failure",
        ]);
        for d in &self.draws {
            t.push(vec![
                d.replication.into(),
                d.x.into(),
                d.theta_hat.into(),
                d.lower.into(),
                d.upper.into(),
                d.pivot.into(),
                d.covered.into(),
                d.failure.clone().map_or(Cell::Missing, Cell::Text),
            ]);
        }
        t
    }

    fn summary(&self) -> Option<Value> {
        Some(json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": to_value(&self.scenario),
            "config": to_value(&self.config),
            "censoring_rate": self.censoring_rate,
            "level": self.level,
            "realized_cr": self.realized_cr,
            "points": to_value(&self.points),
        }))
    }

    fn to_json(&self) -> Value {
        to_value(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveReport {
    pub scenario: Scenario,
    pub config: ConfigSummary,
    pub rows: Vec<CurveRow>,
}

impl Report for CurveReport {
    fn header(&self) -> Vec<(String, String)> {
        let mut h = scenario_header(&self.scenario);
        h.extend(config_header(&self.config));
        h
    }

    fn table(&self) -> Table {
        let mut t = Table::new(["x", "m", "theta_hat", "nw"]);
        for r in &self.rows {
            t.push(vec![
                r.x.into(),
                r.truth.into(),
                r.theta_hat.into(),
                r.nw.into(),
            ]);
        }
        t
    }
}

/// A simulated replication in the dataset layout, plus its latent times.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedReport {
    pub scenario: Scenario,
    pub replication: usize,
    pub data: SimDataset,
}

impl Report for SimulatedReport {
    fn header(&self) -> Vec<(String, String)> {
        let mut h = scenario_header(&self.scenario);
        h.push(("replication".into(), self.replication.to_string()));
        h.push(("censoring_rate".into(), self.data.rate.to_string()));
        h
    }

    fn table(&self) -> Table {
        let dim = self.data.observations.first().map_or(1, |o| o.dim());
        let names: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
        let mut t = Table::new(
            names
                .into_iter()
                .chain(["y", "delta", "t", "c"].map(String::from)),
        );
        for (i, o) in self.data.observations.iter().enumerate() {
            let mut row: Vec<Cell> = o.x.iter().map(|&v| v.into()).collect();
            row.extend([
                o.y.into(),
                o.delta.into(),
                self.data.lifetimes[i].into(),
                self.data.censoring[i].into(),
            ]);
            t.push(row);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Vec<CensoredObservation>> {
        read_dataset_from(Cursor::new(text), Path::new("mem.csv"))
    }

    #[test]
    fn single_row() {
        let d = parse("x1,y,delta\n0.5,1.2,1\n").unwrap();
        assert_eq!(d, vec![CensoredObservation::new(vec![0.5], 1.2, true)]);
    }

    #[test]
    fn infers_dimension() {
        let d = parse("a,b,y,delta\n1,2,3,0\n4,5,6,1\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].x, vec![1.0, 2.0]);
        assert!(!d[0].delta);
    }

    #[test]
    fn bad_delta_reports_line() {
        let err = parse("x1,y,delta\n0.5,1.2,1\n0.5,1.2,2\n").unwrap_err();
        assert!(matches!(err, Error::BadDelta { line: 3, ref value } if value == "2"));
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            parse("x1,y,delta\n0.5,1.2\n").unwrap_err(),
            Error::MalformedRow { line: 2, .. }
        ));
        assert!(matches!(
            parse("x1,y,delta\n0.5,,1\n").unwrap_err(),
            Error::MalformedRow { line: 2, .. }
        ));
        assert!(matches!(
            parse("x1,y,delta\nabc,1,1\n").unwrap_err(),
            Error::MalformedRow { line: 2, .. }
        ));
        assert!(matches!(
            parse("x1,time,status\n1,1,1\n").unwrap_err(),
            Error::MalformedRow { line: 1, .. }
        ));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse("").unwrap_err(), Error::EmptyFile(_)));
        assert!(matches!(
            parse("x1,y,delta\n").unwrap_err(),
            Error::EmptyFile(_)
        ));
    }

    #[test]
    fn csv_floats_round_trip() {
        let values = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1e300,
            f64::MIN_POSITIVE,
            123456789.123456789,
        ];
        let report = KmReport {
            fit: KmFit::fit(values.iter().map(|&v| (v, false))).unwrap(),
        };
        let (_, table) = parse_table(&render_csv(&report)).unwrap();
        let times: Vec<f64> = table
            .rows
            .iter()
            .skip(1)
            .map(|r| r[0].as_f64().unwrap())
            .collect();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(times, sorted);
    }
}
