//! CSV formats shared with the plotting tools.
//!
//! Missing values (ratios with an empty denominator, rolling means over a
//! window with no data) are written as empty fields.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::ExperimentError;
use crate::game::RewardScheme;
use crate::metrics::{aggregate_ci, rolling_mean, AggregatePoint, EpisodeMetrics, Metric, MetricsError};
use crate::sim::{MechanismConfig, Mode};

pub const RAW_HEADER: &str = "episode,repeat,mode,scheme,pop_size,cooperation_pct,cooperator_selection_pct,punishment_pct,selected_punisher_pct,just_ratio_pct,just_punisher_selection_pct,societal_reward,societal_reputation";

pub const AGGREGATE_HEADER: &str = "label,episode,metric,mean,ci_low,ci_high";

pub const ROLLING_WINDOW: usize = 100;
pub const CONFIDENCE: f64 = 0.95;

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ExperimentError + '_ {
    move |e| ExperimentError::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

/// One repeat's metrics table in the raw per-repeat format.
pub fn write_raw_csv(path: &Path, cfg: &MechanismConfig, repeat: usize, rows: &[EpisodeMetrics]) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(|e| ExperimentError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = csv_err(path);
    w.write_record(RAW_HEADER.split(',')).map_err(&err)?;
    let (repeat, mode, scheme, pop) = (
        repeat.to_string(),
        cfg.mode.name(),
        cfg.scheme.number().to_string(),
        cfg.population_size.to_string(),
    );
    for r in rows {
        let mut rec = vec![r.episode.to_string(), repeat.clone(), mode.to_string(), scheme.clone(), pop.clone()];
        rec.extend(Metric::ALL.iter().map(|&m| fmt_opt(r.get(m))));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

/// A raw file read back.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub repeat: usize,
    pub mode: Mode,
    pub scheme: RewardScheme,
    pub pop_size: usize,
    pub rows: Vec<EpisodeMetrics>,
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: u64, name: &str, s: &str) -> Result<T, ExperimentError> {
    s.parse().map_err(|_| ExperimentError::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: bad {name} '{s}'"),
    })
}

fn parse_opt(path: &Path, line: u64, name: &str, s: &str) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(path, line, name, s).map(Some)
    }
}

pub fn read_raw_csv(path: &Path) -> Result<RawRun, ExperimentError> {
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let header: Vec<String> = r.headers().map_err(&err)?.iter().map(String::from).collect();
    if header.join(",") != RAW_HEADER {
        return Err(ExperimentError::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header '{}'", header.join(",")),
        });
    }
    let fmt_err = |message: String| ExperimentError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut meta: Option<(usize, Mode, RewardScheme, usize)> = None;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(&err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize| rec.get(i).unwrap_or("");
        let repeat: usize = parse_field(path, line, "repeat", f(1))?;
        let mode: Mode = f(2).parse().map_err(|e: String| fmt_err(format!("line {line}: {e}")))?;
        let scheme_n: u8 = parse_field(path, line, "scheme", f(3))?;
        let scheme = RewardScheme::from_number(scheme_n).ok_or_else(|| fmt_err(format!("line {line}: bad scheme {scheme_n}")))?;
        let pop: usize = parse_field(path, line, "pop_size", f(4))?;
        match meta {
            None => meta = Some((repeat, mode, scheme, pop)),
            Some(m) if m != (repeat, mode, scheme, pop) => {
                return Err(fmt_err(format!("line {line}: run columns change mid-file")));
            }
            Some(_) => {}
        }
        let num = |i: usize, name: &str| parse_field::<f64>(path, line, name, f(i));
        let opt = |i: usize, name: &str| parse_opt(path, line, name, f(i));
        rows.push(EpisodeMetrics {
            episode: parse_field(path, line, "episode", f(0))?,
            cooperation_pct: num(5, "cooperation_pct")?,
            cooperator_selection_pct: opt(6, "cooperator_selection_pct")?,
            punishment_pct: opt(7, "punishment_pct")?,
            selected_punisher_pct: opt(8, "selected_punisher_pct")?,
            just_ratio_pct: opt(9, "just_ratio_pct")?,
            just_punisher_selection_pct: opt(10, "just_punisher_selection_pct")?,
            societal_reward: num(11, "societal_reward")?,
            societal_reputation: num(12, "societal_reputation")?,
        });
    }
    let (repeat, mode, scheme, pop_size) = meta.ok_or_else(|| fmt_err("no data rows".into()))?;
    Ok(RawRun {
        repeat,
        mode,
        scheme,
        pop_size,
        rows,
    })
}

/// One line of an aggregate file.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub label: String,
    pub episode: u64,
    pub metric: Metric,
    pub point: AggregatePoint,
}

/// Rolling mean of every metric in every repeat, then the mean and
/// confidence band across repeats. Rows are ordered by episode, then by
/// metric in [`Metric::ALL`] order.
pub fn aggregate_runs(label: &str, runs: &[Vec<EpisodeMetrics>], window: usize) -> Result<Vec<AggregateRow>, MetricsError> {
    let len = runs.first().map_or(0, Vec::len);
    if runs.iter().any(|r| r.len() != len) {
        return Err(MetricsError::RaggedSeries);
    }
    let mut per_metric = Vec::with_capacity(Metric::ALL.len());
    for m in Metric::ALL {
        let smoothed: Vec<Vec<Option<f64>>> = runs
            .iter()
            .map(|rows| rolling_mean(&crate::metrics::column(rows, m), window))
            .collect();
        per_metric.push(aggregate_ci(&smoothed, CONFIDENCE)?);
    }
    let mut out = Vec::with_capacity(len * Metric::ALL.len());
    for e in 0..len {
        for (k, m) in Metric::ALL.into_iter().enumerate() {
            out.push(AggregateRow {
                label: label.to_string(),
                episode: runs[0][e].episode,
                metric: m,
                point: per_metric[k].points[e],
            });
        }
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(|e| ExperimentError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = csv_err(path);
    w.write_record(AGGREGATE_HEADER.split(',')).map_err(&err)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.episode.to_string(),
            r.metric.name().to_string(),
            fmt_opt(r.point.mean),
            fmt_opt(r.point.ci_low),
            fmt_opt(r.point.ci_high),
        ])
        .map_err(&err)?;
    }
    let mut inner = w.into_inner().map_err(|e| ExperimentError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| ExperimentError::io(path, e))
}
