//! Experiment driver: sweeps over a base configuration, latency and
//! fast-commit metrics, CSV output.
//!
//! Experiment files use the simulation `key = value` format plus:
//!
//! ```text
//! name = scalability
//! sweep = n                # load | n | crashed
//! values = 4,5,6,7,8,9
//! repetitions = 3          # seeds seed, seed+1, ...
//! ```
//!
//! A `crashed = k` sweep point crashes the k highest-numbered nodes at time 0.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::sim::{self, ConfigError, LatencyRecord, SimConfig, SimOutput};
use crate::utxo::TxResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SweepVar {
    Load,
    N,
    Crashed,
}

impl SweepVar {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "load" => Some(SweepVar::Load),
            "n" => Some(SweepVar::N),
            "crashed" => Some(SweepVar::Crashed),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Load => "load",
            SweepVar::N => "n",
            SweepVar::Crashed => "crashed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SimConfig,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub repetitions: u32,
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error("sweep has no values")]
    EmptySweep,
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("invalid value for `{0}`")]
    BadValue(&'static str),
    #[error("sweep point {0} is invalid: {1}")]
    BadPoint(f64, ConfigError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut name = None;
        let mut sweep = None;
        let mut values = None;
        let mut repetitions = 1;
        let mut rest = String::new();
        for raw in text.lines() {
            let body = raw.split('#').next().unwrap_or("").trim();
            let Some((k, v)) = body.split_once('=') else {
                rest.push_str(raw);
                rest.push('\n');
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            match k {
                "name" => name = Some(v.to_string()),
                "sweep" => sweep = Some(SweepVar::parse(v).ok_or(SpecError::BadValue("sweep"))?),
                "values" => {
                    values = Some(if v.is_empty() {
                        Vec::new()
                    } else {
                        v.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| SpecError::BadValue("values"))?
                    })
                }
                "repetitions" => repetitions = v.parse().map_err(|_| SpecError::BadValue("repetitions"))?,
                _ => {
                    rest.push_str(raw);
                    rest.push('\n');
                }
            }
        }
        let spec = ExperimentSpec {
            name: name.ok_or(SpecError::Missing("name"))?,
            base: SimConfig::parse(&rest)?,
            sweep: sweep.ok_or(SpecError::Missing("sweep"))?,
            values: values.ok_or(SpecError::Missing("values"))?,
            repetitions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.values.is_empty() {
            return Err(SpecError::EmptySweep);
        }
        if self.repetitions == 0 {
            return Err(SpecError::NoRepetitions);
        }
        for &v in &self.values {
            self.point(v, 0).validate().map_err(|e| SpecError::BadPoint(v, e))?;
        }
        Ok(())
    }

    /// Configuration of one sweep point and repetition.
    pub fn point(&self, value: f64, repetition: u32) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.seed = self.base.seed.wrapping_add(repetition as u64);
        match self.sweep {
            SweepVar::Load => cfg.load = value,
            SweepVar::N => {
                cfg.n = value as u32;
                cfg.f = (cfg.n.max(1) - 1) / 3;
            }
            SweepVar::Crashed => {
                let k = value as u32;
                cfg.crashes = (0..k.min(cfg.n)).map(|i| (cfg.n - 1 - i, 0.0)).collect();
            }
        }
        cfg
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub submitted: usize,
    pub committed: usize,
    pub fast_committed: usize,
    pub fast_rate: f64,
    pub mean_formal_time: f64,
    pub median_formal_time: f64,
    pub p95_formal_time: f64,
    pub mean_formal_rounds: f64,
    pub median_formal_rounds: f64,
    pub p95_formal_rounds: f64,
    pub mean_fast_time: f64,
    pub mean_fast_rounds: f64,
    /// Committed transactions per time unit.
    pub throughput: f64,
    pub failed: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Nearest-rank quantile of an unsorted sample.
fn quantile(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

impl MetricsSummary {
    /// Summary of complete records; records without a formal commit are
    /// counted as submitted only.
    pub fn from_records(records: &[LatencyRecord], duration: f64) -> Self {
        let done: Vec<&LatencyRecord> = records.iter().filter(|r| r.result.is_some()).collect();
        let formal_t: Vec<f64> = done.iter().map(|r| r.commit_time.unwrap() - r.submit_time).collect();
        let formal_r: Vec<f64> = done.iter().map(|r| (r.commit_round.unwrap() - r.submit_round) as f64).collect();
        let fast: Vec<&&LatencyRecord> = done.iter().filter(|r| r.fast_result.is_some()).collect();
        let fast_t: Vec<f64> = fast.iter().map(|r| r.fast_time.unwrap() - r.submit_time).collect();
        let fast_r: Vec<f64> = fast.iter().map(|r| (r.fast_round.unwrap() - r.submit_round) as f64).collect();
        MetricsSummary {
            submitted: records.len(),
            committed: done.len(),
            fast_committed: fast.len(),
            fast_rate: if done.is_empty() { f64::NAN } else { fast.len() as f64 / done.len() as f64 },
            mean_formal_time: mean(&formal_t),
            median_formal_time: quantile(&formal_t, 0.5),
            p95_formal_time: quantile(&formal_t, 0.95),
            mean_formal_rounds: mean(&formal_r),
            median_formal_rounds: quantile(&formal_r, 0.5),
            p95_formal_rounds: quantile(&formal_r, 0.95),
            mean_fast_time: mean(&fast_t),
            mean_fast_rounds: mean(&fast_r),
            throughput: if duration > 0.0 { done.len() as f64 / duration } else { f64::NAN },
            failed: done.iter().filter(|r| r.result == Some(TxResult::Failed)).count(),
        }
    }

    pub fn of_run(out: &SimOutput) -> Self {
        Self::from_records(&out.latencies, out.end_time)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub sweep_value: f64,
    pub seed: u64,
    pub config_hash: String,
    pub truncated: bool,
    pub violations: usize,
    pub metrics: MetricsSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub sweep: SweepVar,
    pub rows: Vec<Row>,
}

fn run_point(cfg: &SimConfig, value: f64) -> Row {
    let out = sim::run(cfg).expect("validated");
    Row {
        sweep_value: value,
        seed: cfg.seed,
        config_hash: cfg.hash().to_hex(),
        truncated: out.truncated,
        violations: out.violations(),
        metrics: MetricsSummary::of_run(&out),
    }
}

/// Runs every sweep point and repetition, in parallel across threads.
/// Results do not depend on the degree of parallelism.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, SpecError> {
    spec.validate()?;
    let jobs: Vec<(f64, SimConfig)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.repetitions).map(move |k| (v, spec.point(v, k))))
        .collect();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len()).max(1);
    let mut rows: Vec<Option<Row>> = vec![None; jobs.len()];
    std::thread::scope(|s| {
        let chunks: Vec<_> = rows.chunks_mut(jobs.len().div_ceil(threads)).zip(jobs.chunks(jobs.len().div_ceil(threads))).collect();
        for (slots, work) in chunks {
            s.spawn(move || {
                for (slot, (v, cfg)) in slots.iter_mut().zip(work) {
                    *slot = Some(run_point(cfg, *v));
                }
            });
        }
    });
    Ok(ExperimentResult { name: spec.name.clone(), sweep: spec.sweep, rows: rows.into_iter().map(|r| r.expect("ran")).collect() })
}

/// Metric columns shared by experiment rows and single-run summaries.
pub const METRIC_COLUMNS: &str = "submitted,committed,fast_committed,failed,fast_rate,\
mean_formal_time,median_formal_time,p95_formal_time,mean_formal_rounds,median_formal_rounds,p95_formal_rounds,\
mean_fast_time,mean_fast_rounds,throughput";

pub const CSV_HEADER: &str = "sweep,value,seed,config_hash,truncated,violations,";

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.6}")
    }
}

impl MetricsSummary {
    /// Values in [`METRIC_COLUMNS`] order; undefined means are left empty.
    pub fn csv_values(&self) -> String {
        [
            self.submitted.to_string(),
            self.committed.to_string(),
            self.fast_committed.to_string(),
            self.failed.to_string(),
            num(self.fast_rate),
            num(self.mean_formal_time),
            num(self.median_formal_time),
            num(self.p95_formal_time),
            num(self.mean_formal_rounds),
            num(self.median_formal_rounds),
            num(self.p95_formal_rounds),
            num(self.mean_fast_time),
            num(self.mean_fast_rounds),
            num(self.throughput),
        ]
        .join(",")
    }
}

pub const LATENCY_HEADER: &str =
    "tx,node,submit_time,submit_round,fast_time,fast_round,fast_result,commit_time,commit_round,result";

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn result_name(r: Option<TxResult>) -> &'static str {
    match r {
        Some(TxResult::Success) => "success",
        Some(TxResult::Failed) => "failed",
        None => "",
    }
}

/// Raw latency records as CSV; the summary is recomputable from this alone.
pub fn latencies_csv(records: &[LatencyRecord]) -> String {
    let mut s = format!("{LATENCY_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.tx,
            r.node,
            r.submit_time,
            r.submit_round,
            opt(r.fast_time),
            opt(r.fast_round),
            result_name(r.fast_result),
            opt(r.commit_time),
            opt(r.commit_round),
            result_name(r.result),
        );
    }
    s
}

pub fn latencies_json_lines(records: &[LatencyRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("serializable"));
        s.push('\n');
    }
    s
}

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}{METRIC_COLUMNS}\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.sweep.name(),
                r.sweep_value,
                r.seed,
                r.config_hash,
                r.truncated,
                r.violations,
                r.metrics.csv_values()
            );
        }
        s
    }

    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&serde_json::to_string(r).expect("serializable"));
            s.push('\n');
        }
        s
    }

    /// Mean of each row metric per sweep value, in sweep order.
    pub fn aggregate(&self) -> Vec<(f64, MetricsSummary, bool)> {
        let mut values: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !values.contains(&r.sweep_value) {
                values.push(r.sweep_value);
            }
        }
        values
            .into_iter()
            .map(|v| {
                let rows: Vec<&Row> = self.rows.iter().filter(|r| r.sweep_value == v).collect();
                let avg = |f: &dyn Fn(&MetricsSummary) -> f64| mean(&rows.iter().map(|r| f(&r.metrics)).filter(|x| !x.is_nan()).collect::<Vec<_>>());
                let total = |f: &dyn Fn(&MetricsSummary) -> usize| rows.iter().map(|r| f(&r.metrics)).sum::<usize>();
                let committed = total(&|m| m.committed);
                let fast = total(&|m| m.fast_committed);
                let m = MetricsSummary {
                    submitted: total(&|m| m.submitted),
                    committed,
                    fast_committed: fast,
                    failed: total(&|m| m.failed),
                    fast_rate: if committed == 0 { f64::NAN } else { fast as f64 / committed as f64 },
                    mean_formal_time: avg(&|m| m.mean_formal_time),
                    median_formal_time: avg(&|m| m.median_formal_time),
                    p95_formal_time: avg(&|m| m.p95_formal_time),
                    mean_formal_rounds: avg(&|m| m.mean_formal_rounds),
                    median_formal_rounds: avg(&|m| m.median_formal_rounds),
                    p95_formal_rounds: avg(&|m| m.p95_formal_rounds),
                    mean_fast_time: avg(&|m| m.mean_fast_time),
                    mean_fast_rounds: avg(&|m| m.mean_fast_rounds),
                    throughput: avg(&|m| m.throughput),
                };
                (v, m, rows.iter().any(|r| r.truncated))
            })
            .collect()
    }

    /// Human-readable table of the per-point aggregates.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>8} {:>10} {:>10} {:>12} {:>12} {:>12} {:>12}\n",
            self.sweep.name(),
            "committed",
            "fast_rate",
            "formal_rnds",
            "fast_rnds",
            "formal_time",
            "fast_time"
        );
        for (v, m, truncated) in self.aggregate() {
            let _ = writeln!(
                s,
                "{:>8} {:>10} {:>10.3} {:>12.2} {:>12.2} {:>12.2} {:>12.2}{}",
                v,
                m.committed,
                m.fast_rate,
                m.mean_formal_rounds,
                m.mean_fast_rounds,
                m.mean_formal_time,
                m.mean_fast_time,
                if truncated { "  (truncated)" } else { "" }
            );
        }
        s
    }
}
