use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::log_model::{duplicate, LogSet};
use crate::pipeline::{run_until, Stage, Strategy, StrategyKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Timeout,
    Error(String),
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::Timeout => "timeout",
            RunStatus::Error(_) => "error",
        }
    }
}

/// Timings of one strategy at one duplication factor, averaged over the
/// repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    pub factor: usize,
    pub strategy: StrategyKind,
    pub logs: usize,
    pub entries: usize,
    pub stages: Vec<(Stage, f64)>,
    pub total_seconds: f64,
    pub status: RunStatus,
}

pub const TIMING_HEADER: &str = "factor,strategy,stage,seconds,status";

/// One line per stage plus a `total` line for each row. Failed runs only
/// report their total.
pub fn timing_csv(rows: &[ScaleRow]) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in rows {
        if r.status == RunStatus::Ok {
            for (stage, secs) in &r.stages {
                let _ = writeln!(out, "{},{},{},{:.6},ok", r.factor, r.strategy, stage, secs);
            }
        }
        let _ = writeln!(out, "{},{},total,{:.6},{}", r.factor, r.strategy, r.total_seconds, r.status.as_str());
    }
    out
}

/// Runs every strategy on `logs` duplicated by each factor. Time-outs and
/// failures are recorded in the row, not raised.
pub fn scalability_run(
    logs: &LogSet,
    factors: &[usize],
    strategies: &[Strategy],
    timeout: Option<Duration>,
    repeat: usize,
) -> Result<Vec<ScaleRow>> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("no duplication factors".into()));
    }
    if repeat == 0 {
        return Err(Error::InvalidArgument("repeat must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for &factor in factors {
        let input = duplicate(logs, factor)?;
        for strategy in strategies {
            rows.push(time_strategy(&input, factor, strategy, timeout, repeat));
        }
    }
    Ok(rows)
}

fn time_strategy(
    input: &LogSet,
    factor: usize,
    strategy: &Strategy,
    timeout: Option<Duration>,
    repeat: usize,
) -> ScaleRow {
    let mut sums: Vec<(Stage, f64)> = Vec::new();
    let mut total = 0.0;
    let mut status = RunStatus::Ok;
    for _ in 0..repeat {
        let deadline = timeout.map_or(Deadline::NONE, Deadline::after);
        let started = Instant::now();
        match run_until(input, strategy, deadline) {
            Ok(out) => {
                total += started.elapsed().as_secs_f64();
                for (i, (stage, d)) in out.timings.iter().enumerate() {
                    match sums.get_mut(i) {
                        Some((_, s)) => *s += d.as_secs_f64(),
                        None => sums.push((*stage, d.as_secs_f64())),
                    }
                }
            }
            Err(e) => {
                total = started.elapsed().as_secs_f64();
                status = match e {
                    Error::Timeout => RunStatus::Timeout,
                    other => RunStatus::Error(other.to_string()),
                };
                break;
            }
        }
    }
    let n = repeat as f64;
    if status == RunStatus::Ok {
        total /= n;
        for (_, s) in &mut sums {
            *s /= n;
        }
    }
    ScaleRow {
        factor,
        strategy: strategy.kind(),
        logs: input.len(),
        entries: input.entry_count(),
        stages: sums,
        total_seconds: total,
        status,
    }
}
