//! End-to-end inference: projection, component inference, stitching and
//! determinization, with per-stage wall times.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::automaton::Gfsm;
use crate::deadline::Deadline;
use crate::determinization::hybrid_determinize_until;
use crate::error::{Error, Result};
use crate::inference::{infer_component_until, infer_projected, InferenceConfig};
use crate::log_model::{project, Log, LogEntry, LogSet};
use crate::stitching::stitch;

/// Component name every entry is relabelled to for whole-system inference.
pub const DIRECT_COMPONENT: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Projection,
    Inference,
    Stitching,
    Determinization,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Projection, Stage::Inference, Stage::Stitching, Stage::Determinization];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Projection => "projection",
            Stage::Inference => "inference",
            Stage::Stitching => "stitching",
            Stage::Determinization => "determinization",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Prins,
    Direct,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Prins => "prins",
            StrategyKind::Direct => "direct",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prins" => Ok(StrategyKind::Prins),
            "direct" => Ok(StrategyKind::Direct),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

/// How a system model is obtained from system logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Divide and conquer; `determinize: false` stops after stitching.
    Prins {
        cfg: InferenceConfig,
        u: u32,
        determinize: bool,
    },
    /// One inference over the whole system log, components ignored.
    Direct { cfg: InferenceConfig },
}

impl Strategy {
    pub fn prins(cfg: InferenceConfig, u: u32) -> Self {
        Strategy::Prins { cfg, u, determinize: true }
    }

    pub fn direct(cfg: InferenceConfig) -> Self {
        Strategy::Direct { cfg }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Prins { .. } => StrategyKind::Prins,
            Strategy::Direct { .. } => StrategyKind::Direct,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: Gfsm,
    pub timings: Vec<(Stage, Duration)>,
}

impl PipelineOutput {
    pub fn total(&self) -> Duration {
        self.timings.iter().map(|(_, d)| *d).sum()
    }
}

/// Every entry attributed to [`DIRECT_COMPONENT`].
pub fn as_single_component(logs: &LogSet) -> LogSet {
    LogSet::from_logs(logs.iter().map(|l| {
        Log::new(
            l.log_id.clone(),
            l.entries
                .iter()
                .map(|e| LogEntry {
                    component: DIRECT_COMPONENT.to_string(),
                    ..e.clone()
                })
                .collect(),
        )
    }))
    .expect("log ids are already unique")
}

pub fn run(logs: &LogSet, strategy: &Strategy) -> Result<PipelineOutput> {
    run_until(logs, strategy, Deadline::NONE)
}

pub fn run_until(logs: &LogSet, strategy: &Strategy, deadline: Deadline) -> Result<PipelineOutput> {
    if logs.is_empty() {
        return Err(Error::NoLogs);
    }
    let mut timings = Vec::new();
    let mut timed = |stage: Stage, started: Instant| timings.push((stage, started.elapsed()));

    match *strategy {
        Strategy::Prins { cfg, u, determinize } => {
            let t = Instant::now();
            let mut projections = Vec::with_capacity(logs.components().len());
            for c in logs.components() {
                projections.push((c.clone(), project(logs, c)?));
            }
            timed(Stage::Projection, t);

            let t = Instant::now();
            let models = infer_projected(&projections, &cfg, deadline)?;
            timed(Stage::Inference, t);

            deadline.check()?;
            let t = Instant::now();
            let stitched = stitch(logs, &models)?;
            timed(Stage::Stitching, t);

            if !determinize {
                return Ok(PipelineOutput { model: stitched, timings });
            }
            let t = Instant::now();
            let model = hybrid_determinize_until(&stitched, u, deadline)?;
            timed(Stage::Determinization, t);
            Ok(PipelineOutput { model, timings })
        }
        Strategy::Direct { cfg } => {
            let t = Instant::now();
            let flat = as_single_component(logs);
            timed(Stage::Projection, t);

            let t = Instant::now();
            let model = infer_component_until(&flat, &cfg, deadline)?;
            timed(Stage::Inference, t);
            Ok(PipelineOutput { model, timings })
        }
    }
}
