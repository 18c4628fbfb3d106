//! Per-component model inference with a k-Tails backend.

mod ktails;

use std::collections::BTreeMap;

use crate::automaton::Gfsm;
use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::log_model::{project, LogSet};
use crate::pool::parallel_map;

use self::ktails::MergeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceConfig {
    /// Future horizon; `usize::MAX` disables generalisation.
    pub k: usize,
    pub max_workers: usize,
    pub guard_synthesis: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_workers: 1,
            guard_synthesis: true,
        }
    }
}

impl InferenceConfig {
    fn validate(&self) -> Result<()> {
        if self.max_workers == 0 {
            return Err(Error::InvalidArgument("max_workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Prefix tree acceptor of `logs`, states numbered breadth-first.
pub fn build_pta(logs: &LogSet) -> Result<Gfsm> {
    if logs.is_empty() {
        return Err(Error::NoLogs);
    }
    MergeGraph::prefix_tree(logs, true).to_gfsm()
}

pub fn infer_component(logs: &LogSet, cfg: &InferenceConfig) -> Result<Gfsm> {
    infer_component_until(logs, cfg, Deadline::NONE)
}

pub fn infer_component_until(logs: &LogSet, cfg: &InferenceConfig, deadline: Deadline) -> Result<Gfsm> {
    cfg.validate()?;
    if logs.is_empty() {
        return Err(Error::NoLogs);
    }
    if logs.components().len() > 1 {
        let names: Vec<&str> = logs.components().iter().map(String::as_str).collect();
        return Err(Error::InvalidArgument(format!(
            "component inference expects one component, got {}",
            names.join(", ")
        )));
    }
    let mut graph = MergeGraph::prefix_tree(logs, cfg.guard_synthesis);
    graph.k_tails(cfg.k, deadline)?;
    let m = graph.to_gfsm()?;
    if let Some((a, b)) = m.nondeterministic_pair() {
        return Err(Error::Internal(format!(
            "inferred model is nondeterministic at state {} on `{}` ({} vs {})",
            a.src, a.event, a.dst, b.dst
        )));
    }
    Ok(m)
}

pub fn infer_all(system_logs: &LogSet, cfg: &InferenceConfig) -> Result<BTreeMap<String, Gfsm>> {
    infer_all_until(system_logs, cfg, Deadline::NONE)
}

/// Projects `system_logs` on every component and infers the component
/// models on at most `cfg.max_workers` threads.
pub fn infer_all_until(
    system_logs: &LogSet,
    cfg: &InferenceConfig,
    deadline: Deadline,
) -> Result<BTreeMap<String, Gfsm>> {
    cfg.validate()?;
    if system_logs.is_empty() {
        return Err(Error::NoLogs);
    }
    let mut projections = Vec::with_capacity(system_logs.components().len());
    for c in system_logs.components() {
        projections.push((c.clone(), project(system_logs, c)?));
    }
    infer_projected(&projections, cfg, deadline)
}

/// Infers one model per already-projected component log set.
pub fn infer_projected(
    projections: &[(String, LogSet)],
    cfg: &InferenceConfig,
    deadline: Deadline,
) -> Result<BTreeMap<String, Gfsm>> {
    cfg.validate()?;
    let results = parallel_map(projections, cfg.max_workers, |(_, logs)| {
        infer_component_until(logs, cfg, deadline)
    });
    let mut models = BTreeMap::new();
    for ((component, _), r) in projections.iter().zip(results) {
        match r {
            Ok(m) => {
                models.insert(component.clone(), m);
            }
            Err(Error::Timeout) => return Err(Error::Timeout),
            Err(e) => {
                return Err(Error::Component {
                    component: component.clone(),
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(models)
}
