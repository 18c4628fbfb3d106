use crate::error::{Error, Result};

use super::{Log, LogSet};

/// Keeps only the entries of `component`, preserving order.
///
/// Logs that end up empty are dropped: a component absent from an execution
/// contributes nothing to that execution's model.
pub fn project(logs: &LogSet, component: &str) -> Result<LogSet> {
    if !logs.components().contains(component) {
        return Err(Error::UnknownComponent(component.to_string()));
    }
    let mut out = LogSet::new();
    for log in logs {
        let entries: Vec<_> = log
            .entries
            .iter()
            .filter(|e| e.component == component)
            .cloned()
            .collect();
        if !entries.is_empty() {
            out.insert(Log::new(log.log_id.clone(), entries))?;
        }
    }
    Ok(out)
}

/// Splits a log into maximal runs of entries produced by the same component.
pub fn partition(log: &Log) -> Result<Vec<(String, Log)>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut parts: Vec<(String, Log)> = Vec::new();
    for entry in &log.entries {
        match parts.last_mut() {
            Some((c, part)) if *c == entry.component => part.entries.push(entry.clone()),
            _ => parts.push((
                entry.component.clone(),
                Log::new(log.log_id.clone(), vec![entry.clone()]),
            )),
        }
    }
    Ok(parts)
}

/// Repeats every log `factor` times under fresh ids `<log_id>#<copy>`.
pub fn duplicate(logs: &LogSet, factor: usize) -> Result<LogSet> {
    if factor == 0 {
        return Err(Error::InvalidArgument("duplication factor must be at least 1".into()));
    }
    let mut out = LogSet::new();
    for log in logs {
        for copy in 0..factor {
            out.insert(Log::new(format!("{}#{copy}", log.log_id), log.entries.clone()))?;
        }
    }
    Ok(out)
}
