//! Structured execution logs of a component-based system.
//!
//! A [`Log`] is the ordered record of one execution; every [`LogEntry`] names
//! the component that produced it, an event-template identifier and the
//! parameter values extracted from the message. A [`LogSet`] groups the logs
//! of many executions and tracks the set of components they mention.

mod csv_format;
mod mutation;
mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv_format::{parse_logs, write_logs, CSV_HEADER};
pub use self::mutation::{mutate_negative, Mutation, NegativeSynthesizer, Negatives, DEFAULT_ATTEMPTS};
pub use self::ops::{duplicate, partition, project};

/// One structured log record.
///
/// Equality and hashing look at `(component, event, params)` only; the
/// timestamp is carried along but never compared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub component: String,
    pub event: String,
    #[serde(default)]
    pub params: Vec<String>,
}

impl LogEntry {
    pub fn new<C, E, I, P>(component: C, event: E, params: I) -> Self
    where
        C: Into<String>,
        E: Into<String>,
        I: IntoIterator<Item = P>,
        P: Into<String>,
    {
        Self {
            timestamp: None,
            component: component.into(),
            event: event.into(),
            params: params.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_timestamp(mut self, timestamp: impl Into<String>) -> Self {
        self.timestamp = Some(timestamp.into());
        self
    }
}

impl PartialEq for LogEntry {
    fn eq(&self, other: &Self) -> bool {
        self.component == other.component
            && self.event == other.event
            && self.params == other.params
    }
}

impl Eq for LogEntry {}

impl Hash for LogEntry {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.component.hash(state);
        self.event.hash(state);
        self.params.hash(state);
    }
}

/// The entries recorded during one execution, in recording order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Log {
    pub log_id: String,
    pub entries: Vec<LogEntry>,
}

impl Log {
    pub fn new(log_id: impl Into<String>, entries: Vec<LogEntry>) -> Self {
        Self {
            log_id: log_id.into(),
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct components appearing in this log.
    pub fn components(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.component.as_str()).collect()
    }
}

/// Logs of many executions keyed by `log_id`.
///
/// Iteration follows ascending `log_id`, which keeps every downstream stage
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogSet {
    logs: BTreeMap<String, Log>,
    components: BTreeSet<String>,
}

impl LogSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from logs, rejecting duplicate ids.
    pub fn from_logs<I: IntoIterator<Item = Log>>(logs: I) -> Result<Self> {
        let mut set = Self::new();
        for log in logs {
            set.insert(log)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, log: Log) -> Result<()> {
        if self.logs.contains_key(&log.log_id) {
            return Err(Error::InvalidArgument(format!(
                "duplicate log_id `{}`",
                log.log_id
            )));
        }
        self.components
            .extend(log.entries.iter().map(|e| e.component.clone()));
        self.logs.insert(log.log_id.clone(), log);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }

    pub fn get(&self, log_id: &str) -> Option<&Log> {
        self.logs.get(log_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Log> + '_ {
        self.logs.values()
    }

    pub fn components(&self) -> &BTreeSet<String> {
        &self.components
    }

    pub fn entry_count(&self) -> usize {
        self.logs.values().map(Log::len).sum()
    }

    /// Subset of logs whose ids satisfy `keep`.
    pub fn filter<F: FnMut(&Log) -> bool>(&self, mut keep: F) -> LogSet {
        let mut out = LogSet::new();
        for log in self.iter().filter(|l| keep(l)) {
            // ids are already unique
            out.insert(log.clone()).expect("unique ids");
        }
        out
    }

    pub fn into_logs(self) -> impl Iterator<Item = Log> {
        self.logs.into_values()
    }
}

impl<'a> IntoIterator for &'a LogSet {
    type Item = &'a Log;
    type IntoIter = std::collections::btree_map::Values<'a, String, Log>;

    fn into_iter(self) -> Self::IntoIter {
        self.logs.values()
    }
}

#[derive(Serialize, Deserialize)]
struct LogSetJson {
    logs: Vec<Log>,
}

impl Serialize for LogSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("LogSet", 1)?;
        s.serialize_field("logs", &self.logs.values().collect::<Vec<_>>())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for LogSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = LogSetJson::deserialize(deserializer)?;
        LogSet::from_logs(raw.logs).map_err(serde::de::Error::custom)
    }
}
