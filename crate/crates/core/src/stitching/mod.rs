//! Reassembles a system model from component models.
//!
//! Each system log is partitioned into maximal single-component runs. Every
//! run is replayed on its component model from where the previous run of the
//! same component stopped, and the traversed fragment (a slice) is appended
//! to the execution's accumulator. The per-execution machines are finally
//! joined at their initial states.

use std::collections::BTreeMap;

use crate::automaton::{Gfsm, StateId, Transition};
use crate::error::{Error, Result};
use crate::log_model::{partition, Log, LogSet};

/// Where the next slice of each component starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StitchContext {
    slice_start: BTreeMap<String, StateId>,
}

impl StitchContext {
    /// Every component starts at its model's initial state.
    pub fn new(models: &BTreeMap<String, Gfsm>) -> Self {
        Self {
            slice_start: models.iter().map(|(c, m)| (c.clone(), m.initial())).collect(),
        }
    }

    pub fn slice_start(&self, component: &str) -> Option<StateId> {
        self.slice_start.get(component).copied()
    }

    pub fn set_slice_start(&mut self, component: &str, s: StateId) {
        self.slice_start.insert(component.to_string(), s);
    }
}

/// The part of a component model traversed by one run of that component.
/// States keep their ids from the origin model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlicedModel {
    pub model: Gfsm,
    pub origin: String,
}

impl SlicedModel {
    pub fn final_state(&self) -> StateId {
        *self.model.finals().first().expect("a slice has one final state")
    }
}

fn provenance(m: &Gfsm, s: StateId) -> Vec<String> {
    match m.label(s) {
        Some(l) => l.to_vec(),
        None => vec![format!("s{s}")],
    }
}

/// Replays `l_c` on `m_c` from the component's current slice start and
/// advances the context to the state where the run stopped.
pub fn slice(m_c: &Gfsm, ctx: &mut StitchContext, l_c: &Log) -> Result<SlicedModel> {
    let first = l_c.entries.first().ok_or(Error::EmptyLog)?;
    let component = first.component.as_str();
    if l_c.entries.iter().any(|e| e.component != component) {
        return Err(Error::InvalidArgument(format!(
            "slice of log `{}` spans several components",
            l_c.log_id
        )));
    }
    let start = ctx.slice_start(component).unwrap_or(m_c.initial());

    let mut sl = Gfsm::new(start);
    sl.set_label(start, provenance(m_c, start));
    let mut cur = start;
    for entry in &l_c.entries {
        let mut enabled = m_c
            .out_edges(cur)
            .filter(|t| *t.event == *entry.event && t.guard.eval(&entry.params));
        let t = enabled.next().ok_or_else(|| Error::SliceFailure {
            component: component.to_string(),
            state: cur,
            event: entry.event.clone(),
        })?;
        if enabled.any(|u| u.dst != t.dst) {
            return Err(Error::NondeterministicModel(component.to_string()));
        }
        if !sl.states().contains(&t.dst) {
            sl.set_label(t.dst, provenance(m_c, t.dst));
        }
        sl.add_transition(t.clone());
        cur = t.dst;
    }
    sl.set_final(cur, true);
    ctx.set_slice_start(component, cur);
    Ok(SlicedModel {
        model: sl,
        origin: component.to_string(),
    })
}

/// Glues `m_sl` after `m_a` by identifying the final state of `m_a` with
/// the initial state of `m_sl`. The result's only final state is the
/// (renamed) final state of the slice.
pub fn append(m_a: Option<Gfsm>, m_sl: &SlicedModel) -> Result<Gfsm> {
    let Some(m_a) = m_a else {
        return Ok(m_sl.model.clone());
    };
    if m_a.finals().len() != 1 {
        return Err(Error::FinalStateCount(m_a.finals().len()));
    }
    let joint = *m_a.finals().first().expect("one final");
    let sl = &m_sl.model;

    let mut ids: BTreeMap<StateId, StateId> = BTreeMap::new();
    let mut fresh = m_a.next_state_id();
    for &s in sl.states() {
        if s == sl.initial() {
            ids.insert(s, joint);
        } else {
            ids.insert(s, fresh);
            fresh += 1;
        }
    }

    let mut out = m_a.clone();
    out.set_final(joint, false);
    let mut joint_label = provenance(&m_a, joint);
    joint_label.extend(provenance(sl, sl.initial()));
    out.set_label(joint, joint_label);
    for (&s, &n) in &ids {
        if s != sl.initial() {
            out.add_state(n);
            out.set_label(n, provenance(sl, s));
        }
    }
    for e in sl.alphabet() {
        out.add_event(e.clone());
    }
    for t in sl.transitions() {
        out.add_transition(Transition::new(ids[&t.src], t.event.clone(), t.guard.clone(), ids[&t.dst]));
    }
    out.set_final(ids[&m_sl.final_state()], true);
    Ok(out)
}

/// Identifies the initial states of all models. States are renumbered:
/// the shared initial state is 0 and the remaining states of each model
/// follow in input order.
pub fn union<'a, I>(models: I) -> Result<Gfsm>
where
    I: IntoIterator<Item = &'a Gfsm>,
{
    let mut out = Gfsm::new(0);
    let mut initial_label = Vec::new();
    let mut fresh: StateId = 1;
    let mut any = false;
    for m in models {
        any = true;
        let mut ids: BTreeMap<StateId, StateId> = BTreeMap::new();
        for &s in m.states() {
            if s == m.initial() {
                ids.insert(s, 0);
            } else {
                ids.insert(s, fresh);
                out.set_label(fresh, provenance(m, s));
                fresh += 1;
            }
        }
        initial_label.extend(provenance(m, m.initial()));
        for e in m.alphabet() {
            out.add_event(e.clone());
        }
        for &s in m.states() {
            out.add_state(ids[&s]);
        }
        for &f in m.finals() {
            out.set_final(ids[&f], true);
        }
        for t in m.transitions() {
            out.add_transition(Transition::new(ids[&t.src], t.event.clone(), t.guard.clone(), ids[&t.dst]));
        }
    }
    if !any {
        return Err(Error::InvalidArgument("union of no models".into()));
    }
    out.set_label(0, initial_label);
    Ok(out)
}

fn check_models(system_logs: &LogSet, models: &BTreeMap<String, Gfsm>) -> Result<()> {
    for c in system_logs.components() {
        let m = models.get(c).ok_or_else(|| Error::MissingModel(c.clone()))?;
        if !m.is_deterministic() {
            return Err(Error::NondeterministicModel(c.clone()));
        }
    }
    Ok(())
}

/// The accumulated model of a single execution.
pub fn stitch_log(log: &Log, models: &BTreeMap<String, Gfsm>) -> Result<Gfsm> {
    let mut ctx = StitchContext::new(models);
    let mut m_a = None;
    for (component, part) in partition(log)? {
        let m_c = models.get(&component).ok_or_else(|| Error::MissingModel(component.clone()))?;
        let sl = slice(m_c, &mut ctx, &part)?;
        m_a = Some(append(m_a, &sl)?);
    }
    Ok(m_a.expect("partition of a non-empty log has parts"))
}

/// Per-execution models of `system_logs`, in log-id order.
pub fn stitch_each(system_logs: &LogSet, models: &BTreeMap<String, Gfsm>) -> Result<Vec<Gfsm>> {
    check_models(system_logs, models)?;
    system_logs.iter().map(|l| stitch_log(l, models)).collect()
}

/// Union of the per-execution models; may be nondeterministic.
pub fn stitch(system_logs: &LogSet, models: &BTreeMap<String, Gfsm>) -> Result<Gfsm> {
    if system_logs.is_empty() {
        return Err(Error::NoLogs);
    }
    let per_log = stitch_each(system_logs, models)?;
    Ok(union(&per_log)?.canonical())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use std::collections::BTreeMap;

    use crate::automaton::fixtures::{machine, value_guard};
    use crate::automaton::Gfsm;

    /// Master model with the state numbering of the running example.
    pub(crate) fn master() -> Gfsm {
        let mut m = machine(8, &[11, 12], &[(8, "start", 9), (9, "working", 10)]);
        m.connect(10, "end", value_guard(0, &["ok"]), 11);
        m.connect(10, "end", value_guard(0, &["err"]), 12);
        m
    }

    /// Job model with the state numbering of the running example.
    pub(crate) fn job() -> Gfsm {
        machine(
            13,
            &[14, 17],
            &[
                (13, "init", 14),
                (14, "try", 15),
                (15, "pass", 14),
                (15, "wait", 16),
                (16, "wait", 16),
                (16, "fail", 17),
            ],
        )
    }

    pub(crate) fn models() -> BTreeMap<String, Gfsm> {
        BTreeMap::from([("Master".to_string(), master()), ("Job".to_string(), job())])
    }
}
