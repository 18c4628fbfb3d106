//! Guarded finite state machines.
//!
//! A [`Gfsm`] reads log entries: a transition `(src, event, guard, dst)`
//! fires on an entry whose event matches and whose parameter values satisfy
//! the guard. Machines may be nondeterministic; acceptance is decided by
//! subset simulation.

mod guard;
mod io;
mod iso;

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::ops::Bound;
use std::sync::Arc;

use crate::log_model::{Log, LogEntry};

pub use self::guard::Guard;
pub use self::io::ModelJson;
pub use self::iso::isomorphic;

/// Opaque state identifier.
pub type StateId = u32;

/// Event-template identifier, shared between transitions.
pub type Event = Arc<str>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub src: StateId,
    pub event: Event,
    pub guard: Guard,
    pub dst: StateId,
}

impl Transition {
    pub fn new(src: StateId, event: impl Into<Event>, guard: Guard, dst: StateId) -> Self {
        Self {
            src,
            event: event.into(),
            guard,
            dst,
        }
    }

    fn lowest_from(src: StateId) -> Self {
        Self {
            src,
            event: Arc::from(""),
            guard: Guard::AlwaysTrue,
            dst: 0,
        }
    }
}

/// A guarded finite state machine.
///
/// Transitions are kept sorted by `(src, event, guard, dst)`, which is the
/// iteration order every algorithm in this crate relies on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gfsm {
    states: BTreeSet<StateId>,
    alphabet: BTreeSet<Event>,
    transitions: BTreeSet<Transition>,
    initial: StateId,
    finals: BTreeSet<StateId>,
    labels: BTreeMap<StateId, Vec<String>>,
}

impl Gfsm {
    /// A machine with a single, non-final initial state.
    pub fn new(initial: StateId) -> Self {
        Self {
            states: BTreeSet::from([initial]),
            alphabet: BTreeSet::new(),
            transitions: BTreeSet::new(),
            initial,
            finals: BTreeSet::new(),
            labels: BTreeMap::new(),
        }
    }

    pub fn states(&self) -> &BTreeSet<StateId> {
        &self.states
    }

    pub fn alphabet(&self) -> &BTreeSet<Event> {
        &self.alphabet
    }

    pub fn transitions(&self) -> &BTreeSet<Transition> {
        &self.transitions
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals.contains(&s)
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Provenance of a state: the ids of the states it was built from.
    pub fn label(&self, s: StateId) -> Option<&[String]> {
        self.labels.get(&s).map(Vec::as_slice)
    }

    pub fn labels(&self) -> &BTreeMap<StateId, Vec<String>> {
        &self.labels
    }

    pub fn set_label(&mut self, s: StateId, label: Vec<String>) {
        if label.is_empty() {
            self.labels.remove(&s);
        } else {
            self.labels.insert(s, label);
        }
    }

    /// Smallest id not yet used by a state.
    pub fn next_state_id(&self) -> StateId {
        self.states.last().map_or(0, |s| s + 1)
    }

    pub fn add_state(&mut self, s: StateId) {
        self.states.insert(s);
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.states.insert(s);
        self.initial = s;
    }

    pub fn set_final(&mut self, s: StateId, is_final: bool) {
        self.states.insert(s);
        if is_final {
            self.finals.insert(s);
        } else {
            self.finals.remove(&s);
        }
    }

    pub fn add_event(&mut self, event: impl Into<Event>) {
        self.alphabet.insert(event.into());
    }

    /// Adds a transition, creating its endpoint states and event. Returns
    /// false if it was already present.
    pub fn add_transition(&mut self, t: Transition) -> bool {
        self.states.insert(t.src);
        self.states.insert(t.dst);
        if !self.alphabet.contains(&t.event) {
            self.alphabet.insert(t.event.clone());
        }
        self.transitions.insert(t)
    }

    pub fn connect(&mut self, src: StateId, event: &str, guard: Guard, dst: StateId) -> bool {
        let event = self
            .alphabet
            .get(event)
            .cloned()
            .unwrap_or_else(|| Arc::from(event));
        self.add_transition(Transition { src, event, guard, dst })
    }

    /// Outgoing transitions of `s`, in transition order.
    pub fn out_edges(&self, s: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions
            .range((Bound::Included(Transition::lowest_from(s)), Bound::Unbounded))
            .take_while(move |t| t.src == s)
    }

    /// Targets reachable from `s` by reading `entry`.
    pub fn step(&self, s: StateId, entry: &LogEntry) -> BTreeSet<StateId> {
        self.step_event(s, &entry.event, &entry.params)
    }

    pub fn step_event(&self, s: StateId, event: &str, params: &[String]) -> BTreeSet<StateId> {
        self.out_edges(s)
            .filter(|t| &*t.event == event && t.guard.eval(params))
            .map(|t| t.dst)
            .collect()
    }

    /// Subset simulation over a sequence of `(event, params)` pairs.
    pub fn accepts_iter<'a, I>(&self, input: I) -> bool
    where
        I: IntoIterator<Item = (&'a str, &'a [String])>,
    {
        let mut current = BTreeSet::from([self.initial]);
        for (event, params) in input {
            let mut next = BTreeSet::new();
            for &s in &current {
                next.extend(self.step_event(s, event, params));
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        current.iter().any(|s| self.finals.contains(s))
    }

    pub fn accepts_entries(&self, entries: &[LogEntry]) -> bool {
        self.accepts_iter(entries.iter().map(|e| (e.event.as_str(), e.params.as_slice())))
    }

    pub fn accepts(&self, log: &Log) -> bool {
        self.accepts_entries(&log.entries)
    }

    /// Acceptance of a parameterless event word.
    pub fn accepts_events<S: AsRef<str>>(&self, word: &[S]) -> bool {
        self.accepts_iter(word.iter().map(|e| (e.as_ref(), &[] as &[String])))
    }

    /// No state has two same-event transitions to different targets whose
    /// guards can hold together.
    pub fn is_deterministic(&self) -> bool {
        self.nondeterministic_pair().is_none()
    }

    /// First pair of conflicting transitions, if any.
    pub fn nondeterministic_pair(&self) -> Option<(&Transition, &Transition)> {
        let mut group: Vec<&Transition> = Vec::new();
        let mut iter = self.transitions.iter().peekable();
        while let Some(t) = iter.next() {
            group.push(t);
            let boundary = match iter.peek() {
                Some(n) => n.src != t.src || n.event != t.event,
                None => true,
            };
            if boundary {
                for (i, a) in group.iter().enumerate() {
                    for b in &group[i + 1..] {
                        if a.dst != b.dst && a.guard.overlaps(&b.guard) {
                            return Some((a, b));
                        }
                    }
                }
                group.clear();
            }
        }
        None
    }

    /// States reachable from the initial state.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            for t in self.out_edges(s) {
                if seen.insert(t.dst) {
                    queue.push_back(t.dst);
                }
            }
        }
        seen
    }

    /// Renumbers states `0..n` in breadth-first order from the initial
    /// state (edges in transition order); unreachable states follow in
    /// ascending id order.
    pub fn canonical(&self) -> Gfsm {
        let mut order: Vec<StateId> = Vec::with_capacity(self.states.len());
        let mut index: BTreeMap<StateId, StateId> = BTreeMap::new();
        let mut queue = VecDeque::from([self.initial]);
        index.insert(self.initial, 0);
        order.push(self.initial);
        while let Some(s) = queue.pop_front() {
            for t in self.out_edges(s) {
                if let Entry::Vacant(slot) = index.entry(t.dst) {
                    slot.insert(order.len() as StateId);
                    order.push(t.dst);
                    queue.push_back(t.dst);
                }
            }
        }
        for &s in &self.states {
            if let Entry::Vacant(slot) = index.entry(s) {
                slot.insert(order.len() as StateId);
                order.push(s);
            }
        }
        self.renumbered(|s| index[&s])
    }

    /// Applies an injective state renaming.
    pub fn renumbered<F: Fn(StateId) -> StateId>(&self, map: F) -> Gfsm {
        Gfsm {
            states: self.states.iter().map(|&s| map(s)).collect(),
            alphabet: self.alphabet.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition {
                    src: map(t.src),
                    event: t.event.clone(),
                    guard: t.guard.clone(),
                    dst: map(t.dst),
                })
                .collect(),
            initial: map(self.initial),
            finals: self.finals.iter().map(|&s| map(s)).collect(),
            labels: self.labels.iter().map(|(&s, l)| (map(s), l.clone())).collect(),
        }
    }

    /// Drops states not reachable from the initial state.
    pub fn trimmed(&self) -> Gfsm {
        let keep = self.reachable();
        Gfsm {
            states: keep.clone(),
            alphabet: self.alphabet.clone(),
            transitions: self
                .transitions
                .iter()
                .filter(|t| keep.contains(&t.src))
                .cloned()
                .collect(),
            initial: self.initial,
            finals: self.finals.intersection(&keep).copied().collect(),
            labels: self
                .labels
                .iter()
                .filter(|(s, _)| keep.contains(s))
                .map(|(&s, l)| (s, l.clone()))
                .collect(),
        }
    }
}


#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::fixtures::{machine, value_guard};
    use super::*;
    use crate::log_model::fixtures::log_of;

    #[test]
    fn step_follows_matching_edges() {
        let m = machine(0, &[1], &[(0, "start", 1), (0, "start", 2), (1, "x", 1)]);
        let e = LogEntry::new("Master", "start", Vec::<String>::new());
        assert_eq!(m.step(0, &e), BTreeSet::from([1, 2]));
        let unknown = LogEntry::new("Master", "nope", Vec::<String>::new());
        assert!(m.step(0, &unknown).is_empty());
    }

    #[test]
    fn step_respects_guards() {
        let mut m = Gfsm::new(0);
        m.connect(0, "end", value_guard(0, &["ok"]), 1);
        m.connect(0, "end", value_guard(0, &["err"]), 2);
        assert_eq!(m.step(0, &LogEntry::new("M", "end", ["ok"])), BTreeSet::from([1]));
        assert_eq!(m.step(0, &LogEntry::new("M", "end", ["err"])), BTreeSet::from([2]));
        assert!(m.step(0, &LogEntry::new("M", "end", ["other"])).is_empty());
        assert!(m.is_deterministic());
    }

    #[test]
    fn empty_log_accepted_iff_initial_final() {
        let empty = Log::new("e", vec![]);
        let mut m = Gfsm::new(0);
        assert!(!m.accepts(&empty));
        m.set_final(0, true);
        assert!(m.accepts(&empty));
    }

    #[test]
    fn nondeterministic_acceptance() {
        // a.b accepted only through the second branch
        let m = machine(0, &[3], &[(0, "a", 1), (0, "a", 2), (2, "b", 3)]);
        assert!(m.accepts(&log_of("w", &[("C", "a"), ("C", "b")])));
        assert!(!m.accepts(&log_of("w", &[("C", "a")])));
        assert!(!m.is_deterministic());
    }

    #[test]
    fn determinism_checks() {
        let det = machine(0, &[2], &[(0, "a", 1), (0, "b", 2), (1, "a", 2)]);
        assert!(det.is_deterministic());
        // same event, same target: still a single target
        let mut same = det.clone();
        same.connect(0, "a", value_guard(0, &["v"]), 1);
        assert!(same.is_deterministic());
        let mut overlap = det.clone();
        overlap.connect(0, "a", value_guard(0, &["v"]), 2);
        assert!(!overlap.is_deterministic());
    }

    #[test]
    fn disjoint_value_sets_exhaustively_deterministic() {
        let mut m = Gfsm::new(0);
        m.connect(0, "e", value_guard(0, &["a", "b"]), 1);
        m.connect(0, "e", value_guard(0, &["c"]), 2);
        assert!(m.is_deterministic());
        // exhaustive over the small value universe
        for v in ["a", "b", "c", "d"] {
            assert!(m.step_event(0, "e", &[v.to_string()]).len() <= 1);
        }
    }

    #[test]
    fn canonical_is_bfs_numbering() {
        let m = machine(7, &[3], &[(7, "b", 3), (7, "a", 9), (9, "c", 3)]);
        let c = m.canonical();
        assert_eq!(c.initial(), 0);
        // `a` sorts before `b`, so 9 -> 1 and 3 -> 2
        assert!(c.transitions().contains(&Transition::new(0, "a", Guard::AlwaysTrue, 1)));
        assert!(c.transitions().contains(&Transition::new(0, "b", Guard::AlwaysTrue, 2)));
        assert_eq!(c.finals(), &BTreeSet::from([2]));
    }

    /// Enumerates every run explicitly (no subset sharing).
    fn brute_force_accepts(m: &Gfsm, word: &[&str]) -> bool {
        fn go(m: &Gfsm, s: StateId, word: &[&str]) -> bool {
            match word.split_first() {
                None => m.is_final(s),
                Some((e, rest)) => m
                    .transitions()
                    .iter()
                    .filter(|t| t.src == s && &*t.event == *e)
                    .any(|t| go(m, t.dst, rest)),
            }
        }
        go(m, m.initial(), word)
    }

    fn arb_machine() -> impl Strategy<Value = Gfsm> {
        (1..=8u32).prop_flat_map(|n| {
            (
                prop::collection::vec((0..n, 0..3usize, 0..n), 0..20),
                prop::collection::vec(0..n, 0..4),
            )
                .prop_map(|(edges, finals)| {
                    let mut m = Gfsm::new(0);
                    for (s, e, d) in edges {
                        m.connect(s, ["a", "b", "c"][e], Guard::AlwaysTrue, d);
                    }
                    for f in finals {
                        m.set_final(f, true);
                    }
                    m
                })
        })
    }

    proptest! {
        #[test]
        fn subset_simulation_matches_run_enumeration(
            m in arb_machine(),
            word in prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..6),
        ) {
            prop_assert_eq!(m.accepts_events(&word), brute_force_accepts(&m, &word));
        }

        #[test]
        fn deterministic_machines_step_to_at_most_one(m in arb_machine()) {
            if m.is_deterministic() {
                for &s in m.states() {
                    for e in ["a", "b", "c"] {
                        prop_assert!(m.step_event(s, e, &[]).len() <= 1);
                    }
                }
            }
        }
    }
}
