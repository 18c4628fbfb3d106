//! Hybrid determinization: bounded target-state merging followed by the
//! subset construction for whatever nondeterminism remains.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::automaton::{Event, Gfsm, Guard, StateId, Transition};
use crate::deadline::Deadline;
use crate::error::Result;

/// How many merge operations each state has been through.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeLedger {
    merge_count: BTreeMap<StateId, u32>,
}

impl MergeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, s: StateId) -> u32 {
        self.merge_count.get(&s).copied().unwrap_or(0)
    }

    pub fn set(&mut self, s: StateId, count: u32) {
        if count == 0 {
            self.merge_count.remove(&s);
        } else {
            self.merge_count.insert(s, count);
        }
    }

    /// Records one merge operation whose survivor is `survivor`.
    pub fn record_merge<I: IntoIterator<Item = StateId>>(&mut self, survivor: StateId, merged: I) {
        let max = merged
            .into_iter()
            .chain([survivor])
            .map(|s| self.count(s))
            .max()
            .unwrap_or(0);
        self.set(survivor, max + 1);
    }
}

type Label = u32;

/// Dense adjacency view used while merging; labels are `(event, guard)`
/// pairs interned in sorted order so scans follow transition order.
struct Work {
    ids: Vec<StateId>,
    alive: Vec<bool>,
    out: Vec<BTreeSet<(Label, usize)>>,
    inn: Vec<BTreeSet<(usize, Label)>>,
    finals: Vec<bool>,
    provenance: Vec<Option<Vec<String>>>,
    count: Vec<u32>,
    labels: Vec<(Event, Guard)>,
    initial: usize,
    alphabet: BTreeSet<Event>,
    /// Sources that currently hold a mergeable conflict, for the threshold
    /// the index was built with.
    conflicted: BTreeSet<usize>,
    limit: u32,
}

impl Work {
    fn new(m: &Gfsm, ledger: &MergeLedger) -> Self {
        let ids: Vec<StateId> = m.states().iter().copied().collect();
        let index: HashMap<StateId, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let labels: Vec<(Event, Guard)> = m
            .transitions()
            .iter()
            .map(|t| (t.event.clone(), t.guard.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let label_of: HashMap<(&Event, &Guard), Label> =
            labels.iter().enumerate().map(|(i, (e, g))| ((e, g), i as Label)).collect();
        let n = ids.len();
        let mut out = vec![BTreeSet::new(); n];
        let mut inn = vec![BTreeSet::new(); n];
        for t in m.transitions() {
            let (s, d, l) = (index[&t.src], index[&t.dst], label_of[&(&t.event, &t.guard)]);
            out[s].insert((l, d));
            inn[d].insert((s, l));
        }
        Work {
            finals: ids.iter().map(|s| m.is_final(*s)).collect(),
            provenance: ids.iter().map(|s| m.label(*s).map(<[String]>::to_vec)).collect(),
            count: ids.iter().map(|s| ledger.count(*s)).collect(),
            alive: vec![true; n],
            initial: index[&m.initial()],
            alphabet: m.alphabet().clone(),
            ids,
            out,
            inn,
            labels,
            conflicted: BTreeSet::new(),
            limit: 0,
        }
    }

    fn with_limit(m: &Gfsm, ledger: &MergeLedger, u: u32) -> Self {
        let mut w = Work::new(m, ledger);
        w.limit = u;
        w.conflicted = (0..w.ids.len()).filter(|&s| w.first_conflict(s).is_some()).collect();
        w
    }

    fn first_conflict(&self, s: usize) -> Option<Vec<usize>> {
        let mut edges = self.out[s].iter().peekable();
        while let Some(&(label, d)) = edges.next() {
            let mut group = vec![d];
            while let Some(&&(l, d2)) = edges.peek() {
                if l != label {
                    break;
                }
                group.push(d2);
                edges.next();
            }
            group.retain(|&t| self.count[t] < self.limit);
            if group.len() > 1 {
                return Some(group);
            }
        }
        None
    }

    /// First conflict in transition order. Only sources in the index can
    /// hold one, so the scan starts there.
    fn next_conflict(&self) -> Vec<usize> {
        self.conflicted
            .iter()
            .find_map(|&s| self.first_conflict(s))
            .unwrap_or_default()
    }

    /// Merges and refreshes the index: only the survivor and its
    /// predecessors can change conflict status.
    fn merge_indexed(&mut self, group: &[usize]) {
        let survivor = self.merge(group);
        for &x in group {
            if x != survivor {
                self.conflicted.remove(&x);
            }
        }
        let touched: BTreeSet<usize> = self.inn[survivor].iter().map(|&(s, _)| s).chain([survivor]).collect();
        for s in touched {
            if self.first_conflict(s).is_some() {
                self.conflicted.insert(s);
            } else {
                self.conflicted.remove(&s);
            }
        }
    }

    /// Full rescan in transition order.
    #[cfg(test)]
    fn literal_targets_with_limit(&self, u: u32) -> Vec<usize> {
        for s in (0..self.ids.len()).filter(|&s| self.alive[s]) {
            let mut edges = self.out[s].iter().peekable();
            while let Some(&(label, d)) = edges.next() {
                let mut group = vec![d];
                while let Some(&&(l, d2)) = edges.peek() {
                    if l != label {
                        break;
                    }
                    group.push(d2);
                    edges.next();
                }
                group.retain(|&t| self.count[t] < u);
                if group.len() > 1 {
                    return group;
                }
            }
        }
        Vec::new()
    }

    /// Merges `group` into its lowest member in one operation.
    fn merge(&mut self, group: &[usize]) -> usize {
        let survivor = *group.iter().min().expect("non-empty merge group");
        let count = group.iter().map(|&s| self.count[s]).max().unwrap_or(0) + 1;
        let mut provenance = Vec::new();
        for &x in group {
            provenance.extend(
                self.provenance[x]
                    .clone()
                    .unwrap_or_else(|| vec![format!("s{}", self.ids[x])]),
            );
        }
        for &x in group.iter().filter(|&&x| x != survivor) {
            for (l, d) in std::mem::take(&mut self.out[x]) {
                self.inn[d].remove(&(x, l));
                let d = if d == x { survivor } else { d };
                self.out[survivor].insert((l, d));
                self.inn[d].insert((survivor, l));
            }
            for (src, l) in std::mem::take(&mut self.inn[x]) {
                self.out[src].remove(&(l, x));
                let src = if src == x { survivor } else { src };
                self.out[src].insert((l, survivor));
                self.inn[survivor].insert((src, l));
            }
            self.finals[survivor] |= self.finals[x];
            self.alive[x] = false;
            if self.initial == x {
                self.initial = survivor;
            }
        }
        self.count[survivor] = count;
        self.provenance[survivor] = Some(provenance);
        survivor
    }

    fn to_gfsm(&self) -> (Gfsm, MergeLedger) {
        let mut m = Gfsm::new(self.ids[self.initial]);
        let mut ledger = MergeLedger::new();
        for e in &self.alphabet {
            m.add_event(e.clone());
        }
        for s in (0..self.ids.len()).filter(|&s| self.alive[s]) {
            let id = self.ids[s];
            m.add_state(id);
            m.set_final(id, self.finals[s]);
            if let Some(p) = &self.provenance[s] {
                m.set_label(id, p.clone());
            }
            ledger.set(id, self.count[s]);
            for &(l, d) in &self.out[s] {
                let (e, g) = &self.labels[l as usize];
                m.add_transition(Transition::new(id, e.clone(), g.clone(), self.ids[d]));
            }
        }
        (m, ledger)
    }
}

/// The first set of same-`(event, guard)` targets of one source state, in
/// transition order, after dropping states merged `u` times or more, that
/// still has two or more members. Empty if there is none.
pub fn get_target_states_with_limit(m: &Gfsm, ledger: &MergeLedger, u: u32) -> BTreeSet<StateId> {
    let work = Work::with_limit(m, ledger, u);
    work.next_conflict().into_iter().map(|i| work.ids[i]).collect()
}

/// Merges conflicting targets while their merge counts stay below `u`,
/// then falls back to the subset construction.
pub fn hybrid_determinize(m: &Gfsm, u: u32) -> Gfsm {
    hybrid_determinize_until(m, u, Deadline::NONE).expect("no deadline")
}

pub fn hybrid_determinize_until(m: &Gfsm, u: u32, deadline: Deadline) -> Result<Gfsm> {
    let (merged, _) = merge_with_limit(m, &MergeLedger::new(), u, deadline)?;
    if merged.is_deterministic() {
        return Ok(merged.canonical());
    }
    powerset_until(&merged, deadline)
}

/// The merging phase alone, returning the updated ledger as well.
pub fn merge_with_limit(m: &Gfsm, ledger: &MergeLedger, u: u32, deadline: Deadline) -> Result<(Gfsm, MergeLedger)> {
    let mut work = Work::with_limit(m, ledger, u);
    loop {
        deadline.check()?;
        let group = work.next_conflict();
        if group.is_empty() {
            break;
        }
        work.merge_indexed(&group);
    }
    Ok(work.to_gfsm())
}

pub fn powerset(m: &Gfsm) -> Gfsm {
    powerset_until(m, Deadline::NONE).expect("no deadline")
}

/// Subset construction over `(event, guard)` labels.
///
/// Distinct guards on the same event that can hold together are fused into
/// one transition under their join; the result is exact when same-event
/// guards are equal or pairwise disjoint and over-approximates otherwise.
pub fn powerset_until(m: &Gfsm, deadline: Deadline) -> Result<Gfsm> {
    let labelled = !m.labels().is_empty();
    let start = BTreeSet::from([m.initial()]);
    let mut index: BTreeMap<BTreeSet<StateId>, StateId> = BTreeMap::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([start]);
    let mut out = Gfsm::new(0);
    for e in m.alphabet() {
        out.add_event(e.clone());
    }
    while let Some(subset) = queue.pop_front() {
        deadline.check()?;
        let id = index[&subset];
        if subset.iter().any(|s| m.is_final(*s)) {
            out.set_final(id, true);
        }
        if labelled {
            let prov: Vec<String> = subset
                .iter()
                .flat_map(|&s| m.label(s).map(<[String]>::to_vec).unwrap_or_else(|| vec![format!("s{s}")]))
                .collect();
            out.set_label(id, prov);
        }

        let mut by_event: BTreeMap<&Event, Vec<(Guard, BTreeSet<StateId>)>> = BTreeMap::new();
        for &s in &subset {
            for t in m.out_edges(s) {
                let groups = by_event.entry(&t.event).or_default();
                match groups.iter_mut().find(|(g, _)| *g == t.guard) {
                    Some((_, dsts)) => {
                        dsts.insert(t.dst);
                    }
                    None => groups.push((t.guard.clone(), BTreeSet::from([t.dst]))),
                }
            }
        }
        for (event, groups) in by_event {
            for (guard, dsts) in fuse_overlapping(groups) {
                let next = match index.get(&dsts) {
                    Some(&n) => n,
                    None => {
                        let n = index.len() as StateId;
                        index.insert(dsts.clone(), n);
                        queue.push_back(dsts);
                        n
                    }
                };
                out.add_transition(Transition::new(id, event.clone(), guard, next));
            }
        }
    }
    Ok(out)
}

fn fuse_overlapping(mut groups: Vec<(Guard, BTreeSet<StateId>)>) -> Vec<(Guard, BTreeSet<StateId>)> {
    loop {
        let clash = (0..groups.len())
            .flat_map(|i| (i + 1..groups.len()).map(move |j| (i, j)))
            .find(|&(i, j)| groups[i].0.overlaps(&groups[j].0));
        let Some((i, j)) = clash else { break };
        let (g, d) = groups.remove(j);
        groups[i].0 = groups[i].0.join(&g);
        groups[i].1.extend(d);
    }
    groups.sort();
    groups
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::automaton::fixtures::{machine, value_guard};
    use crate::automaton::isomorphic;
    use crate::log_model::fixtures::running_example;
    use crate::stitching::{fixtures, stitch, stitch_log};

    fn words(alphabet: &[&str], max_len: usize) -> Vec<Vec<String>> {
        let mut out = vec![vec![]];
        let mut frontier: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..max_len {
            let next: Vec<Vec<String>> = frontier
                .iter()
                .flat_map(|w| {
                    alphabet.iter().map(move |a| {
                        let mut v = w.clone();
                        v.push(a.to_string());
                        v
                    })
                })
                .collect();
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn threshold_skips_exhausted_targets() {
        // x --e--> {abc, d, f}; abc has been merged once already
        let m = machine(0, &[], &[(0, "e", 1), (0, "e", 2), (0, "e", 3)]);
        let mut ledger = MergeLedger::new();
        ledger.set(1, 1);
        assert_eq!(get_target_states_with_limit(&m, &ledger, 1), BTreeSet::from([2, 3]));
    }

    #[test]
    fn deterministic_machine_has_no_targets() {
        let m = machine(0, &[2], &[(0, "a", 1), (1, "b", 2)]);
        assert!(get_target_states_with_limit(&m, &MergeLedger::new(), 5).is_empty());
    }

    #[test]
    fn scan_moves_past_exhausted_conflicts() {
        let m = machine(0, &[], &[(0, "a", 1), (0, "a", 2), (3, "b", 4), (3, "b", 5)]);
        let mut ledger = MergeLedger::new();
        ledger.set(1, 2);
        ledger.set(2, 1);
        assert_eq!(get_target_states_with_limit(&m, &ledger, 1), BTreeSet::from([4, 5]));
        assert_eq!(get_target_states_with_limit(&m, &ledger, 3), BTreeSet::from([1, 2]));
    }

    #[test]
    fn guards_separate_conflict_groups() {
        let mut m = Gfsm::new(0);
        m.connect(0, "end", value_guard(0, &["ok"]), 1);
        m.connect(0, "end", value_guard(0, &["err"]), 2);
        assert!(get_target_states_with_limit(&m, &MergeLedger::new(), 1).is_empty());
    }

    #[test]
    fn ledger_counts_operations_not_states() {
        let mut ledger = MergeLedger::new();
        ledger.set(4, 2);
        ledger.record_merge(1, [4, 7, 9]);
        assert_eq!(ledger.count(1), 3);
        let mut fresh = MergeLedger::new();
        fresh.record_merge(0, [5, 6]);
        assert_eq!(fresh.count(0), 1);
    }

    #[test]
    fn merge_updates_counts_with_max_plus_one() {
        let m = machine(0, &[], &[(0, "a", 1), (0, "a", 2), (0, "a", 3)]);
        let mut ledger = MergeLedger::new();
        ledger.set(2, 3);
        let (out, after) = merge_with_limit(&m, &ledger, 10, Deadline::NONE).unwrap();
        assert_eq!(out.state_count(), 2);
        assert_eq!(after.count(1), 4);
    }

    /// Running-example determinization with the component models of the
    /// running example, traced by hand:
    ///
    /// R -start-> C1 -init-> C2 -working-> C3, C3 -try-> C4 -pass-> C3,
    /// C3 -end[ok]-> A (final), C4 -wait-> W -wait-> W, W -fail-> F,
    /// F -end[err]-> B (final).
    fn hand_traced() -> Gfsm {
        let mut m = machine(
            0,
            &[5, 8],
            &[
                (0, "start", 1),
                (1, "init", 2),
                (2, "working", 3),
                (3, "try", 4),
                (4, "pass", 3),
                (4, "wait", 6),
                (6, "wait", 6),
                (6, "fail", 7),
            ],
        );
        m.connect(3, "end", value_guard(0, &["ok"]), 5);
        m.connect(7, "end", value_guard(0, &["err"]), 8);
        m
    }

    #[test]
    fn hd1_on_running_example_matches_hand_trace() {
        let m_uni = stitch(&running_example(), &fixtures::models()).unwrap();
        assert!(!m_uni.is_deterministic());
        let m_det = hybrid_determinize(&m_uni, 1);
        assert!(m_det.is_deterministic());
        assert!(isomorphic(&m_det, &hand_traced()).unwrap());
        for l in &running_example() {
            assert!(m_det.accepts(l));
        }
    }

    #[test]
    fn hd1_merge_sequence_moves_outward() {
        let m_uni = stitch(&running_example(), &fixtures::models()).unwrap();
        let mut ledger = MergeLedger::new();
        let mut current = m_uni.clone();
        let mut sources = Vec::new();
        loop {
            let group = get_target_states_with_limit(&current, &ledger, 1);
            if group.is_empty() {
                break;
            }
            let src = current
                .transitions()
                .iter()
                .find(|t| group.contains(&t.dst))
                .map(|t| (*t.event).to_string())
                .unwrap();
            sources.push(src);
            let (next, l) = merge_with_limit_once(&current, &ledger, &group);
            current = next;
            ledger = l;
        }
        assert_eq!(sources, ["start", "init", "working", "try"]);
        assert!(current.is_deterministic());
    }

    fn merge_with_limit_once(m: &Gfsm, ledger: &MergeLedger, group: &BTreeSet<StateId>) -> (Gfsm, MergeLedger) {
        let mut work = Work::new(m, ledger);
        let dense: Vec<usize> = group.iter().map(|s| work.ids.iter().position(|x| x == s).unwrap()).collect();
        work.merge(&dense);
        work.to_gfsm()
    }

    #[test]
    fn accumulators_keep_provenance_through_merging() {
        let a = stitch_log(running_example().get("l1").unwrap(), &fixtures::models()).unwrap();
        let m = hybrid_determinize(&a, 1);
        assert!(isomorphic(&m, &a).unwrap());
    }

    #[test]
    fn deterministic_input_is_unchanged() {
        let m = hand_traced();
        for u in [0, 1, 5] {
            assert!(isomorphic(&hybrid_determinize(&m, u), &m).unwrap());
        }
        assert!(isomorphic(&powerset(&m), &m).unwrap());
    }

    #[test]
    fn textbook_powerset() {
        // 0 -a-> {0, 1}, 1 final
        let n = machine(0, &[1], &[(0, "a", 0), (0, "a", 1), (0, "b", 0)]);
        let d = powerset(&n);
        assert!(d.is_deterministic());
        assert_eq!(d.state_count(), 2);
        let branching = machine(0, &[2], &[(0, "a", 1), (0, "a", 2), (1, "b", 2)]);
        let d = powerset(&branching);
        assert_eq!(d.state_count(), 3);
        assert!(d.accepts_events(&["a"]) && d.accepts_events(&["a", "b"]));
    }

    #[test]
    fn u_zero_is_pure_powerset() {
        let m_uni = stitch(&running_example(), &fixtures::models()).unwrap();
        let hd0 = hybrid_determinize(&m_uni, 0);
        assert!(isomorphic(&hd0, &powerset(&m_uni)).unwrap());
    }

    #[test]
    fn overlapping_guards_are_fused() {
        let mut m = Gfsm::new(0);
        m.connect(0, "e", Guard::AlwaysTrue, 1);
        m.connect(0, "e", value_guard(0, &["v"]), 2);
        m.set_final(2, true);
        let d = powerset(&m);
        assert!(d.is_deterministic());
        assert_eq!(d.transitions().len(), 1);
        assert!(d.accepts_entries(&[crate::log_model::LogEntry::new("C", "e", ["v"])]));
    }

    fn arb_nfa() -> impl Strategy<Value = Gfsm> {
        (1..=6u32).prop_flat_map(|n| {
            (
                prop::collection::vec((0..n, 0..4usize, 0..n), 0..16),
                prop::collection::vec(0..n, 0..3),
            )
                .prop_map(|(edges, finals)| {
                    let mut m = Gfsm::new(0);
                    for (s, e, d) in edges {
                        m.connect(s, ["a", "b", "c", "d"][e], Guard::AlwaysTrue, d);
                    }
                    for f in finals {
                        m.set_final(f, true);
                    }
                    m
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn powerset_is_language_equivalent(m in arb_nfa()) {
            let d = powerset(&m);
            prop_assert!(d.is_deterministic());
            for w in words(&["a", "b", "c", "d"], 5) {
                prop_assert_eq!(d.accepts_events(&w), m.accepts_events(&w));
            }
        }

        #[test]
        fn indexed_scan_matches_literal_rescan(m in arb_nfa(), u in 0..4u32) {
            let mut fast = Work::with_limit(&m, &MergeLedger::new(), u);
            let mut slow = Work::new(&m, &MergeLedger::new());
            loop {
                let g = fast.next_conflict();
                prop_assert_eq!(&g, &slow.literal_targets_with_limit(u));
                if g.is_empty() {
                    break;
                }
                fast.merge_indexed(&g);
                slow.merge(&g);
            }
            prop_assert_eq!(fast.to_gfsm(), slow.to_gfsm());
        }

        #[test]
        fn hybrid_output_is_deterministic_superset(m in arb_nfa(), u in 0..4u32) {
            let d = hybrid_determinize(&m, u);
            prop_assert!(d.is_deterministic());
            for w in words(&["a", "b", "c", "d"], 5) {
                if m.accepts_events(&w) {
                    prop_assert!(d.accepts_events(&w));
                }
                if u == 0 {
                    prop_assert_eq!(d.accepts_events(&w), m.accepts_events(&w));
                }
            }
        }
    }
}
