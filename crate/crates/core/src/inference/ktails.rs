//! Prefix tree acceptor and k-Tails state merging.
//!
//! States live in a union-find forest over prefix-tree nodes numbered in
//! breadth-first order, so "lowest id" and "earliest discovered" coincide.
//! Edges keep the parameter vectors observed on them; those observations
//! drive value-set guard synthesis when merging would otherwise create a
//! same-event conflict.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::automaton::{Event, Gfsm, Guard, StateId, Transition};
use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::log_model::LogSet;

type Obs = BTreeSet<Vec<String>>;

#[derive(Debug, Clone)]
struct Edge {
    target: usize,
    obs: Obs,
}

#[derive(Debug, Clone, Default)]
struct Node {
    accepting: bool,
    edges: BTreeMap<u32, Vec<Edge>>,
}

/// Mutable merge graph seeded from a prefix tree.
#[derive(Debug, Clone)]
pub(crate) struct MergeGraph {
    events: Vec<Event>,
    nodes: Vec<Node>,
    parent: Vec<usize>,
    guard_synthesis: bool,
}

const FINAL_TOKEN: u32 = 0;
const OPEN: u32 = 1;
const CLOSE: u32 = 2;
const EVENT_BASE: u32 = 3;

impl MergeGraph {
    /// Prefix tree of the given logs, renumbered breadth-first with
    /// children visited in (event, params) order.
    pub(crate) fn prefix_tree(logs: &LogSet, guard_synthesis: bool) -> Self {
        let names: BTreeSet<&str> = logs
            .iter()
            .flat_map(|l| l.entries.iter().map(|e| e.event.as_str()))
            .collect();
        let events: Vec<Event> = names.iter().map(|&n| Arc::from(n)).collect();
        let index: HashMap<&str, u32> = names.iter().enumerate().map(|(i, &n)| (n, i as u32)).collect();

        // trie over (event, params); siblings sharing an event are then
        // separated by guards or merged by the closure below
        let mut nodes = vec![Node::default()];
        let mut child: HashMap<(usize, u32, &[String]), usize> = HashMap::new();
        for log in logs {
            let mut cur = 0;
            for entry in &log.entries {
                let ev = index[entry.event.as_str()];
                cur = *child.entry((cur, ev, entry.params.as_slice())).or_insert_with(|| {
                    nodes.push(Node::default());
                    let id = nodes.len() - 1;
                    nodes[cur].edges.entry(ev).or_default().push(Edge {
                        target: id,
                        obs: Obs::from([entry.params.clone()]),
                    });
                    id
                });
            }
            nodes[cur].accepting = true;
        }

        // breadth-first renumbering
        let mut order = Vec::with_capacity(nodes.len());
        let mut rank = vec![usize::MAX; nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        rank[0] = 0;
        while let Some(n) = queue.pop_front() {
            order.push(n);
            let mut children: Vec<(u32, &Obs, usize)> = nodes[n]
                .edges
                .iter()
                .flat_map(|(&ev, edges)| edges.iter().map(move |e| (ev, &e.obs, e.target)))
                .collect();
            children.sort();
            for (_, _, t) in children {
                rank[t] = order.len() + queue.len();
                queue.push_back(t);
            }
        }
        let mut renumbered: Vec<Node> = Vec::with_capacity(nodes.len());
        for &old in &order {
            let mut node = std::mem::take(&mut nodes[old]);
            for edges in node.edges.values_mut() {
                for e in edges {
                    e.target = rank[e.target];
                }
            }
            renumbered.push(node);
        }

        let n = renumbered.len();
        let mut graph = MergeGraph {
            events,
            nodes: renumbered,
            parent: (0..n).collect(),
            guard_synthesis,
        };
        graph.close((0..n).rev().collect());
        graph
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn find_const(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.parent[i] == i)
    }

    /// Folds `b` into `a`; the lower id survives.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        let (keep, gone) = (a.min(b), a.max(b));
        self.parent[gone] = keep;
        let moved = std::mem::take(&mut self.nodes[gone]);
        let node = &mut self.nodes[keep];
        node.accepting |= moved.accepting;
        for (ev, edges) in moved.edges {
            node.edges.entry(ev).or_default().extend(edges);
        }
        keep
    }

    /// Groups the edges of `s` per event by target representative.
    fn normalize(&mut self, s: usize) {
        let events: Vec<u32> = self.nodes[s].edges.keys().copied().collect();
        for ev in events {
            let edges = std::mem::take(self.nodes[s].edges.get_mut(&ev).expect("present"));
            let mut grouped: BTreeMap<usize, Obs> = BTreeMap::new();
            for e in edges {
                let t = self.find(e.target);
                grouped.entry(t).or_default().extend(e.obs);
            }
            self.nodes[s].edges.insert(
                ev,
                grouped.into_iter().map(|(target, obs)| Edge { target, obs }).collect(),
            );
        }
    }

    /// Merges same-event targets until every state is deterministic, keeping
    /// value-set splits where the observations allow them.
    fn close(&mut self, seeds: Vec<usize>) {
        let mut work: Vec<usize> = seeds;
        while let Some(s) = work.pop() {
            let s = self.find(s);
            self.normalize(s);
            let mut to_merge: Vec<Vec<usize>> = Vec::new();
            for edges in self.nodes[s].edges.values() {
                if edges.len() > 1 && !(self.guard_synthesis && separating_index(edges).is_some()) {
                    to_merge.push(edges.iter().map(|e| e.target).collect());
                }
            }
            if to_merge.is_empty() {
                continue;
            }
            for group in to_merge {
                let mut keep = group[0];
                for &t in &group[1..] {
                    keep = self.union(keep, t);
                }
                work.push(keep);
            }
            work.push(s);
        }
    }

    /// Tree of outgoing event paths to depth `k`, with acceptance marks on
    /// nodes above the horizon, as a token sequence.
    fn signature(&self, s: usize, k: usize, out: &mut Vec<u32>) {
        if k == 0 {
            return;
        }
        let s = self.find_const(s);
        let node = &self.nodes[s];
        if node.accepting {
            out.push(FINAL_TOKEN);
        }
        for (&ev, edges) in &node.edges {
            let mut children: Vec<Vec<u32>> = edges
                .iter()
                .map(|e| {
                    let mut child = Vec::new();
                    self.signature(e.target, k - 1, &mut child);
                    child
                })
                .collect();
            children.sort();
            children.dedup();
            for child in children {
                out.push(EVENT_BASE + ev);
                out.push(OPEN);
                out.extend(child);
                out.push(CLOSE);
            }
        }
    }

    /// Merges every class of prefix-tree states whose depth-`k` futures
    /// agree, lowest id surviving, then restores determinism.
    ///
    /// Classes are computed once on the prefix tree, so a smaller `k`
    /// always yields a coarser partition and a larger language.
    pub(crate) fn k_tails(&mut self, k: usize, deadline: Deadline) -> Result<()> {
        let live: Vec<usize> = self.alive().collect();
        let mut classes: HashMap<Vec<u32>, usize> = HashMap::with_capacity(live.len());
        let mut pairs = Vec::new();
        for (n, &s) in live.iter().enumerate() {
            if n % 1024 == 0 {
                deadline.check()?;
            }
            let mut sig = Vec::new();
            self.signature(s, k, &mut sig);
            match classes.get(&sig) {
                Some(&first) => pairs.push((first, s)),
                None => {
                    classes.insert(sig, s);
                }
            }
        }
        for (n, (a, b)) in pairs.into_iter().enumerate() {
            if n % 1024 == 0 {
                deadline.check()?;
            }
            self.union(a, b);
        }
        deadline.check()?;
        let survivors: Vec<usize> = self.alive().collect();
        self.close(survivors.into_iter().rev().collect());
        Ok(())
    }

    pub(crate) fn to_gfsm(&self) -> Result<Gfsm> {
        let root = self.find_const(0);
        let mut m = Gfsm::new(root as StateId);
        for s in self.alive() {
            m.add_state(s as StateId);
            if self.nodes[s].accepting {
                m.set_final(s as StateId, true);
            }
            for (&ev, edges) in &self.nodes[s].edges {
                let mut grouped: BTreeMap<usize, Obs> = BTreeMap::new();
                for e in edges {
                    grouped
                        .entry(self.find_const(e.target))
                        .or_default()
                        .extend(e.obs.iter().cloned());
                }
                let event = self.events[ev as usize].clone();
                if grouped.len() == 1 {
                    let (&t, _) = grouped.iter().next().expect("one group");
                    m.add_transition(Transition::new(s as StateId, event, Guard::AlwaysTrue, t as StateId));
                    continue;
                }
                let groups: Vec<Edge> = grouped
                    .into_iter()
                    .map(|(target, obs)| Edge { target, obs })
                    .collect();
                let i = separating_index(&groups).ok_or_else(|| {
                    Error::Internal(format!("state {s} has an unseparated same-event conflict"))
                })?;
                for g in groups {
                    let values = g.obs.iter().map(|v| v[i].clone());
                    m.add_transition(Transition::new(
                        s as StateId,
                        event.clone(),
                        Guard::value_set(i, values),
                        g.target as StateId,
                    ));
                }
            }
        }
        Ok(m.canonical())
    }
}

/// Lowest parameter index whose observed values are pairwise disjoint
/// across the edge groups.
fn separating_index(groups: &[Edge]) -> Option<usize> {
    let width = groups
        .iter()
        .flat_map(|g| g.obs.iter().map(Vec::len))
        .min()?;
    (0..width).find(|&i| {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        groups.iter().enumerate().all(|(gi, g)| {
            g.obs.iter().all(|v| match seen.get(v[i].as_str()) {
                Some(&owner) => owner == gi,
                None => {
                    seen.insert(v[i].as_str(), gi);
                    true
                }
            })
        })
    })
}
