use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Gfsm, Guard, StateId, Transition};

/// Wire form of a model. Provenance labels are not serialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub states: Vec<StateId>,
    pub alphabet: Vec<String>,
    pub initial: StateId,
    pub finals: Vec<StateId>,
    pub transitions: Vec<TransitionJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionJson {
    pub src: StateId,
    pub event: String,
    pub guard: Guard,
    pub dst: StateId,
}

impl From<&Gfsm> for ModelJson {
    fn from(m: &Gfsm) -> Self {
        ModelJson {
            states: m.states.iter().copied().collect(),
            alphabet: m.alphabet.iter().map(|e| e.to_string()).collect(),
            initial: m.initial,
            finals: m.finals.iter().copied().collect(),
            transitions: m
                .transitions
                .iter()
                .map(|t| TransitionJson {
                    src: t.src,
                    event: t.event.to_string(),
                    guard: t.guard.clone(),
                    dst: t.dst,
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelJson> for Gfsm {
    type Error = Error;

    fn try_from(raw: ModelJson) -> Result<Self> {
        let invalid = |msg: String| Error::InvalidArgument(format!("model json: {msg}"));
        if !raw.states.contains(&raw.initial) {
            return Err(invalid(format!("initial state {} not in states", raw.initial)));
        }
        let mut m = Gfsm::new(raw.initial);
        for s in raw.states {
            m.add_state(s);
        }
        for e in raw.alphabet {
            m.add_event(e);
        }
        for f in raw.finals {
            if !m.states.contains(&f) {
                return Err(invalid(format!("final state {f} not in states")));
            }
            m.finals.insert(f);
        }
        for t in raw.transitions {
            if !m.states.contains(&t.src) || !m.states.contains(&t.dst) {
                return Err(invalid(format!("transition {}->{} uses unknown state", t.src, t.dst)));
            }
            if !m.alphabet.contains(t.event.as_str()) {
                return Err(invalid(format!("event `{}` not in alphabet", t.event)));
            }
            let event = m.alphabet.get(t.event.as_str()).cloned().expect("checked");
            if !m.add_transition(Transition { src: t.src, event, guard: t.guard, dst: t.dst }) {
                return Err(invalid(format!("duplicate transition {}-{}->{}", t.src, t.event, t.dst)));
            }
        }
        Ok(m)
    }
}

impl Gfsm {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelJson::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Gfsm> {
        let raw: ModelJson = serde_json::from_str(text)?;
        Gfsm::try_from(raw)
    }

    /// Graphviz rendering. Output order is fixed (states ascending,
    /// transitions in sort order) so goldens diff cleanly.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph gfsm {\n  rankdir=LR;\n  __start [shape=point];\n");
        for &s in &self.states {
            let shape = if self.is_final(s) { "doublecircle" } else { "circle" };
            let label = match self.label(s) {
                Some(prov) => format!("s{s}\\n{}", escape(&prov.join(","))),
                None => format!("s{s}"),
            };
            let _ = writeln!(out, "  {s} [shape={shape}, label=\"{label}\"];");
        }
        let _ = writeln!(out, "  __start -> {};", self.initial);
        for t in &self.transitions {
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{} [{}]\"];",
                t.src,
                t.dst,
                escape(&t.event),
                escape(&t.guard.to_string())
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
