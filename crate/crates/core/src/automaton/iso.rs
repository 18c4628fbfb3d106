use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};

use super::{Gfsm, Guard, StateId};

/// Graph isomorphism of two deterministic machines.
///
/// Walks both machines in lockstep from their initial states, pairing
/// targets of equally labelled `(event, guard)` edges. The reachable parts
/// must correspond exactly and the machines must have the same number of
/// states and transitions; unreachable states are not matched structurally.
pub fn isomorphic(a: &Gfsm, b: &Gfsm) -> Result<bool> {
    if !a.is_deterministic() || !b.is_deterministic() {
        return Err(Error::InvalidArgument(
            "isomorphism check requires deterministic machines".into(),
        ));
    }
    if a.state_count() != b.state_count() || a.transitions().len() != b.transitions().len() {
        return Ok(false);
    }

    let mut fwd: BTreeMap<StateId, StateId> = BTreeMap::new();
    let mut bwd: BTreeMap<StateId, StateId> = BTreeMap::new();
    let mut queue = VecDeque::new();
    fwd.insert(a.initial(), b.initial());
    bwd.insert(b.initial(), a.initial());
    queue.push_back((a.initial(), b.initial()));

    while let Some((sa, sb)) = queue.pop_front() {
        if a.is_final(sa) != b.is_final(sb) {
            return Ok(false);
        }
        let ea: Vec<(&str, &Guard, StateId)> = a.out_edges(sa).map(|t| (&*t.event, &t.guard, t.dst)).collect();
        let eb: Vec<(&str, &Guard, StateId)> = b.out_edges(sb).map(|t| (&*t.event, &t.guard, t.dst)).collect();
        if ea.len() != eb.len() {
            return Ok(false);
        }
        // both lists are sorted by (event, guard, dst); labels are unique per
        // state in a deterministic machine except for same-target repeats,
        // which the pairing below handles in order
        for ((ev_a, g_a, da), (ev_b, g_b, db)) in ea.into_iter().zip(eb) {
            if ev_a != ev_b || g_a != g_b {
                return Ok(false);
            }
            match (fwd.get(&da), bwd.get(&db)) {
                (Some(&x), Some(&y)) if x == db && y == da => {}
                (None, None) => {
                    fwd.insert(da, db);
                    bwd.insert(db, da);
                    queue.push_back((da, db));
                }
                _ => return Ok(false),
            }
        }
    }
    Ok(fwd.len() == a.reachable().len() && bwd.len() == b.reachable().len())
}
