use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Predicate over the parameter values of a log entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Guard {
    AlwaysTrue,
    /// Holds when, for every listed parameter index, the entry's value at
    /// that index is one of the allowed values.
    ValueSet {
        #[serde(with = "index_keys")]
        params: BTreeMap<usize, BTreeSet<String>>,
    },
}

// Integer map keys do not survive serde's buffering of internally tagged
// enums, so indices travel as strings explicitly.
mod index_keys {
    use std::collections::{BTreeMap, BTreeSet};

    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    type Params = BTreeMap<usize, BTreeSet<String>>;

    pub fn serialize<S: Serializer>(params: &Params, serializer: S) -> Result<S::Ok, S::Error> {
        let keyed: BTreeMap<String, &BTreeSet<String>> =
            params.iter().map(|(i, v)| (i.to_string(), v)).collect();
        keyed.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Params, D::Error> {
        let keyed = BTreeMap::<String, BTreeSet<String>>::deserialize(deserializer)?;
        keyed
            .into_iter()
            .map(|(k, v)| {
                k.parse::<usize>()
                    .map(|i| (i, v))
                    .map_err(|_| de::Error::custom(format!("parameter index `{k}` is not an integer")))
            })
            .collect()
    }
}

impl Guard {
    pub fn value_set<I, S>(index: usize, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Guard::ValueSet {
            params: BTreeMap::from([(index, values.into_iter().map(Into::into).collect())]),
        }
    }

    pub fn eval(&self, params: &[String]) -> bool {
        match self {
            Guard::AlwaysTrue => true,
            Guard::ValueSet { params: allowed } => allowed
                .iter()
                .all(|(&i, values)| params.get(i).is_some_and(|v| values.contains(v))),
        }
    }

    /// True if some parameter vector satisfies both guards.
    pub fn overlaps(&self, other: &Guard) -> bool {
        match (self, other) {
            (Guard::ValueSet { params: a }, Guard::ValueSet { params: b }) => {
                a.values().all(|s| !s.is_empty())
                    && b.values().all(|s| !s.is_empty())
                    && a.iter()
                        .filter_map(|(i, sa)| b.get(i).map(|sb| (sa, sb)))
                        .all(|(sa, sb)| !sa.is_disjoint(sb))
            }
            (Guard::ValueSet { params }, Guard::AlwaysTrue)
            | (Guard::AlwaysTrue, Guard::ValueSet { params }) => params.values().all(|s| !s.is_empty()),
            (Guard::AlwaysTrue, Guard::AlwaysTrue) => true,
        }
    }

    /// A guard that holds whenever either input holds.
    ///
    /// Exact for value sets constraining the same single index; otherwise
    /// it widens to [`Guard::AlwaysTrue`].
    pub fn join(&self, other: &Guard) -> Guard {
        match (self, other) {
            (Guard::ValueSet { params: a }, Guard::ValueSet { params: b })
                if a.len() == 1 && a.keys().eq(b.keys()) =>
            {
                let mut params = a.clone();
                for (i, vals) in b {
                    params.entry(*i).or_default().extend(vals.iter().cloned());
                }
                Guard::ValueSet { params }
            }
            _ if self == other => self.clone(),
            _ => Guard::AlwaysTrue,
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::AlwaysTrue => f.write_str("true"),
            Guard::ValueSet { params } => {
                for (n, (i, values)) in params.iter().enumerate() {
                    if n > 0 {
                        f.write_str(" && ")?;
                    }
                    let vals: Vec<&str> = values.iter().map(String::as_str).collect();
                    write!(f, "p{i} in {{{}}}", vals.join(","))?;
                }
                Ok(())
            }
        }
    }
}
