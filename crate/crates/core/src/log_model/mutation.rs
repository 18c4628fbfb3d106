//! Synthesis of negative (presumably infeasible) logs by small mutations of
//! positive ones.
//!
//! A mutated log is kept only when the window around the mutation (the
//! mutated entries plus one neighbour on each side) never occurs as a
//! contiguous run in any positive log. Logs are padded with begin/end
//! markers, so mutations at either end are checked against how positive
//! logs start and finish.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Log, LogEntry, LogSet};

/// Default number of operator/position draws per log before giving up.
pub const DEFAULT_ATTEMPTS: usize = 100;

const BEGIN: u32 = 0;
const END: u32 = 1;
const UNSEEN: u32 = u32::MAX;

/// A single-edit mutation of a log. Positions are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    /// Exchange the entries at two distinct positions.
    Swap(usize, usize),
    /// Remove the entry at a position.
    Delete(usize),
    /// Insert an entry so that it ends up at the given position.
    Insert(usize, LogEntry),
}

impl Mutation {
    pub fn apply(&self, entries: &[LogEntry]) -> Vec<LogEntry> {
        let mut out = entries.to_vec();
        match self {
            Mutation::Swap(i, j) => out.swap(*i, *j),
            Mutation::Delete(p) => {
                out.remove(*p);
            }
            Mutation::Insert(p, e) => out.insert(*p, e.clone()),
        }
        out
    }

    /// Inclusive windows in padded coordinates of the mutated log, where
    /// index 0 is the begin marker and entry `p` sits at `p + 1`.
    fn windows(&self) -> Vec<(usize, usize)> {
        match *self {
            Mutation::Swap(i, j) => {
                let (i, j) = (i.min(j), i.max(j));
                if j == i + 1 {
                    vec![(i, j + 2)]
                } else {
                    vec![(i, i + 2), (j, j + 2)]
                }
            }
            // the two entries that became adjacent
            Mutation::Delete(p) => vec![(p, p + 1)],
            Mutation::Insert(p, _) => vec![(p, p + 2)],
        }
    }
}

/// Negatives produced for a set of target logs.
#[derive(Debug, Clone, Default)]
pub struct Negatives {
    pub logs: LogSet,
    /// Ids of target logs for which every attempt failed the locality check.
    pub skipped: Vec<String>,
}

/// Mutates target logs against a fixed reference set of positive logs.
///
/// The reference set supplies both the windows a negative must avoid and
/// the pool of entries used by the insert operator (entries of every
/// positive log other than the one being mutated).
pub struct NegativeSynthesizer<'a> {
    positives: &'a LogSet,
    ids: HashMap<&'a LogEntry, u32>,
    grams: HashSet<Vec<u32>>,
    pool: Vec<&'a LogEntry>,
    ranges: HashMap<&'a str, (usize, usize)>,
    attempts: usize,
}

impl<'a> NegativeSynthesizer<'a> {
    pub fn new(positives: &'a LogSet, attempts: usize) -> Self {
        let mut ids: HashMap<&LogEntry, u32> = HashMap::new();
        let mut grams = HashSet::new();
        let mut pool = Vec::with_capacity(positives.entry_count());
        let mut ranges = HashMap::new();
        for log in positives {
            let start = pool.len();
            let mut padded = Vec::with_capacity(log.len() + 2);
            padded.push(BEGIN);
            for e in &log.entries {
                let next = ids.len() as u32 + 2;
                padded.push(*ids.entry(e).or_insert(next));
                pool.push(e);
            }
            padded.push(END);
            for n in 2..=4 {
                grams.extend(padded.windows(n).map(<[u32]>::to_vec));
            }
            ranges.insert(log.log_id.as_str(), (start, pool.len()));
        }
        Self {
            positives,
            ids,
            grams,
            pool,
            ranges,
            attempts,
        }
    }

    pub fn positives(&self) -> &LogSet {
        self.positives
    }

    /// True if the mutation window of `mutated` is absent from every positive log.
    pub fn is_novel(&self, mutated: &[LogEntry], mutation: &Mutation) -> bool {
        let padded: Vec<u32> = std::iter::once(BEGIN)
            .chain(mutated.iter().map(|e| self.ids.get(e).copied().unwrap_or(UNSEEN)))
            .chain(std::iter::once(END))
            .collect();
        mutation.windows().into_iter().any(|(lo, hi)| {
            let window = &padded[lo..=hi.min(padded.len() - 1)];
            window.contains(&UNSEEN) || !self.grams.contains(window)
        })
    }

    /// One negative per target log; logs whose attempts run out are skipped
    /// with a warning.
    pub fn synthesize(&self, targets: &LogSet, seed: u64) -> Result<Negatives> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Negatives::default();
        for log in targets {
            if log.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "log `{}` has fewer than two entries",
                    log.log_id
                )));
            }
            match self.mutate_log(log, &mut rng) {
                Some(entries) => out.logs.insert(Log::new(format!("{}~neg", log.log_id), entries))?,
                None => {
                    log::warn!("no valid mutation found for log `{}`; skipping", log.log_id);
                    out.skipped.push(log.log_id.clone());
                }
            }
        }
        if !targets.is_empty() && out.logs.is_empty() {
            return Err(Error::NegativeSynthesis);
        }
        Ok(out)
    }

    fn mutate_log<R: Rng>(&self, log: &Log, rng: &mut R) -> Option<Vec<LogEntry>> {
        let (own_start, own_end) = self.ranges.get(log.log_id.as_str()).copied().unwrap_or((0, 0));
        let pool_len = self.pool.len() - (own_end - own_start);
        let mut operators = vec![0u8, 1];
        if pool_len > 0 {
            operators.push(2);
        }
        let n = log.len();
        for _ in 0..self.attempts {
            let mutation = match operators.choose(rng).copied() {
                Some(0) => {
                    let i = rng.gen_range(0..n);
                    let mut j = rng.gen_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    Mutation::Swap(i.min(j), i.max(j))
                }
                Some(1) => Mutation::Delete(rng.gen_range(0..n)),
                _ => {
                    let mut k = rng.gen_range(0..pool_len);
                    if k >= own_start {
                        k += own_end - own_start;
                    }
                    Mutation::Insert(rng.gen_range(0..=n), self.pool[k].clone())
                }
            };
            let mutated = mutation.apply(&log.entries);
            if self.is_novel(&mutated, &mutation) {
                return Some(mutated);
            }
        }
        None
    }
}

/// Produces one negative per log of `logs`, using `logs` itself as the
/// positive reference set.
pub fn mutate_negative(logs: &LogSet, seed: u64, per_log_attempts: usize) -> Result<Negatives> {
    NegativeSynthesizer::new(logs, per_log_attempts).synthesize(logs, seed)
}
