//! Accuracy and scalability evaluation of inferred system models.

mod scale;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::log_model::{LogSet, NegativeSynthesizer, DEFAULT_ATTEMPTS};
use crate::pipeline::{run, Stage, Strategy};
use crate::pool::parallel_map;
use crate::scalar::Scalar;

pub use self::scale::{scalability_run, timing_csv, RunStatus, ScaleRow, TIMING_HEADER};

/// Classification counts of positives and negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
}

impl Tally {
    pub fn new(tp: u64, fn_: u64, tn: u64, fp: u64) -> Self {
        Self { tp, fn_, tn, fp }
    }

    pub fn add(&mut self, other: &Tally) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
        self.fp += other.fp;
    }

    pub fn recall<T: Scalar>(&self) -> Option<T> {
        recall(self.tp, self.fn_)
    }

    pub fn specificity<T: Scalar>(&self) -> Option<T> {
        specificity(self.tn, self.fp)
    }

    pub fn balanced_accuracy<T: Scalar>(&self) -> Option<T> {
        balanced_accuracy(self.recall::<T>(), self.specificity::<T>())
    }
}

/// `tp / (tp + fn)`, absent when no positive was tested.
pub fn recall<T: Scalar>(tp: u64, fn_: u64) -> Option<T> {
    (tp + fn_ > 0).then(|| T::ratio(tp, tp + fn_))
}

/// `tn / (tn + fp)`, absent when no negative was tested.
pub fn specificity<T: Scalar>(tn: u64, fp: u64) -> Option<T> {
    (tn + fp > 0).then(|| T::ratio(tn, tn + fp))
}

/// Mean of recall and specificity; absent if either is.
pub fn balanced_accuracy<T: Scalar>(recall: Option<T>, specificity: Option<T>) -> Option<T> {
    Some((recall? + specificity?) / (T::one() + T::one()))
}

/// Log-component diversity: `(U - 1) / (N - 1)` with `U` the number of
/// distinct per-log component sets among `N` logs.
pub fn lds<T: Scalar>(logs: &LogSet) -> Result<T> {
    let n = logs.len() as u64;
    if n < 2 {
        return Err(Error::InvalidArgument("diversity score needs at least two logs".into()));
    }
    let distinct: BTreeSet<BTreeSet<&str>> = logs.iter().map(|l| l.components()).collect();
    Ok(T::ratio(distinct.len() as u64 - 1, n - 1))
}

fn metric<S: Serializer, T: Scalar>(v: &Option<T>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_ref().map(Scalar::to_f64).serialize(s)
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = ""))]
pub struct FoldReport<T: Scalar> {
    pub fold: usize,
    pub train_logs: usize,
    #[serde(flatten)]
    pub tally: Tally,
    #[serde(serialize_with = "metric")]
    pub recall: Option<T>,
    #[serde(serialize_with = "metric")]
    pub specificity: Option<T>,
    #[serde(serialize_with = "metric")]
    pub balanced_accuracy: Option<T>,
    /// Held-out logs for which no negative was produced.
    pub skipped_negatives: Vec<String>,
    /// Set when negative synthesis failed for the whole fold; its negatives
    /// are then missing from the counts.
    pub negative_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = ""))]
pub struct EvalReport<T: Scalar> {
    pub folds: usize,
    pub seed: u64,
    pub strategy: String,
    #[serde(flatten)]
    pub tally: Tally,
    #[serde(serialize_with = "metric")]
    pub recall: Option<T>,
    #[serde(serialize_with = "metric")]
    pub specificity: Option<T>,
    #[serde(serialize_with = "metric")]
    pub balanced_accuracy: Option<T>,
    pub per_fold: Vec<FoldReport<T>>,
    /// Summed over folds. Kept out of the serialized report so reports of
    /// identical runs compare byte for byte.
    #[serde(skip)]
    pub wall_times: BTreeMap<Stage, Duration>,
    #[serde(skip)]
    pub total_time: Duration,
}

pub const REPORT_HEADER: &str = "fold,tp,fn,tn,fp,recall,specificity,ba";

fn cell<T: Scalar>(v: &Option<T>) -> String {
    v.as_ref().map(|x| format!("{:.6}", x.to_f64())).unwrap_or_default()
}

impl<T: Scalar> EvalReport<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        let mut row = |fold: &str, t: &Tally, r: &Option<T>, s: &Option<T>, b: &Option<T>| {
            let _ = writeln!(out, "{fold},{},{},{},{},{},{},{}", t.tp, t.fn_, t.tn, t.fp, cell(r), cell(s), cell(b));
        };
        for f in &self.per_fold {
            row(&f.fold.to_string(), &f.tally, &f.recall, &f.specificity, &f.balanced_accuracy);
        }
        row("all", &self.tally, &self.recall, &self.specificity, &self.balanced_accuracy);
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Seeded split of the log ids into `k` folds of near-equal size.
pub fn fold_assignment(logs: &LogSet, k: usize, seed: u64) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two folds".into()));
    }
    if logs.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} logs cannot fill {k} folds",
            logs.len()
        )));
    }
    let mut ids: Vec<String> = logs.iter().map(|l| l.log_id.clone()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KFoldConfig {
    pub folds: usize,
    pub seed: u64,
    /// Folds evaluated at once.
    pub fold_workers: usize,
    pub negative_attempts: usize,
}

impl KFoldConfig {
    pub fn new(folds: usize, seed: u64) -> Self {
        Self {
            folds,
            seed,
            fold_workers: 1,
            negative_attempts: DEFAULT_ATTEMPTS,
        }
    }
}

pub fn kfold_evaluate<T: Scalar>(logs: &LogSet, k: usize, strategy: &Strategy, seed: u64) -> Result<EvalReport<T>> {
    kfold_evaluate_with(logs, &KFoldConfig::new(k, seed), strategy)
}

struct FoldOutcome<T: Scalar> {
    report: FoldReport<T>,
    timings: Vec<(Stage, Duration)>,
}

pub fn kfold_evaluate_with<T: Scalar>(logs: &LogSet, cfg: &KFoldConfig, strategy: &Strategy) -> Result<EvalReport<T>> {
    let started = Instant::now();
    let folds = fold_assignment(logs, cfg.folds, cfg.seed)?;
    let synthesizer = NegativeSynthesizer::new(logs, cfg.negative_attempts);
    let indexed: Vec<(usize, &Vec<String>)> = folds.iter().enumerate().collect();

    let outcomes = parallel_map(&indexed, cfg.fold_workers.max(1), |&(i, held_out)| {
        evaluate_fold::<T>(logs, i, held_out, &synthesizer, strategy, fold_seed(cfg.seed, i))
    });

    let mut tally = Tally::default();
    let mut per_fold = Vec::with_capacity(folds.len());
    let mut wall_times: BTreeMap<Stage, Duration> = BTreeMap::new();
    for o in outcomes {
        let o = o?;
        tally.add(&o.report.tally);
        for (stage, d) in o.timings {
            *wall_times.entry(stage).or_default() += d;
        }
        per_fold.push(o.report);
    }
    Ok(EvalReport {
        folds: cfg.folds,
        seed: cfg.seed,
        strategy: strategy.kind().to_string(),
        recall: tally.recall(),
        specificity: tally.specificity(),
        balanced_accuracy: tally.balanced_accuracy(),
        tally,
        per_fold,
        wall_times,
        total_time: started.elapsed(),
    })
}

fn evaluate_fold<T: Scalar>(
    logs: &LogSet,
    fold: usize,
    held_out: &[String],
    synthesizer: &NegativeSynthesizer<'_>,
    strategy: &Strategy,
    seed: u64,
) -> Result<FoldOutcome<T>> {
    let test_ids: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
    let train = logs.filter(|l| !test_ids.contains(l.log_id.as_str()));
    let test = logs.filter(|l| test_ids.contains(l.log_id.as_str()));
    let out = run(&train, strategy)?;
    let model = &out.model;

    let mut tally = Tally::default();
    for l in &test {
        if model.accepts(l) {
            tally.tp += 1;
        } else {
            tally.fn_ += 1;
        }
    }

    let mutable = test.filter(|l| l.len() >= 2);
    let mut skipped: Vec<String> = test.iter().filter(|l| l.len() < 2).map(|l| l.log_id.clone()).collect();
    let mut negative_error = None;
    if mutable.is_empty() {
        negative_error = Some("no held-out log has two or more entries".to_string());
    } else {
        match synthesizer.synthesize(&mutable, seed) {
            Ok(neg) => {
                skipped.extend(neg.skipped);
                for l in &neg.logs {
                    if model.accepts(l) {
                        tally.fp += 1;
                    } else {
                        tally.tn += 1;
                    }
                }
            }
            Err(e @ Error::NegativeSynthesis) => {
                log::warn!("fold {fold}: {e}");
                negative_error = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    skipped.sort();

    Ok(FoldOutcome {
        report: FoldReport {
            fold,
            train_logs: train.len(),
            recall: tally.recall(),
            specificity: tally.specificity(),
            balanced_accuracy: tally.balanced_accuracy(),
            tally,
            skipped_negatives: skipped,
            negative_error,
        },
        timings: out.timings,
    })
}

#[cfg(test)]
mod tests {
    use num_rational::Ratio;

    use super::*;
    use crate::inference::InferenceConfig;
    use crate::log_model::fixtures::{log_of, running_example};
    use crate::log_model::{duplicate, Log};
    use crate::synthetic::{generate, GenConfig};

    type Q = Ratio<u64>;

    #[test]
    fn metric_identities() {
        let t = Tally::new(7, 3, 5, 5);
        assert_eq!(t.recall::<Q>(), Some(Q::new(7, 10)));
        assert_eq!(t.specificity::<Q>(), Some(Q::new(1, 2)));
        assert_eq!(t.balanced_accuracy::<Q>(), Some(Q::new(3, 5)));
        assert_eq!(t.balanced_accuracy::<f64>(), Some(0.6));
    }

    #[test]
    fn perfect_and_reject_all_models() {
        let perfect = Tally::new(10, 0, 10, 0);
        assert_eq!(perfect.balanced_accuracy::<Q>(), Some(Q::new(1, 1)));
        let reject_all = Tally::new(0, 10, 10, 0);
        assert_eq!(reject_all.recall::<Q>(), Some(Q::new(0, 1)));
        assert_eq!(reject_all.specificity::<Q>(), Some(Q::new(1, 1)));
        assert_eq!(reject_all.balanced_accuracy::<Q>(), Some(Q::new(1, 2)));
    }

    #[test]
    fn undefined_metrics_are_absent() {
        let no_negatives = Tally::new(3, 1, 0, 0);
        assert_eq!(no_negatives.specificity::<Q>(), None);
        assert_eq!(no_negatives.balanced_accuracy::<Q>(), None);
        assert_eq!(no_negatives.recall::<Q>(), Some(Q::new(3, 4)));
    }

    fn logs_with_components(sets: &[&[&str]]) -> LogSet {
        LogSet::from_logs(sets.iter().enumerate().map(|(i, cs)| {
            let entries: Vec<(&str, &str)> = cs.iter().map(|c| (*c, "e")).collect();
            log_of(&format!("l{i:02}"), &entries)
        }))
        .unwrap()
    }

    #[test]
    fn lds_fixtures() {
        assert_eq!(lds::<Q>(&running_example()).unwrap(), Q::new(0, 1));
        let distinct = logs_with_components(&[&["A"], &["B"], &["A", "B"], &["C"]]);
        assert_eq!(lds::<Q>(&distinct).unwrap(), Q::new(1, 1));
        let mut mixed: Vec<&[&str]> = vec![&["A"], &["A"], &["A", "B"], &["A", "B"]];
        mixed.extend(std::iter::repeat_n(&["B"][..], 6));
        assert_eq!(lds::<Q>(&logs_with_components(&mixed)).unwrap(), Q::new(2, 9));
        assert!(lds::<Q>(&logs_with_components(&[&["A"]])).is_err());
    }

    #[test]
    fn lds_shrinks_when_logs_are_duplicated() {
        let logs = logs_with_components(&[&["A"], &["B"], &["A", "B"]]);
        let before = lds::<Q>(&logs).unwrap();
        let after = lds::<Q>(&duplicate(&logs, 2).unwrap()).unwrap();
        assert!(after < before);
        let reversed = LogSet::from_logs(logs.iter().collect::<Vec<_>>().into_iter().rev().enumerate().map(|(i, l)| {
            Log::new(format!("r{i}"), l.entries.clone())
        }))
        .unwrap();
        assert_eq!(lds::<Q>(&reversed).unwrap(), before);
    }

    #[test]
    fn folds_partition_the_logs_reproducibly() {
        let corpus = generate(&GenConfig { logs: 23, ..Default::default() }).unwrap();
        let folds = fold_assignment(&corpus.logs, 5, 3).unwrap();
        assert_eq!(folds, fold_assignment(&corpus.logs, 5, 3).unwrap());
        let all: Vec<&String> = folds.iter().flatten().collect();
        let unique: BTreeSet<&String> = all.iter().copied().collect();
        assert_eq!(all.len(), 23);
        assert_eq!(unique.len(), 23);
        for f in &folds {
            assert!(f.len() == 4 || f.len() == 5);
        }
        assert!(fold_assignment(&corpus.logs, 24, 0).is_err());
        assert!(fold_assignment(&corpus.logs, 1, 0).is_err());
    }

    #[test]
    fn every_test_log_counted_once() {
        let corpus = generate(&GenConfig { logs: 20, components: 2, ..Default::default() }).unwrap();
        let strategy = Strategy::prins(InferenceConfig::default(), 1);
        let report = kfold_evaluate::<Q>(&corpus.logs, 4, &strategy, 9).unwrap();
        assert_eq!(report.tally.tp + report.tally.fn_, 20);
        let skipped: usize = report.per_fold.iter().map(|f| f.skipped_negatives.len()).sum();
        assert_eq!((report.tally.tn + report.tally.fp) as usize + skipped, 20);
        let mut sum = Tally::default();
        for f in &report.per_fold {
            sum.add(&f.tally);
        }
        assert_eq!(sum, report.tally);
    }

    #[test]
    fn recall_on_ground_truth_corpus() {
        // a single 4-state component; twenty walks cover its transitions
        let cfg = GenConfig { components: 1, states: 4, logs: 20, max_len: 12, extra_edges: 1, seed: 5 };
        let corpus = generate(&cfg).unwrap();
        let truth = &corpus.truth["C0"];
        let covered: BTreeSet<_> = corpus
            .logs
            .iter()
            .flat_map(|l| {
                let mut s = truth.initial();
                l.entries
                    .iter()
                    .map(|e| {
                        let d = *truth.step(s, e).first().unwrap();
                        let edge = (s, e.event.clone(), d);
                        s = d;
                        edge
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        assert_eq!(covered.len(), truth.transitions().len());
        let strategy = Strategy::prins(InferenceConfig::default(), 1);
        let report = kfold_evaluate::<Q>(&corpus.logs, 10, &strategy, 1).unwrap();
        assert!(report.recall.unwrap() >= Q::new(9, 10), "{:?}", report.recall);
    }

    #[test]
    fn reports_are_reproducible_and_fold_parallelism_is_pure() {
        let corpus = generate(&GenConfig { logs: 12, ..Default::default() }).unwrap();
        let strategy = Strategy::prins(InferenceConfig::default(), 1);
        let a = kfold_evaluate::<f64>(&corpus.logs, 3, &strategy, 4).unwrap();
        let b = kfold_evaluate::<f64>(&corpus.logs, 3, &strategy, 4).unwrap();
        let cfg = KFoldConfig { fold_workers: 3, ..KFoldConfig::new(3, 4) };
        let c = kfold_evaluate_with::<f64>(&corpus.logs, &cfg, &strategy).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_json().unwrap(), c.to_json().unwrap());
        assert_eq!(a.to_csv(), c.to_csv());
    }

    #[test]
    fn csv_shape() {
        let corpus = generate(&GenConfig { logs: 6, ..Default::default() }).unwrap();
        let report = kfold_evaluate::<f64>(&corpus.logs, 2, &Strategy::prins(InferenceConfig::default(), 1), 0).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("all,"));
    }

    #[test]
    fn short_logs_skip_negatives() {
        let logs = LogSet::from_logs((0..4).map(|i| log_of(&format!("l{i}"), &[("A", "x")]))).unwrap();
        let report = kfold_evaluate::<Q>(&logs, 2, &Strategy::prins(InferenceConfig::default(), 1), 0).unwrap();
        assert_eq!(report.tally.tn + report.tally.fp, 0);
        assert_eq!(report.specificity, None);
        assert!(report.per_fold.iter().all(|f| f.negative_error.is_some()));
    }
}
