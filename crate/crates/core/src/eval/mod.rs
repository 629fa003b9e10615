//! Who / when / joint tasks, splits, balancing and repeated experiments.

mod experiment;
mod report;
mod scoring;

pub use experiment::{
    build_feature_table, evaluate_model, run_ablation, run_experiment, run_suite, train_method, EvalSettings, FeatureTable, Method,
    MethodSpec, TrainedMethod,
};
pub use report::{EvalReport, ReportRow};
pub use scoring::{run_task, ConstantScorer, FrameScorer, ModelScorer, THRESHOLD};

use crate::gen::Dataset;
use crate::learn::LearnError;
use crate::repr::ReprError;
use crate::rng::rng_for;
use crate::scene::{CharacterId, Scene, NUM_FRAMES};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has {0} scenes, at least 10 are needed to split")]
    TooSmall(usize),
    #[error("no {0} examples")]
    SingleClass(&'static str),
    #[error("cannot aggregate an empty score list")]
    EmptyScores,
    #[error("evaluation set is not balanced: {positives} positives of {total}")]
    Unbalanced { positives: usize, total: usize },
    #[error("at least 2 repetitions are required, got {0}")]
    TooFewRepetitions(usize),
    #[error("no features for scene {0} character {1}")]
    MissingFeatures(usize, CharacterId),
    #[error("repetition {rep}: {source}")]
    Repetition { rep: usize, source: Box<EvalError> },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Repr(#[from] ReprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Who,
    When,
    Joint,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Who, TaskKind::When, TaskKind::Joint];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Who => "who",
            TaskKind::When => "when",
            TaskKind::Joint => "joint",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| format!("unknown task {s:?}"))
    }
}

/// One labelled unit of a task. `character` is set for Who and Joint,
/// `frame` for When and Joint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalExample {
    pub task: TaskKind,
    pub scene: usize,
    pub character: Option<CharacterId>,
    pub frame: Option<usize>,
    pub label: bool,
}

/// Scene indices of the train / validation / test splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded permutation of scene indices cut into ⌊0.8n⌋ / ⌊0.1n⌋ / rest.
pub fn split_dataset(n: usize, seed: u64) -> Result<Split, EvalError> {
    if n < 10 {
        return Err(EvalError::TooSmall(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, "split"));
    let (a, b) = (n * 8 / 10, n / 10);
    Ok(Split { train: idx[..a].to_vec(), val: idx[a..a + b].to_vec(), test: idx[a + b..].to_vec() })
}

/// Undersamples the majority class to the minority count, then shuffles.
pub fn balance_by<T: Clone>(items: &[T], label: impl Fn(&T) -> bool, seed: u64) -> Result<Vec<T>, EvalError> {
    let (pos, neg): (Vec<&T>, Vec<&T>) = items.iter().partition(|x| label(x));
    if pos.is_empty() {
        return Err(EvalError::SingleClass("positive"));
    }
    if neg.is_empty() {
        return Err(EvalError::SingleClass("negative"));
    }
    let mut rng = rng_for(seed, "balance");
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut keep: Vec<usize> = sample(&mut rng, majority.len(), minority.len()).into_vec();
    keep.sort_unstable();
    let mut out: Vec<T> = minority.into_iter().cloned().collect();
    out.extend(keep.into_iter().map(|i| majority[i].clone()));
    out.shuffle(&mut rng);
    Ok(out)
}

pub fn balance(examples: &[EvalExample], seed: u64) -> Result<Vec<EvalExample>, EvalError> {
    balance_by(examples, |e| e.label, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    Max,
}

pub fn aggregate(scores: &[f64], rule: Aggregation) -> Result<f64, EvalError> {
    match rule {
        Aggregation::Max => scores.iter().copied().reduce(f64::max).ok_or(EvalError::EmptyScores),
    }
}

/// All examples of `task` over the given scenes.
///
/// Joint covers every (cast character, frame) cell, absent frames included.
/// When covers frames with at least one present character.
pub fn task_examples(dataset: &Dataset, scenes: &[usize], task: TaskKind) -> Vec<EvalExample> {
    let mut out = Vec::new();
    for &s in scenes {
        let scene = &dataset.scenes[s];
        match task {
            TaskKind::Who => {
                for c in scene.cast() {
                    let label = scene.labels.any[c.index()];
                    debug_assert_eq!(label, scene.labels.row(c).contains(&true));
                    out.push(EvalExample { task, scene: s, character: Some(c), frame: None, label });
                }
            }
            TaskKind::When => {
                for (t, frame) in scene.frames.iter().enumerate() {
                    if frame.present_characters().next().is_none() {
                        continue;
                    }
                    let label = scene.labels.column_any(t);
                    debug_assert_eq!(label, scene.cast().iter().any(|&c| scene.labels.get(c, t)));
                    out.push(EvalExample { task, scene: s, character: None, frame: Some(t), label });
                }
            }
            TaskKind::Joint => {
                for c in scene.cast() {
                    for t in 0..NUM_FRAMES {
                        let label = scene.labels.get(c, t);
                        out.push(EvalExample { task, scene: s, character: Some(c), frame: Some(t), label });
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn present_characters(scene: &Scene, t: usize) -> Vec<CharacterId> {
    scene.frames[t].present_characters().map(|c| c.id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate_dataset_with_mix, GenError, GenTargets, TemplateMix};
    use proptest::prelude::*;
    use std::collections::HashSet;

    pub(crate) fn small_dataset(n: usize, seed: u64) -> Dataset {
        match generate_dataset_with_mix(n, seed, GenTargets::default(), TemplateMix::with_no_mistake_share(0.2)) {
            Ok(d) => d,
            Err(GenError::Infeasible { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn split_sizes() {
        let s = split_dataset(1213, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (970, 121, 122));
        let s = split_dataset(10, 0).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        assert_eq!(split_dataset(50, 4).unwrap(), split_dataset(50, 4).unwrap());
        assert!(matches!(split_dataset(9, 0), Err(EvalError::TooSmall(9))));
    }

    proptest! {
        #[test]
        fn splits_are_disjoint_and_exhaustive(n in 10usize..400, seed in any::<u64>()) {
            let s = split_dataset(n, seed).unwrap();
            let all: HashSet<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        }

        #[test]
        fn balance_is_exactly_half(pos in 1usize..60, neg in 1usize..60, seed in any::<u64>()) {
            let items: Vec<(usize, bool)> = (0..pos + neg).map(|i| (i, i < pos)).collect();
            let b = balance_by(&items, |x| x.1, seed).unwrap();
            let p = b.iter().filter(|x| x.1).count();
            prop_assert_eq!(2 * p, b.len());
            prop_assert_eq!(p, pos.min(neg));
            let distinct: HashSet<usize> = b.iter().map(|x| x.0).collect();
            prop_assert_eq!(distinct.len(), b.len());
        }

        #[test]
        fn max_aggregation_ignores_order(mut v in proptest::collection::vec(0.0..1.0f64, 1..9), seed in any::<u64>()) {
            let oracle = { let mut m = v[0]; for &x in &v { if x > m { m = x; } } m };
            prop_assert_eq!(aggregate(&v, Aggregation::Max).unwrap(), oracle);
            v.shuffle(&mut rng_for(seed, "perm"));
            prop_assert_eq!(aggregate(&v, Aggregation::Max).unwrap(), oracle);
        }
    }

    #[test]
    fn balance_examples() {
        let items: Vec<(usize, bool)> = (0..100).map(|i| (i, i < 30)).collect();
        let b = balance_by(&items, |x| x.1, 1).unwrap();
        assert_eq!(b.len(), 60);
        let even: Vec<(usize, bool)> = (0..80).map(|i| (i, i % 2 == 0)).collect();
        let mut b = balance_by(&even, |x| x.1, 1).unwrap();
        b.sort();
        assert_eq!(b, even);
        let none: Vec<(usize, bool)> = (0..5).map(|i| (i, false)).collect();
        let err = balance_by(&none, |x| x.1, 1).unwrap_err();
        assert_eq!(err.to_string(), "no positive examples");
    }

    #[test]
    fn aggregate_cases() {
        assert_eq!(aggregate(&[0.2, 0.6, 0.4], Aggregation::Max).unwrap(), 0.6);
        assert_eq!(aggregate(&[0.1], Aggregation::Max).unwrap(), 0.1);
        assert!(matches!(aggregate(&[], Aggregation::Max), Err(EvalError::EmptyScores)));
    }

    #[test]
    fn task_labels_are_consistent_with_joint_cells() {
        let d = small_dataset(30, 2);
        let scenes: Vec<usize> = (0..30).collect();
        let joint = task_examples(&d, &scenes, TaskKind::Joint);
        for who in task_examples(&d, &scenes, TaskKind::Who) {
            let any = joint.iter().any(|j| j.scene == who.scene && j.character == who.character && j.label);
            assert_eq!(any, who.label);
        }
        for when in task_examples(&d, &scenes, TaskKind::When) {
            let any = joint.iter().any(|j| j.scene == when.scene && j.frame == when.frame && j.label);
            assert_eq!(any, when.label);
        }
    }
}
