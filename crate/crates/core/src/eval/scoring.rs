use super::{aggregate, present_characters, Aggregation, EvalError, EvalExample, FeatureTable, TaskKind};
use crate::gen::Dataset;
use crate::learn::{forward, ModelParams};
use crate::scene::{CharacterId, NUM_FRAMES};
use rayon::prelude::*;
use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

/// Scores above or at this value count as positive.
pub const THRESHOLD: f64 = 0.5;

/// Per-frame mistaken scores for one (scene, character) pair.
pub trait FrameScorer: Sync {
    fn frame_scores(&self, dataset: &Dataset, scene: usize, c: CharacterId) -> Result<Vec<f64>, EvalError>;
}

/// Same score everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl FrameScorer for ConstantScorer {
    fn frame_scores(&self, _: &Dataset, _: usize, _: CharacterId) -> Result<Vec<f64>, EvalError> {
        Ok(vec![self.0; NUM_FRAMES])
    }
}

/// A trained kernel applied to precomputed features.
#[derive(Debug, Clone)]
pub struct ModelScorer {
    pub params: ModelParams,
    pub table: Arc<FeatureTable>,
}

impl FrameScorer for ModelScorer {
    fn frame_scores(&self, _: &Dataset, scene: usize, c: CharacterId) -> Result<Vec<f64>, EvalError> {
        let seq = self.table.get(scene, c).ok_or(EvalError::MissingFeatures(scene, c))?;
        Ok(forward(&self.params, seq)?)
    }
}

fn example_score(ex: &EvalExample, dataset: &Dataset, scores: &HashMap<(usize, CharacterId), Vec<f64>>) -> Result<f64, EvalError> {
    let get = |c: CharacterId| &scores[&(ex.scene, c)];
    match ex.task {
        TaskKind::Who => aggregate(get(ex.character.expect("who example has a character")), Aggregation::Max),
        TaskKind::When => {
            let t = ex.frame.expect("when example has a frame");
            let per_character: Vec<f64> =
                present_characters(&dataset.scenes[ex.scene], t).into_iter().map(|c| get(c)[t]).collect();
            aggregate(&per_character, Aggregation::Max)
        }
        TaskKind::Joint => Ok(get(ex.character.expect("joint example has a character"))[ex.frame.expect("joint example has a frame")]),
    }
}

/// Accuracy in percent of `scorer` on a balanced set of `task` examples.
///
/// Who takes the max over the character's frame scores, When the max over
/// the characters present in the frame, Joint the single cell.
pub fn run_task(scorer: &dyn FrameScorer, dataset: &Dataset, examples: &[EvalExample], task: TaskKind) -> Result<f64, EvalError> {
    let positives = examples.iter().filter(|e| e.label).count();
    if examples.is_empty() || 2 * positives != examples.len() {
        return Err(EvalError::Unbalanced { positives, total: examples.len() });
    }
    let mut needed = BTreeSet::new();
    for ex in examples {
        assert_eq!(ex.task, task, "example of task {} passed to {task}", ex.task);
        match ex.character {
            Some(c) => {
                needed.insert((ex.scene, c));
            }
            None => {
                let t = ex.frame.expect("when example has a frame");
                needed.extend(present_characters(&dataset.scenes[ex.scene], t).into_iter().map(|c| (ex.scene, c)));
            }
        }
    }
    let needed: Vec<_> = needed.into_iter().collect();
    let scores: HashMap<(usize, CharacterId), Vec<f64>> = needed
        .par_iter()
        .map(|&(s, c)| Ok(((s, c), scorer.frame_scores(dataset, s, c)?)))
        .collect::<Result<_, EvalError>>()?;
    let mut correct = 0usize;
    for ex in examples {
        let positive = example_score(ex, dataset, &scores)? >= THRESHOLD;
        correct += (positive == ex.label) as usize;
    }
    Ok(100.0 * correct as f64 / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::tests::small_dataset;
    use crate::eval::{balance, task_examples};

    /// Scores read straight from a table.
    struct Table(HashMap<(usize, CharacterId), Vec<f64>>);

    impl FrameScorer for Table {
        fn frame_scores(&self, _: &Dataset, s: usize, c: CharacterId) -> Result<Vec<f64>, EvalError> {
            Ok(self.0[&(s, c)].clone())
        }
    }

    /// Ground-truth labels as scores.
    struct Oracle;

    impl FrameScorer for Oracle {
        fn frame_scores(&self, d: &Dataset, s: usize, c: CharacterId) -> Result<Vec<f64>, EvalError> {
            Ok(d.scenes[s].labels.row(c).iter().map(|&m| m as u8 as f64).collect())
        }
    }

    #[test]
    fn constant_and_oracle_scores() {
        let d = small_dataset(40, 3);
        let scenes: Vec<usize> = (0..40).collect();
        for task in TaskKind::ALL {
            let ex = balance(&task_examples(&d, &scenes, task), 7).unwrap();
            assert_eq!(run_task(&ConstantScorer(0.5), &d, &ex, task).unwrap(), 50.0);
            assert_eq!(run_task(&ConstantScorer(0.1), &d, &ex, task).unwrap(), 50.0);
            assert_eq!(run_task(&Oracle, &d, &ex, task).unwrap(), 100.0);
        }
    }

    #[test]
    fn hand_counted_who_set() {
        let d = small_dataset(12, 1);
        let mut table = HashMap::new();
        let mut examples = Vec::new();
        for (i, (score, label)) in [(0.6, true), (0.4, false), (0.7, false), (0.2, true)].into_iter().enumerate() {
            let c = d.scenes[i].cast()[0];
            let mut frames = vec![0.0; NUM_FRAMES];
            frames[i + 1] = score;
            table.insert((i, c), frames);
            examples.push(EvalExample { task: TaskKind::Who, scene: i, character: Some(c), frame: None, label });
        }
        assert_eq!(run_task(&Table(table), &d, &examples, TaskKind::Who).unwrap(), 50.0);
    }

    #[test]
    fn unbalanced_set_rejected() {
        let d = small_dataset(12, 1);
        let scenes: Vec<usize> = (0..12).collect();
        let ex = task_examples(&d, &scenes, TaskKind::Joint);
        assert!(matches!(run_task(&ConstantScorer(0.5), &d, &ex, TaskKind::Joint), Err(EvalError::Unbalanced { .. })));
    }
}
