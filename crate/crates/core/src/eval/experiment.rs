use super::scoring::{ConstantScorer, FrameScorer, ModelScorer};
use super::{balance, run_task, split_dataset, task_examples, EvalError, EvalReport, Split, TaskKind};
use crate::gen::Dataset;
use crate::learn::{train, EpochRecord, ModelParams, TrainConfig, TrainExample};
use crate::repr::{baseline_features, featurize_sequence, BaselineKind, FeatureKind, FeatureSeq, Variant};
use crate::rng::{derive_seed, rng_for};
use crate::scene::{CharacterId, NUM_FRAMES};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Feature sequences for every (scene, cast character) pair of a dataset.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub kind: FeatureKind,
    seqs: HashMap<(usize, CharacterId), Arc<FeatureSeq>>,
}

impl FeatureTable {
    pub fn get(&self, scene: usize, c: CharacterId) -> Option<&FeatureSeq> {
        self.seqs.get(&(scene, c)).map(Arc::as_ref)
    }

    pub fn get_arc(&self, scene: usize, c: CharacterId) -> Option<Arc<FeatureSeq>> {
        self.seqs.get(&(scene, c)).cloned()
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }
}

type TableEntry = ((usize, CharacterId), Arc<FeatureSeq>);

pub fn build_feature_table(dataset: &Dataset, kind: FeatureKind) -> Result<FeatureTable, EvalError> {
    let per_scene: Vec<Vec<TableEntry>> = dataset
        .scenes
        .par_iter()
        .enumerate()
        .map(|(s, scene)| {
            scene
                .cast()
                .into_iter()
                .map(|c| {
                    let seq = match kind {
                        FeatureKind::Image(v) => featurize_sequence(scene, c, v)?,
                        FeatureKind::Baseline(b) => baseline_features(scene, c, b)?,
                    };
                    Ok(((s, c), Arc::new(seq)))
                })
                .collect::<Result<Vec<_>, EvalError>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(FeatureTable { kind, seqs: per_scene.into_iter().flatten().collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Constant score of one half.
    Chance,
    /// Prior-only model fit to permuted training labels.
    LabelShuffled,
    Baseline(BaselineKind),
    MultipleImage,
}

impl Method {
    /// Every row of the main results table, in display order.
    pub const MAIN: [Method; 10] = [
        Method::Chance,
        Method::LabelShuffled,
        Method::Baseline(BaselineKind::Time),
        Method::Baseline(BaselineKind::Pose),
        Method::Baseline(BaselineKind::TimePose),
        Method::Baseline(BaselineKind::Expression),
        Method::Baseline(BaselineKind::CharacterId),
        Method::Baseline(BaselineKind::Present),
        Method::Baseline(BaselineKind::SingleImage),
        Method::MultipleImage,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Chance => "Chance",
            Method::LabelShuffled => "Label shuffled",
            Method::Baseline(BaselineKind::Time) => "Time",
            Method::Baseline(BaselineKind::Pose) => "Pose",
            Method::Baseline(BaselineKind::TimePose) => "Time + Pose",
            Method::Baseline(BaselineKind::Expression) => "Expression",
            Method::Baseline(BaselineKind::CharacterId) => "Character ID",
            Method::Baseline(BaselineKind::Present) => "Present",
            Method::Baseline(BaselineKind::SingleImage) => "Single Image",
            Method::MultipleImage => "Multiple Image",
        }
    }

    /// Snake-case name used in config files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Method::Chance => "chance",
            Method::LabelShuffled => "label_shuffled",
            Method::Baseline(b) => b.name(),
            Method::MultipleImage => "multiple_image",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::MAIN.into_iter().find(|m| m.key() == s).ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// A method plus the feature variant it is trained on. Evaluation always
/// uses unaltered features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub train_variant: Variant,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec { method, train_variant: Variant::Standard }
    }

    pub fn ablation(variant: Variant) -> Self {
        MethodSpec { method: Method::MultipleImage, train_variant: variant }
    }

    pub fn label(&self) -> String {
        match (self.method, self.train_variant) {
            (m, Variant::Standard) => m.label().to_string(),
            (m, v) => format!("{} ({v})", m.label()),
        }
    }

    /// Features and kernel width used for training, or `None` for methods that do not train.
    fn training(&self, config: &TrainConfig) -> Option<(FeatureKind, usize)> {
        match self.method {
            Method::Chance | Method::LabelShuffled => None,
            Method::MultipleImage => Some((FeatureKind::Image(self.train_variant), config.k)),
            Method::Baseline(BaselineKind::SingleImage) => Some((FeatureKind::Image(Variant::Standard), 1)),
            Method::Baseline(b @ (BaselineKind::Time | BaselineKind::Pose | BaselineKind::TimePose)) => {
                Some((FeatureKind::Baseline(b), 1))
            }
            Method::Baseline(b) => Some((FeatureKind::Baseline(b), config.k)),
        }
    }

    fn eval_features(&self, config: &TrainConfig) -> Option<FeatureKind> {
        self.training(config).map(|(kind, _)| match kind {
            FeatureKind::Image(_) => FeatureKind::Image(Variant::Standard),
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub repetitions: usize,
    pub base_seed: u64,
    pub train: TrainConfig,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { repetitions: 20, base_seed: 0, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedMethod {
    Constant(f64),
    Model { params: ModelParams, history: Vec<EpochRecord>, features: FeatureKind },
}

/// Balanced joint cells over `scenes`, as single-frame supervised sequences.
/// Reversed features get reversed targets so each cell keeps its label.
fn cell_examples(dataset: &Dataset, scenes: &[usize], table: &FeatureTable, seed: u64) -> Result<Vec<TrainExample>, EvalError> {
    let reverse = table.kind == FeatureKind::Image(Variant::Rewind);
    let cells = balance(&task_examples(dataset, scenes, TaskKind::Joint), seed)?;
    cells
        .into_iter()
        .map(|ex| {
            let (c, t) = (ex.character.expect("joint cell"), ex.frame.expect("joint cell"));
            let features = table.get_arc(ex.scene, c).ok_or(EvalError::MissingFeatures(ex.scene, c))?;
            let mut targets = dataset.scenes[ex.scene].labels.row(c).to_vec();
            let t = if reverse {
                targets.reverse();
                NUM_FRAMES - 1 - t
            } else {
                t
            };
            Ok(TrainExample::cell(features, targets, t, ex.scene, c))
        })
        .collect()
}

/// Fits `spec` on the training split of one repetition.
pub fn train_method(
    dataset: &Dataset,
    spec: &MethodSpec,
    split: &Split,
    tables: &HashMap<FeatureKind, Arc<FeatureTable>>,
    config: &TrainConfig,
    rep_seed: u64,
) -> Result<TrainedMethod, EvalError> {
    match spec.method {
        Method::Chance => return Ok(TrainedMethod::Constant(0.5)),
        Method::LabelShuffled => {
            let mut labels: Vec<bool> =
                balance(&task_examples(dataset, &split.train, TaskKind::Joint), derive_seed(rep_seed, "balance-train"))?
                    .iter()
                    .map(|e| e.label)
                    .collect();
            labels.shuffle(&mut rng_for(rep_seed, "label-shuffle"));
            // Without features the best fit is the positive rate of the permuted labels.
            let p = labels.iter().filter(|&&y| y).count() as f64 / labels.len() as f64;
            return Ok(TrainedMethod::Constant(p));
        }
        _ => {}
    }
    let (kind, k) = spec.training(config).expect("trainable method");
    let table = &tables[&kind];
    let train_set = cell_examples(dataset, &split.train, table, derive_seed(rep_seed, "balance-train"))?;
    let val_set = cell_examples(dataset, &split.val, table, derive_seed(rep_seed, "balance-val"))?;
    let cfg = TrainConfig { k, seed: derive_seed(rep_seed, "train"), ..config.clone() };
    let (params, history) = train(&train_set, &val_set, &cfg)?;
    Ok(TrainedMethod::Model { params, history, features: kind })
}

fn scorer_for(
    trained: &TrainedMethod,
    spec: &MethodSpec,
    config: &TrainConfig,
    tables: &HashMap<FeatureKind, Arc<FeatureTable>>,
) -> Box<dyn FrameScorer> {
    match trained {
        TrainedMethod::Constant(p) => Box::new(ConstantScorer(*p)),
        TrainedMethod::Model { params, .. } => {
            let kind = spec.eval_features(config).expect("trained method has features");
            Box::new(ModelScorer { params: params.clone(), table: tables[&kind].clone() })
        }
    }
}

fn rep_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Runs every spec over `settings.repetitions` random splits and reports
/// accuracy per (method, task). `log` receives one line per finished unit.
pub fn run_suite(
    dataset: &Dataset,
    specs: &[MethodSpec],
    settings: &EvalSettings,
    log: &(dyn Fn(String) + Sync),
) -> Result<EvalReport, EvalError> {
    if settings.repetitions < 2 {
        return Err(EvalError::TooFewRepetitions(settings.repetitions));
    }
    settings.train.validate()?;
    let mut tables: HashMap<FeatureKind, Arc<FeatureTable>> = HashMap::new();
    for spec in specs {
        let needed = spec.training(&settings.train).map(|t| t.0).into_iter().chain(spec.eval_features(&settings.train));
        for kind in needed {
            if let std::collections::hash_map::Entry::Vacant(slot) = tables.entry(kind) {
                slot.insert(Arc::new(build_feature_table(dataset, kind)?));
            }
        }
    }
    let per_rep: Vec<Vec<[f64; 3]>> = (0..settings.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = rep_seed(settings.base_seed, r);
            let annotate = |e: EvalError| EvalError::Repetition { rep: r, source: Box::new(e) };
            let split = split_dataset(dataset.len(), seed).map_err(annotate)?;
            let eval_sets = TaskKind::ALL
                .iter()
                .map(|&task| balance(&task_examples(dataset, &split.test, task), derive_seed(seed, task.name())))
                .collect::<Result<Vec<_>, _>>()
                .map_err(annotate)?;
            specs
                .iter()
                .map(|spec| {
                    let trained = train_method(dataset, spec, &split, &tables, &settings.train, seed).map_err(annotate)?;
                    let scorer = scorer_for(&trained, spec, &settings.train, &tables);
                    let mut acc = [0.0; 3];
                    for (i, &task) in TaskKind::ALL.iter().enumerate() {
                        acc[i] = run_task(scorer.as_ref(), dataset, &eval_sets[i], task).map_err(annotate)?;
                    }
                    let epochs = match &trained {
                        TrainedMethod::Model { history, .. } => history.len(),
                        TrainedMethod::Constant(_) => 0,
                    };
                    log(format!(
                        "rep {r} {}: who {:.1} when {:.1} joint {:.1} ({epochs} epochs)",
                        spec.label(),
                        acc[0],
                        acc[1],
                        acc[2]
                    ));
                    Ok(acc)
                })
                .collect::<Result<Vec<_>, EvalError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut report = EvalReport::new();
    for (i, spec) in specs.iter().enumerate() {
        for (j, &task) in TaskKind::ALL.iter().enumerate() {
            report.push(spec.label(), task, per_rep.iter().map(|rep| rep[i][j]).collect());
        }
    }
    Ok(report)
}

pub fn run_experiment(dataset: &Dataset, spec: &MethodSpec, settings: &EvalSettings) -> Result<EvalReport, EvalError> {
    run_suite(dataset, std::slice::from_ref(spec), settings, &|_| {})
}

/// Multiple Image trained on `variant` features and evaluated on unaltered ones.
pub fn run_ablation(dataset: &Dataset, variant: Variant, settings: &EvalSettings) -> Result<EvalReport, EvalError> {
    run_experiment(dataset, &MethodSpec::ablation(variant), settings)
}

/// Accuracy of one fixed model on the test split of each repetition.
///
/// Image models are always scored on unaltered features. Test scenes of a
/// repetition may overlap the scenes the model was trained on unless the
/// split seed matches the one used for training.
pub fn evaluate_model(
    dataset: &Dataset,
    params: &ModelParams,
    features: FeatureKind,
    tasks: &[TaskKind],
    repetitions: usize,
    base_seed: u64,
    label: &str,
) -> Result<EvalReport, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::TooFewRepetitions(0));
    }
    let kind = match features {
        FeatureKind::Image(_) => FeatureKind::Image(Variant::Standard),
        other => other,
    };
    let scorer = ModelScorer { params: params.clone(), table: Arc::new(build_feature_table(dataset, kind)?) };
    let per_rep: Vec<Vec<f64>> = (0..repetitions)
        .map(|r| {
            let seed = rep_seed(base_seed, r);
            let annotate = |e: EvalError| EvalError::Repetition { rep: r, source: Box::new(e) };
            let split = split_dataset(dataset.len(), seed).map_err(annotate)?;
            tasks
                .iter()
                .map(|&task| {
                    let ex = balance(&task_examples(dataset, &split.test, task), derive_seed(seed, task.name())).map_err(annotate)?;
                    run_task(&scorer, dataset, &ex, task).map_err(annotate)
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let mut report = EvalReport::new();
    for (j, &task) in tasks.iter().enumerate() {
        report.push(label, task, per_rep.iter().map(|rep| rep[j]).collect());
    }
    Ok(report)
}
