use super::templates::generate_scene;
use super::GenError;
use crate::rng::rng_for;
use crate::scene::{decode_scene, encode_scene, Scene, TemplateKind, NUM_FRAMES};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

/// Dataset-level priors the template mix is tuned towards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenTargets {
    /// Fraction of (present character, frame) pairs labelled mistaken.
    pub mistaken_frame_fraction: f64,
    pub fraction_tolerance: f64,
    pub mean_characters_per_frame: f64,
    pub characters_tolerance: f64,
}

impl Default for GenTargets {
    fn default() -> Self {
        GenTargets {
            mistaken_frame_fraction: 0.2365,
            fraction_tolerance: 0.03,
            mean_characters_per_frame: 1.71,
            characters_tolerance: 0.3,
        }
    }
}

impl GenTargets {
    fn fraction_ok(&self, f: f64) -> bool {
        (f - self.mistaken_frame_fraction).abs() <= self.fraction_tolerance
    }

    fn chars_ok(&self, c: f64) -> bool {
        (c - self.mean_characters_per_frame).abs() <= self.characters_tolerance
    }
}

/// Relative template weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateMix {
    pub occluded_change: f64,
    pub out_of_fov_change: f64,
    pub absence_change: f64,
    pub no_mistake: f64,
}

impl TemplateMix {
    /// Mistake templates share `1 - no_mistake` equally.
    pub fn with_no_mistake_share(q: f64) -> Self {
        let m = (1.0 - q) / 3.0;
        TemplateMix { occluded_change: m, out_of_fov_change: m, absence_change: m, no_mistake: q }
    }

    pub fn only(kind: TemplateKind) -> Self {
        let mut mix = TemplateMix { occluded_change: 0.0, out_of_fov_change: 0.0, absence_change: 0.0, no_mistake: 0.0 };
        match kind {
            TemplateKind::OccludedChange => mix.occluded_change = 1.0,
            TemplateKind::OutOfFovChange => mix.out_of_fov_change = 1.0,
            TemplateKind::AbsenceChange => mix.absence_change = 1.0,
            TemplateKind::NoMistake => mix.no_mistake = 1.0,
        }
        mix
    }

    fn no_mistake_share(&self) -> f64 {
        self.no_mistake / self.total()
    }

    fn total(&self) -> f64 {
        self.occluded_change + self.out_of_fov_change + self.absence_change + self.no_mistake
    }

    /// Template for a scene given its two uniform draws: `u` decides
    /// NoMistake versus a mistake template, `v` picks which mistake template.
    fn pick(&self, u: f64, v: f64) -> TemplateKind {
        if u < self.no_mistake_share() {
            return TemplateKind::NoMistake;
        }
        let m = self.occluded_change + self.out_of_fov_change + self.absence_change;
        if m <= 0.0 {
            return TemplateKind::NoMistake;
        }
        let x = v * m;
        if x < self.occluded_change {
            TemplateKind::OccludedChange
        } else if x < self.occluded_change + self.out_of_fov_change {
            TemplateKind::OutOfFovChange
        } else {
            TemplateKind::AbsenceChange
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    pub template_kind: TemplateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub artifact_version: String,
    pub count: usize,
    pub master_seed: u64,
    pub targets: GenTargets,
    pub mix: TemplateMix,
    pub adjustments: usize,
    pub realized_mistaken_fraction: f64,
    pub realized_characters_per_frame: f64,
    pub scenes: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    /// Rebuilds every scene from the manifest's (template, seed) entries.
    pub fn regenerate(manifest: &Manifest) -> Dataset {
        let scenes = manifest.scenes.par_iter().map(|e| generate_scene(e.template_kind, e.seed)).collect();
        Dataset { scenes, manifest: manifest.clone() }
    }
}

/// Mistaken fraction over present (character, frame) pairs and mean present characters per frame.
pub fn dataset_priors(scenes: &[Scene]) -> (f64, f64) {
    let (mut mistaken, mut present) = (0usize, 0usize);
    for s in scenes {
        mistaken += s.labels.count();
        present += s.present_count();
    }
    let frames = scenes.len() * NUM_FRAMES;
    let fraction = if present == 0 { 0.0 } else { mistaken as f64 / present as f64 };
    (fraction, present as f64 / frames.max(1) as f64)
}

const MAX_ADJUSTMENTS: usize = 16;

struct Draws {
    seeds: Vec<u64>,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn draw(count: usize, master_seed: u64) -> Draws {
    let mut rng = rng_for(master_seed, "scene-seeds");
    let mut seen = HashSet::with_capacity(count);
    let mut seeds = Vec::with_capacity(count);
    while seeds.len() < count {
        let s: u64 = rng.gen();
        if seen.insert(s) {
            seeds.push(s);
        }
    }
    let mut ru = rng_for(master_seed, "template-u");
    let mut rv = rng_for(master_seed, "template-v");
    Draws { seeds, u: (0..count).map(|_| ru.gen()).collect(), v: (0..count).map(|_| rv.gen()).collect() }
}

/// Lazily generated scene counts, keyed by (index, template).
#[derive(Default)]
struct Cache {
    counts: BTreeMap<(usize, TemplateKind), (usize, usize)>,
}

impl Cache {
    fn priors(&mut self, draws: &Draws, mix: &TemplateMix) -> (f64, f64) {
        let kinds: Vec<TemplateKind> = (0..draws.seeds.len()).map(|i| mix.pick(draws.u[i], draws.v[i])).collect();
        let missing: Vec<(usize, TemplateKind)> =
            kinds.iter().enumerate().map(|(i, &k)| (i, k)).filter(|key| !self.counts.contains_key(key)).collect();
        let fresh: Vec<_> = missing
            .par_iter()
            .map(|&(i, k)| {
                let s = generate_scene(k, draws.seeds[i]);
                ((i, k), (s.labels.count(), s.present_count()))
            })
            .collect();
        self.counts.extend(fresh);
        let (mut m, mut p) = (0, 0);
        for (i, &k) in kinds.iter().enumerate() {
            let (a, b) = self.counts[&(i, k)];
            m += a;
            p += b;
        }
        (m as f64 / p.max(1) as f64, p as f64 / (kinds.len() * NUM_FRAMES) as f64)
    }
}

fn assemble(count: usize, master_seed: u64, targets: GenTargets, mix: TemplateMix, adjustments: usize, draws: &Draws) -> Dataset {
    let entries: Vec<ManifestEntry> = (0..count)
        .map(|i| ManifestEntry { index: i, seed: draws.seeds[i], template_kind: mix.pick(draws.u[i], draws.v[i]) })
        .collect();
    let scenes: Vec<Scene> = entries.par_iter().map(|e| generate_scene(e.template_kind, e.seed)).collect();
    let (fraction, chars) = dataset_priors(&scenes);
    let manifest = Manifest {
        version: crate::scene::SCHEMA_VERSION.to_string(),
        artifact_version: crate::ARTIFACT_VERSION.to_string(),
        count,
        master_seed,
        targets,
        mix,
        adjustments,
        realized_mistaken_fraction: fraction,
        realized_characters_per_frame: chars,
        scenes: entries,
    };
    Dataset { scenes, manifest }
}

fn check(dataset: Dataset, targets: &GenTargets) -> Result<Dataset, GenError> {
    let m = &dataset.manifest;
    if targets.fraction_ok(m.realized_mistaken_fraction) && targets.chars_ok(m.realized_characters_per_frame) {
        return Ok(dataset);
    }
    Err(GenError::Infeasible {
        adjustments: m.adjustments,
        fraction: m.realized_mistaken_fraction,
        target_fraction: targets.mistaken_frame_fraction,
        fraction_tol: targets.fraction_tolerance,
        chars: m.realized_characters_per_frame,
        target_chars: targets.mean_characters_per_frame,
        chars_tol: targets.characters_tolerance,
        best: Box::new(dataset),
    })
}

/// Generates `count` scenes from `master_seed`, tuning the share of
/// NoMistake scenes by bisection (at most 16 adjustments) until the realized
/// priors fall inside the target bands.
pub fn generate_dataset(count: usize, master_seed: u64, targets: GenTargets) -> Result<Dataset, GenError> {
    if count == 0 {
        return Err(GenError::EmptyDataset);
    }
    let draws = draw(count, master_seed);
    let mut cache = Cache::default();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut best: Option<(f64, f64)> = None;
    let mut adjustments = 0;
    for _ in 0..MAX_ADJUSTMENTS {
        let q = 0.5 * (lo + hi);
        adjustments += 1;
        let (fraction, chars) = cache.priors(&draws, &TemplateMix::with_no_mistake_share(q));
        let miss = (fraction - targets.mistaken_frame_fraction).abs();
        if best.is_none_or(|(_, m)| miss < m) {
            best = Some((q, miss));
        }
        if targets.fraction_ok(fraction) && targets.chars_ok(chars) && miss <= targets.fraction_tolerance / 3.0 {
            break;
        }
        // More NoMistake scenes lower the mistaken fraction.
        if fraction > targets.mistaken_frame_fraction {
            lo = q;
        } else {
            hi = q;
        }
    }
    let q = best.map_or(0.0, |(q, _)| q);
    check(assemble(count, master_seed, targets, TemplateMix::with_no_mistake_share(q), adjustments, &draws), &targets)
}

/// Generates with a fixed template mix (no tuning) and still reports a miss
/// against `targets` as [`GenError::Infeasible`].
pub fn generate_dataset_with_mix(count: usize, master_seed: u64, targets: GenTargets, mix: TemplateMix) -> Result<Dataset, GenError> {
    if count == 0 {
        return Err(GenError::EmptyDataset);
    }
    let draws = draw(count, master_seed);
    check(assemble(count, master_seed, targets, mix, 0, &draws), &targets)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GenError + '_ {
    move |source| GenError::Io { path: path.display().to_string(), source }
}

pub fn scene_file_name(index: usize) -> String {
    format!("scene-{index:06}.json")
}

/// Writes `manifest.json` and one `scene-NNNNNN.json` per scene into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<(), GenError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&dataset.manifest).map_err(|e| GenError::Manifest(e.to_string()))?;
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    for (i, scene) in dataset.scenes.iter().enumerate() {
        let path = dir.join(scene_file_name(i));
        let doc = encode_scene(scene).map_err(|source| GenError::Codec { index: i, source })?;
        std::fs::write(&path, doc).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, GenError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| GenError::Manifest(format!("{}: {e}", manifest_path.display())))?;
    if manifest.scenes.len() != manifest.count {
        return Err(GenError::Manifest(format!("manifest lists {} scenes but count is {}", manifest.scenes.len(), manifest.count)));
    }
    let mut scenes = Vec::with_capacity(manifest.count);
    for entry in &manifest.scenes {
        let path = dir.join(scene_file_name(entry.index));
        let doc = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let scene = decode_scene(&doc).map_err(|source| GenError::Codec { index: entry.index, source })?;
        if scene.seed != entry.seed || scene.template_kind != entry.template_kind {
            return Err(GenError::Manifest(format!("{} does not match its manifest entry", path.display())));
        }
        scenes.push(scene);
    }
    Ok(Dataset { scenes, manifest })
}
