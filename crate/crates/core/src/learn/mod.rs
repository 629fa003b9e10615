//! Temporal convolutional logistic regression over feature sequences.
//!
//! `score_t = sigmoid(b + sum_k <w_k, f_{t+k-(K-1)/2}>)`, with the sequence's
//! padding vector standing in for frames outside `0..T`.

mod check;
mod model_file;
mod train;

pub use check::{grad_check, grad_check_against, GradCheckReport};
pub use model_file::{read_model, write_model, ModelFile, MODEL_VERSION};
pub use train::{accuracy, train, EpochRecord};

use crate::repr::FeatureSeq;
use crate::scene::CharacterId;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("feature dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel width {k} must be odd and at most {max}")]
    BadKernel { k: usize, max: usize },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("example has {targets} targets and {mask} mask entries for {frames} frames")]
    BadExample { targets: usize, mask: usize, frames: usize },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub k: usize,
    pub weight_decay: f64,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

/// Defaults tuned for the rasterized features: learning rate 1e-3 and weight
/// decay 1e-3. [`TrainConfig::reference`] holds the original values.
impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            k: 7,
            weight_decay: 1e-3,
            patience: 3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate 1e-5 and weight decay 1. With zero-initialised bias and
    /// features in [0, 1] this stops early before the bias has moved.
    pub fn reference() -> Self {
        TrainConfig { learning_rate: 1e-5, weight_decay: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::BadConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.k == 0 || self.k.is_multiple_of(2) {
            return bad("k must be odd");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Kernel `w` is K×D row-major: `w[k * d + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub k: usize,
    pub d: usize,
    pub w: Vec<f64>,
    pub b: f64,
}

impl ModelParams {
    pub fn zeros(k: usize, d: usize) -> Self {
        ModelParams { k, d, w: vec![0.0; k * d], b: 0.0 }
    }

    /// Uniform in ±1/sqrt(K·D), zero bias.
    pub fn init(k: usize, d: usize, rng: &mut impl Rng) -> Self {
        let h = 1.0 / ((k * d) as f64).sqrt();
        ModelParams { k, d, w: (0..k * d).map(|_| rng.gen_range(-h..=h)).collect(), b: 0.0 }
    }

    pub fn kernel_row(&self, k: usize) -> &[f64] {
        &self.w[k * self.d..(k + 1) * self.d]
    }

    fn check(&self, f: &FeatureSeq) -> Result<(), LearnError> {
        if f.dim != self.d {
            return Err(LearnError::DimensionMismatch { expected: self.d, got: f.dim });
        }
        let max = (2 * f.len()).saturating_sub(1);
        if self.k.is_multiple_of(2) || self.k > max {
            return Err(LearnError::BadKernel { k: self.k, max });
        }
        Ok(())
    }

    /// Input frame feeding kernel row `k` at output `t`, or the pad vector.
    fn input<'a>(&self, f: &'a FeatureSeq, t: usize, k: usize) -> &'a [f32] {
        let s = t as isize + k as isize - (self.k as isize - 1) / 2;
        if (0..f.len() as isize).contains(&s) {
            f.frame(s as usize)
        } else {
            &f.pad
        }
    }

    fn logit_at(&self, f: &FeatureSeq, t: usize) -> f64 {
        let mut z = self.b;
        for k in 0..self.k {
            z += dot(self.kernel_row(k), self.input(f, t, k));
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|v| v.is_finite())
    }
}

fn dot(w: &[f64], x: &[f32]) -> f64 {
    let mut s = 0.0;
    for (a, &b) in w.iter().zip(x) {
        if b != 0.0 {
            s += a * b as f64;
        }
    }
    s
}

fn axpy(out: &mut [f64], r: f64, x: &[f32]) {
    for (o, &v) in out.iter_mut().zip(x) {
        if v != 0.0 {
            *o += r * v as f64;
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Keeps a score strictly inside (0, 1).
fn clamp_score(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Pre-sigmoid scores for every frame.
pub fn logits(params: &ModelParams, f: &FeatureSeq) -> Result<Vec<f64>, LearnError> {
    params.check(f)?;
    Ok((0..f.len()).map(|t| params.logit_at(f, t)).collect())
}

/// Per-frame scores, each strictly in (0, 1).
pub fn forward(params: &ModelParams, f: &FeatureSeq) -> Result<Vec<f64>, LearnError> {
    Ok(logits(params, f)?.into_iter().map(|z| clamp_score(sigmoid(z))).collect())
}

/// A sequence with per-frame targets; only frames with `mask` set enter the
/// loss and accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub features: Arc<FeatureSeq>,
    pub targets: Vec<bool>,
    pub mask: Vec<bool>,
    pub scene: usize,
    pub character: CharacterId,
}

impl TrainExample {
    /// Every frame supervised.
    pub fn full(features: Arc<FeatureSeq>, targets: Vec<bool>, scene: usize, character: CharacterId) -> Self {
        let mask = vec![true; targets.len()];
        TrainExample { features, targets, mask, scene, character }
    }

    /// Only frame `t` supervised.
    pub fn cell(features: Arc<FeatureSeq>, targets: Vec<bool>, t: usize, scene: usize, character: CharacterId) -> Self {
        let mut mask = vec![false; targets.len()];
        mask[t] = true;
        TrainExample { features, targets, mask, scene, character }
    }

    fn validate(&self, params: &ModelParams) -> Result<(), LearnError> {
        params.check(&self.features)?;
        let frames = self.features.len();
        if self.targets.len() != frames || self.mask.len() != frames {
            return Err(LearnError::BadExample { targets: self.targets.len(), mask: self.mask.len(), frames });
        }
        Ok(())
    }

    fn supervised(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(t, _)| t)
    }
}

fn validate_batch(params: &ModelParams, batch: &[TrainExample]) -> Result<usize, LearnError> {
    let mut n = 0;
    for ex in batch {
        ex.validate(params)?;
        n += ex.supervised().count();
    }
    Ok(n)
}

/// Binary cross-entropy of logit `z` against `y`, log clamped at 1e-12.
fn bce(z: f64, y: bool) -> f64 {
    let p = if y { sigmoid(z) } else { sigmoid(-z) };
    -p.max(1e-12).ln()
}

fn penalty(params: &ModelParams, weight_decay: f64) -> f64 {
    weight_decay * params.w.iter().map(|v| v * v).sum::<f64>()
}

/// Mean cross-entropy over supervised (example, frame) pairs plus
/// `weight_decay * ||w||^2`.
pub fn loss(params: &ModelParams, batch: &[TrainExample], weight_decay: f64) -> Result<f64, LearnError> {
    let n = validate_batch(params, batch)?;
    let mut data = 0.0;
    for ex in batch {
        for t in ex.supervised() {
            data += bce(params.logit_at(&ex.features, t), ex.targets[t]);
        }
    }
    Ok(data / n.max(1) as f64 + penalty(params, weight_decay))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub b: f64,
}

/// Analytic gradient of [`loss`], returned with the loss value.
pub fn loss_and_gradients(params: &ModelParams, batch: &[TrainExample], weight_decay: f64) -> Result<(f64, Gradients), LearnError> {
    let n = validate_batch(params, batch)?.max(1) as f64;
    let mut g = Gradients { w: vec![0.0; params.w.len()], b: 0.0 };
    let mut data = 0.0;
    for ex in batch {
        for t in ex.supervised() {
            let z = params.logit_at(&ex.features, t);
            let y = ex.targets[t];
            data += bce(z, y);
            let r = (sigmoid(z) - if y { 1.0 } else { 0.0 }) / n;
            g.b += r;
            for k in 0..params.k {
                let x = params.input(&ex.features, t, k);
                axpy(&mut g.w[k * params.d..(k + 1) * params.d], r, x);
            }
        }
    }
    for (gw, w) in g.w.iter_mut().zip(&params.w) {
        *gw += 2.0 * weight_decay * w;
    }
    Ok((data / n + penalty(params, weight_decay), g))
}

pub fn gradients(params: &ModelParams, batch: &[TrainExample], weight_decay: f64) -> Result<Gradients, LearnError> {
    Ok(loss_and_gradients(params, batch, weight_decay)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_w: Vec<f64>,
    pub v_w: Vec<f64>,
    pub m_b: f64,
    pub v_b: f64,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState { m_w: vec![0.0; params.w.len()], v_w: vec![0.0; params.w.len()], m_b: 0.0, v_b: 0.0, step: 0 }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(state: &mut AdamState, params: &mut ModelParams, grads: &Gradients, config: &TrainConfig) {
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let update = |m: &mut f64, v: &mut f64, p: &mut f64, g: f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
    };
    for i in 0..params.w.len() {
        update(&mut state.m_w[i], &mut state.v_w[i], &mut params.w[i], grads.w[i]);
    }
    update(&mut state.m_b, &mut state.v_b, &mut params.b, grads.b);
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Triple loop straight from the definition.
    fn oracle_logits(p: &ModelParams, f: &FeatureSeq) -> Vec<f64> {
        let c = (p.k as isize - 1) / 2;
        (0..f.len())
            .map(|t| {
                let mut z = p.b;
                for k in 0..p.k {
                    let s = t as isize + k as isize - c;
                    for j in 0..p.d {
                        let x = if s < 0 || s >= f.len() as isize { f.pad[j] } else { f.data[s as usize * f.dim + j] };
                        z += p.w[k * p.d + j] * x as f64;
                    }
                }
                z
            })
            .collect()
    }

    #[test]
    fn zero_params_give_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = seq(8, 5, &mut rng);
        assert!(forward(&ModelParams::zeros(7, 5), &f).unwrap().iter().all(|&s| s == 0.5));
    }

    #[test]
    fn bias_only() {
        let mut f = seq(8, 3, &mut ChaCha8Rng::seed_from_u64(0));
        f.data.fill(0.0);
        let mut p = ModelParams::zeros(1, 3);
        p.b = 10.0;
        for s in forward(&p, &f).unwrap() {
            assert_eq!(s, sigmoid(10.0));
            assert!((s - 0.99995).abs() < 1e-5);
        }
    }

    #[test]
    fn hand_evaluated_small_case() {
        let mut f = seq(3, 2, &mut ChaCha8Rng::seed_from_u64(0));
        f.data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = ModelParams { k: 3, d: 2, w: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6], b: -1.0 };
        // t=0: pad, f0, f1; t=1: f0, f1, f2; t=2: f1, f2, pad.
        let want = [
            -1.0 + (0.3 + 0.8) + (0.5 * 3.0 + 0.6 * 4.0),
            -1.0 + (0.1 + 0.4) + (0.9 + 1.6) + (2.5 + 3.6),
            -1.0 + (0.3 + 0.8) + (1.5 + 2.4),
        ];
        let got = logits(&p, &f).unwrap();
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn logits_match_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.gen_range(1..20);
            let k = [1, 3, 5, 7][rng.gen_range(0..4)];
            let f = seq(8, d, &mut rng);
            let p = params(k, d, 0.5, &mut rng);
            for (a, b) in logits(&p, &f).unwrap().iter().zip(oracle_logits(&p, &f)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn scores_stay_open_interval() {
        let mut f = seq(8, 2, &mut ChaCha8Rng::seed_from_u64(0));
        f.data.fill(1.0);
        for b in [-1e6, -800.0, 0.0, 800.0, 1e6] {
            let p = ModelParams { k: 1, d: 2, w: vec![0.0; 2], b };
            for s in forward(&p, &f).unwrap() {
                assert!(s > 0.0 && s < 1.0, "{s}");
            }
        }
    }

    #[test]
    fn dimension_and_kernel_checks() {
        let f = seq(8, 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(forward(&ModelParams::zeros(3, 5), &f), Err(LearnError::DimensionMismatch { .. })));
        assert!(matches!(forward(&ModelParams::zeros(17, 4), &f), Err(LearnError::BadKernel { .. })));
        assert!(matches!(forward(&ModelParams::zeros(4, 4), &f), Err(LearnError::BadKernel { .. })));
        assert!(forward(&ModelParams::zeros(15, 4), &f).is_ok());
    }

    #[test]
    fn loss_at_zero_is_ln2() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch: Vec<_> = (0..5).map(|_| example(8, 6, &mut rng)).collect();
        let l = loss(&ModelParams::zeros(7, 6), &batch, 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let mut one = example(1, 6, &mut rng);
        one.targets = vec![true];
        let l = loss(&ModelParams::zeros(1, 6), &[one], 0.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let d = rng.gen_range(1..10);
            let batch: Vec<_> = (0..rng.gen_range(1..6)).map(|_| example(8, d, &mut rng)).collect();
            let p = params(3, d, 0.7, &mut rng);
            let wd = rng.gen_range(0.0..2.0);
            let mut total = 0.0;
            let mut n = 0.0;
            for ex in &batch {
                for (t, z) in oracle_logits(&p, &ex.features).into_iter().enumerate() {
                    let yhat = 1.0 / (1.0 + (-z).exp());
                    total += if ex.targets[t] { -yhat.ln() } else { -(1.0 - yhat).ln() };
                    n += 1.0;
                }
            }
            let reg: f64 = p.w.iter().map(|w| wd * w * w).sum();
            let want = total / n + reg;
            let got = loss(&p, &batch, wd).unwrap();
            assert!((got - want).abs() <= 1e-12 * want.abs());
        }
    }

    #[test]
    fn zero_features_give_pure_decay_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut ex = example(8, 4, &mut rng);
        Arc::make_mut(&mut ex.features).data.fill(0.0);
        let p = params(3, 4, 1.0, &mut rng);
        let g = gradients(&p, &[ex], 0.7).unwrap();
        for (gw, w) in g.w.iter().zip(&p.w) {
            assert_eq!(*gw, 2.0 * 0.7 * w);
        }
    }

    #[test]
    fn matched_targets_zero_bias_gradient() {
        // Half the frames positive at logit 0: residuals cancel exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ex = example(8, 3, &mut rng);
        ex.targets = (0..8).map(|t| t % 2 == 0).collect();
        let g = gradients(&ModelParams::zeros(3, 3), &[ex], 1.0).unwrap();
        assert_eq!(g.b, 0.0);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let cfg = TrainConfig::reference();
        let mut p = ModelParams { k: 1, d: 2, w: vec![0.0, 0.0], b: 0.0 };
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &Gradients { w: vec![3.0, 0.0], b: -0.5 }, &cfg);
        // Bias-corrected moments are g and g^2, so the step is lr * g / (|g| + eps).
        let lr = cfg.learning_rate;
        assert!((p.w[0] + lr * 3.0 / (3.0 + 1e-8)).abs() < 1e-18);
        assert!((p.w[0] + lr).abs() < 1e-13);
        assert_eq!(p.w[1], 0.0);
        assert!((p.b - lr * 0.5 / (0.5 + 1e-8)).abs() < 1e-18);
        assert_eq!(s.step, 1);
        let (mut p2, mut s2) = (ModelParams { k: 1, d: 2, w: vec![0.0, 0.0], b: 0.0 }, AdamState::new(&p));
        adam_step(&mut s2, &mut p2, &Gradients { w: vec![3.0, 0.0], b: -0.5 }, &cfg);
        assert_eq!((p, s), (p2, s2));
    }

    #[test]
    fn decay_shrinks_weights_on_zero_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ex = example(8, 3, &mut rng);
        Arc::make_mut(&mut ex.features).data.fill(0.0);
        let cfg = TrainConfig { learning_rate: 1e-3, ..TrainConfig::default() };
        let mut p = params(3, 3, 0.05, &mut rng);
        let mut s = AdamState::new(&p);
        let norm = |p: &ModelParams| p.w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut prev = norm(&p);
        for _ in 0..40 {
            let g = gradients(&p, std::slice::from_ref(&ex), cfg.weight_decay).unwrap();
            adam_step(&mut s, &mut p, &g, &cfg);
            let n = norm(&p);
            assert!(n < prev, "{n} !< {prev}");
            prev = n;
        }
    }

    #[test]
    fn logit_is_linear_in_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let f = seq(8, 6, &mut rng);
            let p = params(5, 6, 1.0, &mut rng);
            let a: f64 = rng.gen_range(-3.0..3.0);
            let scaled = ModelParams { w: p.w.iter().map(|v| a * v).collect(), b: a * p.b, ..p.clone() };
            for (x, y) in logits(&scaled, &f).unwrap().iter().zip(logits(&p, &f).unwrap()) {
                assert!((x - a * y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shift_equivariance_in_the_interior() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = params(3, 4, 1.0, &mut rng);
        let f = seq(8, 4, &mut rng);
        let mut shifted = f.clone();
        shifted.data = [vec![0.0; 4], f.data[..7 * 4].to_vec()].concat();
        let (a, b) = (logits(&p, &f).unwrap(), logits(&p, &shifted).unwrap());
        for t in 2..7 {
            assert!((b[t] - a[t - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn k1_score_depends_only_on_own_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = params(1, 5, 1.0, &mut rng);
        let f = seq(8, 5, &mut rng);
        let base = forward(&p, &f).unwrap();
        for t in 0..8 {
            let mut g = f.clone();
            for s in (0..8).filter(|&s| s != t) {
                for j in 0..5 {
                    g.data[s * 5 + j] = rng.gen_range(-5.0..5.0);
                }
            }
            assert_eq!(forward(&p, &g).unwrap()[t].to_bits(), base[t].to_bits());
        }
    }
}
