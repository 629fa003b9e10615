use super::raster::{downsample2, rasterize, CH_BODY, CH_GAZE};
use super::{person_centric, ReprError, FEATURE_DIM};
use crate::scene::{CharacterId, Facing, Frame, Scene, CANVAS_HEIGHT, CANVAS_WIDTH, NUM_CHARACTERS, NUM_FRAMES};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// How image features are derived from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standard,
    /// Raw frame coordinates, no person-centric transform.
    Centered,
    /// Character's facing reversed and its own body and gaze planes removed.
    Flipped,
    /// Standard features in reverse frame order.
    Rewind,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Standard, Variant::Centered, Variant::Flipped, Variant::Rewind];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Standard => "standard",
            Variant::Centered => "centered",
            Variant::Flipped => "flipped",
            Variant::Rewind => "rewind",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ReprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| ReprError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Time,
    Pose,
    TimePose,
    Expression,
    CharacterId,
    Present,
    /// Standard image features seen one frame at a time.
    SingleImage,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Time,
        BaselineKind::Pose,
        BaselineKind::TimePose,
        BaselineKind::Expression,
        BaselineKind::CharacterId,
        BaselineKind::Present,
        BaselineKind::SingleImage,
    ];

    pub fn dim(self) -> usize {
        match self {
            BaselineKind::Time => 1,
            BaselineKind::Pose => 3,
            BaselineKind::TimePose => 4,
            BaselineKind::Expression => 5,
            BaselineKind::CharacterId => NUM_CHARACTERS,
            BaselineKind::Present => 2,
            BaselineKind::SingleImage => FEATURE_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Time => "time",
            BaselineKind::Pose => "pose",
            BaselineKind::TimePose => "time_pose",
            BaselineKind::Expression => "expression",
            BaselineKind::CharacterId => "character_id",
            BaselineKind::Present => "present",
            BaselineKind::SingleImage => "single_image",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = ReprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaselineKind::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| ReprError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Image(Variant),
    Baseline(BaselineKind),
}

/// T per-frame feature vectors for one (scene, character) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeq {
    pub kind: FeatureKind,
    pub dim: usize,
    /// Row-major `[t * dim + j]`.
    pub data: Vec<f32>,
    pub presence: [bool; NUM_FRAMES],
    /// Vector a learner substitutes for time steps outside the sequence.
    pub pad: Vec<f32>,
}

impl FeatureSeq {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// Frames in reverse order, presence reversed with them.
    pub fn reversed(&self) -> FeatureSeq {
        let t = self.len();
        let data = (0..t).rev().flat_map(|i| self.frame(i).iter().copied()).collect();
        let mut presence = self.presence;
        presence.reverse();
        FeatureSeq { data, presence, ..self.clone() }
    }
}

fn presence(scene: &Scene, c: CharacterId) -> Result<[bool; NUM_FRAMES], ReprError> {
    let mut p = [false; NUM_FRAMES];
    for (t, f) in scene.frames.iter().enumerate().take(NUM_FRAMES) {
        p[t] = f.is_present(c);
    }
    if !p.contains(&true) {
        return Err(ReprError::NeverPresent(c));
    }
    Ok(p)
}

fn image_frame(frame: &Frame, c: CharacterId, scene: &Scene, variant: Variant) -> Result<Vec<f32>, ReprError> {
    if !frame.is_present(c) {
        return Ok(vec![0.0; FEATURE_DIM]);
    }
    let subject = scene.proposition.subject;
    let fine = match variant {
        Variant::Standard | Variant::Rewind => rasterize(&person_centric(frame, c)?, c, subject),
        Variant::Centered => rasterize(frame, c, subject),
        Variant::Flipped => {
            let mut f = frame.clone();
            let me = f.character_mut(c);
            me.facing = me.facing.flipped();
            let mut g = rasterize(&person_centric(&f, c)?, c, subject);
            g.clear_channel(CH_BODY);
            g.clear_channel(CH_GAZE);
            g
        }
    };
    Ok(downsample2(&fine)?.data.iter().map(|&v| v as f32).collect())
}

/// Image features of character `c` over the whole scene.
///
/// Frames where `c` is absent are all zero, presence plane included.
pub fn featurize_sequence(scene: &Scene, c: CharacterId, variant: Variant) -> Result<FeatureSeq, ReprError> {
    let presence = presence(scene, c)?;
    let mut data = Vec::with_capacity(NUM_FRAMES * FEATURE_DIM);
    for frame in scene.frames.iter().take(NUM_FRAMES) {
        data.extend(image_frame(frame, c, scene, variant)?);
    }
    let seq = FeatureSeq { kind: FeatureKind::Image(variant), dim: FEATURE_DIM, data, presence, pad: vec![0.0; FEATURE_DIM] };
    Ok(if variant == Variant::Rewind { seq.reversed() } else { seq })
}

/// Hand-crafted per-frame features for the baseline methods.
pub fn baseline_features(scene: &Scene, c: CharacterId, kind: BaselineKind) -> Result<FeatureSeq, ReprError> {
    if kind == BaselineKind::SingleImage {
        let mut s = featurize_sequence(scene, c, Variant::Standard)?;
        s.kind = FeatureKind::Baseline(kind);
        return Ok(s);
    }
    let presence = presence(scene, c)?;
    let dim = kind.dim();
    let mut data = Vec::with_capacity(NUM_FRAMES * dim);
    for (t, frame) in scene.frames.iter().enumerate().take(NUM_FRAMES) {
        let me = frame.character(c);
        let time = [t as f32 / (NUM_FRAMES - 1) as f32];
        let pose = if me.present {
            [
                (me.head.x / CANVAS_WIDTH) as f32,
                (me.head.y / CANVAS_HEIGHT) as f32,
                if me.facing == Facing::Right { 1.0 } else { 0.0 },
            ]
        } else {
            [0.0; 3]
        };
        let row_start = data.len();
        match kind {
            BaselineKind::Time => data.extend(time),
            BaselineKind::Pose => data.extend(pose),
            BaselineKind::TimePose => {
                data.extend(time);
                data.extend(pose);
            }
            BaselineKind::Expression => {
                data.extend([0.0; 5]);
                if me.present {
                    data[row_start + me.expression.index()] = 1.0;
                }
            }
            BaselineKind::CharacterId => {
                data.extend([0.0; NUM_CHARACTERS]);
                data[row_start + c.index()] = 1.0;
            }
            BaselineKind::Present => data.extend([if me.present { 1.0 } else { 0.0 }, 0.0]),
            BaselineKind::SingleImage => unreachable!(),
        }
    }
    let mut pad = vec![0.0; dim];
    if kind == BaselineKind::Present {
        pad[1] = 1.0;
    }
    Ok(FeatureSeq { kind: FeatureKind::Baseline(kind), dim, data, presence, pad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::generate_scene;
    use crate::scene::fixtures::{id, still_scene};
    use crate::scene::{CharacterInstance, Expression, TemplateKind, Vec2};

    fn scenes() -> Vec<Scene> {
        (0..12).map(|s| generate_scene(TemplateKind::ALL[s as usize % 4], s)).collect()
    }

    #[test]
    fn absent_frames_are_zero_and_dims_fixed() {
        for s in scenes() {
            for c in s.cast() {
                for v in Variant::ALL {
                    let f = featurize_sequence(&s, c, v).unwrap();
                    assert_eq!((f.len(), f.dim), (NUM_FRAMES, FEATURE_DIM));
                    assert!(f.data.iter().all(|x| (0.0..=1.0).contains(x)));
                    for t in 0..NUM_FRAMES {
                        if !f.presence[t] {
                            assert!(f.frame(t).iter().all(|&x| x == 0.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rewind_is_reversed_standard() {
        for s in scenes() {
            for c in s.cast() {
                let std = featurize_sequence(&s, c, Variant::Standard).unwrap();
                let rew = featurize_sequence(&s, c, Variant::Rewind).unwrap();
                assert_eq!(rew.reversed().data, std.data);
                assert_eq!(rew.data, std.reversed().data);
            }
        }
    }

    #[test]
    fn flipped_has_no_own_body_or_gaze() {
        let plane = super::super::GRID_HEIGHT * super::super::GRID_WIDTH;
        for s in scenes() {
            for c in s.cast() {
                let f = featurize_sequence(&s, c, Variant::Flipped).unwrap();
                for t in 0..NUM_FRAMES {
                    assert!(f.frame(t)[..2 * plane].iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn featurization_is_deterministic() {
        let s = generate_scene(TemplateKind::OccludedChange, 4);
        let c = s.cast()[0];
        assert_eq!(featurize_sequence(&s, c, Variant::Standard).unwrap(), featurize_sequence(&s, c, Variant::Standard).unwrap());
    }

    #[test]
    fn never_present_character_rejected() {
        assert!(matches!(featurize_sequence(&still_scene(), id(5), Variant::Standard), Err(ReprError::NeverPresent(_))));
        assert!(matches!(baseline_features(&still_scene(), id(5), BaselineKind::Time), Err(ReprError::NeverPresent(_))));
    }

    #[test]
    fn baseline_encodings() {
        let mut s = still_scene();
        *s.frames[3].character_mut(id(0)) = CharacterInstance::present(id(0), Vec2::new(350.0, 200.0), Facing::Right, Expression::Sad);
        *s.frames[4].character_mut(id(0)) = CharacterInstance::absent(id(0));
        let time = baseline_features(&s, id(0), BaselineKind::Time).unwrap();
        assert_eq!(time.frame(0), &[0.0]);
        assert_eq!(time.frame(7), &[1.0]);
        let pose = baseline_features(&s, id(0), BaselineKind::Pose).unwrap();
        assert_eq!(pose.frame(3), &[0.5, 0.5, 1.0]);
        assert_eq!(pose.frame(4), &[0.0, 0.0, 0.0]);
        let tp = baseline_features(&s, id(0), BaselineKind::TimePose).unwrap();
        assert_eq!(tp.frame(3), &[3.0 / 7.0, 0.5, 0.5, 1.0]);
        let present = baseline_features(&s, id(0), BaselineKind::Present).unwrap();
        assert_eq!(present.frame(3), &[1.0, 0.0]);
        assert_eq!(present.frame(4), &[0.0, 0.0]);
        assert_eq!(present.pad, vec![0.0, 1.0]);
        let expr = baseline_features(&s, id(0), BaselineKind::Expression).unwrap();
        assert_eq!(expr.frame(3)[Expression::Sad.index()], 1.0);
        assert_eq!(expr.frame(3).iter().sum::<f32>(), 1.0);
        assert_eq!(expr.frame(4).iter().sum::<f32>(), 0.0);
        let ids = baseline_features(&s, id(0), BaselineKind::CharacterId).unwrap();
        for t in 0..NUM_FRAMES {
            assert_eq!(ids.frame(t)[0], 1.0);
            assert_eq!(ids.frame(t).iter().sum::<f32>(), 1.0);
        }
        for k in BaselineKind::ALL {
            assert_eq!(baseline_features(&s, id(0), k).unwrap().dim, k.dim());
        }
    }

    #[test]
    fn kinds_parse_by_name() {
        assert_eq!("time_pose".parse::<BaselineKind>().unwrap(), BaselineKind::TimePose);
        assert_eq!("rewind".parse::<Variant>().unwrap(), Variant::Rewind);
        assert!(matches!("svm".parse::<BaselineKind>(), Err(ReprError::UnknownKind(_))));
    }
}
