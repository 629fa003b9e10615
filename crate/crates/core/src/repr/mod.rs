//! Person-centric frames, semantic rasterization and per-frame feature vectors.

mod cache;
mod features;
mod raster;

pub use cache::{read_feature_cache, write_feature_cache, CachedFeatures, CACHE_MAGIC, CACHE_VERSION};
pub use features::{baseline_features, featurize_sequence, BaselineKind, FeatureKind, FeatureSeq, Variant};
pub use raster::{downsample2, rasterize, FeatureGrid, FINE_HEIGHT, FINE_WIDTH, GRID_HEIGHT, GRID_WIDTH, NUM_CHANNELS};

use crate::scene::{CharacterId, Facing, Frame, Vec2, CANVAS_HEIGHT, CANVAS_WIDTH};
use thiserror::Error;

/// Flattened per-frame dimension of the image features.
pub const FEATURE_DIM: usize = NUM_CHANNELS * GRID_HEIGHT * GRID_WIDTH;

/// Where the character of interest's head lands after [`person_centric`].
pub const CENTER: Vec2 = Vec2::new(CANVAS_WIDTH / 2.0, CANVAS_HEIGHT / 2.0);

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("character {0} is absent from frame {1}")]
    Absent(CharacterId, usize),
    #[error("character {0} appears in no frame of the scene")]
    NeverPresent(CharacterId),
    #[error("grid dimensions {height}x{width} are not both even")]
    OddDimensions { height: usize, width: usize },
    #[error("unknown feature kind {0:?}")]
    UnknownKind(String),
    #[error("feature cache {path}: {reason}")]
    Cache { path: String, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Re-expresses `frame` around character `c`: mirrored about `c`'s head if
/// it faces right, then translated so the head sits at [`CENTER`].
///
/// Entities pushed off-canvas keep their coordinates; rasterization clips them.
pub fn person_centric(frame: &Frame, c: CharacterId) -> Result<Frame, ReprError> {
    let me = frame.character(c);
    if !me.present {
        return Err(ReprError::Absent(c, frame.index));
    }
    let mut out = frame.clone();
    let axis = me.head.x;
    if me.facing == Facing::Right {
        for ch in out.characters.iter_mut().filter(|ch| ch.present) {
            ch.head.x = 2.0 * axis - ch.head.x;
            ch.facing = ch.facing.flipped();
        }
        for o in &mut out.objects {
            o.position.x = 2.0 * axis - o.position.x;
            o.bbox = o.bbox.mirrored(axis);
        }
    }
    let (dx, dy) = (CENTER.x - me.head.x, CENTER.y - me.head.y);
    for ch in out.characters.iter_mut().filter(|ch| ch.present) {
        ch.head = Vec2::new(ch.head.x + dx, ch.head.y + dy);
    }
    for o in &mut out.objects {
        o.position = Vec2::new(o.position.x + dx, o.position.y + dy);
        o.bbox = o.bbox.translated(dx, dy);
    }
    debug_assert_eq!(out.character(c).head, CENTER);
    debug_assert_eq!(out.character(c).facing, Facing::Left);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::fixtures::{id, small_object};
    use crate::scene::{CharacterInstance, Expression, ObjectKind};
    use proptest::prelude::*;

    fn frame_with(c_head: Vec2, facing: Facing) -> Frame {
        let mut f = Frame::empty(0);
        *f.character_mut(id(0)) = CharacterInstance::present(id(0), c_head, facing, Expression::Neutral);
        f
    }

    #[test]
    fn centered_left_facing_is_identity() {
        let mut f = frame_with(CENTER, Facing::Left);
        f.objects.push(small_object(ObjectKind::Ball, 120.0, 300.0, 0));
        *f.character_mut(id(3)) = CharacterInstance::present(id(3), Vec2::new(600.0, 170.0), Facing::Right, Expression::Sad);
        assert_eq!(person_centric(&f, id(0)).unwrap(), f);
    }

    #[test]
    fn right_facing_is_mirrored_then_translated() {
        let mut f = frame_with(Vec2::new(100.0, 200.0), Facing::Right);
        f.objects.push(small_object(ObjectKind::Ball, 50.0, 200.0, 0));
        let p = person_centric(&f, id(0)).unwrap();
        assert_eq!(p.objects[0].position, Vec2::new(400.0, 200.0));
        assert_eq!(p.character(id(0)).facing, Facing::Left);
        assert_eq!(p.character(id(0)).head, CENTER);
    }

    #[test]
    fn absent_character_rejected() {
        let f = frame_with(CENTER, Facing::Left);
        assert!(matches!(person_centric(&f, id(1)), Err(ReprError::Absent(_, 0))));
    }

    fn points(f: &Frame) -> Vec<Vec2> {
        let mut v: Vec<Vec2> = f.present_characters().map(|c| c.head).collect();
        for o in &f.objects {
            let centre = Vec2::new((o.bbox.min.x + o.bbox.max.x) / 2.0, (o.bbox.min.y + o.bbox.max.y) / 2.0);
            v.extend([o.position, centre]);
        }
        v
    }

    proptest! {
        #[test]
        fn transform_is_an_isometry(
            hx in 20.0..680.0f64, hy in 30.0..300.0f64, right in any::<bool>(),
            others in proptest::collection::vec((0.0..700.0f64, 0.0..400.0f64), 0..3),
            objs in proptest::collection::vec((25.0..675.0f64, 25.0..375.0f64), 0..4),
        ) {
            let mut f = frame_with(Vec2::new(hx, hy), if right { Facing::Right } else { Facing::Left });
            for (i, (x, y)) in others.iter().enumerate() {
                *f.character_mut(id(i + 1)) = CharacterInstance::present(id(i + 1), Vec2::new(*x, *y), Facing::Left, Expression::Happy);
            }
            for ((x, y), kind) in objs.iter().zip(ObjectKind::SMALL) {
                f.objects.push(small_object(kind, *x, *y, 0));
            }
            let p = person_centric(&f, id(0)).unwrap();
            prop_assert_eq!(p.character(id(0)).head, CENTER);
            prop_assert_eq!(p.character(id(0)).facing, Facing::Left);
            for (o, q) in f.objects.iter().zip(&p.objects) {
                prop_assert!((o.bbox.width() - q.bbox.width()).abs() < 1e-9);
                prop_assert!((o.bbox.height() - q.bbox.height()).abs() < 1e-9);
            }
            let (a, b) = (points(&f), points(&p));
            for i in 0..a.len() {
                for j in 0..a.len() {
                    prop_assert!((a[i].distance(&a[j]) - b[i].distance(&b[j])).abs() < 1e-9);
                }
            }
        }
    }
}
