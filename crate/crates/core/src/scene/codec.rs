//! Versioned JSON codec for scenes and single frames.
//!
//! Coordinates are written as integers in scene units; a scene holding a
//! fractional coordinate cannot be encoded. Only present characters are
//! listed in a document, absent slots are restored with canonical defaults.

use super::*;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed scene document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {found:?} (expected {SCHEMA_VERSION:?})")]
    Version { found: String },
    #[error("{field} = {value} is out of range")]
    OutOfRange { field: &'static str, value: i64 },
    #[error("{field} has non-integral coordinate {value}")]
    NonIntegral { field: String, value: f64 },
    #[error("{0}")]
    Structure(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDoc {
    version: String,
    seed: u64,
    template_kind: TemplateKind,
    frames: Vec<FrameDoc>,
    proposition: PropositionDoc,
    labels: LabelsDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameDoc {
    index: i64,
    characters: Vec<CharacterDoc>,
    objects: Vec<ObjectDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CharacterDoc {
    id: i64,
    head: [i64; 2],
    facing: Facing,
    expression: Expression,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: ObjectKind,
    position: [i64; 2],
    bbox: [i64; 4],
    is_occluder: bool,
    state_tag: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropositionDoc {
    subject: ObjectKind,
    predicate: Predicate,
    reference: i64,
    truth: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelsDoc {
    mistaken: Vec<Vec<u8>>,
    any: Vec<u8>,
}

/// Frame document used for interpolated animation frames.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StandaloneFrameDoc {
    version: String,
    #[serde(flatten)]
    frame: FrameDoc,
}

fn int(field: impl Into<String>, v: f64) -> Result<i64, CodecError> {
    if v.fract() == 0.0 && v.is_finite() {
        Ok(v as i64)
    } else {
        Err(CodecError::NonIntegral { field: field.into(), value: v })
    }
}

fn range(field: &'static str, v: i64, lo: i64, hi: i64) -> Result<i64, CodecError> {
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(CodecError::OutOfRange { field, value: v })
    }
}

fn frame_to_doc(frame: &Frame, round: bool) -> Result<FrameDoc, CodecError> {
    let coord = |field: String, v: f64| if round { Ok(v.round() as i64) } else { int(field, v) };
    let t = frame.index;
    let characters = frame
        .present_characters()
        .map(|c| {
            Ok(CharacterDoc {
                id: c.id.index() as i64,
                head: [coord(format!("frame {t} character {} head.x", c.id), c.head.x)?, coord(format!("frame {t} character {} head.y", c.id), c.head.y)?],
                facing: c.facing,
                expression: c.expression,
            })
        })
        .collect::<Result<_, CodecError>>()?;
    let objects = frame
        .objects
        .iter()
        .map(|o| {
            let f = |what: &str| format!("frame {t} object {} {what}", o.id.name());
            Ok(ObjectDoc {
                id: o.id,
                position: [coord(f("position.x"), o.position.x)?, coord(f("position.y"), o.position.y)?],
                bbox: [
                    coord(f("bbox.x0"), o.bbox.min.x)?,
                    coord(f("bbox.y0"), o.bbox.min.y)?,
                    coord(f("bbox.x1"), o.bbox.max.x)?,
                    coord(f("bbox.y1"), o.bbox.max.y)?,
                ],
                is_occluder: o.is_occluder,
                state_tag: i64::from(o.state_tag.0),
            })
        })
        .collect::<Result<_, CodecError>>()?;
    Ok(FrameDoc { index: t as i64, characters, objects })
}

fn frame_from_doc(doc: FrameDoc) -> Result<Frame, CodecError> {
    let index = range("frame index", doc.index, 0, NUM_FRAMES as i64 - 1)? as usize;
    let mut frame = Frame::empty(index);
    for c in doc.characters {
        let id = CharacterId::new(range("character id", c.id, 0, NUM_CHARACTERS as i64 - 1)? as usize)
            .expect("range checked");
        if frame.is_present(id) {
            return Err(CodecError::Structure(format!("character {id} listed twice in frame {index}")));
        }
        *frame.character_mut(id) = CharacterInstance::present(
            id,
            Vec2::new(c.head[0] as f64, c.head[1] as f64),
            c.facing,
            c.expression,
        );
    }
    for o in doc.objects {
        let tag = range("state_tag", o.state_tag, 0, i64::from(u8::MAX))? as u8;
        frame.objects.push(SceneObject {
            id: o.id,
            position: Vec2::new(o.position[0] as f64, o.position[1] as f64),
            bbox: Rect::new(o.bbox[0] as f64, o.bbox[1] as f64, o.bbox[2] as f64, o.bbox[3] as f64),
            is_occluder: o.is_occluder,
            state_tag: StateTag(tag),
        });
    }
    Ok(frame)
}

/// Serializes a scene to its JSON document (one line, trailing newline).
pub fn encode_scene(scene: &Scene) -> Result<String, CodecError> {
    let frames = scene.frames.iter().map(|f| frame_to_doc(f, false)).collect::<Result<_, _>>()?;
    let p = &scene.proposition;
    let doc = SceneDoc {
        version: SCHEMA_VERSION.to_string(),
        seed: scene.seed,
        template_kind: scene.template_kind,
        frames,
        proposition: PropositionDoc {
            subject: p.subject,
            predicate: p.predicate,
            reference: i64::from(p.reference.0),
            truth: p.truth.clone(),
        },
        labels: LabelsDoc {
            mistaken: scene.labels.matrix.iter().map(|row| row.iter().map(|&b| u8::from(b)).collect()).collect(),
            any: scene.labels.any.iter().map(|&b| u8::from(b)).collect(),
        },
    };
    let mut s = serde_json::to_string(&doc)?;
    s.push('\n');
    Ok(s)
}

fn check_version(found: &str) -> Result<(), CodecError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(CodecError::Version { found: found.to_string() })
    }
}

fn bit(field: &'static str, v: u8) -> Result<bool, CodecError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(CodecError::OutOfRange { field, value: i64::from(v) }),
    }
}

pub fn decode_scene(text: &str) -> Result<Scene, CodecError> {
    // Check the version before the full schema so a future document gets a
    // version error rather than a field error.
    let probe: serde_json::Value = serde_json::from_str(text)?;
    match probe.get("version") {
        Some(serde_json::Value::String(v)) => check_version(v)?,
        Some(other) => return Err(CodecError::Version { found: other.to_string() }),
        None => return Err(CodecError::Structure("missing field `version`".into())),
    }
    let doc: SceneDoc = serde_json::from_value(probe)?;

    let frames = doc.frames.into_iter().map(frame_from_doc).collect::<Result<Vec<_>, _>>()?;
    let p = doc.proposition;
    let proposition = Proposition {
        subject: p.subject,
        predicate: p.predicate,
        reference: StateTag(range("proposition reference", p.reference, 0, i64::from(u8::MAX))? as u8),
        truth: p.truth,
    };

    if doc.labels.mistaken.len() != NUM_CHARACTERS || doc.labels.any.len() != NUM_CHARACTERS {
        return Err(CodecError::Structure(format!("labels must have {NUM_CHARACTERS} rows")));
    }
    let mut labels = MistakenLabels::default();
    for (c, row) in doc.labels.mistaken.iter().enumerate() {
        if row.len() != NUM_FRAMES {
            return Err(CodecError::Structure(format!("label row {c} has {} entries ≠ {NUM_FRAMES}", row.len())));
        }
        for (t, &v) in row.iter().enumerate() {
            labels.matrix[c][t] = bit("labels.mistaken", v)?;
        }
        labels.any[c] = bit("labels.any", doc.labels.any[c])?;
    }

    Ok(Scene { frames, proposition, labels, seed: doc.seed, template_kind: doc.template_kind })
}

/// Encodes one frame as a standalone document. With `round` set, fractional
/// coordinates (from interpolation) are rounded to the nearest scene unit.
pub fn encode_frame(frame: &Frame, round: bool) -> Result<String, CodecError> {
    let doc = StandaloneFrameDoc { version: SCHEMA_VERSION.to_string(), frame: frame_to_doc(frame, round)? };
    let mut s = serde_json::to_string(&doc)?;
    s.push('\n');
    Ok(s)
}

pub fn decode_frame(text: &str) -> Result<Frame, CodecError> {
    let doc: StandaloneFrameDoc = serde_json::from_str(text)?;
    check_version(&doc.version)?;
    frame_from_doc(doc.frame)
}
