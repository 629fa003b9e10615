//! Abstract-scene domain types.
//!
//! A [`Scene`] is an 8-frame story on a 700×400 canvas (y grows downward).
//! Every frame carries all 20 character slots, most of them absent, plus the
//! objects on stage. One latent [`Proposition`] about a subject object is
//! tracked across frames, and [`MistakenLabels`] record which characters hold
//! a wrong answer to it in which frame.

mod codec;
mod interp;
mod render;

pub use codec::{decode_frame, decode_scene, encode_frame, encode_scene, CodecError, SCHEMA_VERSION};
pub use interp::interpolate_frame;
pub use render::render_svg;

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const CANVAS_WIDTH: f64 = 700.0;
pub const CANVAS_HEIGHT: f64 = 400.0;
pub const NUM_FRAMES: usize = 8;
pub const NUM_CHARACTERS: usize = 20;
/// Generator constraint on simultaneously present characters.
pub const MAX_PRESENT_PER_FRAME: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("character id {0} out of range 0..{NUM_CHARACTERS}")]
    CharacterOutOfRange(usize),
    #[error("character {0} is not present in frame {1}")]
    CharacterAbsent(CharacterId, usize),
    #[error("frame {0} has no successor frame to interpolate towards")]
    NoSuccessorFrame(usize),
    #[error("interpolation weight {0} outside [0, 1]")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn in_canvas(&self) -> bool {
        (0.0..=CANVAS_WIDTH).contains(&self.x) && (0.0..=CANVAS_HEIGHT).contains(&self.y)
    }

    pub fn distance(&self, other: &Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Axis-aligned rectangle, `min` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { min: Vec2::new(x0, y0), max: Vec2::new(x1, y1) }
    }

    pub fn centered(c: Vec2, half_w: f64, half_h: f64) -> Self {
        Rect::new(c.x - half_w, c.y - half_h, c.x + half_w, c.y + half_h)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn in_canvas(&self) -> bool {
        self.min.in_canvas() && self.max.in_canvas() && self.min.x <= self.max.x && self.min.y <= self.max.y
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Rect::new(self.min.x + dx, self.min.y + dy, self.max.x + dx, self.max.y + dy)
    }

    /// Reflection about the vertical line `x = axis`.
    pub fn mirrored(&self, axis: f64) -> Self {
        Rect::new(2.0 * axis - self.max.x, self.min.y, 2.0 * axis - self.min.x, self.max.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct CharacterId(u8);

impl CharacterId {
    pub fn new(index: usize) -> Result<Self, SceneError> {
        if index < NUM_CHARACTERS {
            Ok(CharacterId(index as u8))
        } else {
            Err(SceneError::CharacterOutOfRange(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = CharacterId> {
        (0..NUM_CHARACTERS as u8).map(CharacterId)
    }
}

impl TryFrom<usize> for CharacterId {
    type Error = SceneError;
    fn try_from(v: usize) -> Result<Self, Self::Error> {
        CharacterId::new(v)
    }
}

impl From<CharacterId> for usize {
    fn from(c: CharacterId) -> usize {
        c.index()
    }
}

impl fmt::Display for CharacterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expression {
    #[default]
    Neutral,
    Happy,
    Sad,
    Angry,
    Surprised,
}

impl Expression {
    pub const ALL: [Expression; 5] =
        [Expression::Neutral, Expression::Happy, Expression::Sad, Expression::Angry, Expression::Surprised];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Expression::Neutral => "neutral",
            Expression::Happy => "happy",
            Expression::Sad => "sad",
            Expression::Angry => "angry",
            Expression::Surprised => "surprised",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facing {
    #[default]
    Left,
    Right,
}

impl Facing {
    pub fn flipped(self) -> Facing {
        match self {
            Facing::Left => Facing::Right,
            Facing::Right => Facing::Left,
        }
    }

    /// -1 for left, +1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Facing::Left => -1.0,
            Facing::Right => 1.0,
        }
    }
}

/// One character slot in one frame. When `present` is false the other
/// fields carry the canonical defaults and are ignored downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterInstance {
    pub id: CharacterId,
    pub head: Vec2,
    pub facing: Facing,
    pub expression: Expression,
    pub present: bool,
}

impl CharacterInstance {
    pub fn absent(id: CharacterId) -> Self {
        CharacterInstance {
            id,
            head: Vec2::default(),
            facing: Facing::Left,
            expression: Expression::Neutral,
            present: false,
        }
    }

    pub fn present(id: CharacterId, head: Vec2, facing: Facing, expression: Expression) -> Self {
        CharacterInstance { id, head, facing, expression, present: true }
    }

    pub fn is_canonical_absent(&self) -> bool {
        !self.present && *self == CharacterInstance::absent(self.id)
    }

    /// Body extent used for rendering and rasterization.
    pub fn body(&self) -> Rect {
        body_rect(self.head)
    }
}

pub const BODY_HALF_WIDTH: f64 = 20.0;
pub const BODY_ABOVE_HEAD: f64 = 25.0;
pub const BODY_BELOW_HEAD: f64 = 115.0;

pub fn body_rect(head: Vec2) -> Rect {
    Rect::new(
        head.x - BODY_HALF_WIDTH,
        head.y - BODY_ABOVE_HEAD,
        head.x + BODY_HALF_WIDTH,
        head.y + BODY_BELOW_HEAD,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Couch,
    Table,
    Bookshelf,
    Tree,
    Fence,
    Chair,
    Ball,
    Pie,
    Dog,
    Cat,
    Bike,
    Book,
    Lamp,
    Painting,
    Basket,
    Corn,
}

impl ObjectKind {
    pub const OCCLUDERS: [ObjectKind; 5] =
        [ObjectKind::Couch, ObjectKind::Table, ObjectKind::Bookshelf, ObjectKind::Tree, ObjectKind::Fence];
    pub const SMALL: [ObjectKind; 11] = [
        ObjectKind::Chair,
        ObjectKind::Ball,
        ObjectKind::Pie,
        ObjectKind::Dog,
        ObjectKind::Cat,
        ObjectKind::Bike,
        ObjectKind::Book,
        ObjectKind::Lamp,
        ObjectKind::Painting,
        ObjectKind::Basket,
        ObjectKind::Corn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Couch => "couch",
            ObjectKind::Table => "table",
            ObjectKind::Bookshelf => "bookshelf",
            ObjectKind::Tree => "tree",
            ObjectKind::Fence => "fence",
            ObjectKind::Chair => "chair",
            ObjectKind::Ball => "ball",
            ObjectKind::Pie => "pie",
            ObjectKind::Dog => "dog",
            ObjectKind::Cat => "cat",
            ObjectKind::Bike => "bike",
            ObjectKind::Book => "book",
            ObjectKind::Lamp => "lamp",
            ObjectKind::Painting => "painting",
            ObjectKind::Basket => "basket",
            ObjectKind::Corn => "corn",
        }
    }
}

/// Location-slot identifier of an object. [`StateTag::REMOVED`] marks an
/// object taken off stage; it keeps its last position so that looking at
/// that spot reveals the removal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateTag(pub u8);

impl StateTag {
    pub const REMOVED: StateTag = StateTag(u8::MAX);

    pub fn is_removed(self) -> bool {
        self == StateTag::REMOVED
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub id: ObjectKind,
    pub position: Vec2,
    pub bbox: Rect,
    pub is_occluder: bool,
    pub state_tag: StateTag,
}

impl SceneObject {
    /// Removed objects are neither drawn nor block sight lines.
    pub fn on_stage(&self) -> bool {
        !self.state_tag.is_removed()
    }

    pub fn blocks_sight(&self) -> bool {
        self.is_occluder && self.on_stage()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub characters: Vec<CharacterInstance>,
    pub objects: Vec<SceneObject>,
}

impl Frame {
    /// Frame with all 20 slots absent and no objects.
    pub fn empty(index: usize) -> Self {
        Frame { index, characters: CharacterId::all().map(CharacterInstance::absent).collect(), objects: Vec::new() }
    }

    pub fn character(&self, id: CharacterId) -> &CharacterInstance {
        &self.characters[id.index()]
    }

    pub fn character_mut(&mut self, id: CharacterId) -> &mut CharacterInstance {
        &mut self.characters[id.index()]
    }

    pub fn is_present(&self, id: CharacterId) -> bool {
        self.characters.get(id.index()).is_some_and(|c| c.present)
    }

    pub fn present_characters(&self) -> impl Iterator<Item = &CharacterInstance> {
        self.characters.iter().filter(|c| c.present)
    }

    pub fn object(&self, id: ObjectKind) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: ObjectKind) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// "Is the subject at the reference slot?"
    AtLocation,
    /// "Is the subject still on stage?"
    ExistsVisible,
}

impl Predicate {
    /// Answer to the proposition given an observed (or true) subject state.
    pub fn answer(self, state: StateTag, reference: StateTag) -> bool {
        match self {
            Predicate::AtLocation => state == reference,
            Predicate::ExistsVisible => !state.is_removed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposition {
    pub subject: ObjectKind,
    pub predicate: Predicate,
    pub reference: StateTag,
    pub truth: Vec<bool>,
}

impl Proposition {
    /// Truth of the proposition in one frame. A subject missing from the
    /// object list is treated as removed.
    pub fn evaluate(&self, frame: &Frame) -> bool {
        let state = frame.object(self.subject).map_or(StateTag::REMOVED, |o| o.state_tag);
        self.predicate.answer(state, self.reference)
    }

    /// Builds the proposition with its truth vector computed from `frames`.
    pub fn from_frames(subject: ObjectKind, predicate: Predicate, reference: StateTag, frames: &[Frame]) -> Self {
        let mut p = Proposition { subject, predicate, reference, truth: Vec::new() };
        p.truth = frames.iter().map(|f| p.evaluate(f)).collect();
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MistakenLabels {
    pub matrix: [[bool; NUM_FRAMES]; NUM_CHARACTERS],
    pub any: [bool; NUM_CHARACTERS],
}

impl MistakenLabels {
    pub fn from_matrix(matrix: [[bool; NUM_FRAMES]; NUM_CHARACTERS]) -> Self {
        let mut any = [false; NUM_CHARACTERS];
        for (a, row) in any.iter_mut().zip(matrix.iter()) {
            *a = row.iter().any(|&b| b);
        }
        MistakenLabels { matrix, any }
    }

    pub fn get(&self, c: CharacterId, t: usize) -> bool {
        self.matrix[c.index()][t]
    }

    pub fn row(&self, c: CharacterId) -> &[bool; NUM_FRAMES] {
        &self.matrix[c.index()]
    }

    /// True if any character is mistaken at frame `t`.
    pub fn column_any(&self, t: usize) -> bool {
        self.matrix.iter().any(|row| row[t])
    }

    pub fn count(&self) -> usize {
        self.matrix.iter().flatten().filter(|&&b| b).count()
    }

    pub fn is_all_false(&self) -> bool {
        self.count() == 0
    }
}

/// Story template a scene was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    OccludedChange,
    OutOfFovChange,
    AbsenceChange,
    NoMistake,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] =
        [TemplateKind::OccludedChange, TemplateKind::OutOfFovChange, TemplateKind::AbsenceChange, TemplateKind::NoMistake];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::OccludedChange => "occluded_change",
            TemplateKind::OutOfFovChange => "out_of_fov_change",
            TemplateKind::AbsenceChange => "absence_change",
            TemplateKind::NoMistake => "no_mistake",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frames: Vec<Frame>,
    pub proposition: Proposition,
    pub labels: MistakenLabels,
    pub seed: u64,
    pub template_kind: TemplateKind,
}

impl Scene {
    /// Characters present in at least one frame, in id order.
    pub fn cast(&self) -> Vec<CharacterId> {
        CharacterId::all().filter(|&c| self.frames.iter().any(|f| f.is_present(c))).collect()
    }

    pub fn present_count(&self) -> usize {
        self.frames.iter().map(|f| f.present_characters().count()).sum()
    }
}

/// Lists every invariant violation of `scene`; an empty list means valid.
pub fn validate_scene(scene: &Scene) -> Vec<String> {
    let mut out = Vec::new();
    if scene.frames.len() != NUM_FRAMES {
        out.push(format!("frame count {} ≠ {}", scene.frames.len(), NUM_FRAMES));
    }
    for (i, frame) in scene.frames.iter().enumerate() {
        validate_frame_into(frame, Some(i), &mut out);
    }

    let prop = &scene.proposition;
    if prop.truth.len() != NUM_FRAMES {
        out.push(format!("proposition truth length {} ≠ {}", prop.truth.len(), NUM_FRAMES));
    }
    for (t, frame) in scene.frames.iter().enumerate() {
        if let Some(&stated) = prop.truth.get(t) {
            let derived = prop.evaluate(frame);
            if stated != derived {
                out.push(format!("proposition truth at frame {t} is {stated} but frames imply {derived}"));
            }
        }
    }
    if !scene.frames.iter().any(|f| f.object(prop.subject).is_some()) {
        out.push(format!("proposition subject {} appears in no frame", prop.subject.name()));
    }

    for c in CharacterId::all() {
        let row = scene.labels.row(c);
        for (t, &label) in row.iter().enumerate() {
            if label && !scene.frames.get(t).is_some_and(|f| f.is_present(c)) {
                out.push(format!("label true for character {c} at frame {t} but the character is absent"));
            }
        }
        let or = row.iter().any(|&b| b);
        if scene.labels.any[c.index()] != or {
            out.push(format!("any-frame label for character {c} is {} but row OR is {or}", scene.labels.any[c.index()]));
        }
        if or && !scene.frames.iter().any(|f| f.is_present(c)) {
            out.push(format!("character {c} is labelled but appears in no frame"));
        }
    }
    out
}

/// Frame-local invariants only (bounds, slots, object sanity).
pub fn validate_frame(frame: &Frame) -> Vec<String> {
    let mut out = Vec::new();
    validate_frame_into(frame, None, &mut out);
    out
}

fn validate_frame_into(frame: &Frame, expected_index: Option<usize>, out: &mut Vec<String>) {
    let i = frame.index;
    if let Some(pos) = expected_index {
        if frame.index != pos {
            out.push(format!("frame at position {pos} has index {}", frame.index));
        }
    }
    if frame.index >= NUM_FRAMES {
        out.push(format!("frame index {} outside 0..{NUM_FRAMES}", frame.index));
    }
    if frame.characters.len() != NUM_CHARACTERS {
        out.push(format!("frame {i} has {} character slots ≠ {NUM_CHARACTERS}", frame.characters.len()));
    }
    for (slot, ch) in frame.characters.iter().enumerate() {
        if ch.id.index() != slot {
            out.push(format!("frame {i} slot {slot} holds character {}", ch.id));
        }
        if ch.present {
            if !ch.head.in_canvas() {
                out.push(format!("frame {i} character {} head ({}, {}) outside canvas", ch.id, ch.head.x, ch.head.y));
            }
        } else if !ch.is_canonical_absent() {
            out.push(format!("frame {i} absent character {} carries non-default fields", ch.id));
        }
    }
    let present = frame.present_characters().count();
    if present > MAX_PRESENT_PER_FRAME {
        out.push(format!("frame {i} has {present} present characters > {MAX_PRESENT_PER_FRAME}"));
    }
    for (k, obj) in frame.objects.iter().enumerate() {
        let name = obj.id.name();
        if frame.objects[..k].iter().any(|o| o.id == obj.id) {
            out.push(format!("frame {i} object {name} listed twice"));
        }
        if !obj.position.in_canvas() {
            out.push(format!("frame {i} object {name} position outside canvas"));
        }
        if !obj.bbox.in_canvas() {
            out.push(format!("frame {i} object {name} bbox outside canvas"));
        }
        if !obj.bbox.contains(obj.position) {
            out.push(format!("frame {i} object {name} bbox does not contain its position"));
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn id(i: usize) -> CharacterId {
        CharacterId::new(i).unwrap()
    }

    pub fn small_object(kind: ObjectKind, x: f64, y: f64, slot: u8) -> SceneObject {
        SceneObject {
            id: kind,
            position: Vec2::new(x, y),
            bbox: Rect::centered(Vec2::new(x, y), 20.0, 20.0),
            is_occluder: false,
            state_tag: StateTag(slot),
        }
    }

    /// Minimal valid scene: character 0 stands still watching a ball that never moves.
    pub fn still_scene() -> Scene {
        let frames: Vec<Frame> = (0..NUM_FRAMES)
            .map(|t| {
                let mut f = Frame::empty(t);
                *f.character_mut(id(0)) =
                    CharacterInstance::present(id(0), Vec2::new(400.0, 180.0), Facing::Left, Expression::Happy);
                f.objects.push(small_object(ObjectKind::Ball, 150.0, 300.0, 1));
                f
            })
            .collect();
        let proposition = Proposition::from_frames(ObjectKind::Ball, Predicate::AtLocation, StateTag(1), &frames);
        Scene { frames, proposition, labels: MistakenLabels::default(), seed: 0, template_kind: TemplateKind::NoMistake }
    }
}
