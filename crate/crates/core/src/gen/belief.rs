use super::visibility::is_visible;
use super::GenError;
use crate::scene::{CharacterId, Frame, MistakenLabels, ObjectKind, Scene, StateTag, NUM_CHARACTERS, NUM_FRAMES};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub state: StateTag,
    pub frame: usize,
}

/// What each character last saw of each object. Objects a character has
/// never seen have no entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeliefState {
    per_character: Vec<BTreeMap<ObjectKind, Observation>>,
    next_frame: usize,
}

impl Default for BeliefState {
    fn default() -> Self {
        BeliefState { per_character: vec![BTreeMap::new(); NUM_CHARACTERS], next_frame: 0 }
    }
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, c: CharacterId, object: ObjectKind) -> Option<Observation> {
        self.per_character[c.index()].get(&object).copied()
    }

    pub fn known_objects(&self, c: CharacterId) -> impl Iterator<Item = (&ObjectKind, &Observation)> {
        self.per_character[c.index()].iter()
    }

    /// Index of the frame this state expects next.
    pub fn next_frame(&self) -> usize {
        self.next_frame
    }
}

/// Applies one frame of observations.
///
/// Every present character records the true current state of each object it
/// can see. Absent characters and unseen objects keep their old entries.
pub fn update_beliefs(beliefs: &BeliefState, frame: &Frame) -> Result<BeliefState, GenError> {
    if frame.index != beliefs.next_frame {
        return Err(GenError::OutOfOrderFrame { expected: beliefs.next_frame, got: frame.index });
    }
    let mut next = beliefs.clone();
    observe(&mut next, frame);
    next.next_frame = frame.index + 1;
    Ok(next)
}

fn observe(beliefs: &mut BeliefState, frame: &Frame) {
    for observer in frame.present_characters() {
        let known = &mut beliefs.per_character[observer.id.index()];
        for obj in &frame.objects {
            if is_visible(observer, obj.position, frame).expect("observer is present") {
                known.insert(obj.id, Observation { state: obj.state_tag, frame: frame.index });
            }
        }
    }
}

/// Ground-truth mistaken labels for `scene`.
///
/// A character is mistaken at frame t when it is present, has seen the
/// proposition's subject at least once, and the answer implied by its last
/// observation differs from the true answer at t. Observations of frame t
/// apply before the comparison.
pub fn derive_labels(scene: &Scene) -> MistakenLabels {
    let prop = &scene.proposition;
    let mut beliefs = BeliefState::new();
    let mut matrix = [[false; NUM_FRAMES]; NUM_CHARACTERS];
    for (t, frame) in scene.frames.iter().enumerate().take(NUM_FRAMES) {
        observe(&mut beliefs, frame);
        beliefs.next_frame = t + 1;
        let truth = prop.truth[t];
        for c in frame.present_characters() {
            if let Some(obs) = beliefs.get(c.id, prop.subject) {
                matrix[c.id.index()][t] = prop.predicate.answer(obs.state, prop.reference) != truth;
            }
        }
    }
    MistakenLabels::from_matrix(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::fixtures::{id, small_object};
    use crate::scene::{CharacterInstance, Expression, Facing, Predicate, Proposition, TemplateKind, Vec2};

    /// Observer 0 at x=400 facing left; ball at slot 1 (x=150) unless moved.
    fn scripted(ball: impl Fn(usize) -> (f64, u8), present: impl Fn(usize) -> Option<Facing>) -> Scene {
        let frames: Vec<Frame> = (0..NUM_FRAMES)
            .map(|t| {
                let mut f = Frame::empty(t);
                if let Some(facing) = present(t) {
                    *f.character_mut(id(0)) =
                        CharacterInstance::present(id(0), Vec2::new(400.0, 180.0), facing, Expression::Neutral);
                }
                let (x, slot) = ball(t);
                f.objects.push(small_object(ObjectKind::Ball, x, 300.0, slot));
                f
            })
            .collect();
        let proposition = Proposition::from_frames(ObjectKind::Ball, Predicate::AtLocation, crate::scene::StateTag(1), &frames);
        let mut s = Scene { frames, proposition, labels: MistakenLabels::default(), seed: 0, template_kind: TemplateKind::NoMistake };
        s.labels = derive_labels(&s);
        s
    }

    #[test]
    fn unobserved_change_keeps_old_belief() {
        // Ball moves from x=150 (slot 1) to x=600 (slot 6) at frame 2; 600 is behind a left-facing observer.
        let s = scripted(|t| if t < 2 { (150.0, 1) } else { (600.0, 6) }, |_| Some(Facing::Left));
        let mut b = BeliefState::new();
        for f in &s.frames[..3] {
            b = update_beliefs(&b, f).unwrap();
        }
        assert_eq!(b.get(id(0), ObjectKind::Ball), Some(Observation { state: StateTag(1), frame: 1 }));
    }

    #[test]
    fn absence_freezes_belief_and_reobservation_updates_it() {
        // Change at 2 while absent 2..=4; turns to face right at 5 and sees the ball.
        let s = scripted(
            |t| if t < 2 { (150.0, 1) } else { (600.0, 6) },
            |t| match t {
                2..=4 => None,
                0 | 1 => Some(Facing::Left),
                _ => Some(Facing::Right),
            },
        );
        let mut b = BeliefState::new();
        let mut trajectory = Vec::new();
        for f in &s.frames {
            b = update_beliefs(&b, f).unwrap();
            trajectory.push(b.get(id(0), ObjectKind::Ball).map(|o| (o.state.0, o.frame)));
        }
        // Hand enumeration of the full trajectory.
        let expected = [(1, 0), (1, 1), (1, 1), (1, 1), (1, 1), (6, 5), (6, 6), (6, 7)];
        assert_eq!(trajectory, expected.iter().map(|&p| Some(p)).collect::<Vec<_>>());
        assert_eq!(s.labels.row(id(0)), &[false; 8]);
    }

    #[test]
    fn out_of_order_frame_rejected() {
        let s = scripted(|_| (150.0, 1), |_| Some(Facing::Left));
        let b = BeliefState::new();
        assert!(matches!(
            update_beliefs(&b, &s.frames[1]),
            Err(GenError::OutOfOrderFrame { expected: 0, got: 1 })
        ));
    }

    #[test]
    fn mistaken_until_observed() {
        // Faces away from 3 on; ball moves at 4; turns back at 6.
        let s = scripted(
            |t| if t < 4 { (150.0, 1) } else { (250.0, 3) },
            |t| Some(if (3..6).contains(&t) { Facing::Right } else { Facing::Left }),
        );
        assert_eq!(s.labels.row(id(0)), &[false, false, false, false, true, true, false, false]);
        assert!(s.labels.any[0]);
    }

    #[test]
    fn never_observed_subject_is_not_a_mistake() {
        let s = scripted(|t| if t < 4 { (150.0, 1) } else { (250.0, 3) }, |_| Some(Facing::Right));
        assert!(s.labels.is_all_false());
    }
}
