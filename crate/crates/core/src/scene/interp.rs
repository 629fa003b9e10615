use super::*;

fn lerp(a: f64, b: f64, alpha: f64) -> f64 {
    // Written so that alpha = 0 and alpha = 1 reproduce the endpoints exactly.
    (1.0 - alpha) * a + alpha * b
}

fn lerp_vec(a: Vec2, b: Vec2, alpha: f64) -> Vec2 {
    Vec2::new(lerp(a.x, b.x, alpha), lerp(a.y, b.y, alpha))
}

/// Frame between `t` and `t + 1` at weight `alpha` for animation.
///
/// Positions of entities present in both frames are blended linearly. Discrete
/// fields (facing, expression, presence, object membership and state, frame
/// index) come from frame `t` when `alpha < 0.5` and from `t + 1` otherwise.
pub fn interpolate_frame(scene: &Scene, t: usize, alpha: f64) -> Result<Frame, SceneError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SceneError::BadAlpha(alpha));
    }
    if t + 1 >= scene.frames.len() {
        return Err(SceneError::NoSuccessorFrame(t));
    }
    let (a, b) = (&scene.frames[t], &scene.frames[t + 1]);
    let mut out = if alpha < 0.5 { a.clone() } else { b.clone() };

    for (slot, ch) in out.characters.iter_mut().enumerate() {
        let (ca, cb) = (&a.characters[slot], &b.characters[slot]);
        if ch.present && ca.present && cb.present {
            ch.head = lerp_vec(ca.head, cb.head, alpha);
        }
    }
    for obj in out.objects.iter_mut() {
        if let (Some(oa), Some(ob)) = (a.object(obj.id), b.object(obj.id)) {
            obj.position = lerp_vec(oa.position, ob.position, alpha);
            obj.bbox = Rect { min: lerp_vec(oa.bbox.min, ob.bbox.min, alpha), max: lerp_vec(oa.bbox.max, ob.bbox.max, alpha) };
        }
    }
    Ok(out)
}
