use super::*;
use crate::svg::{num, SvgDoc};

fn object_fill(o: &SceneObject) -> &'static str {
    if o.is_occluder {
        "#8b6f47"
    } else {
        "#d9a441"
    }
}

/// Vector rendering of one frame. Characters are drawn facing left and
/// mirrored with `scale(-1,1)` when facing right; `highlight` adds a red
/// arrow above that character's head.
pub fn render_svg(frame: &Frame, highlight: Option<CharacterId>) -> String {
    let mut doc = SvgDoc::new(CANVAS_WIDTH, CANVAS_HEIGHT);
    doc.rect(0.0, 0.0, CANVAS_WIDTH, CANVAS_HEIGHT, "#f4f1e8", r#"class="background""#);

    for o in frame.objects.iter().filter(|o| o.on_stage()) {
        doc.rect(
            o.bbox.min.x,
            o.bbox.min.y,
            o.bbox.width(),
            o.bbox.height(),
            object_fill(o),
            &format!(r#"class="object" data-object="{}""#, o.id.name()),
        );
    }

    for c in frame.present_characters() {
        let transform = match c.facing {
            Facing::Left => format!("translate({} {})", num(c.head.x), num(c.head.y)),
            Facing::Right => format!("translate({} {}) scale(-1,1)", num(c.head.x), num(c.head.y)),
        };
        // Glyph in local coordinates: head at the origin, nose pointing to -x.
        doc.raw(&format!(
            r#"<g class="character" data-character="{}" data-expression="{}" transform="{}">"#,
            c.id,
            c.expression.name(),
            transform
        ));
        doc.rect(-BODY_HALF_WIDTH, 15.0, 2.0 * BODY_HALF_WIDTH, BODY_BELOW_HEAD - 15.0, "#5b7db1", "");
        doc.circle(0.0, 0.0, 15.0, "#f2c9a0");
        doc.raw(r##"<polygon points="-15,-4 -24,2 -15,6" fill="#f2c9a0"/>"##);
        doc.circle(-7.0, -3.0, 2.0, "black");
        doc.raw("</g>");
    }

    if let Some(id) = highlight {
        let c = frame.character(id);
        if c.present {
            let (x, y) = (c.head.x, c.head.y - BODY_ABOVE_HEAD - 5.0);
            doc.raw(&format!(
                r#"<path class="highlight" data-character="{}" d="M {} {} L {} {} L {} {} Z M {} {} L {} {}" fill="red" stroke="red" stroke-width="3"/>"#,
                id,
                num(x),
                num(y),
                num(x - 8.0),
                num(y - 12.0),
                num(x + 8.0),
                num(y - 12.0),
                num(x),
                num(y - 12.0),
                num(x),
                num(y - 40.0)
            ));
        }
    }
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn empty_frame_is_background_only() {
        let svg = render_svg(&Frame::empty(0), None);
        assert!(svg.contains(r#"class="background""#));
        assert!(!svg.contains("class=\"character\""));
        assert!(!svg.contains("class=\"object\""));
        assert_eq!(svg.matches("<rect").count(), 1);
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = still_scene();
        assert_eq!(render_svg(&s.frames[3], Some(id(0))), render_svg(&s.frames[3], Some(id(0))));
    }

    fn transform_of(svg: &str, character: usize) -> String {
        let tag = format!(r#"data-character="{character}""#);
        let line = svg.lines().find(|l| l.starts_with("<g ") && l.contains(&tag)).expect("character group");
        let start = line.find("transform=\"").unwrap() + "transform=\"".len();
        let end = start + line[start..].find('"').unwrap();
        line[start..end].to_string()
    }

    #[test]
    fn right_facing_glyph_is_mirrored() {
        let mut f = Frame::empty(0);
        *f.character_mut(id(4)) = CharacterInstance::present(id(4), Vec2::new(300.0, 180.0), Facing::Right, Expression::Neutral);
        *f.character_mut(id(5)) = CharacterInstance::present(id(5), Vec2::new(500.0, 180.0), Facing::Left, Expression::Neutral);
        let svg = render_svg(&f, None);
        assert_eq!(transform_of(&svg, 4), "translate(300 180) scale(-1,1)");
        assert_eq!(transform_of(&svg, 5), "translate(500 180)");
    }

    #[test]
    fn highlight_adds_arrow_and_removed_objects_are_hidden() {
        let mut s = still_scene();
        s.frames[0].objects[0].state_tag = StateTag::REMOVED;
        let svg = render_svg(&s.frames[0], Some(id(0)));
        assert!(svg.contains(r#"class="highlight" data-character="0""#));
        assert!(!svg.contains("data-object=\"ball\""));
    }
}
