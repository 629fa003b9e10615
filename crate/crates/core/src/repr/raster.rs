use super::ReprError;
use crate::scene::{CharacterId, Facing, Frame, ObjectKind, Rect, CANVAS_HEIGHT, CANVAS_WIDTH};

pub const NUM_CHANNELS: usize = 8;
pub const FINE_HEIGHT: usize = 24;
pub const FINE_WIDTH: usize = 42;
pub const GRID_HEIGHT: usize = FINE_HEIGHT / 2;
pub const GRID_WIDTH: usize = FINE_WIDTH / 2;

pub(crate) const CH_BODY: usize = 0;
pub(crate) const CH_GAZE: usize = 1;
const CH_OTHER_BODY: usize = 2;
const CH_OTHER_GAZE: usize = 3;
const CH_OCCLUDER: usize = 4;
const CH_OBJECT: usize = 5;
const CH_SUBJECT: usize = 6;
const CH_PRESENCE: usize = 7;

/// Half-height of the gaze band around head height.
const GAZE_HALF_HEIGHT: f64 = 25.0;

/// Channel-major stack of planes, `data[(c * height + r) * width + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureGrid {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureGrid { channels, height, width, data: vec![0.0; channels * height * width] }
    }

    fn idx(&self, c: usize, r: usize, col: usize) -> usize {
        (c * self.height + r) * self.width + col
    }

    pub fn get(&self, c: usize, r: usize, col: usize) -> f64 {
        self.data[self.idx(c, r, col)]
    }

    pub fn set(&mut self, c: usize, r: usize, col: usize, v: f64) {
        let i = self.idx(c, r, col);
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn clear_channel(&mut self, c: usize) {
        let n = self.height * self.width;
        self.data[c * n..(c + 1) * n].fill(0.0);
    }

    /// Adds the covered-area fraction of `rect` to every cell of channel `c`,
    /// clipping to the canvas and saturating at 1.
    fn paint(&mut self, c: usize, rect: Rect) {
        let (cw, ch) = (CANVAS_WIDTH / self.width as f64, CANVAS_HEIGHT / self.height as f64);
        let (x0, x1) = (rect.min.x.max(0.0) / cw, rect.max.x.min(CANVAS_WIDTH) / cw);
        let (y0, y1) = (rect.min.y.max(0.0) / ch, rect.max.y.min(CANVAS_HEIGHT) / ch);
        if x1 <= x0 || y1 <= y0 {
            return;
        }
        let cols = (x0.floor() as usize)..(x1.ceil() as usize).min(self.width);
        let rows = (y0.floor() as usize)..(y1.ceil() as usize).min(self.height);
        for r in rows {
            let fy = (y1.min(r as f64 + 1.0) - y0.max(r as f64)).max(0.0);
            for col in cols.clone() {
                let fx = (x1.min(col as f64 + 1.0) - x0.max(col as f64)).max(0.0);
                let i = self.idx(c, r, col);
                self.data[i] = (self.data[i] + fx * fy).min(1.0);
            }
        }
    }
}

fn gaze_band(head: crate::scene::Vec2, facing: Facing) -> Rect {
    let (y0, y1) = (head.y - GAZE_HALF_HEIGHT, head.y + GAZE_HALF_HEIGHT);
    match facing {
        Facing::Left => Rect::new(0.0, y0, head.x, y1),
        Facing::Right => Rect::new(head.x, y0, CANVAS_WIDTH, y1),
    }
}

/// Paints the eight semantic channels of `frame` at 24×42 for character `c`.
///
/// Removed objects are not painted. If `c` is absent the presence plane is
/// zero and so are the character-of-interest channels.
pub fn rasterize(frame: &Frame, c: CharacterId, subject: ObjectKind) -> FeatureGrid {
    let mut g = FeatureGrid::zeros(NUM_CHANNELS, FINE_HEIGHT, FINE_WIDTH);
    for ch in frame.present_characters() {
        let (body, gaze) = if ch.id == c { (CH_BODY, CH_GAZE) } else { (CH_OTHER_BODY, CH_OTHER_GAZE) };
        g.paint(body, ch.body());
        g.paint(gaze, gaze_band(ch.head, ch.facing));
    }
    for o in frame.objects.iter().filter(|o| o.on_stage()) {
        let channel = if o.id == subject {
            CH_SUBJECT
        } else if o.is_occluder {
            CH_OCCLUDER
        } else {
            CH_OBJECT
        };
        g.paint(channel, o.bbox);
    }
    if frame.is_present(c) {
        let n = FINE_HEIGHT * FINE_WIDTH;
        g.data[CH_PRESENCE * n..].fill(1.0);
    }
    g
}

/// 2×2 max-pooling of every channel.
pub fn downsample2(grid: &FeatureGrid) -> Result<FeatureGrid, ReprError> {
    if !grid.height.is_multiple_of(2) || !grid.width.is_multiple_of(2) {
        return Err(ReprError::OddDimensions { height: grid.height, width: grid.width });
    }
    let (h, w) = (grid.height / 2, grid.width / 2);
    let mut out = FeatureGrid::zeros(grid.channels, h, w);
    for c in 0..grid.channels {
        for r in 0..h {
            let (top, bottom) = (grid.idx(c, 2 * r, 0), grid.idx(c, 2 * r + 1, 0));
            for col in 0..w {
                let k = 2 * col;
                let m = grid.data[top + k].max(grid.data[top + k + 1]).max(grid.data[bottom + k]).max(grid.data[bottom + k + 1]);
                let o = out.idx(c, r, col);
                out.data[o] = m;
            }
        }
    }
    Ok(out)
}
