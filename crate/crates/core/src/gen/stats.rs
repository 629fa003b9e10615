use super::{Dataset, GenError};
use crate::scene::{CharacterId, Expression, Scene, CANVAS_HEIGHT, CANVAS_WIDTH, NUM_CHARACTERS, NUM_FRAMES};
use crate::svg::{bar_chart, scatter_chart};
use std::fmt::Write as _;
use std::path::Path;

/// Count of present (character, frame) pairs and how many were mistaken.
#[derive(Debug, Clone, PartialEq)]
pub struct Rate {
    pub key: String,
    pub present: usize,
    pub mistaken: usize,
}

impl Rate {
    fn new(key: impl Into<String>) -> Self {
        Rate { key: key.into(), present: 0, mistaken: 0 }
    }

    /// Zero when the key never occurs.
    pub fn probability(&self) -> f64 {
        if self.present == 0 {
            0.0
        } else {
            self.mistaken as f64 / self.present as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    /// Panel a: P(mistaken | character id).
    pub by_character: Vec<Rate>,
    /// Panel b: P(mistaken | expression).
    pub by_expression: Vec<Rate>,
    /// Panel c: P(mistaken | frame index).
    pub by_frame: Vec<Rate>,
    /// Panel d: head position of every present character and its label.
    pub positions: Vec<(f64, f64, bool)>,
}

pub fn dataset_stats(dataset: &Dataset) -> StatsReport {
    scene_stats(&dataset.scenes)
}

pub(crate) fn scene_stats(scenes: &[Scene]) -> StatsReport {
    let mut by_character: Vec<Rate> = CharacterId::all().map(|c| Rate::new(c.index().to_string())).collect();
    let mut by_expression: Vec<Rate> = Expression::ALL.iter().map(|e| Rate::new(e.name())).collect();
    let mut by_frame: Vec<Rate> = (0..NUM_FRAMES).map(|t| Rate::new(t.to_string())).collect();
    let mut positions = Vec::new();
    for scene in scenes {
        for (t, frame) in scene.frames.iter().enumerate() {
            for c in frame.present_characters() {
                let m = scene.labels.get(c.id, t);
                for rate in [&mut by_character[c.id.index()], &mut by_expression[c.expression.index()], &mut by_frame[t]] {
                    rate.present += 1;
                    rate.mistaken += m as usize;
                }
                positions.push((c.head.x, c.head.y, m));
            }
        }
    }
    debug_assert_eq!(by_character.len(), NUM_CHARACTERS);
    StatsReport { by_character, by_expression, by_frame, positions }
}

impl StatsReport {
    /// Long-format CSV with header `panel,key,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("panel,key,value\n");
        for (panel, rates) in [("a", &self.by_character), ("b", &self.by_expression), ("c", &self.by_frame)] {
            for r in rates {
                let _ = writeln!(out, "{panel},{},{}", r.key, r.probability());
            }
        }
        for (i, (x, y, m)) in self.positions.iter().enumerate() {
            let _ = writeln!(out, "d,{i}.x,{x}");
            let _ = writeln!(out, "d,{i}.y,{y}");
            let _ = writeln!(out, "d,{i}.mistaken,{}", *m as u8);
        }
        out
    }

    pub fn svg_panels(&self) -> [(char, String); 4] {
        let bars = |title: &str, rates: &[Rate]| {
            let labels: Vec<String> = rates.iter().map(|r| r.key.clone()).collect();
            let values: Vec<f64> = rates.iter().map(Rate::probability).collect();
            bar_chart(title, &labels, &values)
        };
        [
            ('a', bars("P(mistaken | character)", &self.by_character)),
            ('b', bars("P(mistaken | expression)", &self.by_expression)),
            ('c', bars("P(mistaken | frame)", &self.by_frame)),
            ('d', scatter_chart("Character positions (red: mistaken)", &self.positions, CANVAS_WIDTH, CANVAS_HEIGHT)),
        ]
    }

    /// Writes `stats.csv` and `stats-{a,b,c,d}.svg` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), GenError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| GenError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let csv = dir.join("stats.csv");
        std::fs::write(&csv, self.to_csv()).map_err(io(&csv))?;
        for (panel, svg) in self.svg_panels() {
            let path = dir.join(format!("stats-{panel}.svg"));
            std::fs::write(&path, svg).map_err(io(&path))?;
        }
        Ok(())
    }
}
