use super::TaskKind;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub task: TaskKind,
    /// Accuracy in percent, one per repetition.
    pub accuracies: Vec<f64>,
}

impl ReportRow {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation (n − 1 denominator), 0 for one repetition.
    pub fn std(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.accuracies.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn median(&self) -> f64 {
        let mut v = self.accuracies.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
}

/// Accuracies per (method, task) across repetitions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    /// Free-text lines printed above the markdown table.
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, method: impl Into<String>, task: TaskKind, accuracies: Vec<f64>) {
        self.rows.push(ReportRow { method: method.into(), task, accuracies });
    }

    pub fn row(&self, method: &str, task: TaskKind) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.task == task)
    }

    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        for n in other.notes {
            if !self.notes.contains(&n) {
                self.notes.push(n);
            }
        }
    }

    fn methods(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method.as_str()) {
                out.push(&r.method);
            }
        }
        out
    }

    /// Long format: `method,task,repetition,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,task,repetition,accuracy\n");
        for r in &self.rows {
            for (i, a) in r.accuracies.iter().enumerate() {
                let _ = writeln!(out, "{},{},{i},{a}", csv_field(&r.method), r.task);
            }
        }
        out
    }

    /// One row per method, one column per task, cells `mean (std)`.
    pub fn to_markdown(&self, title: &str) -> String {
        let mut out = format!("# {title}\n\n");
        for n in &self.notes {
            let _ = writeln!(out, "{n}\n");
        }
        out.push_str("| Method | Who | When | Joint |\n|---|---|---|---|\n");
        for m in self.methods() {
            let _ = write!(out, "| {m} |");
            for task in TaskKind::ALL {
                match self.row(m, task) {
                    Some(r) => {
                        let _ = write!(out, " {:.1} ({:.1}) |", r.mean(), r.std());
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        let reps = self.rows.first().map_or(0, |r| r.accuracies.len());
        let _ = writeln!(out, "\nAccuracy in percent, mean (sample std) over {reps} repetitions.");
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let r = ReportRow { method: "m".into(), task: TaskKind::Who, accuracies: vec![50.0, 60.0, 70.0, 80.0] };
        assert_eq!(r.mean(), 65.0);
        assert!((r.std() - (500.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(r.median(), 65.0);
        let same = ReportRow { accuracies: vec![55.0, 55.0], ..r };
        assert_eq!(same.std(), 0.0);
    }

    #[test]
    fn csv_and_markdown_layout() {
        let mut rep = EvalReport::new();
        for task in TaskKind::ALL {
            rep.push("Multiple Image", task, vec![60.0, 62.0]);
        }
        rep.push("Time, K=1", TaskKind::Who, vec![50.0, 50.0]);
        let csv = rep.to_csv();
        assert!(csv.starts_with("method,task,repetition,accuracy\nMultiple Image,who,0,60\n"));
        assert!(csv.contains("\"Time, K=1\",who,1,50\n"));
        let md = rep.to_markdown("Results");
        assert!(md.contains("| Method | Who | When | Joint |"));
        assert!(md.contains("| Multiple Image | 61.0 (1.4) | 61.0 (1.4) | 61.0 (1.4) |"));
        assert!(md.contains("| Time, K=1 | 50.0 (0.0) | - | - |"));
    }
}
