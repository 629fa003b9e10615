use super::{gradients, loss, Gradients, LearnError, ModelParams, TrainExample};
use crate::rng::rng_for;
use rand::seq::index::sample;

/// Minimum number of kernel coordinates compared (all of them when fewer).
const MIN_COORDS: usize = 200;

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Kernel index of the worst coordinate, `None` for the bias.
    pub worst: Option<usize>,
    pub coords_checked: usize,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Checks [`gradients`] against central differences with step `eps` on a
/// seeded subsample of at least 200 kernel coordinates plus the bias.
pub fn grad_check(
    params: &ModelParams,
    batch: &[TrainExample],
    weight_decay: f64,
    eps: f64,
    seed: u64,
) -> Result<GradCheckReport, LearnError> {
    let analytic = gradients(params, batch, weight_decay)?;
    grad_check_against(params, batch, weight_decay, eps, seed, &analytic)
}

/// As [`grad_check`] but against a caller-supplied analytic gradient.
pub fn grad_check_against(
    params: &ModelParams,
    batch: &[TrainExample],
    weight_decay: f64,
    eps: f64,
    seed: u64,
    analytic: &Gradients,
) -> Result<GradCheckReport, LearnError> {
    assert!(eps > 0.0, "eps must be positive");
    let n = params.w.len();
    let mut coords: Vec<usize> = if n <= MIN_COORDS {
        (0..n).collect()
    } else {
        sample(&mut rng_for(seed, "grad-check"), n, MIN_COORDS).into_vec()
    };
    coords.sort_unstable();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, coords_checked: coords.len() + 1 };
    let mut probe = params.clone();
    for &i in &coords {
        let orig = probe.w[i];
        probe.w[i] = orig + eps;
        let up = loss(&probe, batch, weight_decay)?;
        probe.w[i] = orig - eps;
        let down = loss(&probe, batch, weight_decay)?;
        probe.w[i] = orig;
        let e = rel_error(analytic.w[i], (up - down) / (2.0 * eps));
        if e > report.max_rel_error {
            report.max_rel_error = e;
            report.worst = Some(i);
        }
    }
    let orig = probe.b;
    probe.b = orig + eps;
    let up = loss(&probe, batch, weight_decay)?;
    probe.b = orig - eps;
    let down = loss(&probe, batch, weight_decay)?;
    let e = rel_error(analytic.b, (up - down) / (2.0 * eps));
    if e > report.max_rel_error {
        report.max_rel_error = e;
        report.worst = None;
    }
    Ok(report)
}
