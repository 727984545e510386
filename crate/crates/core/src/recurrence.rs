//! Finite-horizon recurrence evidence for sampled skew-product trajectories:
//! ε-shifts, truncated almost periods, Poisson and pseudo-recurrence surrogates.
//!
//! Distances use the skew metric `max(|u - v|, d(θ, θ'))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::inclusion_length;
use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

/// Sample index of `t = 0`, or the first sample when the trajectory starts later.
fn origin(traj: &Trajectory) -> usize {
    traj.index_of(0.0).unwrap_or(0)
}

fn sample_step(traj: &Trajectory) -> Result<f64> {
    if traj.len() < 2 {
        return Err(invalid("trajectory needs at least two samples"));
    }
    traj.uniform_step().ok_or_else(|| invalid("trajectory is not uniformly sampled"))
}

/// Number of samples per `step`; `step` must be a multiple of the sampling step.
fn stride(traj: &Trajectory, step: f64) -> Result<usize> {
    let dt = sample_step(traj)?;
    if !(step > 0.0) {
        return Err(invalid("step must be positive"));
    }
    let k = (step / dt).round();
    if k < 1.0 || (k * dt - step).abs() > 1e-6 * step {
        return Err(invalid(format!("step {step} is not a multiple of the sampling step {dt}")));
    }
    Ok(k as usize)
}

/// `τ > 0` on the `step` grid with `ρ(x(τ), x(0)) < eps`.
pub fn epsilon_shift_set(traj: &Trajectory, eps: f64, step: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let s = stride(traj, step)?;
    let o = origin(traj);
    let t0 = traj.time(o);
    Ok((o + s..traj.len())
        .step_by(s)
        .filter(|&i| traj.skew_distance(i, o) < eps)
        .map(|i| traj.time(i) - t0)
        .collect())
}

/// `τ` on the `step` grid with `sup_{t ∈ [0, window]} ρ(x(τ + t), x(t)) < eps`.
/// Only `τ ≤ horizon - window` are considered, so the quantifier over all
/// times is truncated to the window.
pub fn almost_period_set(traj: &Trajectory, eps: f64, step: f64, window: f64) -> Result<Vec<f64>> {
    if !(window >= 0.0) {
        return Err(invalid("window must be nonnegative"));
    }
    let dt = sample_step(traj)?;
    let o = origin(traj);
    let w = (window / dt + 1e-9).floor() as usize;
    let shifts = epsilon_shift_set(traj, eps, step)?;
    Ok(shifts
        .par_iter()
        .filter_map(|&tau| {
            let k = (tau / dt).round() as usize;
            if o + k + w >= traj.len() {
                return None;
            }
            (0..=w)
                .all(|j| traj.skew_distance(o + k + j, o + j) < eps)
                .then_some(tau)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceSettings {
    pub eps_list: Vec<f64>,
    /// Shift grid; `None` uses the sampling step.
    pub step: Option<f64>,
    /// Almost-period window; `None` uses `min(50, horizon / 10)`.
    pub window: Option<f64>,
    /// Bound on `sup |u|` accepted as Lagrange stable.
    pub lagrange_bound: f64,
    /// Number of base samples `p` for the pseudo-recurrence test.
    pub pseudo_points: usize,
}

impl Default for RecurrenceSettings {
    fn default() -> Self {
        RecurrenceSettings { eps_list: vec![0.1, 0.05], step: None, window: None, lagrange_bound: 1e6, pseudo_points: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsRow {
    pub eps: f64,
    pub shift_count: usize,
    /// Largest gap of the shift set on `[0, horizon]`; `None` when there are no shifts.
    pub inclusion_length: Option<f64>,
    pub almost_period_count: usize,
    /// Largest gap of the almost-period set on `[0, horizon - window]`.
    pub almost_period_inclusion_length: Option<f64>,
    /// Almost periods are relatively dense at the tested scale.
    pub almost_period_flag: bool,
    /// Fewer than two returns: the horizon is too short for this `eps`.
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceFlags {
    pub lagrange_stable: bool,
    pub poisson_plus: bool,
    /// `None` when the trajectory has no samples before `t = 0`, or too few backward returns.
    pub poisson_minus: Option<bool>,
    pub almost_recurrent_evidence: bool,
    pub bohr_evidence: bool,
    pub pseudo_recurrent_evidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub horizon: f64,
    pub step: f64,
    pub window: f64,
    pub eps_table: Vec<EpsRow>,
    pub flags: RecurrenceFlags,
    pub notes: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Backward shifts `τ < 0` with `ρ(x(τ), x(0)) < eps`, as positive magnitudes.
fn backward_shifts(traj: &Trajectory, eps: f64, s: usize) -> Vec<f64> {
    let o = origin(traj);
    let t0 = traj.time(o);
    (0..o)
        .rev()
        .skip(s - 1)
        .step_by(s)
        .filter(|&i| traj.skew_distance(i, o) < eps)
        .map(|i| t0 - traj.time(i))
        .collect()
}

/// Assembles the recurrence report on `[0, horizon]` (the part of the
/// trajectory from `t = 0` on). Flags are finite-horizon evidence only:
///
/// * `poisson_plus`: every conclusive row has shifts beyond `h/8`, `h/4` and `h/2`;
/// * `almost_recurrent_evidence`: shift gaps on `[0, h - w]` are at most `(h - w)/4`;
/// * `bohr_evidence`: the same for almost periods with window `w`;
/// * `pseudo_recurrent_evidence`: sampled points of the first half are revisited
///   within `eps` in every interval of length `h/8` after them.
///
/// The hierarchy Bohr ⇒ almost recurrent ⇒ Poisson is checked and reported as
/// [`Error::Internal`] when violated.
pub fn classify(traj: &Trajectory, settings: &RecurrenceSettings) -> Result<RecurrenceReport> {
    if settings.eps_list.is_empty() || settings.eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("eps_list must be a nonempty list of positive numbers"));
    }
    let dt = sample_step(traj)?;
    let step = settings.step.unwrap_or(dt);
    let s = stride(traj, step)?;
    let o = origin(traj);
    let horizon = traj.time(traj.len() - 1) - traj.time(o);
    if !(horizon > 0.0) {
        return Err(invalid("trajectory has no samples after its origin"));
    }
    let window = settings.window.unwrap_or((horizon / 10.0).min(50.0));
    if window > horizon / 3.0 {
        return Err(invalid(format!("window {window} exceeds a third of the horizon {horizon}")));
    }
    let core = horizon - window;

    let mut eps_list = settings.eps_list.clone();
    eps_list.sort_by(|a, b| b.total_cmp(a));
    // (row, shifts inside [0, h - w], last shift)
    let rows: Vec<(EpsRow, Vec<f64>, Option<f64>)> = eps_list
        .par_iter()
        .map(|&eps| {
            let shifts = epsilon_shift_set(traj, eps, step)?;
            let aps = almost_period_set(traj, eps, step, window)?;
            let core_shifts: Vec<f64> = shifts.iter().copied().filter(|&t| t <= core).collect();
            let ap_len = inclusion_length(&aps, core);
            let row = EpsRow {
                eps,
                shift_count: shifts.len(),
                inclusion_length: finite(inclusion_length(&shifts, horizon)),
                almost_period_count: aps.len(),
                almost_period_inclusion_length: finite(ap_len),
                almost_period_flag: ap_len <= core / 4.0,
                inconclusive: shifts.len() < 2,
            };
            Ok((row, core_shifts, shifts.last().copied()))
        })
        .collect::<Result<_>>()?;

    let all_conclusive = rows.iter().all(|(r, _, _)| !r.inconclusive);

    let lagrange_stable = (0..traj.len()).all(|i| traj.state(i).iter().all(|v| v.is_finite()))
        && traj.sup_norm() <= settings.lagrange_bound;

    let levels = [horizon / 8.0, horizon / 4.0, horizon / 2.0];
    let poisson_plus =
        all_conclusive && rows.iter().all(|(_, _, last)| last.is_some_and(|l| levels.iter().all(|&lv| l > lv)));

    let poisson_minus = if o == 0 {
        None
    } else {
        let back = traj.time(o) - traj.time(0);
        let shifts: Vec<Vec<f64>> = rows.iter().map(|(r, _, _)| backward_shifts(traj, r.eps, s)).collect();
        // too few backward returns is inconclusive, as for forward rows
        if shifts.iter().any(|b| b.len() < 2) {
            None
        } else {
            Some(shifts.iter().all(|b| b.iter().any(|&t| t > back / 2.0)))
        }
    };

    let almost_recurrent_evidence =
        all_conclusive && rows.iter().all(|(_, core_shifts, _)| inclusion_length(core_shifts, core) <= core / 4.0);
    let bohr_evidence = all_conclusive && rows.iter().all(|(r, _, _)| r.almost_period_flag);

    let pseudo_recurrent_evidence = all_conclusive && {
        let half = o + (traj.len() - o) / 2;
        let count = settings.pseudo_points.max(1);
        let points: Vec<usize> = (0..count).map(|k| o + k * (half - o) / count).collect();
        let gap = horizon / 8.0;
        rows.iter().all(|(r, _, _)| {
            points.par_iter().all(|&p| {
                let tp = traj.time(p);
                let returns: Vec<f64> = (p + s..traj.len())
                    .step_by(s)
                    .filter(|&i| traj.skew_distance(i, p) < r.eps)
                    .map(|i| traj.time(i) - tp)
                    .collect();
                inclusion_length(&returns, traj.time(traj.len() - 1) - tp) <= gap
            })
        })
    };

    if bohr_evidence && !almost_recurrent_evidence {
        return Err(Error::Internal("almost periods are dense but shifts are not".into()));
    }
    if almost_recurrent_evidence && !poisson_plus {
        return Err(Error::Internal("shifts are relatively dense but the point is not positively Poisson stable".into()));
    }

    let mut eps_table: Vec<EpsRow> = rows.into_iter().map(|(r, _, _)| r).collect();
    eps_table.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    let mut notes = vec![
        format!("finite-horizon evidence on [0, {horizon}] with shift step {step}"),
        format!("almost periods use the window [0, {window}] instead of all times"),
        "only non-returns are conclusive; positive flags are evidence at the tested scale".to_string(),
    ];
    if !all_conclusive {
        notes.push("some eps rows have fewer than two returns and are inconclusive".to_string());
    }
    Ok(RecurrenceReport {
        horizon,
        step,
        window,
        eps_table,
        flags: RecurrenceFlags {
            lagrange_stable,
            poisson_plus,
            poisson_minus,
            almost_recurrent_evidence,
            bohr_evidence,
            pseudo_recurrent_evidence,
        },
        notes,
    })
}
