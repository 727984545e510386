//! Sampled evidence for positive uniform Lyapunov stability.
//!
//! Pairs `(u0, u)` with `|u - u0| < δ` are started over `σ(t0, θ)` for several
//! `t0` and integrated jointly; a row `(ε, δ)` passes when every sampled
//! separation stays below `ε` over the horizon.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::BasePoint;
use crate::cocycle::{uniform_grid, CocycleSpec};
use crate::error::{invalid, Error, Result};
use crate::order::Verdict;
use crate::rng;
use crate::trajectory::{euclid_dist, euclid_norm};

/// `δ` candidates are `ε / 2^k` for `k = 0..=DELTA_HALVINGS`.
pub const DELTA_HALVINGS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub eps_list: Vec<f64>,
    pub pair_count: usize,
    pub t0_samples: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    /// Reference points are drawn from `[-half_width, half_width]^d`.
    pub half_width: f64,
    /// Observation step; ignored (1) for difference cocycles.
    pub sample_step: f64,
}

impl Default for StabilityCheck {
    fn default() -> Self {
        StabilityCheck {
            eps_list: vec![0.1, 0.01, 0.001],
            pair_count: 100,
            t0_samples: vec![0.0, 25.0, 50.0, 100.0],
            horizon: 20.0,
            seed: 0,
            half_width: 2.0,
            sample_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub eps: f64,
    /// Largest admissible grid value, `None` if even `ε / 64` fails.
    pub delta: Option<f64>,
    /// Admissible `δ` for each `t0` sample separately.
    pub delta_by_t0: Vec<Option<f64>>,
    /// Largest `sup_t |Δ(t)| / |Δ(0)|` over all pairs tried for this row.
    pub max_growth_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityWitness {
    pub t0: f64,
    pub theta: Vec<f64>,
    pub u0: Vec<f64>,
    pub u: Vec<f64>,
    /// Time after `t0` at which the separation first exceeded `ε`; `None` on divergence.
    pub t: Option<f64>,
    /// Separation growth, infinite when integration diverged.
    pub growth_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eps_delta_table: Vec<StabilityRow>,
    pub verdict: Verdict,
    pub witnesses: Vec<StabilityWitness>,
    /// Largest growth ratio over all pairs and rows.
    pub max_growth_ratio: f64,
    /// Largest `|Δ(first step)| / |Δ(0)|`, a contraction indicator.
    pub max_one_step_ratio: f64,
    /// `δ(ε)` agrees within 10% across the `t0` samples for every row.
    pub uniform_in_t0: bool,
    pub t0_samples: Vec<f64>,
    pub pair_count: usize,
    pub seed: u64,
}

struct Sample {
    theta: BasePoint,
    u0: Vec<f64>,
    dir: Vec<f64>,
    /// Initial separation as a fraction of `δ`, in `[1/2, 1)`.
    frac: f64,
}

struct PairOutcome {
    sup_ratio: f64,
    one_step_ratio: f64,
    exceeded_at: Option<f64>,
    diverged: bool,
}

fn run_pair(spec: &CocycleSpec, grid: &[f64], start: &BasePoint, u0: &[f64], u: &[f64], eps: f64) -> Result<PairOutcome> {
    let d = spec.dim();
    let initial = euclid_dist(u0, u);
    let y0 = [u0, u].concat();
    let mut sup: f64 = 0.0;
    let mut one_step = f64::NAN;
    let mut exceeded_at = None;
    let res = spec.flow_ensemble(&y0, start.phases(), grid, |k, t, y| {
        let sep = euclid_dist(&y[..d], &y[d..]);
        sup = sup.max(sep);
        if k == 1 {
            one_step = sep / initial;
        }
        if exceeded_at.is_none() && sep >= eps {
            exceeded_at = Some(t);
        }
    });
    match res {
        Ok(()) => Ok(PairOutcome { sup_ratio: sup / initial, one_step_ratio: one_step, exceeded_at, diverged: false }),
        Err(Error::Divergence { .. }) => {
            Ok(PairOutcome { sup_ratio: f64::INFINITY, one_step_ratio: one_step, exceeded_at, diverged: true })
        }
        Err(e) => Err(e),
    }
}

/// Searches, for each `ε`, the largest `δ ∈ {ε, ε/2, …, ε/64}` such that every
/// sampled pair with initial separation below `δ` stays `ε`-close over
/// `[t0, t0 + horizon]` for every sampled `t0`. Divergence counts as failure.
pub fn check_uniform_stability(spec: &CocycleSpec, check: &StabilityCheck) -> Result<StabilityReport> {
    if check.pair_count == 0 {
        return Err(invalid("pair_count must be at least 1"));
    }
    if check.eps_list.is_empty() || check.eps_list.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("eps_list must be a nonempty list of positive numbers"));
    }
    if check.t0_samples.is_empty() || !(check.horizon > 0.0) {
        return Err(invalid("need at least one t0 sample and a positive horizon"));
    }
    for &t0 in &check.t0_samples {
        spec.base().check_time(t0)?;
    }
    let step = if spec.is_discrete() { 1.0 } else { check.sample_step };
    let grid = uniform_grid(check.horizon, step);
    let d = spec.dim();
    let mut r = rng::seeded(check.seed);
    let samples: Vec<Sample> = (0..check.pair_count)
        .map(|_| Sample {
            theta: rng::base_point(&mut r, spec.base_dim()),
            u0: rng::in_box(&mut r, d, check.half_width),
            dir: rng::unit_vector(&mut r, d),
            frac: r.gen_range(0.5..1.0),
        })
        .collect();
    // pullback through t0 once per (sample, t0): the reference state is placed over σ(t0, θ)
    let starts: Vec<Vec<BasePoint>> = samples
        .iter()
        .map(|s| check.t0_samples.iter().map(|&t0| spec.advance(&s.theta, t0)).collect())
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(check.eps_list.len());
    let mut witnesses = Vec::new();
    let mut max_growth: f64 = 0.0;
    let mut max_one_step: f64 = 0.0;
    let mut uniform = true;

    for &eps in &check.eps_list {
        let mut row_growth: f64 = 0.0;
        let mut delta_by_t0 = Vec::with_capacity(check.t0_samples.len());
        let mut row_witness: Option<StabilityWitness> = None;
        for (j, &t0) in check.t0_samples.iter().enumerate() {
            let mut found = None;
            for k in 0..=DELTA_HALVINGS {
                let delta = eps / f64::from(1u32 << k);
                let outcomes: Vec<Result<(usize, PairOutcome)>> = samples
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let u: Vec<f64> = s.u0.iter().zip(&s.dir).map(|(a, w)| a + s.frac * delta * w).collect();
                        run_pair(spec, &grid, &starts[i][j], &s.u0, &u, eps).map(|o| (i, o))
                    })
                    .collect();
                let mut ok = true;
                let mut worst: Option<(usize, PairOutcome)> = None;
                for o in outcomes {
                    let (i, o) = o?;
                    row_growth = row_growth.max(o.sup_ratio);
                    if o.one_step_ratio.is_finite() {
                        max_one_step = max_one_step.max(o.one_step_ratio);
                    }
                    if o.exceeded_at.is_some() || o.diverged {
                        ok = false;
                        if worst.as_ref().is_none_or(|(_, w)| o.sup_ratio > w.sup_ratio) {
                            worst = Some((i, o));
                        }
                    }
                }
                if ok {
                    found = Some(delta);
                    break;
                }
                if k == DELTA_HALVINGS {
                    if let Some((i, o)) = worst {
                        let s = &samples[i];
                        if row_witness.as_ref().is_none_or(|w| o.sup_ratio > w.growth_ratio) {
                            row_witness = Some(StabilityWitness {
                                t0,
                                theta: s.theta.phases().to_vec(),
                                u0: s.u0.clone(),
                                u: s.u0.iter().zip(&s.dir).map(|(a, w)| a + s.frac * delta * w).collect(),
                                t: o.exceeded_at,
                                growth_ratio: o.sup_ratio,
                            });
                        }
                    }
                }
            }
            delta_by_t0.push(found);
        }
        let delta = if delta_by_t0.iter().all(Option::is_some) {
            delta_by_t0.iter().flatten().copied().reduce(f64::min)
        } else {
            None
        };
        let found: Vec<f64> = delta_by_t0.iter().flatten().copied().collect();
        if let (Some(lo), Some(hi)) = (found.iter().copied().reduce(f64::min), found.iter().copied().reduce(f64::max)) {
            if (hi - lo) > 0.1 * hi || found.len() != delta_by_t0.len() {
                uniform = false;
            }
        } else {
            uniform = false;
        }
        max_growth = max_growth.max(row_growth);
        witnesses.extend(row_witness);
        rows.push(StabilityRow { eps, delta, delta_by_t0, max_growth_ratio: row_growth });
    }

    let verdict = if rows.iter().all(|r| r.delta.is_some()) { Verdict::Pass } else { Verdict::Fail };
    Ok(StabilityReport {
        eps_delta_table: rows,
        verdict,
        witnesses,
        max_growth_ratio: max_growth,
        max_one_step_ratio: max_one_step,
        uniform_in_t0: uniform,
        t0_samples: check.t0_samples.clone(),
        pair_count: check.pair_count,
        seed: check.seed,
    })
}

/// Sup separation of one pair over the horizon, for scale checks.
pub fn sup_separation(spec: &CocycleSpec, theta: &BasePoint, u0: &[f64], u: &[f64], horizon: f64, step: f64) -> Result<f64> {
    let d = spec.dim();
    let step = if spec.is_discrete() { 1.0 } else { step };
    let mut sup: f64 = 0.0;
    spec.flow_ensemble(&[u0, u].concat(), theta.phases(), &uniform_grid(horizon, step), |_, _, y| {
        sup = sup.max(euclid_norm(&y[..d].iter().zip(&y[d..]).map(|(a, b)| a - b).collect::<Vec<_>>()));
    })?;
    Ok(sup)
}
