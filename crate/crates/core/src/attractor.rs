//! Dissipativity estimates, pullback ω-limits and the Levinson center.
//!
//! Fibers of the attractor are represented as ε-nets ([`FiberCloud`]) with an
//! explicit resolution; set identities are checked as Hausdorff bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::{torus_distance, BasePoint};
use crate::cloud::{cluster_leaders, hausdorff, semi_distance};
use crate::cocycle::{uniform_grid, CocycleSpec};
use crate::error::{invalid, Error, Result};
use crate::order::FiberCloud;
use crate::rng;
use crate::trajectory::euclid_norm;

/// Per-axis uniform grid on `[-radius, radius]^d`, restricted to the closed Euclidean ball.
pub fn ball_grid(d: usize, radius: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(1);
    let coord = |k: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -radius + 2.0 * radius * k as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|_| {
                    let c = coord(idx % per_axis);
                    idx /= per_axis;
                    c
                })
                .collect::<Vec<f64>>()
        })
        .filter(|p| euclid_norm(p) <= radius * (1.0 + 1e-12))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTime {
    /// Initial radius `R`.
    pub radius: f64,
    /// Largest observed time after which trajectories from `|u| ≤ R` stay in `|u| ≤ r`.
    pub time: f64,
    /// Same quantity over the two interleaved halves of the base samples.
    pub time_by_half: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityEstimate {
    /// Absorbing radius estimate.
    pub r: f64,
    /// Largest `|u|` seen over the final quarter of the horizon.
    pub tail_radius: f64,
    pub margin: f64,
    pub entry_times: Vec<EntryTime>,
    /// `L(R)` finite for all tested `R` and stable across base samples within 10%.
    pub uniform: bool,
    pub horizon: f64,
    pub theta_samples: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityCheck {
    pub radii: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub theta_samples: usize,
    pub grid_per_axis: usize,
    /// `r` is the observed asymptotic radius plus this margin.
    pub margin: f64,
    /// Sampling step for `|u(t)|`; ignored (1) for difference cocycles.
    pub sample_step: f64,
}

impl DissipativityCheck {
    pub fn for_spec(spec: &CocycleSpec) -> Self {
        DissipativityCheck {
            radii: vec![2.0, 5.0, 10.0, 20.0, 50.0],
            horizon: if spec.is_discrete() { 60.0 } else { 40.0 },
            seed: 0,
            theta_samples: 256,
            grid_per_axis: 5,
            margin: 0.1,
            sample_step: if spec.is_discrete() { 1.0 } else { 0.05 },
        }
    }
}

/// Relative spread of two entry times.
fn spread(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == 0.0 {
        0.0
    } else {
        (a - b).abs() / hi
    }
}

/// Estimates an absorbing ball `{|u| ≤ r}` and entry times `L(R)` from grids of
/// initial conditions `|u| ≤ R` over sampled base points.
///
/// Only the tested radii and horizon are certified; escape through the overflow
/// guard, or an asymptotic radius that grows with `R`, yields
/// [`Error::NotDissipative`].
pub fn check_dissipative(spec: &CocycleSpec, check: &DissipativityCheck) -> Result<DissipativityEstimate> {
    if check.radii.is_empty() || check.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(invalid("radii must be a nonempty list of positive numbers"));
    }
    if !(check.horizon > 0.0) || check.theta_samples < 2 {
        return Err(invalid("horizon must be positive and at least two base samples are needed"));
    }
    let step = if spec.is_discrete() { 1.0 } else { check.sample_step };
    let grid = uniform_grid(check.horizon, step);
    let tail_from = 0.75 * check.horizon;
    let mut r = rng::seeded(check.seed);
    let thetas: Vec<BasePoint> = (0..check.theta_samples).map(|_| rng::base_point(&mut r, spec.base_dim())).collect();

    // norms[radius][theta][ic] = |u(t)| along the grid
    let mut per_radius: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(check.radii.len());
    for &big_r in &check.radii {
        let ics = ball_grid(spec.dim(), big_r, check.grid_per_axis);
        let runs: Vec<Result<Vec<Vec<f64>>>> = thetas
            .par_iter()
            .map(|theta| {
                ics.iter()
                    .map(|u0| {
                        let mut norms = Vec::with_capacity(grid.len());
                        spec.flow_ensemble(u0, theta.phases(), &grid, |_, _, y| norms.push(euclid_norm(y)))
                            .map_err(|e| match e {
                                Error::Divergence { time, norm } => Error::NotDissipative(format!(
                                    "trajectory from |u0| = {:.3} escaped (|u| = {norm:e}) at t = {time:.3} with R = {big_r}",
                                    euclid_norm(u0)
                                )),
                                other => other,
                            })?;
                        Ok(norms)
                    })
                    .collect()
            })
            .collect();
        per_radius.push(runs.into_iter().collect::<Result<_>>()?);
    }

    let tail_start = grid.partition_point(|&t| t < tail_from);
    let tails: Vec<f64> = per_radius
        .iter()
        .map(|thetas| {
            thetas
                .iter()
                .flatten()
                .flat_map(|norms| norms[tail_start..].iter().copied())
                .fold(0.0, f64::max)
        })
        .collect();
    let tail_radius = tails.iter().copied().fold(0.0, f64::max);
    let tail_min = tails.iter().copied().fold(f64::INFINITY, f64::min);
    if tail_radius - tail_min > check.margin {
        return Err(Error::NotDissipative(format!(
            "asymptotic radius grows with the initial radius ({tail_min:.4} .. {tail_radius:.4})"
        )));
    }
    let radius = tail_radius + check.margin;

    let mut entry_times = Vec::with_capacity(check.radii.len());
    let mut uniform = true;
    for (k, thetas) in per_radius.iter().enumerate() {
        let mut halves = [0.0f64; 2];
        for (j, runs) in thetas.iter().enumerate() {
            for norms in runs {
                let last_out = norms.iter().rposition(|&n| n > radius).map_or(0.0, |i| grid[i]);
                halves[j % 2] = halves[j % 2].max(last_out);
            }
        }
        let time = halves[0].max(halves[1]);
        if !time.is_finite() || spread(halves[0], halves[1]) > 0.1 {
            uniform = false;
        }
        entry_times.push(EntryTime { radius: check.radii[k], time, time_by_half: halves });
    }

    Ok(DissipativityEstimate {
        r: radius,
        tail_radius,
        margin: check.margin,
        entry_times,
        uniform,
        horizon: check.horizon,
        theta_samples: check.theta_samples,
        note: format!(
            "dissipativity certified only for initial radii {:?} over horizon {} and {} sampled base points",
            check.radii, check.horizon, check.theta_samples
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSettings {
    pub grid_per_axis: usize,
    /// Increasing pullback depths; the deepest gives the returned cloud.
    pub depths: Vec<f64>,
    pub resolution: f64,
    /// Convergence threshold on the last Hausdorff residual; defaults to `resolution`.
    pub threshold: Option<f64>,
}

impl Default for FiberSettings {
    fn default() -> Self {
        FiberSettings { grid_per_axis: 17, depths: vec![10.0, 20.0, 40.0, 80.0], resolution: 1e-3, threshold: None }
    }
}

impl FiberSettings {
    fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(self.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    pub cloud: FiberCloud,
    pub depths: Vec<f64>,
    /// Hausdorff distance between the clouds at consecutive depths.
    pub residuals: Vec<f64>,
}

/// Pullback ω-limit `ω_θ(M)`: clusters of `φ(T, m, σ(-T, θ))` over `m ∈ M` for
/// increasing `T`, with convergence judged by the Hausdorff residual between
/// the last two depths.
pub fn pullback_omega(
    spec: &CocycleSpec,
    m_set: &[Vec<f64>],
    theta: &BasePoint,
    depths: &[f64],
    resolution: f64,
    threshold: f64,
) -> Result<PullbackResult> {
    if m_set.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if depths.len() < 2 || depths.iter().any(|t| !(*t > 0.0)) || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("need at least two increasing positive pullback depths"));
    }
    if !(resolution > 0.0) {
        return Err(invalid("resolution must be positive"));
    }
    let mut clouds: Vec<Vec<Vec<f64>>> = Vec::with_capacity(depths.len());
    for &depth in depths {
        let start = spec.advance(theta, -depth)?;
        let images: Vec<Vec<f64>> = m_set
            .par_iter()
            .map(|m| spec.phi(depth, m, &start))
            .collect::<Result<_>>()?;
        clouds.push(cluster_leaders(&images, resolution));
    }
    let residuals: Vec<f64> = clouds.windows(2).map(|w| hausdorff(&w[0], &w[1])).collect();
    let last = *residuals.last().expect("two depths give one residual");
    if !(last < threshold) {
        return Err(Error::RefinementNeeded { residual: last, threshold });
    }
    Ok(PullbackResult {
        cloud: FiberCloud::new(theta.clone(), clouds.pop().expect("nonempty"), resolution),
        depths: depths.to_vec(),
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevinsonFiber {
    pub cloud: FiberCloud,
    pub base: BasePoint,
    pub pullback_depths_used: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Hausdorff distance between the last two refinement stages.
    pub hausdorff_residual: f64,
    /// Radius of the absorbing ball the pullback started from.
    pub absorbing_radius: f64,
}

/// Fiber `I_θ = ω_θ(K)` of the Levinson center, with `K` the absorbing ball.
pub fn levinson_center(
    spec: &CocycleSpec,
    diss: &DissipativityEstimate,
    theta: &BasePoint,
    settings: &FiberSettings,
) -> Result<LevinsonFiber> {
    if !diss.uniform {
        return Err(Error::Hypothesis("dissipativity estimate is not uniform in the base point".into()));
    }
    let m_set = ball_grid(spec.dim(), diss.r, settings.grid_per_axis);
    let res = pullback_omega(spec, &m_set, theta, &settings.depths, settings.resolution, settings.threshold())?;
    Ok(LevinsonFiber {
        hausdorff_residual: *res.residuals.last().unwrap_or(&0.0),
        cloud: res.cloud,
        base: theta.clone(),
        pullback_depths_used: res.depths,
        residuals: res.residuals,
        absorbing_radius: diss.r,
    })
}

/// Fibers indexed by base point.
#[derive(Debug, Clone, Default)]
pub struct FiberMap {
    fibers: Vec<LevinsonFiber>,
}

impl FiberMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, fiber: LevinsonFiber) {
        self.fibers.retain(|f| torus_distance(f.base.phases(), fiber.base.phases()) > 1e-12);
        self.fibers.push(fiber);
    }

    pub fn get(&self, theta: &BasePoint) -> Result<&LevinsonFiber> {
        self.fibers
            .iter()
            .find(|f| torus_distance(f.base.phases(), theta.phases()) <= 1e-12)
            .ok_or_else(|| Error::MissingFiber(theta.phases().to_vec()))
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub t: f64,
    pub distance: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Hausdorff distance between `φ(t, I_θ, θ)` and `I_{σ(t,θ)}`.
pub fn verify_invariance(
    spec: &CocycleSpec,
    fibers: &FiberMap,
    theta: &BasePoint,
    t: f64,
    tol: f64,
) -> Result<InvarianceReport> {
    let here = fibers.get(theta)?;
    let there = fibers.get(&spec.advance(theta, t)?)?;
    let image: Vec<Vec<f64>> = here
        .cloud
        .points
        .par_iter()
        .map(|p| spec.phi(t, p, theta))
        .collect::<Result<_>>()?;
    let distance = hausdorff(&image, &there.cloud.points);
    Ok(InvarianceReport { t, distance, tol, pass: distance <= tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontinuityReport {
    pub base_distances: Vec<f64>,
    /// `β(I_{θ_n}, I_{θ_0})` for each approach point.
    pub semi_distances: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Fibers at `θ_n = θ_0 + 2^{-n}·offset·(1,…,1)` for `n = 1..=approach_count`
/// and their Hausdorff semi-distance to the fiber over `θ_0`. Passes when the
/// sequence is nonincreasing (up to the cloud resolution) and ends below `tol`.
pub fn verify_upper_semicontinuity(
    spec: &CocycleSpec,
    diss: &DissipativityEstimate,
    theta0: &BasePoint,
    approach_count: usize,
    offset: f64,
    tol: f64,
    settings: &FiberSettings,
) -> Result<SemicontinuityReport> {
    if approach_count == 0 || !(offset > 0.0 && offset < 0.5) {
        return Err(invalid("need approach_count >= 1 and 0 < offset < 1/2"));
    }
    let center = levinson_center(spec, diss, theta0, settings)?;
    let mut base_distances = Vec::with_capacity(approach_count);
    let mut semi_distances = Vec::with_capacity(approach_count);
    for n in 1..=approach_count {
        let h = offset * 0.5f64.powi(n as i32);
        let theta_n = BasePoint::new(theta0.phases().iter().map(|p| p + h).collect());
        let fiber = levinson_center(spec, diss, &theta_n, settings)?;
        base_distances.push(torus_distance(theta_n.phases(), theta0.phases()));
        semi_distances.push(semi_distance(&fiber.cloud.points, &center.cloud.points));
    }
    let slack = settings.resolution;
    let decreasing = semi_distances.windows(2).all(|w| w[1] <= w[0] + slack);
    let pass = decreasing && semi_distances.last().is_some_and(|&s| s < tol);
    Ok(SemicontinuityReport { base_distances, semi_distances, tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_flow::BaseFlowSpec;
    use crate::field::{AffineField, ClippedCubicMap};
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn forced_scalar() -> CocycleSpec {
        let base = BaseFlowSpec::continuous(vec![1.0 / TAU]).unwrap();
        CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![-1.0]).with_cos(vec![1.0]))).unwrap()
    }

    #[test]
    fn ball_grid_shapes() {
        assert_eq!(ball_grid(1, 3.0, 5), vec![vec![-3.0], vec![-1.5], vec![0.0], vec![1.5], vec![3.0]]);
        let g = ball_grid(2, 1.0, 17);
        assert!(g.iter().all(|p| euclid_norm(p) <= 1.0 + 1e-12));
        assert!(g.contains(&vec![0.0, 0.0]));
        assert!(g.len() > 180 && g.len() < 289);
    }

    #[test]
    fn dissipative_estimate_for_forced_scalar() {
        let spec = forced_scalar();
        let est = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        assert!(est.r <= 1.1, "r = {}", est.r);
        assert!(est.uniform);
        for e in &est.entry_times {
            let predicted = (e.radius / 0.1).ln();
            assert!((e.time - predicted).abs() <= 0.2 * predicted, "R={} L={} predicted {}", e.radius, e.time, predicted);
        }
    }

    #[test]
    fn expanding_flow_is_not_dissipative() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let spec = CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![1.0]))).unwrap();
        let err = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap_err();
        assert!(matches!(err, Error::NotDissipative(_)), "{err}");
    }

    #[test]
    fn neutral_flow_is_not_dissipative() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let spec = CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![0.0]))).unwrap();
        assert!(matches!(
            check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)),
            Err(Error::NotDissipative(_))
        ));
    }

    #[test]
    fn pullback_collapses_to_fixed_point() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let f = AffineField::new(1, 1, vec![-1.0]).with_offset(vec![0.5]);
        let spec = CocycleSpec::ode(1, base, Arc::new(f)).unwrap();
        let m = ball_grid(1, 3.0, 17);
        let res = pullback_omega(&spec, &m, &BasePoint::zeros(1), &[10.0, 20.0, 40.0], 1e-3, 1e-3).unwrap();
        assert_eq!(res.cloud.len(), 1);
        assert!((res.cloud.points[0][0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn pullback_periodic_fiber() {
        let spec = forced_scalar();
        let m = ball_grid(1, 1.1, 17);
        let res = pullback_omega(&spec, &m, &BasePoint::zeros(1), &[10.0, 20.0, 40.0, 80.0], 1e-3, 1e-3).unwrap();
        assert_eq!(res.cloud.len(), 1);
        assert!((res.cloud.points[0][0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn expanding_pullback_fails() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let spec = CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![1.0]))).unwrap();
        let m = ball_grid(1, 1.0, 5);
        let err = pullback_omega(&spec, &m, &BasePoint::zeros(1), &[10.0, 20.0, 40.0, 80.0], 1e-3, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. } | Error::RefinementNeeded { .. }));
    }

    #[test]
    fn clipped_cubic_has_several_branches() {
        let base = BaseFlowSpec::discrete(vec![0.0]).unwrap();
        let spec = CocycleSpec::difference(1, base, Arc::new(ClippedCubicMap { clip: 2.0 })).unwrap();
        let diss = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        let fiber = levinson_center(&spec, &diss, &BasePoint::zeros(1), &FiberSettings::default()).unwrap();
        // direct iteration oracle: grid points go to -2, 0 or 2
        let mut expected: Vec<f64> = ball_grid(1, diss.r, 17)
            .iter()
            .map(|p| {
                let mut x = p[0];
                for _ in 0..80 {
                    x = (x * x * x).clamp(-2.0, 2.0);
                }
                x
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        expected.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert!(fiber.cloud.len() >= 2);
        assert_eq!(fiber.cloud.len(), expected.len());
    }

    #[test]
    fn invariance_and_fault_injection() {
        let spec = forced_scalar();
        let diss = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        let settings = FiberSettings::default();
        let th = BasePoint::new(vec![0.1]);
        let mut map = FiberMap::new();
        map.insert(levinson_center(&spec, &diss, &th, &settings).unwrap());
        let later = spec.advance(&th, 2.0).unwrap();
        map.insert(levinson_center(&spec, &diss, &later, &settings).unwrap());
        let rep = verify_invariance(&spec, &map, &th, 2.0, 2e-3).unwrap();
        assert!(rep.pass && rep.distance < 1e-5, "{rep:?}");
        assert_eq!(verify_invariance(&spec, &map, &th, 0.0, 2e-3).unwrap().distance, 0.0);
        assert!(matches!(verify_invariance(&spec, &map, &th, 1.0, 2e-3), Err(Error::MissingFiber(_))));

        let mut corrupted = map.get(&later).unwrap().clone();
        for p in &mut corrupted.cloud.points {
            p[0] += 0.1;
        }
        map.insert(corrupted);
        let bad = verify_invariance(&spec, &map, &th, 2.0, 2e-3).unwrap();
        assert!(!bad.pass);
        assert!((bad.distance - 0.1).abs() < 1e-5);
    }

    #[test]
    fn semicontinuity_linear_halving() {
        let spec = forced_scalar();
        let diss = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        let th = BasePoint::new(vec![0.2]);
        let rep = verify_upper_semicontinuity(&spec, &diss, &th, 5, 0.02, 1e-2, &FiberSettings::default()).unwrap();
        assert!(rep.pass, "{rep:?}");
        for w in rep.semi_distances.windows(2) {
            let ratio = w[1] / w[0];
            assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn semicontinuity_constant_field() {
        let base = BaseFlowSpec::continuous(vec![0.3]).unwrap();
        let f = AffineField::new(1, 1, vec![-1.0]).with_offset(vec![0.25]);
        let spec = CocycleSpec::ode(1, base, Arc::new(f)).unwrap();
        let diss = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        let rep = verify_upper_semicontinuity(&spec, &diss, &BasePoint::zeros(1), 4, 0.1, 1e-6, &FiberSettings::default()).unwrap();
        assert!(rep.semi_distances.iter().all(|&s| s < 1e-9));
    }
}
