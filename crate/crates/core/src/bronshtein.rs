//! From the fiber infimum `α` to the distinguished point `γ` over `θ0`, its
//! entire trajectory, and finite-horizon checks of attraction and
//! comparability by character of recurrence.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attractor::{check_dissipative, levinson_center, DissipativityCheck, DissipativityEstimate, FiberSettings, LevinsonFiber};
use crate::base_flow::{displacement, inclusion_length, torus_distance, BaseFlowSpec, BasePoint, TimeKind};
use crate::cloud::{diameter, point_to_set};
use crate::cocycle::{uniform_grid, CocycleSpec, SkewPoint};
use crate::error::{check_dim, invalid, Error, Result, Stage};
use crate::order::{check_monotone, fiber_inf, fiber_sup, MonotoneCheck, MonotonicityReport, Verdict};
use crate::rng;
use crate::stability::{check_uniform_stability, StabilityCheck, StabilityReport};
use crate::trajectory::{euclid_dist, Trajectory};

/// Lower end of the `δ` search grid in [`verify_comparability`].
pub const DELTA_FLOOR: f64 = 1e-6;

/// Absolute slack on the dyadic-window monotonicity of attraction profiles.
pub const ATTRACTION_NOISE_FLOOR: f64 = 1e-8;

/// `α = inf I_θ0`.
pub fn alpha_point(spec: &CocycleSpec, theta0: &BasePoint, fiber: &LevinsonFiber) -> Result<Vec<f64>> {
    check_fiber_base(spec, theta0, fiber)?;
    fiber_inf(&fiber.cloud)
}

/// `β = sup I_θ0`.
pub fn beta_point(spec: &CocycleSpec, theta0: &BasePoint, fiber: &LevinsonFiber) -> Result<Vec<f64>> {
    check_fiber_base(spec, theta0, fiber)?;
    fiber_sup(&fiber.cloud)
}

fn check_fiber_base(spec: &CocycleSpec, theta0: &BasePoint, fiber: &LevinsonFiber) -> Result<()> {
    check_dim(spec.base_dim(), theta0.dim())?;
    if torus_distance(fiber.base.phases(), theta0.phases()) > 1e-12 {
        return Err(Error::MissingFiber(theta0.phases().to_vec()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSettings {
    /// Base-return tolerance in the torus metric.
    pub return_eps: f64,
    /// `None` uses `1e4` time units (continuous) or `1e5` steps (discrete).
    pub horizon: Option<f64>,
    /// Largest admissible tail diameter after displacement correction.
    pub tol: f64,
    /// Fraction of the returns discarded as transient.
    pub transient_fraction: f64,
    /// Total degree of the displacement polynomial; lowered when returns are scarce.
    pub degree: usize,
}

impl Default for GammaSettings {
    fn default() -> Self {
        GammaSettings { return_eps: 0.02, horizon: None, tol: 1e-4, transient_fraction: 0.5, degree: 3 }
    }
}

impl GammaSettings {
    pub fn horizon_for(&self, base: &BaseFlowSpec) -> f64 {
        self.horizon.unwrap_or(match base.time_kind {
            TimeKind::Continuous => 1e4,
            TimeKind::Discrete => 1e5,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub t: f64,
    /// Signed base displacement `σ(t, θ0) - θ0` per coordinate.
    pub displacement: Vec<f64>,
    pub u: Vec<f64>,
}

/// Limit point of the forward orbit of a fiber bound, read at base returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPointEstimate {
    pub value: Vec<f64>,
    /// The fiber bound the orbit started from.
    pub seed: Vec<f64>,
    /// Diameter of the tail values after removing the fitted displacement trend.
    pub tail_diameter: f64,
    /// Diameter of the raw tail values.
    pub raw_tail_diameter: f64,
    pub total_returns: usize,
    pub degree: usize,
    pub horizon: f64,
    pub return_eps: f64,
    #[serde(skip)]
    pub tail: Vec<ReturnSample>,
}

/// Return times of `θ0` within `eps` up to `horizon`, and the coordinates whose
/// displacement still varies along them.
///
/// In continuous time with a moving base, candidates are the exact returns of
/// the fastest coordinate, so that coordinate drops out of the displacement.
fn base_returns(base: &BaseFlowSpec, theta0: &BasePoint, eps: f64, horizon: f64) -> (Vec<f64>, Vec<usize>) {
    let m = base.dim();
    let moving: Vec<usize> = (0..m).filter(|&k| base.nu[k] != 0.0).collect();
    let (candidates, free): (Vec<f64>, Vec<usize>) = if moving.is_empty() {
        (uniform_grid(horizon, 1.0).into_iter().skip(1).collect(), Vec::new())
    } else if base.time_kind == TimeKind::Discrete {
        (uniform_grid(horizon, 1.0).into_iter().skip(1).collect(), moving)
    } else {
        let pivot = *moving
            .iter()
            .max_by(|&&a, &&b| base.nu[a].abs().total_cmp(&base.nu[b].abs()))
            .expect("nonempty");
        let rate = base.nu[pivot].abs();
        let n = (horizon * rate + 1e-9).floor() as usize;
        let times = (1..=n).map(|j| j as f64 / rate).collect();
        (times, moving.into_iter().filter(|&k| k != pivot).collect())
    };
    let mut buf = vec![0.0; m];
    let times = candidates
        .into_iter()
        .filter(|&t| {
            base.advance_into(theta0.phases(), t, &mut buf);
            torus_distance(&buf, theta0.phases()) < eps
        })
        .collect();
    (times, free)
}

/// Exponent vectors of all monomials in `vars` variables of total degree ≤ `degree`,
/// constant first.
fn monomials(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; vars]];
    if vars == 0 {
        return out;
    }
    for deg in 1..=degree {
        let mut current = vec![0; vars];
        fill(&mut out, &mut current, 0, deg);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, pos: usize, left: usize) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[pos] = k;
        fill(out, current, pos + 1, left - k);
    }
}

fn limit_point(spec: &CocycleSpec, theta0: &BasePoint, seed: &[f64], settings: &GammaSettings) -> Result<LimitPointEstimate> {
    check_dim(spec.dim(), seed.len())?;
    check_dim(spec.base_dim(), theta0.dim())?;
    if !(settings.return_eps > 0.0) || !(settings.tol > 0.0) || !(0.0..1.0).contains(&settings.transient_fraction) {
        return Err(invalid("need return_eps > 0, tol > 0 and transient_fraction in [0, 1)"));
    }
    let horizon = settings.horizon_for(spec.base());
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let (times, free) = base_returns(spec.base(), theta0, settings.return_eps, horizon);
    if times.is_empty() {
        return Err(Error::NoReturns { eps: settings.return_eps, horizon });
    }
    let skip = (times.len() as f64 * settings.transient_fraction).floor() as usize;
    let tail_times = &times[skip.min(times.len() - 1)..];

    let mut grid = Vec::with_capacity(tail_times.len() + 1);
    grid.push(0.0);
    grid.extend_from_slice(tail_times);
    let mut tail = Vec::with_capacity(tail_times.len());
    let mut phase = vec![0.0; spec.base_dim()];
    spec.flow_ensemble(seed, theta0.phases(), &grid, |k, t, y| {
        if k > 0 {
            spec.base().advance_into(theta0.phases(), t, &mut phase);
            tail.push(ReturnSample { t, displacement: displacement(&phase, theta0.phases()), u: y.to_vec() });
        }
    })?;

    let n = tail.len();
    let mut degree = if free.is_empty() { 0 } else { settings.degree };
    while degree > 0 && 2 * monomials(free.len(), degree).len() > n {
        degree -= 1;
    }
    let basis = monomials(free.len(), degree);
    let x = DMatrix::from_fn(n, basis.len(), |i, j| {
        basis[j]
            .iter()
            .zip(&free)
            .map(|(&e, &k)| (tail[i].displacement[k] / settings.return_eps).powi(e as i32))
            .product::<f64>()
    });
    let d = spec.dim();
    let y = DMatrix::from_fn(n, d, |i, c| tail[i].u[c]);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Internal(format!("least-squares solve failed: {e}")))?;
    let trend = &x * &coef;
    let corrected: Vec<Vec<f64>> =
        (0..n).map(|i| (0..d).map(|c| y[(i, c)] - trend[(i, c)] + coef[(0, c)]).collect()).collect();
    let raw: Vec<Vec<f64>> = tail.iter().map(|s| s.u.clone()).collect();
    let tail_diameter = diameter(&corrected);
    if !(tail_diameter < settings.tol) {
        return Err(Error::SingletonViolation { diameter: tail_diameter, tol: settings.tol, returns: n });
    }
    Ok(LimitPointEstimate {
        value: (0..d).map(|c| coef[(0, c)]).collect(),
        seed: seed.to_vec(),
        tail_diameter,
        raw_tail_diameter: diameter(&raw),
        total_returns: times.len(),
        degree,
        horizon,
        return_eps: settings.return_eps,
        tail,
    })
}

/// `γ`: the value over `θ0` of the ω-limit of the orbit through `(α, θ0)`.
///
/// States are recorded at base returns within `return_eps`; after the
/// transient cut a polynomial in the residual base displacement is fitted and
/// its constant term is the estimate. The displacement-corrected tail must have
/// diameter below `tol`, otherwise [`Error::SingletonViolation`].
pub fn gamma_point(spec: &CocycleSpec, theta0: &BasePoint, alpha: &[f64], settings: &GammaSettings) -> Result<LimitPointEstimate> {
    limit_point(spec, theta0, alpha, settings)
}

/// As [`gamma_point`], seeded from the fiber supremum `β`.
pub fn delta_point(spec: &CocycleSpec, theta0: &BasePoint, beta: &[f64], settings: &GammaSettings) -> Result<LimitPointEstimate> {
    limit_point(spec, theta0, beta, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMax {
    pub from: f64,
    pub to: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractionProfile {
    pub times: Vec<f64>,
    /// `|φ(t, α, θ0) - φ(t, γ, θ0)|`.
    pub distances: Vec<f64>,
    /// Maxima over `[0, 1]`, `(1, 2]`, `(2, 4]`, …
    pub windows: Vec<WindowMax>,
    /// Largest distance for `t ≥ horizon / 2`.
    pub tail_max: f64,
    pub horizon: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Joint integration of `α` and `γ` over `θ0`. Passes when the distance stays
/// below `tol` on the second half of the horizon and the dyadic-window maxima
/// are nonincreasing up to [`ATTRACTION_NOISE_FLOOR`].
pub fn verify_attraction(
    spec: &CocycleSpec,
    alpha: &[f64],
    gamma: &[f64],
    theta0: &BasePoint,
    horizon: f64,
    tol: f64,
) -> Result<AttractionProfile> {
    let d = spec.dim();
    check_dim(d, alpha.len())?;
    check_dim(d, gamma.len())?;
    if !(horizon > 0.0) || !(tol > 0.0) {
        return Err(invalid("horizon and tol must be positive"));
    }
    let step = if spec.is_discrete() { 1.0 } else { 0.1 };
    let grid = uniform_grid(horizon, step);
    let mut distances = Vec::with_capacity(grid.len());
    spec.flow_ensemble(&[alpha, gamma].concat(), theta0.phases(), &grid, |_, _, y| {
        distances.push(euclid_dist(&y[..d], &y[d..]));
    })?;

    let mut windows: Vec<WindowMax> = Vec::new();
    let (mut from, mut to) = (0.0, 1.0);
    while from < horizon {
        let max = grid
            .iter()
            .zip(&distances)
            .filter(|(&t, _)| (t > from || from == 0.0) && t <= to)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() {
            windows.push(WindowMax { from, to, max });
        }
        from = to;
        to *= 2.0;
    }
    let tail_max = grid
        .iter()
        .zip(&distances)
        .filter(|(&t, _)| t >= horizon / 2.0)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let decreasing = windows.windows(2).all(|w| w[1].max <= w[0].max + ATTRACTION_NOISE_FLOOR);
    Ok(AttractionProfile {
        times: grid,
        distances,
        windows,
        tail_max,
        horizon,
        tol,
        pass: tail_max < tol && decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityRow {
    pub eps: f64,
    pub delta: f64,
    /// Number of sampled `τ > 0` with base shift below `delta`.
    pub witness_count: usize,
    /// Largest `|u(τ) - u(0)|` over the witnesses.
    pub max_state_shift_at_delta: f64,
    /// Largest gap between witnesses on `[0, horizon]`.
    pub inclusion_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityTable {
    pub rows: Vec<ComparabilityRow>,
    /// Finite horizon the evidence covers.
    pub horizon: f64,
    pub sample_count: usize,
    pub delta_floor: f64,
}

/// `0.5·10^{-k/10}` down to [`DELTA_FLOOR`], largest first.
pub fn delta_grid() -> Vec<f64> {
    (0..)
        .map(|k| 0.5 * 10f64.powf(-(k as f64) / 10.0))
        .take_while(|&d| d >= DELTA_FLOOR * (1.0 - 1e-12))
        .collect()
}

/// For each `ε`, the largest grid `δ` such that every sampled `τ ∈ (0, horizon]`
/// with `d(σ(τ,θ0), θ0) < δ` has `|u(τ) - u(0)| < ε` along the trajectory.
pub fn verify_comparability(
    spec: &CocycleSpec,
    gamma_traj: &Trajectory,
    eps_list: &[f64],
    horizon: f64,
) -> Result<ComparabilityTable> {
    check_dim(spec.dim(), gamma_traj.dim())?;
    check_dim(spec.base_dim(), gamma_traj.base_dim())?;
    if eps_list.is_empty() || eps_list.iter().any(|e| !(*e > 0.0)) || !(horizon > 0.0) {
        return Err(invalid("need positive eps values and a positive horizon"));
    }
    let origin = gamma_traj.index_of(0.0).ok_or_else(|| invalid("trajectory does not contain t = 0"))?;
    let last = *gamma_traj.times().last().expect("nonempty");
    if last < horizon * (1.0 - 1e-9) {
        return Err(invalid(format!("trajectory ends at t = {last}, before the horizon {horizon}")));
    }
    let mut shifts: Vec<(f64, f64, f64)> = (origin + 1..gamma_traj.len())
        .filter(|&i| gamma_traj.time(i) <= horizon * (1.0 + 1e-12))
        .map(|i| {
            (
                torus_distance(gamma_traj.phase(i), gamma_traj.phase(origin)),
                euclid_dist(gamma_traj.state(i), gamma_traj.state(origin)),
                gamma_traj.time(i),
            )
        })
        .collect();
    shifts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let grid = delta_grid();

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let first_bad = shifts.iter().find(|s| s.1 >= eps).map_or(f64::INFINITY, |s| s.0);
        let delta = grid.iter().copied().find(|&g| g <= first_bad);
        let delta = match delta {
            Some(d) => d,
            None => return Err(Error::ComparabilityFailure { eps, floor: DELTA_FLOOR }),
        };
        let witnesses: Vec<&(f64, f64, f64)> = shifts.iter().take_while(|s| s.0 < delta).collect();
        if witnesses.is_empty() {
            return Err(Error::ComparabilityFailure { eps, floor: DELTA_FLOOR });
        }
        let mut times: Vec<f64> = witnesses.iter().map(|s| s.2).collect();
        times.sort_by(f64::total_cmp);
        rows.push(ComparabilityRow {
            eps,
            delta,
            witness_count: witnesses.len(),
            max_state_shift_at_delta: witnesses.iter().map(|s| s.1).fold(0.0, f64::max),
            inclusion_length: inclusion_length(&times, horizon),
        });
    }
    Ok(ComparabilityTable { rows, horizon, sample_count: shifts.len(), delta_floor: DELTA_FLOOR })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachSequence {
    pub target: Vec<f64>,
    pub times: Vec<f64>,
    pub base_distances: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Diameter of the last `tail_len` states.
    pub tail_oscillation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongComparabilityReport {
    pub sequences: Vec<ApproachSequence>,
    pub tail_len: usize,
    pub tol: f64,
    pub horizon: f64,
    pub max_oscillation: f64,
    pub pass: bool,
}

/// Number of trailing sequence terms checked for the Cauchy property.
pub const STRONG_TAIL_LEN: usize = 3;

/// Builds, for random targets `q`, the record-setting near approaches
/// `t_1 < t_2 < …` of `σ(t, θ0)` to `q` along the trajectory and checks that the
/// states `u(t_n)` are Cauchy within `tol` over the last [`STRONG_TAIL_LEN`] terms.
/// A constant base uses `θ0` itself as the only target.
pub fn verify_strong_comparability(
    spec: &CocycleSpec,
    gamma_traj: &Trajectory,
    sequence_count: usize,
    seed: u64,
    horizon: f64,
    tol: f64,
) -> Result<StrongComparabilityReport> {
    check_dim(spec.dim(), gamma_traj.dim())?;
    check_dim(spec.base_dim(), gamma_traj.base_dim())?;
    if sequence_count == 0 || !(tol > 0.0) || !(horizon > 0.0) {
        return Err(invalid("need sequence_count >= 1, tol > 0 and horizon > 0"));
    }
    let origin = gamma_traj.index_of(0.0).ok_or_else(|| invalid("trajectory does not contain t = 0"))?;
    let theta0 = BasePoint::new(gamma_traj.phase(origin).to_vec());
    let idx: Vec<usize> = (origin..gamma_traj.len()).filter(|&i| gamma_traj.time(i) <= horizon * (1.0 + 1e-12)).collect();
    if idx.len() < 3 {
        return Err(invalid("trajectory has too few samples on [0, horizon]"));
    }
    let step = gamma_traj.time(idx[1]) - gamma_traj.time(idx[0]);
    let speed = spec.base().nu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut r = rng::seeded(seed);
    let targets: Vec<Vec<f64>> = if spec.base().is_constant() {
        vec![theta0.phases().to_vec()]
    } else {
        (0..sequence_count).map(|_| (0..spec.base_dim()).map(|_| r.gen::<f64>()).collect()).collect()
    };

    let mut buf = vec![0.0; spec.base_dim()];
    let mut dist_at = |t: f64, q: &[f64]| {
        spec.base().advance_into(theta0.phases(), t, &mut buf);
        torus_distance(&buf, q)
    };
    let mut sequences = Vec::with_capacity(targets.len());
    for q in targets {
        let b: Vec<f64> = idx.iter().map(|&i| torus_distance(gamma_traj.phase(i), &q)).collect();
        let mut best = f64::INFINITY;
        let (mut times, mut dists, mut states) = (Vec::new(), Vec::new(), Vec::new());
        for k in 1..idx.len() - 1 {
            if !(b[k] <= b[k - 1] && b[k] <= b[k + 1]) || b[k] - speed * step > best + 1e-9 {
                continue;
            }
            let (t, dist, u) = if spec.is_discrete() || speed == 0.0 {
                (gamma_traj.time(idx[k]), b[k], gamma_traj.state(idx[k]).to_vec())
            } else {
                let (mut lo, mut hi) = (gamma_traj.time(idx[k - 1]), gamma_traj.time(idx[k + 1]));
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if dist_at(m1, &q) <= dist_at(m2, &q) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t = 0.5 * (lo + hi);
                let start = idx[k - 1];
                let theta = BasePoint::new(gamma_traj.phase(start).to_vec());
                let u = spec.phi(t - gamma_traj.time(start), gamma_traj.state(start), &theta)?;
                (t, dist_at(t, &q), u)
            };
            if dist <= best + 1e-9 {
                best = best.min(dist);
                times.push(t);
                dists.push(dist);
                states.push(u);
            }
        }
        let tail_oscillation = if states.len() >= STRONG_TAIL_LEN {
            diameter(&states[states.len() - STRONG_TAIL_LEN..])
        } else {
            f64::INFINITY
        };
        sequences.push(ApproachSequence {
            target: q,
            times,
            base_distances: dists,
            states,
            tail_oscillation,
            pass: tail_oscillation < tol,
        });
    }
    let max_oscillation = sequences.iter().map(|s| s.tail_oscillation).fold(0.0, f64::max);
    let pass = sequences.iter().all(|s| s.pass);
    Ok(StrongComparabilityReport { sequences, tail_len: STRONG_TAIL_LEN, tol, horizon, max_oscillation, pass })
}

/// Like [`verify_strong_comparability`] but fails with
/// [`Error::StrongComparabilityFailure`] carrying the first failing sequence.
pub fn require_strong_comparability(
    spec: &CocycleSpec,
    gamma_traj: &Trajectory,
    sequence_count: usize,
    seed: u64,
    horizon: f64,
    tol: f64,
) -> Result<StrongComparabilityReport> {
    let report = verify_strong_comparability(spec, gamma_traj, sequence_count, seed, horizon, tol)?;
    if let Some(bad) = report.sequences.iter().find(|s| !s.pass) {
        return Err(Error::StrongComparabilityFailure {
            oscillation: bad.tail_oscillation,
            tol,
            target: bad.target.clone(),
            times: bad.times.clone(),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySettings {
    pub t_minus: f64,
    pub t_plus: f64,
    pub step: f64,
    pub pullback_depth: f64,
    pub landing_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub monotone: MonotoneCheck,
    pub dissipativity: DissipativityCheck,
    pub stability: StabilityCheck,
    pub fiber: FiberSettings,
    pub gamma: GammaSettings,
    pub attraction_horizon: f64,
    pub attraction_tol: f64,
    pub trajectory: TrajectorySettings,
    pub comparability_eps: Vec<f64>,
    /// Continue past failed hypothesis checks; the reports still record the failure.
    pub override_hypotheses: bool,
}

impl PipelineSettings {
    pub fn for_spec(spec: &CocycleSpec) -> Self {
        let discrete = spec.is_discrete();
        PipelineSettings {
            monotone: MonotoneCheck::default(),
            dissipativity: DissipativityCheck::for_spec(spec),
            stability: StabilityCheck::default(),
            fiber: FiberSettings::default(),
            gamma: GammaSettings::default(),
            attraction_horizon: 60.0,
            attraction_tol: 1e-4,
            trajectory: TrajectorySettings {
                t_minus: -10.0,
                t_plus: 1e4,
                step: if discrete { 1.0 } else { 0.05 },
                pullback_depth: if discrete { 60.0 } else { 40.0 },
                landing_tol: 1e-3,
            },
            comparability_eps: vec![0.1, 0.05, 0.01],
            override_hypotheses: false,
        }
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.monotone.seed = seed;
        self.dissipativity.seed = seed;
        self.stability.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistinguishedSolution {
    pub theta0: BasePoint,
    pub gamma0: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub beta0: Vec<f64>,
    pub delta0: Vec<f64>,
    pub gamma: LimitPointEstimate,
    pub delta: LimitPointEstimate,
    /// Distance from `γ0` to the fiber over `θ0`.
    pub membership_distance: f64,
    pub fiber: LevinsonFiber,
    pub monotonicity: MonotonicityReport,
    pub dissipativity: DissipativityEstimate,
    pub stability: StabilityReport,
    pub attraction_profile: AttractionProfile,
    pub comparability: ComparabilityTable,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Runs hypothesis checks, the Levinson fiber over `θ0`, `α`, `γ` (and `β`, `δ`),
/// the entire trajectory through `(γ, θ0)`, the attraction profile and the
/// comparability table. Fails closed on any hypothesis failure unless
/// `override_hypotheses` is set. Errors carry the stage they came from.
pub fn bronshtein_pipeline(spec: &CocycleSpec, theta0: &BasePoint, settings: &PipelineSettings) -> Result<DistinguishedSolution> {
    check_dim(spec.base_dim(), theta0.dim()).map_err(|e| e.at(Stage::Attractor))?;
    let enforce = !settings.override_hypotheses;

    let monotonicity = check_monotone(spec, &settings.monotone).map_err(|e| e.at(Stage::Monotonicity))?;
    if enforce && monotonicity.verdict != Verdict::Pass {
        let w = monotonicity.witness.as_ref();
        return Err(Error::Hypothesis(format!(
            "order not preserved: violation {:e} at t = {} (component {}), u = {:?}, v = {:?}, theta = {:?}",
            monotonicity.max_violation,
            w.map_or(f64::NAN, |w| w.t),
            w.map_or(0, |w| w.component + 1),
            w.map(|w| &w.u),
            w.map(|w| &w.v),
            w.map(|w| &w.theta),
        ))
        .at(Stage::Monotonicity));
    }

    let dissipativity = check_dissipative(spec, &settings.dissipativity).map_err(|e| e.at(Stage::Dissipativity))?;

    let stability = check_uniform_stability(spec, &settings.stability).map_err(|e| e.at(Stage::Stability))?;
    if enforce && stability.verdict != Verdict::Pass {
        let growth = stability.witnesses.first().map_or(f64::NAN, |w| w.growth_ratio);
        return Err(Error::Hypothesis(format!("not uniformly stable: separation grew by a factor {growth:e}"))
            .at(Stage::Stability));
    }

    let fiber = levinson_center(spec, &dissipativity, theta0, &settings.fiber).map_err(|e| e.at(Stage::Attractor))?;
    let alpha0 = alpha_point(spec, theta0, &fiber).map_err(|e| e.at(Stage::Alpha))?;
    let beta0 = beta_point(spec, theta0, &fiber).map_err(|e| e.at(Stage::Alpha))?;
    let gamma = gamma_point(spec, theta0, &alpha0, &settings.gamma).map_err(|e| e.at(Stage::Gamma))?;
    let delta = delta_point(spec, theta0, &beta0, &settings.gamma).map_err(|e| e.at(Stage::Delta))?;

    let membership_distance = point_to_set(&gamma.value, &fiber.cloud.points);
    let membership_tol = 2.0 * settings.fiber.resolution;
    if membership_distance > membership_tol {
        return Err(Error::MembershipFailure { distance: membership_distance, tol: membership_tol }.at(Stage::Gamma));
    }

    let ts = &settings.trajectory;
    let trajectory = spec
        .entire_trajectory_through(
            &SkewPoint::new(gamma.value.clone(), theta0.clone()),
            ts.t_minus,
            ts.t_plus,
            ts.step,
            ts.pullback_depth,
            ts.landing_tol,
        )
        .map_err(|e| e.at(Stage::Trajectory))?;

    let attraction_profile =
        verify_attraction(spec, &alpha0, &gamma.value, theta0, settings.attraction_horizon, settings.attraction_tol)
            .map_err(|e| e.at(Stage::Attraction))?;
    if !attraction_profile.pass {
        return Err(Error::AttractionFailure { tail_max: attraction_profile.tail_max, tol: settings.attraction_tol }
            .at(Stage::Attraction));
    }

    let comparability = verify_comparability(spec, &trajectory, &settings.comparability_eps, ts.t_plus)
        .map_err(|e| e.at(Stage::Comparability))?;

    Ok(DistinguishedSolution {
        theta0: theta0.clone(),
        gamma0: gamma.value.clone(),
        alpha0,
        beta0,
        delta0: delta.value.clone(),
        gamma,
        delta,
        membership_distance,
        fiber,
        monotonicity,
        dissipativity,
        stability,
        attraction_profile,
        comparability,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractor::DissipativityCheck;
    use crate::field::AffineField;
    use crate::order::FiberCloud;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn periodic() -> CocycleSpec {
        let base = BaseFlowSpec::continuous(vec![1.0 / TAU]).unwrap();
        CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![-1.0]).with_cos(vec![1.0]))).unwrap()
    }

    fn two_mode() -> CocycleSpec {
        let base = BaseFlowSpec::continuous(vec![1.0 / TAU, 2f64.sqrt() / TAU]).unwrap();
        let f = AffineField::new(1, 2, vec![-1.0]).with_cos(vec![1.0, 1.0]);
        CocycleSpec::ode(1, base, Arc::new(f)).unwrap()
    }

    fn fiber_of(points: Vec<Vec<f64>>, m: usize) -> LevinsonFiber {
        LevinsonFiber {
            cloud: FiberCloud::new(BasePoint::zeros(m), points, 1e-3),
            base: BasePoint::zeros(m),
            pullback_depths_used: vec![],
            residuals: vec![],
            hausdorff_residual: 0.0,
            absorbing_radius: 1.0,
        }
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(0, 3), vec![Vec::<usize>::new()]);
        assert_eq!(monomials(1, 3).len(), 4);
        assert_eq!(monomials(2, 3).len(), 10);
        assert_eq!(monomials(3, 2).len(), 10);
    }

    #[test]
    fn alpha_is_componentwise_min() {
        let spec = periodic();
        let th = BasePoint::zeros(1);
        assert_eq!(alpha_point(&spec, &th, &fiber_of(vec![vec![0.5]], 1)).unwrap(), vec![0.5]);
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let planar = CocycleSpec::ode(2, base, Arc::new(AffineField::new(2, 1, vec![-1.0, 0.0, 0.0, -1.0]))).unwrap();
        let f = fiber_of(vec![vec![1.0, 3.0], vec![2.0, 1.0]], 1);
        assert_eq!(alpha_point(&planar, &th, &f).unwrap(), vec![1.0, 1.0]);
        assert_eq!(beta_point(&planar, &th, &f).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(alpha_point(&planar, &th, &fiber_of(vec![], 1)), Err(Error::EmptyCloud)));
    }

    #[test]
    fn periodic_gamma_matches_closed_form() {
        let spec = periodic();
        let th = BasePoint::zeros(1);
        let diss = check_dissipative(&spec, &DissipativityCheck::for_spec(&spec)).unwrap();
        let fiber = levinson_center(&spec, &diss, &th, &FiberSettings::default()).unwrap();
        let alpha = alpha_point(&spec, &th, &fiber).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-5);
        let g = gamma_point(&spec, &th, &alpha, &GammaSettings::default()).unwrap();
        assert!((g.value[0] - 0.5).abs() < 1e-5, "{:?}", g.value);
        assert!(g.tail_diameter < 1e-6 && g.raw_tail_diameter < 1e-6);
    }

    #[test]
    fn two_mode_gamma_matches_closed_form() {
        let spec = two_mode();
        let th = BasePoint::zeros(2);
        let g = gamma_point(&spec, &th, &[0.0], &GammaSettings::default()).unwrap();
        assert!((g.value[0] - 5.0 / 6.0).abs() < 1e-4, "{:?} (diam {})", g.value, g.tail_diameter);
        let d = delta_point(&spec, &th, &[3.0], &GammaSettings::default()).unwrap();
        assert!((d.value[0] - g.value[0]).abs() < 1e-5);
        // order sandwich at every recorded return
        for (a, b) in g.tail.iter().zip(&d.tail) {
            assert_eq!(a.t, b.t);
            assert!(a.u[0] <= b.u[0] + 1e-7);
        }
    }

    #[test]
    fn autonomous_fixed_point_gamma() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let spec =
            CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![-1.0]).with_offset(vec![0.5]))).unwrap();
        let s = GammaSettings { horizon: Some(100.0), ..GammaSettings::default() };
        let g = gamma_point(&spec, &BasePoint::zeros(1), &[2.0], &s).unwrap();
        assert!((g.value[0] - 0.5).abs() < 1e-9);
        assert_eq!(g.degree, 0);
    }

    #[test]
    fn short_horizon_is_a_singleton_violation() {
        let spec = periodic();
        let s = GammaSettings { horizon: Some(4.0 * TAU + 0.1), transient_fraction: 0.0, ..GammaSettings::default() };
        let err = gamma_point(&spec, &BasePoint::zeros(1), &[5.0], &s).unwrap_err();
        assert!(matches!(err, Error::SingletonViolation { .. }), "{err}");
        let none = GammaSettings { horizon: Some(1.0), ..GammaSettings::default() };
        assert!(matches!(gamma_point(&spec, &BasePoint::zeros(1), &[0.0], &none), Err(Error::NoReturns { .. })));
    }

    #[test]
    fn attraction_profile_is_exponential() {
        let spec = periodic();
        let th = BasePoint::zeros(1);
        let p = verify_attraction(&spec, &[0.2], &[0.5], &th, 60.0, 1e-4).unwrap();
        assert!(p.pass);
        for (t, v) in p.times.iter().zip(&p.distances) {
            assert!((v - 0.3 * (-t).exp()).abs() < 1e-7, "t={t}");
        }
        let same = verify_attraction(&spec, &[0.5], &[0.5], &th, 10.0, 1e-4).unwrap();
        assert!(same.distances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn planar_attraction_spectral_bound() {
        let base = BaseFlowSpec::continuous(vec![1.0 / TAU, 2f64.sqrt() / TAU]).unwrap();
        let f = AffineField::new(2, 2, vec![-2.0, 1.0, 1.0, -2.0]).with_cos(vec![1.0, 0.0, 0.0, 1.0]);
        let spec = CocycleSpec::ode(2, base, Arc::new(f)).unwrap();
        let a = [-1.0, -1.0];
        let g = [1.0, 0.5];
        let p = verify_attraction(&spec, &a, &g, &BasePoint::zeros(2), 60.0, 1e-4).unwrap();
        let d0 = euclid_dist(&a, &g);
        for (t, v) in p.times.iter().zip(&p.distances) {
            // symmetric A with top eigenvalue -1
            assert!(*v <= d0 * (-t).exp() + 1e-8);
            if *t >= 30.0 {
                assert!(*v < 1e-4);
            }
        }
        assert!(p.pass);
    }

    fn periodic_trajectory(horizon: f64) -> (CocycleSpec, Trajectory) {
        let spec = periodic();
        let tr = spec
            .entire_trajectory_through(&SkewPoint::new(vec![0.5], BasePoint::zeros(1)), -1.0, horizon, 0.01, 40.0, 1e-6)
            .unwrap();
        (spec, tr)
    }

    #[test]
    fn periodic_comparability() {
        let (spec, tr) = periodic_trajectory(200.0);
        let table = verify_comparability(&spec, &tr, &[0.01, 10.0], 200.0).unwrap();
        let row = &table.rows[0];
        assert!(row.delta > 0.0 && row.witness_count >= 1);
        assert!(row.max_state_shift_at_delta < 0.01);
        // witnesses sit next to multiples of 2π
        assert!(row.inclusion_length < TAU + 1.0);
        assert_eq!(table.rows[1].delta, 0.5);
        assert_eq!(table.rows[1].witness_count, table.sample_count);
    }

    #[test]
    fn comparability_fails_without_returns() {
        let (spec, tr) = periodic_trajectory(3.0);
        assert!(matches!(
            verify_comparability(&spec, &tr, &[1e-3], 3.0),
            Err(Error::ComparabilityFailure { .. })
        ));
    }

    #[test]
    fn periodic_strong_comparability() {
        let (spec, tr) = periodic_trajectory(200.0);
        let rep = verify_strong_comparability(&spec, &tr, 1, 3, 200.0, 1e-6).unwrap();
        assert!(rep.pass, "{}", rep.max_oscillation);
        let seq = &rep.sequences[0];
        let t0 = seq.times[0];
        for (k, t) in seq.times.iter().enumerate() {
            assert!(((t - t0) / TAU - k as f64).abs() < 1e-6);
        }
        let zero = verify_strong_comparability(&spec, &tr, 1, 0, 200.0, 1e-6).unwrap();
        assert!(zero.pass);
    }

    #[test]
    fn constant_base_strong_comparability() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let spec =
            CocycleSpec::ode(1, base, Arc::new(AffineField::new(1, 1, vec![-1.0]).with_offset(vec![0.5]))).unwrap();
        let tr = spec
            .entire_trajectory_through(&SkewPoint::new(vec![0.5], BasePoint::zeros(1)), -1.0, 50.0, 0.1, 10.0, 1e-6)
            .unwrap();
        let rep = require_strong_comparability(&spec, &tr, 5, 0, 50.0, 1e-9).unwrap();
        assert_eq!(rep.sequences.len(), 1);
    }

    #[test]
    fn delta_grid_shape() {
        let g = delta_grid();
        assert_eq!(g[0], 0.5);
        assert!((g[10] - 0.05).abs() < 1e-15);
        assert!(*g.last().unwrap() >= DELTA_FLOOR * (1.0 - 1e-12));
        assert_eq!(g.len(), 57);
    }
}
