//! Componentwise order from the cone `ℝ^d_+`, fiber bounds, and sampled
//! monotonicity certificates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base_flow::BasePoint;
use crate::cocycle::{uniform_grid, CocycleSpec, SystemKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::rng;

/// Violations up to this size are attributed to integration error.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// `u ≤ v` iff `v - u ∈ ℝ^d_+`. Exact comparison, no slack.
pub fn leq(u: &[f64], v: &[f64]) -> Result<bool> {
    check_dim(u.len(), v.len())?;
    Ok(u.iter().zip(v).all(|(a, b)| b - a >= 0.0))
}

/// Finite sample of a fiber over one base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberCloud {
    pub base: BasePoint,
    pub points: Vec<Vec<f64>>,
    /// Clustering radius used to build the cloud.
    pub resolution: f64,
}

impl FiberCloud {
    pub fn new(base: BasePoint, points: Vec<Vec<f64>>, resolution: f64) -> Self {
        FiberCloud { base, points, resolution }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }
}

/// Componentwise minimum `α(K)`: the greatest lower bound of the cloud.
pub fn fiber_inf(c: &FiberCloud) -> Result<Vec<f64>> {
    fold_components(c, f64::min)
}

/// Componentwise maximum `β(K)`: the least upper bound of the cloud.
pub fn fiber_sup(c: &FiberCloud) -> Result<Vec<f64>> {
    fold_components(c, f64::max)
}

fn fold_components(c: &FiberCloud, op: fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let first = c.points.first().ok_or(Error::EmptyCloud)?;
    let mut acc = first.clone();
    for p in &c.points[1..] {
        check_dim(acc.len(), p.len())?;
        for (a, &x) in acc.iter_mut().zip(p) {
            *a = op(*a, x);
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderWitness {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Time at which the order broke (0 for field-level checks).
    pub t: f64,
    /// 0-based component carrying the violation.
    pub component: usize,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub verdict: Verdict,
    pub max_violation: f64,
    pub witness: Option<OrderWitness>,
    pub pair_count: usize,
    pub seed: u64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCheck {
    pub pair_count: usize,
    /// Observation times; `None` uses `0..=10` by `0.5` (ODE) or `0..=20` (difference).
    pub t_grid: Option<Vec<f64>>,
    pub seed: u64,
    /// Lower points are drawn from `[-half_width, half_width]^d`.
    pub half_width: f64,
    /// Upper point is `u + w` with `w_i ∈ [0, perturbation]`.
    pub perturbation: f64,
}

impl Default for MonotoneCheck {
    fn default() -> Self {
        MonotoneCheck { pair_count: 100, t_grid: None, seed: 0, half_width: 2.0, perturbation: 1.0 }
    }
}

impl MonotoneCheck {
    fn grid(&self, spec: &CocycleSpec) -> Vec<f64> {
        match &self.t_grid {
            Some(g) => g.clone(),
            None if spec.is_discrete() => uniform_grid(20.0, 1.0),
            None => uniform_grid(10.0, 0.5),
        }
    }
}

fn ordered_pair(rng: &mut rng::SeededRng, d: usize, half_width: f64, perturbation: f64) -> (Vec<f64>, Vec<f64>) {
    let u = rng::in_box(rng, d, half_width);
    let keep = rng.gen_range(0..d);
    let w: Vec<f64> = (0..d)
        .map(|i| if i == keep || rng.gen_bool(0.5) { rng.gen::<f64>() * perturbation } else { 0.0 })
        .collect();
    let v = u.iter().zip(&w).map(|(a, b)| a + b).collect();
    (u, v)
}

/// Draws ordered pairs `u ≤ v` and random base points and reports the largest
/// componentwise violation of `φ(t,u,θ) ≤ φ(t,v,θ)` over the time grid.
/// Both members of a pair share one step sequence.
pub fn check_monotone(spec: &CocycleSpec, check: &MonotoneCheck) -> Result<MonotonicityReport> {
    if check.pair_count == 0 {
        return Err(invalid("pair_count must be at least 1"));
    }
    let d = spec.dim();
    let grid = check.grid(spec);
    let mut r = rng::seeded(check.seed);
    let samples: Vec<_> = (0..check.pair_count)
        .map(|_| {
            let theta = rng::base_point(&mut r, spec.base_dim());
            let (u, v) = ordered_pair(&mut r, d, check.half_width, check.perturbation);
            (theta, u, v)
        })
        .collect();

    let results: Vec<Result<Option<OrderWitness>>> = samples
        .par_iter()
        .map(|(theta, u, v)| {
            let y0 = [u.as_slice(), v.as_slice()].concat();
            let mut worst: Option<OrderWitness> = None;
            spec.flow_ensemble(&y0, theta.phases(), &grid, |_, t, y| {
                for i in 0..d {
                    let viol = y[i] - y[d + i];
                    if viol > worst.as_ref().map_or(0.0, |w| w.violation) {
                        worst = Some(OrderWitness {
                            theta: theta.phases().to_vec(),
                            u: u.clone(),
                            v: v.clone(),
                            t,
                            component: i,
                            violation: viol,
                        });
                    }
                }
            })?;
            Ok(worst)
        })
        .collect();

    let mut witness: Option<OrderWitness> = None;
    for res in results {
        if let Some(w) = res? {
            if w.violation > witness.as_ref().map_or(0.0, |x| x.violation) {
                witness = Some(w);
            }
        }
    }
    let max_violation = witness.as_ref().map_or(0.0, |w| w.violation);
    let verdict = if max_violation <= MONOTONE_SLACK { Verdict::Pass } else { Verdict::Fail };
    Ok(MonotonicityReport {
        verdict,
        max_violation,
        witness: if verdict.passed() { None } else { witness },
        pair_count: check.pair_count,
        seed: check.seed,
        slack: MONOTONE_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasimonotoneCriterion {
    /// ODE: `u ≤ v`, `u_i = v_i` ⇒ `F_i(θ,u) ≤ F_i(θ,v)` (coordinate functionals span the dual cone).
    CoordinateFunctionals,
    /// Difference: `u ≤ v` ⇒ `G(θ,u) ≤ G(θ,v)`.
    MapOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasimonotonicityReport {
    pub verdict: Verdict,
    pub criterion: QuasimonotoneCriterion,
    pub max_violation: f64,
    pub witness: Option<OrderWitness>,
    pub sample_count: usize,
    pub seed: u64,
    /// True when the check holds trivially (scalar ODE).
    pub vacuous: bool,
}

/// Field-level order check: quasimonotonicity for ODE fields, order
/// preservation of the one-step map for difference fields.
pub fn check_quasimonotone(spec: &CocycleSpec, sample_count: usize, seed: u64) -> Result<QuasimonotonicityReport> {
    if sample_count == 0 {
        return Err(invalid("sample_count must be at least 1"));
    }
    let d = spec.dim();
    let criterion = match spec.kind() {
        SystemKind::Ode => QuasimonotoneCriterion::CoordinateFunctionals,
        SystemKind::Difference => QuasimonotoneCriterion::MapOrder,
    };
    let vacuous = criterion == QuasimonotoneCriterion::CoordinateFunctionals && d == 1;
    let mut r = rng::seeded(seed);
    let mut witness: Option<OrderWitness> = None;
    if !vacuous {
        for _ in 0..sample_count {
            let theta = rng::base_point(&mut r, spec.base_dim());
            let (u, mut v) = ordered_pair(&mut r, d, 2.0, 1.0);
            let pinned = match criterion {
                QuasimonotoneCriterion::CoordinateFunctionals => {
                    let i = r.gen_range(0..d);
                    v[i] = u[i];
                    Some(i)
                }
                QuasimonotoneCriterion::MapOrder => None,
            };
            let fu = spec.field_at(theta.phases(), &u);
            let fv = spec.field_at(theta.phases(), &v);
            let comps: Vec<usize> = pinned.map_or_else(|| (0..d).collect(), |i| vec![i]);
            for i in comps {
                let viol = fu[i] - fv[i];
                if viol > witness.as_ref().map_or(0.0, |w| w.violation) {
                    witness = Some(OrderWitness {
                        theta: theta.phases().to_vec(),
                        u: u.clone(),
                        v: v.clone(),
                        t: 0.0,
                        component: i,
                        violation: viol,
                    });
                }
            }
        }
    }
    let max_violation = witness.as_ref().map_or(0.0, |w| w.violation);
    let verdict = if max_violation <= MONOTONE_SLACK { Verdict::Pass } else { Verdict::Fail };
    Ok(QuasimonotonicityReport {
        verdict,
        criterion,
        max_violation,
        witness: if verdict.passed() { None } else { witness },
        sample_count,
        seed,
        vacuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_flow::BaseFlowSpec;
    use crate::field::{AffineField, FnField};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn planar(a: [f64; 4]) -> CocycleSpec {
        let base = BaseFlowSpec::continuous(vec![0.159, 0.225]).unwrap();
        let f = AffineField::new(2, 2, a.to_vec()).with_cos(vec![1.0, 0.0, 0.0, 1.0]);
        CocycleSpec::ode(2, base, Arc::new(f)).unwrap()
    }

    #[test]
    fn leq_examples() {
        assert!(leq(&[1.0, 2.0], &[1.0, 3.0]).unwrap());
        assert!(!leq(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(!leq(&[2.0, 1.0], &[1.0, 2.0]).unwrap());
        assert!(leq(&[0.3, -1.0], &[0.3, -1.0]).unwrap());
        assert!(leq(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn inf_sup_examples() {
        let c = FiberCloud::new(BasePoint::zeros(1), vec![vec![1.0, 3.0], vec![2.0, 1.0]], 0.0);
        assert_eq!(fiber_inf(&c).unwrap(), vec![1.0, 1.0]);
        assert_eq!(fiber_sup(&c).unwrap(), vec![2.0, 3.0]);
        let single = FiberCloud::new(BasePoint::zeros(1), vec![vec![0.7, -0.2]], 0.0);
        assert_eq!(fiber_inf(&single).unwrap(), vec![0.7, -0.2]);
        assert_eq!(fiber_sup(&single).unwrap(), vec![0.7, -0.2]);
        let scalar = FiberCloud::new(BasePoint::zeros(1), vec![vec![0.2], vec![-0.4], vec![0.9]], 0.0);
        assert_eq!(fiber_inf(&scalar).unwrap(), vec![-0.4]);
        assert_eq!(fiber_sup(&scalar).unwrap(), vec![0.9]);
        let empty = FiberCloud::new(BasePoint::zeros(1), vec![], 0.0);
        assert!(matches!(fiber_inf(&empty), Err(Error::EmptyCloud)));
    }

    #[test]
    fn forced_linear_scalar_is_monotone() {
        let base = BaseFlowSpec::continuous(vec![0.159]).unwrap();
        let f = AffineField::new(1, 1, vec![-1.0]).with_cos(vec![1.0]);
        let spec = CocycleSpec::ode(1, base, Arc::new(f)).unwrap();
        let rep = check_monotone(&spec, &MonotoneCheck { pair_count: 50, ..Default::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(rep.max_violation <= 1e-9);
    }

    #[test]
    fn cubic_scalar_is_monotone() {
        let base = BaseFlowSpec::continuous(vec![0.0]).unwrap();
        let f = FnField::new("-u^3", |_: &[f64], u: &[f64], o: &mut [f64]| o[0] = -u[0] * u[0] * u[0]);
        let spec = CocycleSpec::ode(1, base, Arc::new(f)).unwrap();
        let rep = check_monotone(&spec, &MonotoneCheck { pair_count: 50, seed: 3, ..Default::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn competitive_planar_fails_with_witness() {
        let spec = planar([-1.0, -1.0, -1.0, -1.0]);
        let rep = check_monotone(&spec, &MonotoneCheck { pair_count: 20, ..Default::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        let w = rep.witness.unwrap();
        assert!(w.violation > 1e-3);
        assert!(leq(&w.u, &w.v).unwrap());
        // replay the witness independently
        let th = BasePoint::new(w.theta.clone());
        let pu = spec.phi(w.t, &w.u, &th).unwrap();
        let pv = spec.phi(w.t, &w.v, &th).unwrap();
        assert!(pu[w.component] - pv[w.component] > 0.5 * w.violation);
    }

    #[test]
    fn quasimonotone_metzler_passes_and_negative_offdiagonal_fails() {
        let coop = check_quasimonotone(&planar([-2.0, 1.0, 1.0, -2.0]), 1000, 1).unwrap();
        assert_eq!(coop.verdict, Verdict::Pass);
        let comp = check_quasimonotone(&planar([-2.0, -1.0, -1.0, -2.0]), 1000, 1).unwrap();
        assert_eq!(comp.verdict, Verdict::Fail);
        let w = comp.witness.unwrap();
        assert_eq!(w.u[w.component], w.v[w.component]);
        // brute force: the offending component really decreases
        let fu = planar([-2.0, -1.0, -1.0, -2.0]).field_at(&w.theta, &w.u);
        let fv = planar([-2.0, -1.0, -1.0, -2.0]).field_at(&w.theta, &w.v);
        assert!(fu[w.component] > fv[w.component]);
    }

    #[test]
    fn quasimonotone_scalar_is_vacuous() {
        let base = BaseFlowSpec::continuous(vec![0.1]).unwrap();
        let f = FnField::new("odd", |_: &[f64], u: &[f64], o: &mut [f64]| o[0] = -(u[0]).sin() * 5.0);
        let spec = CocycleSpec::ode(1, base, Arc::new(f)).unwrap();
        let rep = check_quasimonotone(&spec, 100, 0).unwrap();
        assert!(rep.vacuous);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn nondecreasing_map_is_monotone_exactly() {
        let base = BaseFlowSpec::discrete(vec![0.618]).unwrap();
        let f = AffineField::new(2, 1, vec![0.3, 0.2, 0.1, 0.4]).with_cos(vec![1.0, -1.0]);
        let spec = CocycleSpec::difference(2, base, Arc::new(f)).unwrap();
        let q = check_quasimonotone(&spec, 500, 5).unwrap();
        assert_eq!(q.criterion, QuasimonotoneCriterion::MapOrder);
        assert!(q.verdict.passed());
        let m = check_monotone(&spec, &MonotoneCheck::default()).unwrap();
        assert!(m.verdict.passed());
    }

    proptest! {
        #[test]
        fn cloud_points_sit_in_order_interval(points in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 1..20)) {
            let c = FiberCloud::new(BasePoint::zeros(1), points, 0.0);
            let lo = fiber_inf(&c).unwrap();
            let hi = fiber_sup(&c).unwrap();
            for p in &c.points {
                prop_assert!(leq(&lo, p).unwrap());
                prop_assert!(leq(p, &hi).unwrap());
            }
        }
    }
}
