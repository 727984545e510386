//! Driving system: a linear rotation on the m-torus.
//!
//! A quasi-periodic right-hand side `f(t, u) = F(θ0 + tν, u)` has as hull the
//! closure of the translates of `f`, which is the orbit closure of `θ0` under
//! the rotation `θ ↦ θ + tν (mod 1)`. When `(1, ν)` is rationally independent
//! that closure is the whole torus and the rotation is minimal and Bohr almost
//! periodic.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Whether the base (and therefore the cocycle) runs in continuous or integer time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

/// Point of the torus `[0,1)^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasePoint(Vec<f64>);

impl BasePoint {
    /// Builds a point, reducing every phase mod 1.
    pub fn new(phases: Vec<f64>) -> Self {
        BasePoint(phases.into_iter().map(wrap_unit).collect())
    }

    pub fn zeros(m: usize) -> Self {
        BasePoint(vec![0.0; m])
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for BasePoint {
    fn from(v: Vec<f64>) -> Self {
        BasePoint::new(v)
    }
}

/// Reduces `x` into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid of a tiny negative number rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x` in `[-1/2, 1/2)`.
pub fn wrap_signed(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

/// Rotation flow on the torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseFlowSpec {
    /// Rotation rates in cycles per unit time (per step in discrete time).
    pub nu: Vec<f64>,
    pub time_kind: TimeKind,
    /// Set by the scenario author when `(1, nu)` is known to be rationally independent.
    #[serde(default)]
    pub rational_independence_declared: bool,
}

impl BaseFlowSpec {
    pub fn new(nu: Vec<f64>, time_kind: TimeKind) -> Result<Self> {
        let spec = BaseFlowSpec { nu, time_kind, rational_independence_declared: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn continuous(nu: Vec<f64>) -> Result<Self> {
        Self::new(nu, TimeKind::Continuous)
    }

    pub fn discrete(nu: Vec<f64>) -> Result<Self> {
        Self::new(nu, TimeKind::Discrete)
    }

    pub fn declare_independent(mut self) -> Self {
        self.rational_independence_declared = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu.is_empty() {
            return Err(invalid("base flow needs at least one rotation rate"));
        }
        if self.nu.iter().any(|v| !v.is_finite()) {
            return Err(invalid("rotation rates must be finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    /// True when every rate is zero, i.e. the driven system is autonomous.
    pub fn is_constant(&self) -> bool {
        self.nu.iter().all(|&v| v == 0.0)
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(invalid(format!("time must be finite, got {t}")));
        }
        if self.time_kind == TimeKind::Discrete && t.fract() != 0.0 {
            return Err(invalid(format!("discrete base flow requires integer time, got {t}")));
        }
        Ok(())
    }

    /// `σ(t, θ) = θ + t·ν (mod 1)`.
    pub fn advance(&self, theta: &BasePoint, t: f64) -> Result<BasePoint> {
        check_dim(self.dim(), theta.dim())?;
        self.check_time(t)?;
        let mut out = vec![0.0; self.dim()];
        self.advance_into(theta.phases(), t, &mut out);
        Ok(BasePoint(out))
    }

    /// Unchecked `advance` writing into a caller buffer; used in integrator inner loops.
    #[inline]
    pub fn advance_into(&self, theta: &[f64], t: f64, out: &mut [f64]) {
        for ((o, &th), &nu) in out.iter_mut().zip(theta).zip(&self.nu) {
            *o = wrap_unit(th + wrap_unit(t * nu));
        }
    }

    /// Sorted grid times `τ = k·step ∈ (0, horizon]` at which the base returns
    /// within `eps` of `theta`.
    ///
    /// The rotation is an isometry, so a return of `theta` is an almost period
    /// of every point of its orbit: these are almost periods of the base motion.
    pub fn almost_periods(&self, theta: &BasePoint, eps: f64, horizon: f64, step: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0) || !(horizon > 0.0) || !(step > 0.0) {
            return Err(invalid("eps, horizon and step must be positive"));
        }
        check_dim(self.dim(), theta.dim())?;
        self.check_time(step)?;
        let n = (horizon / step + 1e-9).floor() as usize;
        // the torus diameter is 1/2, so eps >= 1/2 admits every time
        let vacuous = eps >= 0.5;
        let mut buf = vec![0.0; self.dim()];
        let mut out = Vec::new();
        for k in 1..=n {
            let tau = k as f64 * step;
            self.advance_into(theta.phases(), tau, &mut buf);
            if vacuous || torus_distance(&buf, theta.phases()) < eps {
                out.push(tau);
            }
        }
        Ok(out)
    }
}

/// Max over coordinates of the circle distance `min(|a-b|, 1-|a-b|)`.
pub fn base_distance(a: &BasePoint, b: &BasePoint) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(torus_distance(a.phases(), b.phases()))
}

#[inline]
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| wrap_signed(x - y).abs())
        .fold(0.0, f64::max)
}

/// Signed per-coordinate displacement of `a` relative to `b`, each in `[-1/2, 1/2)`.
pub fn displacement(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| wrap_signed(x - y)).collect()
}

/// Largest gap in a sorted time set on `[0, horizon]`, counting the gaps
/// `0 → first` and `last → horizon`. This is the empirical inclusion length
/// `L(ε)`; an empty set gives `f64::INFINITY`.
pub fn inclusion_length(taus: &[f64], horizon: f64) -> f64 {
    let (first, last) = match (taus.first(), taus.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return f64::INFINITY,
    };
    let inner = taus.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    inner.max(first).max(horizon - last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(nu: &[f64]) -> BaseFlowSpec {
        BaseFlowSpec::continuous(nu.to_vec()).unwrap()
    }

    #[test]
    fn advance_basic() {
        let s = spec(&[0.5]);
        let th = BasePoint::new(vec![0.25]);
        assert_abs_diff_eq!(s.advance(&th, 1.0).unwrap().phases()[0], 0.75, epsilon = 1e-15);
        assert_eq!(s.advance(&th, 0.0).unwrap(), th);
    }

    #[test]
    fn full_turn_returns_home() {
        let s = spec(&[1.0 / (2.0 * std::f64::consts::PI)]);
        let th = BasePoint::zeros(1);
        let back = s.advance(&th, 2.0 * std::f64::consts::PI).unwrap();
        assert!(base_distance(&back, &th).unwrap() < 1e-12);
    }

    #[test]
    fn discrete_rejects_fractional_time() {
        let s = BaseFlowSpec::discrete(vec![0.3]).unwrap();
        assert!(s.advance(&BasePoint::zeros(1), 1.5).is_err());
        assert!(s.advance(&BasePoint::zeros(1), -3.0).is_ok());
    }

    #[test]
    fn distance_examples() {
        let d = |a: Vec<f64>, b: Vec<f64>| base_distance(&BasePoint::new(a), &BasePoint::new(b)).unwrap();
        assert_abs_diff_eq!(d(vec![0.1], vec![0.9]), 0.2, epsilon = 1e-15);
        assert_eq!(d(vec![0.3, 0.7], vec![0.3, 0.7]), 0.0);
        assert_abs_diff_eq!(d(vec![0.0, 0.5], vec![0.25, 0.5]), 0.25, epsilon = 1e-15);
        assert!(base_distance(&BasePoint::zeros(1), &BasePoint::zeros(2)).is_err());
    }

    #[test]
    fn almost_periods_of_period_two_rotation() {
        let s = spec(&[0.5]);
        let taus = s.almost_periods(&BasePoint::zeros(1), 0.01, 10.0, 1.0).unwrap();
        assert_eq!(taus, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        let all = s.almost_periods(&BasePoint::zeros(1), 0.5, 10.0, 1.0).unwrap();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn almost_periods_irrational_rotation_brute_force() {
        let nu = 2f64.sqrt() / 2.0;
        let s = spec(&[nu]);
        let th = BasePoint::new(vec![0.1]);
        let taus = s.almost_periods(&th, 0.05, 100.0, 1.0).unwrap();
        assert!(!taus.is_empty());
        // independent check: fractional part of k·nu near an integer
        for &tau in &taus {
            let f = (tau * nu).fract();
            assert!(f.min(1.0 - f) < 0.05, "tau {tau}");
        }
        let expected = (1..=100).filter(|k| {
            let f = (*k as f64 * nu).fract();
            f.min(1.0 - f) < 0.05
        });
        assert_eq!(taus.len(), expected.count());
        assert!(inclusion_length(&taus, 100.0) < 50.0);
    }

    #[test]
    fn inclusion_length_examples() {
        assert_eq!(inclusion_length(&[2.0, 4.0, 6.0, 8.0], 10.0), 2.0);
        assert_eq!(inclusion_length(&[], 10.0), f64::INFINITY);
        assert_eq!(inclusion_length(&[1.0, 5.0, 6.0], 10.0), 4.0);
    }

    #[test]
    fn minimal_rotation_visits_targets() {
        let s = spec(&[1.0 / (2.0 * std::f64::consts::PI), 2f64.sqrt() / (2.0 * std::f64::consts::PI)]);
        let start = BasePoint::zeros(2);
        let targets = [[0.3, 0.8], [0.9, 0.1], [0.5, 0.5]];
        let mut buf = vec![0.0; 2];
        for target in targets {
            let hit = (0..200_000).any(|k| {
                s.advance_into(start.phases(), k as f64 * 0.01, &mut buf);
                torus_distance(&buf, &target) < 0.05
            });
            assert!(hit, "target {target:?} not reached");
        }
    }

    proptest! {
        #[test]
        fn flow_axioms(th in prop::collection::vec(0.0..1.0f64, 2), s in -50.0..50.0f64, t in -50.0..50.0f64) {
            let f = spec(&[0.123, 0.7073]);
            let th = BasePoint::new(th);
            let a = f.advance(&th, s + t).unwrap();
            let b = f.advance(&f.advance(&th, s).unwrap(), t).unwrap();
            prop_assert!(base_distance(&a, &b).unwrap() < 1e-12);
        }

        #[test]
        fn rotation_is_isometry(a in prop::collection::vec(0.0..1.0f64, 2),
                                b in prop::collection::vec(0.0..1.0f64, 2),
                                t in -100.0..100.0f64) {
            let f = spec(&[0.31, 0.2]);
            let (a, b) = (BasePoint::new(a), BasePoint::new(b));
            let d0 = base_distance(&a, &b).unwrap();
            let d1 = base_distance(&f.advance(&a, t).unwrap(), &f.advance(&b, t).unwrap()).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn metric_axioms(a in prop::collection::vec(-3.0..3.0f64, 3),
                         b in prop::collection::vec(-3.0..3.0f64, 3),
                         c in prop::collection::vec(-3.0..3.0f64, 3)) {
            let (a, b, c) = (BasePoint::new(a), BasePoint::new(b), BasePoint::new(c));
            let ab = base_distance(&a, &b).unwrap();
            prop_assert!((ab - base_distance(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!(ab <= 0.5);
            prop_assert!(ab <= base_distance(&a, &c).unwrap() + base_distance(&c, &b).unwrap() + 1e-15);
        }
    }
}
