//! The cocycle `φ(t, u, θ)` generated by `u' = F(σ(t,θ), u)` or
//! `u_{n+1} = G(σ(n,θ), u_n)`, and the skew-product flow `π = (φ, σ)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base_flow::{BaseFlowSpec, BasePoint, TimeKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::field::VectorField;
use crate::integrator::{norm_inf, IntegratorSettings, Stepper, OVERFLOW_GUARD};
use crate::trajectory::{euclid_dist, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Ode,
    Difference,
}

/// Point `x = (u, θ)` of the skew-product phase space `ℝ^d × T^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewPoint {
    pub u: Vec<f64>,
    pub theta: BasePoint,
}

impl SkewPoint {
    pub fn new(u: Vec<f64>, theta: BasePoint) -> Self {
        SkewPoint { u, theta }
    }
}

#[derive(Clone)]
pub struct CocycleSpec {
    kind: SystemKind,
    dim: usize,
    field: Arc<dyn VectorField>,
    base: BaseFlowSpec,
    integrator: IntegratorSettings,
}

impl fmt::Debug for CocycleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CocycleSpec")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("field", &self.field)
            .field("base", &self.base)
            .field("integrator", &self.integrator)
            .finish()
    }
}

impl CocycleSpec {
    pub fn new(kind: SystemKind, dim: usize, base: BaseFlowSpec, field: Arc<dyn VectorField>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        base.validate()?;
        let expected = match kind {
            SystemKind::Ode => TimeKind::Continuous,
            SystemKind::Difference => TimeKind::Discrete,
        };
        if base.time_kind != expected {
            return Err(invalid(format!("{kind:?} cocycle needs a {expected:?} base flow")));
        }
        Ok(CocycleSpec { kind, dim, field, base, integrator: IntegratorSettings::default() })
    }

    pub fn ode(dim: usize, base: BaseFlowSpec, field: Arc<dyn VectorField>) -> Result<Self> {
        Self::new(SystemKind::Ode, dim, base, field)
    }

    pub fn difference(dim: usize, base: BaseFlowSpec, field: Arc<dyn VectorField>) -> Result<Self> {
        Self::new(SystemKind::Difference, dim, base, field)
    }

    pub fn with_integrator(mut self, integrator: IntegratorSettings) -> Result<Self> {
        integrator.validate()?;
        self.integrator = integrator;
        Ok(self)
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &BaseFlowSpec {
        &self.base
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn integrator(&self) -> IntegratorSettings {
        self.integrator
    }

    pub fn is_discrete(&self) -> bool {
        self.kind == SystemKind::Difference
    }

    /// Evaluates `F(θ, u)` directly.
    pub fn field_at(&self, theta: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.field.eval(theta, u, &mut out);
        out
    }

    /// `σ(t, θ)`.
    pub fn advance(&self, theta: &BasePoint, t: f64) -> Result<BasePoint> {
        self.base.advance(theta, t)
    }

    /// `φ(t, u, θ)`: value at time `t` of the solution started at `u` along base point `θ`.
    pub fn phi(&self, t: f64, u: &[f64], theta: &BasePoint) -> Result<Vec<f64>> {
        self.check_point(u, theta)?;
        if !(t >= 0.0) {
            return Err(invalid(format!("cocycle time must be nonnegative, got {t}")));
        }
        self.base.check_time(t)?;
        if t == 0.0 {
            return Ok(u.to_vec());
        }
        let mut out = Vec::new();
        self.flow_ensemble(u, theta.phases(), &[t], |_, _, y| out = y.to_vec())?;
        Ok(out)
    }

    /// `π(t, (u, θ)) = (φ(t, u, θ), σ(t, θ))`.
    pub fn skew_advance(&self, t: f64, x: &SkewPoint) -> Result<SkewPoint> {
        let u = self.phi(t, &x.u, &x.theta)?;
        Ok(SkewPoint { u, theta: self.base.advance(&x.theta, t)? })
    }

    /// Samples the motion of `x0` at every time of `grid` in one continued integration.
    pub fn sample_trajectory(&self, x0: &SkewPoint, grid: &[f64]) -> Result<Trajectory> {
        self.check_point(&x0.u, &x0.theta)?;
        let mut tr = Trajectory::with_capacity(self.dim, self.base_dim(), grid.len());
        let mut phase = vec![0.0; self.base_dim()];
        let mut pushed = Ok(());
        self.flow_ensemble(&x0.u, x0.theta.phases(), grid, |_, t, y| {
            if pushed.is_ok() {
                self.base.advance_into(x0.theta.phases(), t, &mut phase);
                pushed = tr.push(t, y, &phase);
            }
        })?;
        pushed?;
        Ok(tr)
    }

    /// Integrates several initial states side by side with one shared step
    /// sequence (ODE) so differences between members carry correlated error.
    /// `visit(k, t, states)` receives the concatenated states at `grid[k]`.
    pub fn flow_ensemble<V>(&self, y0: &[f64], theta: &[f64], grid: &[f64], mut visit: V) -> Result<()>
    where
        V: FnMut(usize, f64, &[f64]),
    {
        let d = self.dim;
        if y0.is_empty() || !y0.len().is_multiple_of(d) {
            return Err(invalid("ensemble state length must be a positive multiple of the dimension"));
        }
        check_dim(self.base_dim(), theta.len())?;
        validate_grid(grid, self.is_discrete())?;
        let copies = y0.len() / d;
        let mut th = vec![0.0; self.base_dim()];
        match self.kind {
            SystemKind::Ode => {
                let field = &self.field;
                let base = &self.base;
                let rhs = |s: f64, y: &[f64], out: &mut [f64]| {
                    base.advance_into(theta, s, &mut th);
                    for c in 0..copies {
                        field.eval(&th, &y[c * d..(c + 1) * d], &mut out[c * d..(c + 1) * d]);
                    }
                };
                let mut stepper = Stepper::new(rhs, self.integrator, 0.0, y0);
                for (k, &t) in grid.iter().enumerate() {
                    stepper.advance_to(t)?;
                    visit(k, t, stepper.state());
                }
            }
            SystemKind::Difference => {
                let mut y = y0.to_vec();
                let mut next = vec![0.0; y.len()];
                let mut n: u64 = 0;
                for (k, &t) in grid.iter().enumerate() {
                    let target = t as u64;
                    while n < target {
                        self.base.advance_into(theta, n as f64, &mut th);
                        for c in 0..copies {
                            self.field.eval(&th, &y[c * d..(c + 1) * d], &mut next[c * d..(c + 1) * d]);
                        }
                        std::mem::swap(&mut y, &mut next);
                        n += 1;
                        let norm = norm_inf(&y);
                        if !(norm <= OVERFLOW_GUARD) {
                            return Err(Error::Divergence { time: n as f64, norm });
                        }
                    }
                    visit(k, t, &y);
                }
            }
        }
        Ok(())
    }

    /// Two-sided trajectory through `x` on `[t_minus, t_plus]` sampled every `step`,
    /// reconstructed by pullback: the seed `x.u` is placed over
    /// `σ(t_minus - pullback_depth, θ)` and integrated forward only.
    ///
    /// Fails when the reconstructed state at `t = 0` is farther than `landing_tol` from `x.u`.
    pub fn entire_trajectory_through(
        &self,
        x: &SkewPoint,
        t_minus: f64,
        t_plus: f64,
        step: f64,
        pullback_depth: f64,
        landing_tol: f64,
    ) -> Result<Trajectory> {
        self.check_point(&x.u, &x.theta)?;
        if !(t_minus < 0.0 && t_plus > 0.0 && step > 0.0 && pullback_depth >= 0.0) {
            return Err(invalid("need t_minus < 0 < t_plus, step > 0, pullback_depth >= 0"));
        }
        self.base.check_time(step)?;
        self.base.check_time(pullback_depth)?;
        let j_minus = (-t_minus / step - 1e-9).ceil() as i64;
        let j_plus = (t_plus / step + 1e-9).floor() as i64;
        let start = -(j_minus as f64) * step - pullback_depth;
        let theta_start = self.base.advance(&x.theta, start)?;
        let times: Vec<f64> = (-j_minus..=j_plus).map(|j| j as f64 * step).collect();
        let local: Vec<f64> = times.iter().map(|t| t - start).collect();

        let mut tr = Trajectory::with_capacity(self.dim, self.base_dim(), times.len());
        let mut phase = vec![0.0; self.base_dim()];
        let mut pushed = Ok(());
        self.flow_ensemble(&x.u, theta_start.phases(), &local, |k, _, y| {
            if pushed.is_ok() {
                self.base.advance_into(x.theta.phases(), times[k], &mut phase);
                pushed = tr.push(times[k], y, &phase);
            }
        })?;
        pushed?;
        let zero = tr.index_of(0.0).ok_or_else(|| Error::Internal("reconstruction grid misses t = 0".into()))?;
        let achieved = euclid_dist(tr.state(zero), &x.u);
        if achieved > landing_tol {
            return Err(Error::ReconstructionFailure { achieved, requested: landing_tol });
        }
        Ok(tr)
    }

    fn check_point(&self, u: &[f64], theta: &BasePoint) -> Result<()> {
        check_dim(self.dim, u.len())?;
        check_dim(self.base_dim(), theta.dim())?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(invalid("state has non-finite components"));
        }
        Ok(())
    }
}

fn validate_grid(grid: &[f64], discrete: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if !(grid[0] >= 0.0) {
        return Err(invalid("time grid must start at t >= 0"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    if discrete && grid.iter().any(|t| t.fract() != 0.0) {
        return Err(invalid("difference cocycles need integer times"));
    }
    Ok(())
}

/// `{0, step, 2·step, …}` up to and including `horizon` (within rounding).
pub fn uniform_grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}
