//! Explicit Runge–Kutta integrators for `y' = f(t, y)`.
//!
//! `Stepper` keeps its state between calls to [`Stepper::advance_to`], so a
//! trajectory sampled at many output times is one continued integration.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Any component beyond this magnitude is treated as finite-time blow-up.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum IntegratorSettings {
    /// Classical fourth-order Runge–Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Dormand–Prince 5(4) embedded pair with error control.
    DormandPrince { abs_tol: f64, rel_tol: f64, max_step: f64 },
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings::DormandPrince { abs_tol: 1e-9, rel_tol: 1e-9, max_step: 0.1 }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            IntegratorSettings::Rk4 { step } => step > 0.0 && step.is_finite(),
            IntegratorSettings::DormandPrince { abs_tol, rel_tol, max_step } => {
                abs_tol > 0.0 && rel_tol >= 0.0 && max_step > 0.0 && max_step.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad integrator settings {self:?}")))
        }
    }
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub struct Stepper<F> {
    rhs: F,
    settings: IntegratorSettings,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    fsal_valid: bool,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl<F> Stepper<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(rhs: F, settings: IntegratorSettings, t0: f64, y0: &[f64]) -> Self {
        let n = y0.len();
        let h = match settings {
            IntegratorSettings::Rk4 { step } => step,
            IntegratorSettings::DormandPrince { max_step, .. } => max_step.min(1e-3),
        };
        Stepper {
            rhs,
            settings,
            t: t0,
            y: y0.to_vec(),
            h,
            k: std::array::from_fn(|_| vec![0.0; n]),
            fsal_valid: false,
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    /// Integrates forward until exactly `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        if t_target < self.t {
            return Err(invalid(format!("cannot integrate backward from {} to {t_target}", self.t)));
        }
        while self.t < t_target {
            let remaining = t_target - self.t;
            match self.settings {
                IntegratorSettings::Rk4 { step } => {
                    // absorb a sliver of a step rather than taking a tiny final one
                    let h = if remaining <= step * (1.0 + 1e-9) { remaining } else { step };
                    self.rk4_step(h);
                    self.t = if h == remaining { t_target } else { self.t + h };
                }
                IntegratorSettings::DormandPrince { abs_tol, rel_tol, max_step } => {
                    let mut h = self.h.min(max_step);
                    let last = h >= remaining * (1.0 - 1e-9);
                    if last {
                        h = remaining;
                    }
                    let err = self.dp_trial(h, abs_tol, rel_tol);
                    if !err.is_finite() {
                        self.h = h * 0.2;
                        self.fsal_valid = false;
                        if self.h < 1e-14 * self.t.abs().max(1.0) {
                            return Err(Error::Divergence { time: self.t, norm: f64::INFINITY });
                        }
                        continue;
                    }
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if err <= 1.0 {
                        std::mem::swap(&mut self.y, &mut self.y_new);
                        let (head, tail) = self.k.split_at_mut(6);
                        std::mem::swap(&mut head[0], &mut tail[0]);
                        self.fsal_valid = true;
                        self.t = if last { t_target } else { self.t + h };
                        // a step clipped to hit an output time says little about the natural step
                        if !last || factor < 1.0 {
                            self.h = (h * factor).min(max_step);
                        }
                    } else {
                        self.h = h * factor.min(1.0);
                        if self.h < 1e-14 * self.t.abs().max(1.0) {
                            return Err(Error::Divergence { time: self.t, norm: norm_inf(&self.y) });
                        }
                    }
                }
            }
            let norm = norm_inf(&self.y);
            if !(norm <= OVERFLOW_GUARD) {
                return Err(Error::Divergence { time: self.t, norm });
            }
        }
        Ok(())
    }

    fn rk4_step(&mut self, h: f64) {
        let n = self.y.len();
        let t = self.t;
        let [k1, k2, k3, k4, ..] = &mut self.k;
        (self.rhs)(t, &self.y, k1);
        for i in 0..n {
            self.tmp[i] = self.y[i] + 0.5 * h * k1[i];
        }
        (self.rhs)(t + 0.5 * h, &self.tmp, k2);
        for i in 0..n {
            self.tmp[i] = self.y[i] + 0.5 * h * k2[i];
        }
        (self.rhs)(t + 0.5 * h, &self.tmp, k3);
        for i in 0..n {
            self.tmp[i] = self.y[i] + h * k3[i];
        }
        (self.rhs)(t + h, &self.tmp, k4);
        for i in 0..n {
            self.y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// One trial step of size `h`; fills `y_new` and returns the scaled error norm.
    fn dp_trial(&mut self, h: f64, abs_tol: f64, rel_tol: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        if !self.fsal_valid {
            (self.rhs)(t, &self.y, &mut self.k[0]);
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * self.k[j][i];
                }
                self.tmp[i] = self.y[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            (self.rhs)(t + C[s] * h, &self.tmp, &mut rest[0]);
        }
        // stage 7 was evaluated at the fifth-order solution itself
        self.y_new.copy_from_slice(&self.tmp);
        let mut sum = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += E[s] * self.k[s][i];
            }
            let scale = abs_tol + rel_tol * self.y[i].abs().max(self.y_new[i].abs());
            let r = h * e / scale;
            sum += r * r;
        }
        (sum / n.max(1) as f64).sqrt()
    }
}

pub(crate) fn norm_inf(y: &[f64]) -> f64 {
    y.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}
