//! Closed-form reference solutions, computed independently of the library.

#![allow(dead_code)]

use std::f64::consts::TAU;

/// Bounded solution of `u' = -u + cos(ωt)`: `(cos ωt + ω sin ωt) / (1 + ω²)`.
pub fn forced_mode(omega: f64, t: f64) -> f64 {
    ((omega * t).cos() + omega * (omega * t).sin()) / (1.0 + omega * omega)
}

/// Bounded solution of `u' = -u + cos t`.
pub fn s1_exact(t: f64) -> f64 {
    forced_mode(1.0, t)
}

/// Bounded solution of `u' = -u + cos t + cos(√2 t)`.
pub fn s2_exact(t: f64) -> f64 {
    forced_mode(1.0, t) + forced_mode(2f64.sqrt(), t)
}

/// Bounded solution of `u_{n+1} = u_n / 2 + cos(2π(θ0 + nν))`:
/// `Σ_{k≥1} 2^{1-k} cos(2π(θ0 + (n-k)ν))`, truncated after 60 terms.
pub fn s4_exact(n: i64, theta0: f64, nu: f64) -> f64 {
    (1..=60)
        .map(|k| {
            let phase = (theta0 + ((n - k) as f64) * nu).rem_euclid(1.0);
            2f64.powi(1 - k as i32) * (TAU * phase).cos()
        })
        .sum()
}

/// Golden-mean rotation number used by the difference scenario.
pub fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Central-difference residual `u'(t) + u(t) - forcing(t)` of a candidate solution.
pub fn ode_residual(u: impl Fn(f64) -> f64, forcing: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-5;
    (u(t + h) - u(t - h)) / (2.0 * h) + u(t) - forcing(t)
}
