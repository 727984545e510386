use serde::{Deserialize, Serialize};

use crate::base_flow::torus_distance;
use crate::error::{invalid, Result};

/// Sampled motion `t ↦ (u(t), θ(t))` of the skew-product system, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    dim: usize,
    base_dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    phases: Vec<f64>,
}

impl Trajectory {
    pub fn new(dim: usize, base_dim: usize) -> Self {
        Trajectory { dim, base_dim, times: Vec::new(), states: Vec::new(), phases: Vec::new() }
    }

    pub fn with_capacity(dim: usize, base_dim: usize, n: usize) -> Self {
        Trajectory {
            dim,
            base_dim,
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n * dim),
            phases: Vec::with_capacity(n * base_dim),
        }
    }

    /// Appends a sample; times must be strictly increasing and states finite.
    pub fn push(&mut self, t: f64, u: &[f64], theta: &[f64]) -> Result<()> {
        if u.len() != self.dim || theta.len() != self.base_dim {
            return Err(invalid("sample dimension does not match trajectory"));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(invalid(format!("sample times must increase ({t} after {last})")));
            }
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite state at t = {t}")));
        }
        self.times.push(t);
        self.states.extend_from_slice(u);
        self.phases.extend_from_slice(theta);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn phase(&self, i: usize) -> &[f64] {
        &self.phases[i * self.base_dim..(i + 1) * self.base_dim]
    }

    /// Index of the sample at time `t` (within `1e-9` relative), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    /// Samples with `t_from <= t <= t_to`.
    pub fn window(&self, t_from: f64, t_to: f64) -> Trajectory {
        let lo = self.times.partition_point(|&s| s < t_from);
        let hi = self.times.partition_point(|&s| s <= t_to);
        Trajectory {
            dim: self.dim,
            base_dim: self.base_dim,
            times: self.times[lo..hi].to_vec(),
            states: self.states[lo * self.dim..hi * self.dim].to_vec(),
            phases: self.phases[lo * self.base_dim..hi * self.base_dim].to_vec(),
        }
    }

    /// Common sample spacing if the grid is uniform to `1e-6` relative.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let span = self.times[self.len() - 1] - self.times[0];
        let dt = span / (self.len() - 1) as f64;
        let uniform = self.times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
        uniform.then_some(dt)
    }

    pub fn duration(&self) -> f64 {
        match (self.times.first(), self.times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// `max_i |u(t_i)|` (Euclidean).
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| euclid_norm(self.state(i))).fold(0.0, f64::max)
    }

    /// Skew metric between samples `i` and `j`: max of state and base distance.
    pub fn skew_distance(&self, i: usize, j: usize) -> f64 {
        euclid_dist(self.state(i), self.state(j)).max(torus_distance(self.phase(i), self.phase(j)))
    }
}

pub fn euclid_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, dt: f64) -> Trajectory {
        let mut tr = Trajectory::new(1, 1);
        for i in 0..n {
            let t = i as f64 * dt;
            tr.push(t, &[t], &[0.0]).unwrap();
        }
        tr
    }

    #[test]
    fn push_validates() {
        let mut tr = Trajectory::new(2, 1);
        tr.push(0.0, &[1.0, 2.0], &[0.1]).unwrap();
        assert!(tr.push(0.0, &[1.0, 2.0], &[0.1]).is_err());
        assert!(tr.push(1.0, &[1.0], &[0.1]).is_err());
        assert!(tr.push(1.0, &[f64::NAN, 0.0], &[0.1]).is_err());
    }

    #[test]
    fn window_and_lookup() {
        let tr = line(101, 0.1);
        let w = tr.window(2.0, 3.0);
        assert_eq!(w.len(), 11);
        assert!((w.time(0) - 2.0).abs() < 1e-12);
        assert_eq!(w.state(0)[0], w.time(0));
        assert_eq!(tr.index_of(5.0), Some(50));
        assert_eq!(tr.index_of(5.05), None);
        assert!((tr.uniform_step().unwrap() - 0.1).abs() < 1e-12);
    }
}
