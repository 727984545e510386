//! Seeded sampling helpers. Every randomized check takes an explicit seed so
//! reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base_flow::BasePoint;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn base_point(rng: &mut SeededRng, m: usize) -> BasePoint {
    BasePoint::new((0..m).map(|_| rng.gen::<f64>()).collect())
}

/// Uniform point of the box `[-half_width, half_width]^d`.
pub fn in_box(rng: &mut SeededRng, d: usize, half_width: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-half_width..=half_width)).collect()
}

/// Uniform direction on the unit sphere of `ℝ^d`.
pub fn unit_vector(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
