//! Finite point sets standing in for compact sets: ε-net clustering and
//! Hausdorff distances.

use crate::trajectory::euclid_dist;

/// Greedy leader clustering: each point joins the first existing leader within
/// `radius`, otherwise it becomes a leader. Every input point ends within
/// `radius` of some returned leader. Input order determines the result.
pub fn cluster_leaders(points: &[Vec<f64>], radius: f64) -> Vec<Vec<f64>> {
    let mut leaders: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !leaders.iter().any(|l| euclid_dist(l, p) <= radius) {
            leaders.push(p.clone());
        }
    }
    leaders
}

/// `sup_{a ∈ A} dist(a, B)`; infinite when `B` is empty and `A` is not.
pub fn semi_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| b.iter().map(|q| euclid_dist(p, q)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Two-sided Hausdorff distance.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    semi_distance(a, b).max(semi_distance(b, a))
}

/// Distance from `p` to the set `b`.
pub fn point_to_set(p: &[f64], b: &[Vec<f64>]) -> f64 {
    b.iter().map(|q| euclid_dist(p, q)).fold(f64::INFINITY, f64::min)
}

/// Largest pairwise Euclidean distance.
pub fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max(euclid_dist(p, q));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn leaders_cover_input() {
        let p = pts(&[0.0, 0.05, 0.2, 0.21, 1.0]);
        let l = cluster_leaders(&p, 0.1);
        assert_eq!(l, pts(&[0.0, 0.2, 1.0]));
        for q in &p {
            assert!(point_to_set(q, &l) <= 0.1);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = pts(&[0.0, 1.0]);
        let b = pts(&[0.0]);
        assert_eq!(semi_distance(&b, &a), 0.0);
        assert_eq!(semi_distance(&a, &b), 1.0);
        assert_eq!(hausdorff(&a, &b), 1.0);
        assert!((diameter(&pts(&[0.2, -0.4, 0.9])) - 1.3).abs() < 1e-12);
        assert_eq!(semi_distance(&a, &[]), f64::INFINITY);
    }
}
