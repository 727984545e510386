//! The reference solutions satisfy their equations, and the library's
//! cocycles reproduce them.

mod common;

use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use common::*;
use monoap_core::scenario::builtin_scenario;
use monoap_core::BasePoint;

#[test]
fn closed_forms_solve_their_equations() {
    for k in 0..200 {
        let t = -20.0 + 0.37 * k as f64;
        assert!(ode_residual(s1_exact, |t| t.cos(), t).abs() < 1e-8);
        assert!(ode_residual(s2_exact, |t| t.cos() + (2f64.sqrt() * t).cos(), t).abs() < 1e-8);
    }
    assert_abs_diff_eq!(s1_exact(0.0), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(s2_exact(0.0), 5.0 / 6.0, epsilon = 1e-15);
}

#[test]
fn series_solves_the_recursion() {
    let nu = golden();
    for n in -50..50 {
        let lhs = s4_exact(n + 1, 0.0, nu);
        let rhs = 0.5 * s4_exact(n, 0.0, nu) + (TAU * (n as f64 * nu).rem_euclid(1.0)).cos();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-15);
    }
}

#[test]
fn cocycle_follows_closed_form_from_exact_data() {
    let s1 = builtin_scenario("S1").unwrap().build_spec().unwrap();
    let s2 = builtin_scenario("S2").unwrap().build_spec().unwrap();
    for t in [0.5, 3.0, 17.0, 40.0] {
        let u1 = s1.phi(t, &[0.5], &BasePoint::zeros(1)).unwrap();
        assert_abs_diff_eq!(u1[0], s1_exact(t), epsilon = 1e-7);
        let u2 = s2.phi(t, &[5.0 / 6.0], &BasePoint::zeros(2)).unwrap();
        assert_abs_diff_eq!(u2[0], s2_exact(t), epsilon = 1e-7);
    }
    let s4 = builtin_scenario("S4").unwrap().build_spec().unwrap();
    let u = s4.phi(25.0, &[s4_exact(0, 0.0, golden())], &BasePoint::zeros(1)).unwrap();
    assert_abs_diff_eq!(u[0], s4_exact(25, 0.0, golden()), epsilon = 1e-12);
}
