use nehari_forge::grid::lp_integral;
use nehari_forge::scalar::{
    least_energy_scalar, scalar_energy, scalar_residual, two_term_energy, two_term_scalar, unique_scaling_root,
};
use nehari_forge::{Domain, GridFunction};
use proptest::prelude::*;

fn rel_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.axpy(-1.0, b).unwrap().max_abs() / b.max_abs()
}

fn transposed(u: &GridFunction) -> GridFunction {
    let (nx, ny) = u.domain().nodes();
    assert_eq!(nx, ny);
    let v = u.values();
    GridFunction::from_values(u.domain(), (0..nx * ny).map(|k| v[(k % nx) * nx + k / nx]).collect()).unwrap()
}

fn mirrored(u: &GridFunction) -> GridFunction {
    let (nx, ny) = u.domain().nodes();
    let v = u.values();
    GridFunction::from_values(u.domain(), (0..nx * ny).map(|k| v[(k / nx) * nx + (nx - 1 - k % nx)]).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_solves_fibering_equation(
        n2 in 1e-3f64..1e3, aa in 0.0f64..1e3, mb in 1e-3f64..1e3, p in 1.5f64..6.0, qf in 0.05f64..0.95,
    ) {
        let q = qf * p;
        let t = unique_scaling_root(n2, aa, mb, p, q);
        prop_assert!(t > 0.0);
        let lhs = t * n2 + aa * t.powf(q);
        let rhs = mb * t.powf(p);
        prop_assert!((lhs - rhs).abs() <= 1e-11 * rhs.max(lhs), "{lhs} vs {rhs}");
    }

    #[test]
    fn root_is_monotone_in_absorption(n2 in 0.1f64..10.0, mb in 0.1f64..10.0, a1 in 0.0f64..10.0, da in 0.01f64..10.0) {
        let t1 = unique_scaling_root(n2, a1, mb, 3.0, 2.0);
        let t2 = unique_scaling_root(n2, a1 + da, mb, 3.0, 2.0);
        prop_assert!(t2 > t1);
    }
}

#[test]
fn root_closed_forms() {
    assert!((unique_scaling_root(3.0, 0.0, 0.75, 3.0, 2.0) - 2.0).abs() < 1e-14);
    assert!((unique_scaling_root(1.0, 1.0, 2.0, 3.0, 2.0) - 1.0).abs() < 1e-13);
}

#[test]
fn mu_scaling_law() {
    let d = Domain::unit_square(24).unwrap();
    let u1 = least_energy_scalar(1.0, 3.0, &d).unwrap();
    for mu in [0.25, 3.0, 10.0] {
        let u = least_energy_scalar(mu, 3.0, &d).unwrap();
        let predicted = u1.scaled(mu.powf(-1.0 / 2.0));
        assert!(rel_diff(&u, &predicted) < 1e-8, "mu = {mu}");
    }
}

#[test]
fn ground_state_certificate_and_symmetry() {
    let d = Domain::unit_square(32).unwrap();
    for p in [2.5, 3.0, 5.0] {
        let u = least_energy_scalar(1.0, p, &d).unwrap();
        let r = scalar_residual(&u, 1.0, p, 0.0, 1.0).l2_norm();
        assert!(r <= 1e-8 * u.l2_norm(), "p = {p}: {r}");
        let a = u.h1_norm().powi(2);
        assert!((a - lp_integral(&u, p + 1.0, true)).abs() <= 1e-9 * a);
        assert!(u.min_value() > 0.0);
        assert!(rel_diff(&transposed(&u), &u) < 1e-8);
        assert!(rel_diff(&mirrored(&u), &u) < 1e-8);
        // on the Nehari manifold J = (½ − 1/(p+1)) ‖u‖²
        let j = scalar_energy(&u, 1.0, p);
        assert!((j - (0.5 - 1.0 / (p + 1.0)) * a).abs() <= 1e-9 * j);
    }
}

#[test]
fn ground_state_on_rectangle_and_interval() {
    let d = Domain::rectangle(2.0, 1.0, 31, 15).unwrap();
    let u = least_energy_scalar(2.0, 3.0, &d).unwrap();
    assert!(scalar_residual(&u, 2.0, 3.0, 0.0, 1.0).l2_norm() <= 1e-8 * u.l2_norm());
    assert!(rel_diff(&mirrored(&u), &u) < 1e-8);
    let d = Domain::interval(3.0, 101).unwrap();
    let u = least_energy_scalar(1.0, 4.0, &d).unwrap();
    assert!(scalar_residual(&u, 1.0, 4.0, 0.0, 1.0).l2_norm() <= 1e-8 * u.l2_norm());
}

#[test]
fn two_term_reduces_to_pure_power() {
    let d = Domain::unit_square(24).unwrap();
    let u = least_energy_scalar(1.5, 3.0, &d).unwrap();
    let w = two_term_scalar(1.5, 3.0, 0.0, 2.0, &d).unwrap();
    assert!(rel_diff(&w, &u) < 1e-7);
}

#[test]
fn two_term_identities() {
    let d = Domain::unit_square(32).unwrap();
    let (mu, p, q) = (1.0, 3.0, 2.0);
    for a in [0.5, 3.0, 20.0] {
        let w = two_term_scalar(mu, p, a, q, &d).unwrap();
        assert!(scalar_residual(&w, mu, p, a, q).l2_norm() <= 1e-8 * w.l2_norm());
        assert!(w.min_value() > 0.0);
        let n2 = w.h1_norm().powi(2);
        let iq = lp_integral(&w, q + 1.0, true);
        let ip = lp_integral(&w, p + 1.0, true);
        assert!((n2 + a * iq - mu * ip).abs() <= 1e-9 * mu * ip, "a = {a}");
        assert!(n2 <= mu * ip);
        let phi = two_term_energy(&w, mu, p, a, q);
        let substituted = (0.5 - 1.0 / (p + 1.0)) * mu * ip + a * (1.0 / (q + 1.0) - 0.5) * iq;
        assert!((phi - substituted).abs() <= 1e-10 * phi.abs().max(1.0), "{phi} vs {substituted}");
    }
}

#[test]
fn invalid_arguments() {
    let d = Domain::unit_square(7).unwrap();
    assert!(least_energy_scalar(0.0, 3.0, &d).is_err());
    assert!(least_energy_scalar(1.0, 0.5, &d).is_err());
    assert!(two_term_scalar(1.0, 3.0, 1.0, 3.5, &d).is_err());
    assert!(two_term_scalar(1.0, 3.0, f64::NAN, 2.0, &d).is_err());
}
