use nehari_forge::scalar::{least_energy_scalar, scalar_residual, two_term_scalar};
use nehari_forge::sync::{
    nodal_ratio_variance, sync_criterion, sync_solve, synchronized_ansatz_gap, unboundedness_experiment,
    unboundedness_experiment_with, SyncFailure,
};
use nehari_forge::system::{continue_in_t, verify_solution};
use nehari_forge::{ContinuationConfig, Domain, Error, SystemParams};

fn fixture() -> SystemParams {
    SystemParams::lotka_volterra(3.0, [1.0, 4.0], -2.0, -1.0).unwrap()
}

fn with_exponents(a12: f64, b12: f64, a21: f64, b21: f64) -> SystemParams {
    SystemParams::new(
        3.0,
        vec![1.0, 4.0],
        vec![0.0, -2.0, -1.0, 0.0],
        vec![0.0, a12, a21, 0.0],
        vec![0.0, b12, b21, 0.0],
    )
    .unwrap()
}

#[test]
fn criterion_holds_on_fixture() {
    let v = sync_criterion(&fixture()).unwrap();
    assert!(v.holds);
    assert_eq!(v.q, Some(2.0));
    assert!((v.a - 1.0).abs() < 1e-15);
    assert!((v.rho - 0.5).abs() < 1e-15);
    assert_eq!(v.reason, None);
}

#[test]
fn criterion_ratio_mismatch() {
    let p = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -1.0, -1.0).unwrap();
    let v = sync_criterion(&p).unwrap();
    assert!(!v.holds);
    assert_eq!(v.reason, Some(SyncFailure::RatioMismatch));
    assert!((v.required_ratio - 2.0).abs() < 1e-14);
    assert_eq!(v.actual_ratio, 1.0);
}

#[test]
fn criterion_exponent_mismatch() {
    let v = sync_criterion(&with_exponents(1.0, 1.0, 1.5, 1.0)).unwrap();
    assert!(!v.holds);
    assert_eq!(v.q, None);
    assert_eq!(v.reason, Some(SyncFailure::ExponentMismatch));
}

#[test]
fn criterion_tolerances_are_sharp() {
    let mut p = fixture();
    p.lambda[1] *= 1.0 + 1e-12;
    assert!(sync_criterion(&p).unwrap().holds);
    p.lambda[1] = -2.0 * (1.0 + 1e-8);
    assert_eq!(sync_criterion(&p).unwrap().reason, Some(SyncFailure::RatioMismatch));
}

#[test]
fn criterion_with_unequal_exponents() {
    // α₁₂ = 0.5, β₁₂ = 1.5, α₂₁ = 1.5, β₂₁ = 0.5: required ratio (1/4)^{(1.5−1.5−1)/2} = 2
    let v = sync_criterion(&with_exponents(0.5, 1.5, 1.5, 0.5)).unwrap();
    assert!(v.holds);
    assert!((v.a - 2.0 * 0.25f64.powf(0.75)).abs() < 1e-14);
}

#[test]
fn criterion_preconditions() {
    let three = SystemParams::new(3.0, vec![1.0; 3], vec![-1.0; 9], vec![1.0; 9], vec![1.0; 9]).unwrap();
    assert!(matches!(sync_criterion(&three), Err(Error::InvalidParams(_))));
    let zero = SystemParams::lotka_volterra(3.0, [1.0, 1.0], 0.0, -1.0).unwrap();
    assert!(sync_criterion(&zero).is_err());
}

#[test]
fn synchronized_pair_is_certified() {
    let d = Domain::unit_square(32).unwrap();
    let params = fixture();
    let u = sync_solve(&params, &d).unwrap();
    let (w1, w2) = (u.component(0).values(), u.component(1).values());
    for (a, b) in w1.iter().zip(w2) {
        assert!((b / a - 0.5).abs() <= 1e-10);
    }
    assert!(nodal_ratio_variance(&u).unwrap() <= 1e-20);
    let rep = verify_solution(&params, &u, 1.0).unwrap();
    assert!(rep.relative_residual <= 1e-7);
    assert!(rep.nehari_relative <= 1e-8);
    assert!(rep.fully_nontrivial && rep.strictly_positive);
    // the profile solves −Δw + w² = w³
    let w = two_term_scalar(1.0, 3.0, 1.0, 2.0, &d).unwrap();
    assert!(u.component(0).axpy(-1.0, &w).unwrap().max_abs() <= 1e-8 * w.max_abs());
    assert!(synchronized_ansatz_gap(&params, &u).unwrap().residual <= 1e-7);
}

#[test]
fn violated_criterion_is_refused_and_leaves_a_gap() {
    let d = Domain::unit_square(32).unwrap();
    let params = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -1.0, -1.0).unwrap();
    assert!(matches!(sync_solve(&params, &d), Err(Error::CriterionFails(_))));
    let u = continue_in_t(&params, &d, &ContinuationConfig::default()).unwrap().state;
    assert!(nodal_ratio_variance(&u).unwrap() > 1e-6);
    let fit = synchronized_ansatz_gap(&params, &u).unwrap();
    assert!(fit.residual > 1e-3, "{fit:?}");
    assert!(fit.t1 > 0.0 && fit.t2 > 0.0);
}

#[test]
fn rescaling_parameters_rescales_the_pair() {
    let d = Domain::unit_square(24).unwrap();
    let params = fixture();
    let v = sync_criterion(&params).unwrap();
    let u = sync_solve(&params, &d).unwrap();
    let (p, q) = (params.p, v.q.unwrap());
    for kappa in [0.5f64, 3.0] {
        let mut scaled = params.clone();
        for m in &mut scaled.mu {
            *m *= kappa.powf(p - 1.0);
        }
        for l in &mut scaled.lambda {
            *l *= kappa.powf(q - 1.0);
        }
        let vs = sync_criterion(&scaled).unwrap();
        assert!(vs.holds);
        assert!((vs.rho - v.rho).abs() <= 1e-14);
        assert!((vs.a - kappa.powf(q - 1.0) * v.a).abs() <= 1e-12 * vs.a);
        let us = sync_solve(&scaled, &d).unwrap();
        for i in 0..2 {
            let expected = u.component(i).scaled(1.0 / kappa);
            assert!(us.component(i).axpy(-1.0, &expected).unwrap().max_abs() <= 1e-8 * expected.max_abs());
        }
    }
}

#[test]
fn unbounded_norms_increase() {
    let d = Domain::unit_square(32).unwrap();
    let table = unboundedness_experiment(1.0, 3.0, 2.0, &[1.0, 10.0, 100.0], &d).unwrap();
    assert!(table.strictly_increasing());
    assert_eq!(table.trend_start, Some(0));
    assert!(table.lower_bound_ok);
    for row in &table.rows {
        assert!(row.error.is_none());
        assert!(row.nehari_relative <= 1e-9, "{row:?}");
        assert!(row.residual <= 1e-8);
    }
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("a,norm_w,int_wq1,int_wp1,residual\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn zero_absorption_is_the_least_energy_solution() {
    let d = Domain::unit_square(24).unwrap();
    let table = unboundedness_experiment(1.0, 3.0, 2.0, &[0.0, 1.0], &d).unwrap();
    let u = least_energy_scalar(1.0, 3.0, &d).unwrap();
    assert!((table.rows[0].norm_w - u.h1_norm()).abs() <= 1e-8 * u.h1_norm());
    let w = two_term_scalar(1.0, 3.0, 1.0, 2.0, &d).unwrap();
    assert!(scalar_residual(&w, 1.0, 3.0, 1.0, 2.0).l2_norm() <= 1e-8 * w.l2_norm());
    assert!((table.rows[1].norm_w - w.h1_norm()).abs() <= 1e-8 * w.h1_norm());
}

#[test]
fn unbounded_table_ignores_worker_count() {
    let d = Domain::unit_square(16).unwrap();
    let a = [0.5, 2.0, 8.0, 30.0];
    let one = unboundedness_experiment_with(1.0, 3.0, 2.0, &a, &d, 1).unwrap();
    for workers in [2, 3, 8] {
        let many = unboundedness_experiment_with(1.0, 3.0, 2.0, &a, &d, workers).unwrap();
        assert_eq!(one, many);
    }
}

#[test]
fn unbounded_rejects_bad_schedules() {
    let d = Domain::unit_square(8).unwrap();
    assert!(unboundedness_experiment(1.0, 3.0, 2.0, &[], &d).is_err());
    assert!(unboundedness_experiment(1.0, 3.0, 2.0, &[10.0, 1.0], &d).is_err());
    assert!(unboundedness_experiment(1.0, 3.0, 2.0, &[-1.0], &d).is_err());
    assert!(unboundedness_experiment(1.0, 3.0, 3.5, &[1.0], &d).is_err());
}
