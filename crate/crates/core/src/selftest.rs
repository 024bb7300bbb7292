//! Compact invariant suite behind the `selftest` command.
//!
//! Every check is deterministic given the seed, and the summary contains no
//! timings, so two runs with the same inputs print identical text.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SelftestConfig;
use crate::error::Result;
use crate::grid::{laplacian_apply, lp_integral, poisson_solve, Domain, GridFunction};
use crate::nehari::{normalize_to_sphere, project_to_nehari, uncoupled_scaling, State, SystemParams};
use crate::scalar::{least_energy_scalar, scalar_residual};
use crate::scaling::{bracket, degree_sign_check, eval_m, solve_scaling, solve_scaling_from, ScalingCoeffs};
use crate::sync::{sync_criterion, sync_solve, unboundedness_experiment};
use crate::system::{continue_in_t, jacobian_apply, residual_F, verify_solution, ContinuationConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub seed: u64,
    pub n: usize,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "selftest seed={} grid={}x{}", self.seed, self.n, self.n)?;
        for c in &self.checks {
            writeln!(f, "{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run(cfg: &SelftestConfig, seed: u64) -> Summary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let mut checks = Vec::new();
    checks.push(check("scaling.uniqueness", scaling_uniqueness(cfg, &mut rng)));
    checks.push(check("scaling.boundary_signs", scaling_boundary(cfg, &mut rng)));
    checks.push(check("scaling.degree_sign", scaling_degree(cfg, &mut rng)));
    checks.push(check("grid.poisson_inverse", poisson_inverse(n, &mut rng)));
    let ground = Domain::unit_square(n).and_then(|d| least_energy_scalar(1.0, 3.0, &d));
    checks.push(check("scalar.residual", ground.clone().map(|u| {
        let r = scalar_residual(&u, 1.0, 3.0, 0.0, 1.0).l2_norm() / u.l2_norm();
        (r <= cfg.residual_tol, format!("{r:.3e} <= {:.1e}", cfg.residual_tol))
    })));
    checks.push(check("scalar.nehari_identity", ground.clone().map(|u| {
        let a = u.h1_norm().powi(2);
        let rel = (a - lp_integral(&u, 4.0, true)).abs() / a;
        (rel <= cfg.nehari_tol, format!("{rel:.3e} <= {:.1e}", cfg.nehari_tol))
    })));
    checks.push(check("scalar.positivity", ground.map(|u| (u.min_value() > 0.0, format!("min {:.3e}", u.min_value())))));
    checks.push(check("nehari.projection", nehari_projection(cfg, n, &mut rng)));
    let coupled = coupled(cfg, n);
    checks.push(check("system.certificate", coupled.clone().map(|(_, ok, d)| (ok, d))));
    checks.push(check("system.jacobian_fd", coupled.and_then(|(u, _, _)| jacobian_fd(&u, &mut rng))));
    checks.push(check("sync.fixture", sync_fixture(cfg, n)));
    checks.push(check("sync.unbounded", unbounded(cfg, n)));
    Summary { seed, n, checks }
}

fn scaling_uniqueness(cfg: &SelftestConfig, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for case in 0..cfg.cases {
        let c = ScalingCoeffs::random(rng, 2 + case % 3);
        let s = solve_scaling(&c)?;
        let (r, big) = bracket(&c)?;
        for _ in 0..5 {
            let start: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(r..big)).collect();
            let s2 = solve_scaling_from(&c, &start)?;
            let scale = s.iter().copied().fold(1.0, f64::max);
            worst = worst.max(s.iter().zip(&s2).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale);
        }
    }
    Ok((worst <= cfg.scaling_tol, format!("multi-start spread {worst:.3e} <= {:.1e}", cfg.scaling_tol)))
}

fn scaling_boundary(cfg: &SelftestConfig, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut bad = 0;
    let mut probes = 0;
    for case in 0..cfg.cases {
        let c = ScalingCoeffs::random(rng, 2 + case % 3);
        let (r, big) = bracket(&c)?;
        let l = c.len();
        for i in 0..l {
            let mut s: Vec<f64> = (0..l).map(|_| rng.gen_range(r..=big)).collect();
            s[i] = r;
            bad += usize::from(eval_m(&c, &s)?[i] <= 0.0);
            s[i] = big;
            bad += usize::from(eval_m(&c, &s)?[i] >= 0.0);
            probes += 2;
        }
    }
    Ok((bad == 0, format!("{bad} of {probes} face probes with wrong sign")))
}

fn scaling_degree(cfg: &SelftestConfig, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut bad = 0;
    let mut degenerate = 0;
    for case in 0..cfg.cases {
        let c = ScalingCoeffs::random(rng, 2 + case % 3);
        let s = solve_scaling(&c)?;
        match degree_sign_check(&c, &s)? {
            0 => degenerate += 1,
            sign => bad += usize::from(sign != if c.len() % 2 == 0 { 1 } else { -1 }),
        }
    }
    Ok((bad == 0, format!("{bad} sign mismatches, {degenerate} degenerate")))
}

fn poisson_inverse(n: usize, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = Domain::unit_square(n)?;
    let g = GridFunction::from_values(&d, (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let back = laplacian_apply(&poisson_solve(&g)?);
    let err = back.axpy(-1.0, &g)?.max_abs() / g.max_abs();
    Ok((err <= 1e-10, format!("{err:.3e} <= 1e-10")))
}

fn nehari_projection(cfg: &SelftestConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let d = Domain::unit_square(n)?;
    let params = SystemParams::lotka_volterra(3.0, [1.0, 2.0], -0.5, -0.8)?;
    let bump = |cx: f64, cy: f64| {
        GridFunction::from_fn(&d, move |x, y| {
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            (x * (1.0 - x) * y * (1.0 - y)) * (-4.0 * r2).exp()
        })
    };
    let u = State::new(vec![
        bump(rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)),
        bump(rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)),
    ])?;
    let v = normalize_to_sphere(&u)?;
    let (s, su) = project_to_nehari(&params, &v, 1.0)?;
    let back = normalize_to_sphere(&su)?;
    let (s2, _) = project_to_nehari(&params, &back, 1.0)?;
    let roundtrip = s.iter().zip(&s2).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs() / a));
    let s0 = uncoupled_scaling(&params, &v)?;
    let monotone = s.iter().zip(&s0).all(|(st, s0)| st >= s0);
    let ok = roundtrip <= cfg.scaling_tol && monotone;
    Ok((ok, format!("round trip {roundtrip:.3e}, s^1 >= s^0: {monotone}")))
}

fn coupled(cfg: &SelftestConfig, n: usize) -> Result<(State, bool, String)> {
    let d = Domain::unit_square(n)?;
    let params = SystemParams::lotka_volterra(3.0, [1.0, 1.0], -0.5, -0.5)?;
    let run = continue_in_t(&params, &d, &ContinuationConfig::default())?;
    let rep = verify_solution(&params, &run.state, 1.0)?;
    let sup = run.trace.iter().fold(0.0, |m: f64, r| m.max(r.sup_norm));
    let ok = rep.relative_residual <= cfg.residual_tol
        && rep.nehari_relative <= cfg.residual_tol
        && rep.strictly_positive
        && rep.fully_nontrivial
        && sup.is_finite();
    let detail = format!(
        "residual {:.3e}, nehari {:.3e}, min {:.3e}, sup along path {:.4}",
        rep.relative_residual,
        rep.nehari_relative,
        rep.min_values.iter().copied().fold(f64::INFINITY, f64::min),
        sup
    );
    Ok((run.state, ok, detail))
}

fn jacobian_fd(u: &State, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let params = SystemParams::lotka_volterra(3.0, [1.0, 1.0], -0.5, -0.5)?;
    let d = u.domain();
    let v = State::new(
        (0..2)
            .map(|_| GridFunction::from_values(d, (0..d.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect::<Result<_>>()?,
    )?;
    let h = 1e-6;
    let shifted = State::new(
        u.components()
            .iter()
            .zip(v.components())
            .map(|(a, b)| a.axpy(h, b))
            .collect::<Result<_>>()?,
    )?;
    let (f0, f1) = (residual_F(&params, u, 0.7)?, residual_F(&params, &shifted, 0.7)?);
    let jv = jacobian_apply(&params, u, 0.7, &v)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..2 {
        let fd = f1.component(i).axpy(-1.0, f0.component(i))?.scaled(1.0 / h);
        num += fd.axpy(-1.0, jv.component(i))?.l2_norm().powi(2);
        den += jv.component(i).l2_norm().powi(2);
    }
    let rel = (num / den).sqrt();
    Ok((rel <= 1e-5, format!("{rel:.3e} <= 1e-5")))
}

fn sync_fixture(cfg: &SelftestConfig, n: usize) -> Result<(bool, String)> {
    let d = Domain::unit_square(n)?;
    let params = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -2.0, -1.0)?;
    let v = sync_criterion(&params)?;
    let pair = sync_solve(&params, &d)?;
    let rep = verify_solution(&params, &pair, 1.0)?;
    let tol = 10.0 * cfg.residual_tol;
    let ok = v.holds && v.a == 1.0 && v.rho == 0.5 && rep.relative_residual <= tol;
    Ok((ok, format!("a={} rho={} residual {:.3e} <= {tol:.1e}", v.a, v.rho, rep.relative_residual)))
}

fn unbounded(cfg: &SelftestConfig, n: usize) -> Result<(bool, String)> {
    let d = Domain::unit_square(n)?;
    let table = unboundedness_experiment(1.0, 3.0, 2.0, &[1.0, 10.0, 100.0], &d)?;
    let worst = table.rows.iter().fold(0.0, |m: f64, r| m.max(r.nehari_relative));
    let ok = table.strictly_increasing() && table.lower_bound_ok && worst <= cfg.nehari_tol;
    let norms: Vec<String> = table.rows.iter().map(|r| format!("{:.4}", r.norm_w)).collect();
    Ok((ok, format!("norms [{}], nehari {worst:.3e}", norms.join(", "))))
}
