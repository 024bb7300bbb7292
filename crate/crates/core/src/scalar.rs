//! Ground states of the scalar problems
//!
//! * `−Δu = μ (u⁺)^p`, the uncoupled base point of the homotopy, and
//! * `−Δw + a (w⁺)^q = μ (w⁺)^p`, whose solutions generate synchronized pairs.
//!
//! Both are computed on their Nehari manifolds: the iterate is rescaled after
//! every step by the unique positive root of the one-dimensional fibering
//! equation, and Newton on the strong form finishes the job.

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::grid::{h1_inner, lp_integral, poisson_values, Domain, GridFunction};
use crate::newton::{newton, NewtonOptions, NewtonProblem};
use crate::problems::GridProblem;
use crate::reaction::Reaction;

/// Relative strong-residual tolerance for scalar ground states.
pub const SCALAR_TOL: f64 = 1e-10;

const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 20;
const MAX_PGD: usize = 300;
const PGD_TOL: f64 = 1e-3;

/// Unique `t > 0` with `t·norm2 + a_a·t^q = mu_b·t^p`.
///
/// Dividing by `t`, `f(t) = norm2 + a_a t^{q−1} − mu_b t^{p−1}` is positive
/// near 0 and negative for large `t` with exactly one sign change when `q < p`,
/// so bisection with a Newton accelerator is safe.
pub fn unique_scaling_root(norm2: f64, a_a: f64, mu_b: f64, p: f64, q: f64) -> f64 {
    let t0 = (norm2 / mu_b).powf(1.0 / (p - 1.0));
    if a_a == 0.0 {
        return t0;
    }
    let f = |t: f64| norm2 + a_a * t.powf(q - 1.0) - mu_b * t.powf(p - 1.0);
    let df = |t: f64| a_a * (q - 1.0) * t.powf(q - 2.0) - mu_b * (p - 1.0) * t.powf(p - 2.0);
    let scale = |t: f64| norm2.max(a_a * t.powf(q - 1.0)).max(mu_b * t.powf(p - 1.0));
    let mut lo = t0 * 1e-3;
    let mut hi = t0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..400 {
        let ft = f(t);
        if ft.abs() <= 1e-13 * scale(t) {
            return t;
        }
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - ft / df(t);
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return t;
        }
    }
    t
}

/// Strong residual `−Δ_h u − μ (u⁺)^p + a (u⁺)^q` (pass `a = 0` for the pure power).
pub fn scalar_residual(u: &GridFunction, mu: f64, p: f64, a: f64, q: f64) -> GridFunction {
    let prob = GridProblem::new(u.domain(), reaction(mu, p, a, q));
    GridFunction::from_raw(u.domain(), prob.residual(u.values()))
}

/// `J(u) = ½‖u‖² − μ/(p+1) ∫ (u⁺)^{p+1}`.
pub fn scalar_energy(u: &GridFunction, mu: f64, p: f64) -> f64 {
    0.5 * u.h1_norm().powi(2) - mu / (p + 1.0) * lp_integral(u, p + 1.0, true)
}

/// `Φ(w) = ½‖w‖² + a/(q+1) ∫ (w⁺)^{q+1} − μ/(p+1) ∫ (w⁺)^{p+1}`.
pub fn two_term_energy(w: &GridFunction, mu: f64, p: f64, a: f64, q: f64) -> f64 {
    0.5 * w.h1_norm().powi(2) + a / (q + 1.0) * lp_integral(w, q + 1.0, true)
        - mu / (p + 1.0) * lp_integral(w, p + 1.0, true)
}

fn reaction(mu: f64, p: f64, a: f64, q: f64) -> Reaction {
    Reaction::scalar(mu, p, (a != 0.0).then_some((a, q)))
}

fn check_scalar(mu: f64, p: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParams(format!("mu = {mu} must be positive")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParams(format!("p = {p} must exceed 1")));
    }
    Ok(())
}

fn polish(prob: &GridProblem, w: Vec<f64>) -> Result<GridFunction> {
    let out = newton(
        prob,
        w,
        NewtonOptions {
            tol: SCALAR_TOL,
            max_iter: MAX_NEWTON,
            max_halvings: MAX_HALVINGS,
            guard: None,
        },
    )?;
    debug!("scalar Newton: {} iterations, rel residual {:e}", out.iterations, out.rel_residual);
    let u = GridFunction::from_raw(&prob.domain, out.x);
    if u.min_value() < -1e-10 {
        warn!("scalar solution has negative nodes (min {:e})", u.min_value());
    }
    if lp_integral(&u, prob.reaction.p + 1.0, true) <= 0.0 {
        return Err(Error::NonConvergence("Newton collapsed to the trivial solution".into()));
    }
    Ok(u)
}

/// Positive least-energy solution of `−Δ_h u = μ (u⁺)^p`.
///
/// Starts from the first eigenfunction scaled onto the Nehari manifold, so the
/// result is deterministic and inherits the symmetries of the grid.
pub fn least_energy_scalar(mu: f64, p: f64, domain: &Domain) -> Result<GridFunction> {
    check_scalar(mu, p)?;
    let mut prob = GridProblem::new(domain, reaction(mu, p, 0.0, 1.0));
    prob.reproject = true;
    let phi = domain.first_eigenfunction();
    let s = prob
        .scalar_nehari_factor(phi.values())
        .ok_or_else(|| Error::NonConvergence("degenerate initial guess".into()))?;
    polish(&prob, phi.scaled(s).into_values())
}

/// Nonnegative nontrivial solution of `−Δ_h w + a (w⁺)^q = μ (w⁺)^p`.
pub fn two_term_scalar(mu: f64, p: f64, a: f64, q: f64, domain: &Domain) -> Result<GridFunction> {
    two_term_scalar_from(mu, p, a, q, &domain.first_eigenfunction())
}

/// As [`two_term_scalar`], starting the Nehari descent from `init`.
///
/// The descent is projected gradient in the Dirichlet metric with Armijo
/// backtracking; every iterate is rescaled onto the Nehari manifold of `Φ`.
/// When the gradient is small, Newton on the strong form polishes the iterate.
pub fn two_term_scalar_from(mu: f64, p: f64, a: f64, q: f64, init: &GridFunction) -> Result<GridFunction> {
    check_scalar(mu, p)?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParams(format!("a = {a} must be nonnegative")));
    }
    if !(q > 0.0 && q < p) {
        return Err(Error::InvalidParams(format!("q = {q} must lie in (0, p)")));
    }
    let domain = init.domain();
    let mut prob = GridProblem::new(domain, reaction(mu, p, a, q));
    prob.reproject = true;
    let project = |w: &[f64]| -> Option<Vec<f64>> {
        let s = prob.scalar_nehari_factor(w)?;
        Some(w.iter().map(|v| v * s).collect())
    };
    let phi_of = |w: &[f64]| two_term_energy(&GridFunction::from_raw(domain, w.to_vec()), mu, p, a, q);

    let mut w = project(init.values()).ok_or(Error::NotInU(0))?;
    let mut tau = 1.0;
    for it in 0..MAX_PGD {
        let wf = GridFunction::from_raw(domain, w.clone());
        let k = poisson_values(domain, &prob.reaction.eval(&w));
        let grad = GridFunction::from_raw(domain, w.iter().zip(&k).map(|(x, y)| x - y).collect());
        let gn2 = h1_inner(&grad, &grad)?;
        if gn2.sqrt() <= PGD_TOL * wf.h1_norm() {
            debug!("Nehari descent converged after {it} steps");
            break;
        }
        let current = phi_of(&w);
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = w.iter().zip(grad.values()).map(|(x, g)| x - tau * g).collect();
            if let Some(tp) = project(&trial) {
                if phi_of(&tp) <= current - 1e-4 * tau * gn2 {
                    w = tp;
                    accepted = true;
                    tau = (2.0 * tau).min(1.0);
                    break;
                }
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    polish(&prob, w)
}
