//! Damped semismooth Newton and natural-parameter continuation over a generic
//! discretized problem.

use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{gmres, GmresOptions};

/// A square nonlinear system `F(x) = 0` with a preconditioned linearization.
pub(crate) trait NewtonProblem {
    type Lin;

    fn residual(&self, x: &[f64]) -> Vec<f64>;
    fn linearize(&self, x: &[f64]) -> Self::Lin;
    fn apply(&self, lin: &Self::Lin, v: &[f64]) -> Vec<f64>;
    fn precondition(&self, v: &[f64]) -> Vec<f64>;
    /// Norm shared by residuals and iterates (relative test `‖F‖ ≤ tol‖x‖`).
    fn norm(&self, v: &[f64]) -> f64;
    /// Norm checked against the bound guard.
    fn guard_norm(&self, x: &[f64]) -> f64;
    /// Hook applied after every accepted step.
    fn post_step(&self, _x: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub guard: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

fn rel(prob: &impl NewtonProblem, r: &[f64], x: &[f64]) -> f64 {
    let rn = prob.norm(r);
    let xn = prob.norm(x);
    if xn > 0.0 {
        rn / xn
    } else {
        rn
    }
}

/// Residuals within this factor of the tolerance are accepted once Newton stops contracting.
const STALL_FACTOR: f64 = 10.0;

pub(crate) fn newton<P: NewtonProblem>(prob: &P, x0: Vec<f64>, opts: NewtonOptions) -> Result<NewtonOutcome> {
    let mut x = x0;
    let mut r = prob.residual(&x);
    let mut rn = prob.norm(&r);
    if !rn.is_finite() {
        return Err(Error::NonConvergence("non-finite initial residual".into()));
    }
    let gm_opts = GmresOptions {
        rel_tol: 1e-11,
        ..Default::default()
    };
    for it in 0..=opts.max_iter {
        let rr = rel(prob, &r, &x);
        debug!("newton it {it}: rel residual {rr:e}");
        if rr <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                iterations: it,
                rel_residual: rr,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let lin = prob.linearize(&x);
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let sol = gmres(|v| prob.apply(&lin, v), |v| prob.precondition(v), &rhs, gm_opts)?;
        debug!("gmres: {} iterations, rel residual {:e}", sol.iterations, sol.rel_residual);
        if !(sol.rel_residual <= 1e-4) {
            return Err(Error::SingularJacobian);
        }
        let step = sol.x;
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + damping * b).collect();
            let rt = prob.residual(&trial);
            let rtn = prob.norm(&rt);
            if rtn.is_finite() && rtn < rn {
                accepted = Some(trial);
                break;
            }
            damping *= 0.5;
        }
        let Some(mut next) = accepted else {
            return Err(Error::Divergence { residual: rn });
        };
        prob.post_step(&mut next);
        x = next;
        r = prob.residual(&x);
        let prev = rn;
        rn = prob.norm(&r);
        if let Some(guard) = opts.guard {
            let g = prob.guard_norm(&x);
            if g > guard {
                return Err(Error::BoundGuardTripped { norm: g, guard });
            }
        }
        // round-off floor: progress has stalled within a decade of the target
        let rr = rel(prob, &r, &x);
        if rr > opts.tol && rr <= STALL_FACTOR * opts.tol && rn > 0.5 * prev {
            debug!("newton stalled at rel residual {rr:e}; accepting");
            return Ok(NewtonOutcome {
                x,
                iterations: it + 1,
                rel_residual: rr,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "Newton reached {} iterations (rel residual {:e})",
        opts.max_iter,
        rel(prob, &r, &x)
    )))
}

/// Step control for [`continuation`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub initial_step: f64,
    pub min_step: f64,
}

/// Follows solutions of `make(τ)` from `τ = 0` (where `x0` solves it) to `τ = 1`.
///
/// Each step warm-starts Newton from `correct(x, τ_next)` (or `x` when the
/// correction is unavailable). Failed steps halve the step size; a step below
/// `min_step` stalls the continuation. A tripped bound guard aborts at once.
pub(crate) fn continuation<P: NewtonProblem>(
    make: &dyn Fn(f64) -> P,
    x0: Vec<f64>,
    correct: &dyn Fn(&[f64], f64) -> Option<Vec<f64>>,
    steps: StepControl,
    opts: NewtonOptions,
    on_accept: &mut dyn FnMut(f64, &NewtonOutcome),
) -> Result<Vec<f64>> {
    let mut tau = 0.0;
    let mut x = x0;
    let mut dt = steps.initial_step;
    while tau < 1.0 {
        let next = if tau + dt >= 1.0 - 1e-12 { 1.0 } else { tau + dt };
        let guess = correct(&x, next).unwrap_or_else(|| x.clone());
        match newton(&make(next), guess, opts) {
            Ok(out) => {
                debug!("continuation accepted tau = {next} after {} iterations", out.iterations);
                on_accept(next, &out);
                tau = next;
                x = out.x;
                dt = (2.0 * dt).min(steps.initial_step);
            }
            Err(e @ Error::BoundGuardTripped { .. }) => return Err(e),
            Err(e) => {
                debug!("continuation step to {next} failed: {e}");
                dt *= 0.5;
                if dt < steps.min_step {
                    return Err(Error::StepFloorReached { last_t: tau });
                }
            }
        }
    }
    Ok(x)
}
