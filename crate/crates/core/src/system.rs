//! Solvers for the coupled system
//!
//! ```text
//! −Δu_i = μ_i (u_i⁺)^p + t Σ_{j≠i} λ_ij (u_i⁺)^{α_ij} (u_j⁺)^{β_ij},   0 ≤ t ≤ 1
//! ```
//!
//! The homotopy starts at `t = 0` from the product of scalar ground states and
//! is continued to `t = 1` with warm-started semismooth Newton. Before each
//! step the previous solution is rescaled onto `N_t` of the next parameter.
//! A Galerkin variant solves the same equations projected onto the lowest `k`
//! sine modes.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dot, Domain, GridFunction};
use crate::nehari::{
    coeffs_from_state, fully_nontrivial_check_at, normalize_to_sphere, project_to_nehari, psi, energy_j,
    nehari_residual, State, SystemParams,
};
use crate::newton::{continuation, newton, NewtonOptions, NewtonProblem, NewtonOutcome, StepControl};
use crate::problems::{GalerkinProblem, GridProblem};
use crate::reaction::Reaction;
use crate::scalar::least_energy_scalar;

/// Certificate tolerance for solved states (relative strong and Nehari residuals).
pub const CERT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub initial_step: f64,
    pub min_step: f64,
    /// Relative strong-residual tolerance `‖F(u)‖ ≤ tol·‖u‖` (discrete `L²` norms).
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Default guard is this factor times the norm of the `t = 0` solution.
    pub guard_factor: f64,
    /// Explicit guard overriding `guard_factor`.
    pub guard: Option<f64>,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            min_step: 1e-4,
            newton_tol: 1e-8,
            max_newton: 50,
            guard_factor: 1e3,
            guard: None,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step && self.initial_step <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < min_step ({}) <= initial_step ({}) <= 1",
                self.min_step, self.initial_step
            )));
        }
        if !(self.newton_tol > 0.0) || self.max_newton == 0 {
            return Err(Error::InvalidParams("newton_tol and max_newton must be positive".into()));
        }
        if !(self.guard_factor > 0.0) || self.guard.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::InvalidParams("bound guard must be positive".into()));
        }
        Ok(())
    }

    fn newton_options(&self, guard: f64) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.max_newton,
            max_halvings: 10,
            guard: Some(guard),
        }
    }

    fn steps(&self) -> StepControl {
        StepControl {
            initial_step: self.initial_step,
            min_step: self.min_step,
        }
    }

    fn guard_for(&self, base: &State) -> f64 {
        self.guard.unwrap_or(self.guard_factor * base.norm())
    }
}

fn grid_problem(params: &SystemParams, domain: &Domain, t: f64) -> GridProblem {
    GridProblem::new(domain, Reaction::system(params, t))
}

/// Strong residual `−Δ_h u_i − μ_i (u_i⁺)^p − t Σ λ_ij (u_i⁺)^{α_ij} (u_j⁺)^{β_ij}`.
#[allow(non_snake_case)]
pub fn residual_F(params: &SystemParams, u: &State, t: f64) -> Result<State> {
    check(params, u)?;
    let prob = grid_problem(params, u.domain(), t);
    Ok(State::from_flat(u.domain(), params.len(), &prob.residual(&u.to_flat())))
}

/// Directional derivative of [`residual_F`] at `u` along `v` (semismooth selection).
pub fn jacobian_apply(params: &SystemParams, u: &State, t: f64, v: &State) -> Result<State> {
    check(params, u)?;
    check(params, v)?;
    if u.domain() != v.domain() {
        return Err(Error::DomainMismatch);
    }
    let prob = grid_problem(params, u.domain(), t);
    let lin = prob.linearize(&u.to_flat());
    Ok(State::from_flat(u.domain(), params.len(), &prob.apply(&lin, &v.to_flat())))
}

fn check(params: &SystemParams, u: &State) -> Result<()> {
    if u.len() != params.len() {
        return Err(Error::InvalidParams(format!(
            "state has {} components, parameters describe {}",
            u.len(),
            params.len()
        )));
    }
    Ok(())
}

/// Relative strong residual `‖F(u)‖ / ‖u‖` in discrete `L²`.
pub fn relative_residual(params: &SystemParams, u: &State, t: f64) -> Result<f64> {
    let r = residual_F(params, u, t)?;
    let vol = u.domain().cell_volume();
    let rn = (vol * dot(&r.to_flat(), &r.to_flat())).sqrt();
    let un = (vol * dot(&u.to_flat(), &u.to_flat())).sqrt();
    Ok(if un > 0.0 { rn / un } else { rn })
}

/// Semismooth Newton at fixed `t` from `u0`.
pub fn newton_solve(params: &SystemParams, u0: &State, t: f64, cfg: &ContinuationConfig) -> Result<State> {
    Ok(newton_solve_detailed(params, u0, t, cfg)?.0)
}

/// As [`newton_solve`], also returning the iteration count and final relative residual.
pub fn newton_solve_detailed(
    params: &SystemParams,
    u0: &State,
    t: f64,
    cfg: &ContinuationConfig,
) -> Result<(State, usize, f64)> {
    check(params, u0)?;
    cfg.validate()?;
    let prob = grid_problem(params, u0.domain(), t);
    let out = newton(&prob, u0.to_flat(), cfg.newton_options(cfg.guard_for(u0)))?;
    Ok((
        State::from_flat(u0.domain(), params.len(), &out.x),
        out.iterations,
        out.rel_residual,
    ))
}

/// Product of the scalar ground states `−Δu_i = μ_i (u_i⁺)^p`: the `t = 0` solution.
pub fn uncoupled_product(params: &SystemParams, domain: &Domain) -> Result<State> {
    let comps = params
        .mu
        .iter()
        .map(|&mu| least_energy_scalar(mu, params.p, domain))
        .collect::<Result<Vec<_>>>()?;
    State::new(comps)
}

/// One accepted continuation step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub norms: Vec<f64>,
    pub mins: Vec<f64>,
    /// `max_i ‖u_i‖_∞`, the bound monitored along the path.
    pub sup_norm: f64,
    /// Nehari scaling of the normalized state at this `t` (≈ the component norms).
    pub s: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub state: State,
    pub trace: Vec<TraceRow>,
    pub guard: f64,
    pub newton_iterations: usize,
}

fn trace_row(params: &SystemParams, u: &State, t: f64, residual: f64, iterations: usize) -> TraceRow {
    let s = normalize_to_sphere(u)
        .and_then(|n| project_to_nehari(params, &n, t))
        .map(|(s, _)| s)
        .unwrap_or_default();
    TraceRow {
        t,
        norms: u.component_norms(),
        mins: u.components().iter().map(GridFunction::min_value).collect(),
        sup_norm: u.max_abs(),
        s,
        residual,
        iterations,
    }
}

/// Rescales a flat state onto `N_t` (componentwise factors `s_i / ‖u_i‖`).
fn nehari_factors(params: &SystemParams, u: &State, t: f64) -> Option<Vec<f64>> {
    let norms = u.component_norms();
    let n = normalize_to_sphere(u).ok()?;
    let (s, _) = project_to_nehari(params, &n, t).ok()?;
    Some(s.iter().zip(&norms).map(|(s, n)| s / n).collect())
}

fn scale_blocks(x: &[f64], factors: &[f64]) -> Vec<f64> {
    let block = x.len() / factors.len();
    x.chunks(block)
        .zip(factors)
        .flat_map(|(b, f)| b.iter().map(move |v| v * f))
        .collect()
}

/// Homotopy continuation from the uncoupled product solution at `t = 0` to `t = 1`.
pub fn continue_in_t(params: &SystemParams, domain: &Domain, cfg: &ContinuationConfig) -> Result<ContinuationResult> {
    let base = uncoupled_product(params, domain)?;
    continue_in_t_from(params, &base, cfg)
}

/// Continuation from a given `t = 0` solution.
pub fn continue_in_t_from(params: &SystemParams, base: &State, cfg: &ContinuationConfig) -> Result<ContinuationResult> {
    continue_to(params, base, 1.0, cfg)
}

/// Continuation from a `t = 0` solution to `t = t_end`.
pub fn continue_to(params: &SystemParams, base: &State, t_end: f64, cfg: &ContinuationConfig) -> Result<ContinuationResult> {
    check(params, base)?;
    cfg.validate()?;
    if !(0.0..=1.0).contains(&t_end) {
        return Err(Error::InvalidParams(format!("t = {t_end} must lie in [0, 1]")));
    }
    let domain = base.domain().clone();
    let l = params.len();
    let guard = cfg.guard_for(base);
    let opts = cfg.newton_options(guard);
    // make sure the base point is a solution of the t = 0 system
    let start = newton(&grid_problem(params, &domain, 0.0), base.to_flat(), opts)?;
    let start_state = State::from_flat(&domain, l, &start.x);
    let mut trace = vec![trace_row(params, &start_state, 0.0, start.rel_residual, start.iterations)];
    let mut total = start.iterations;
    if t_end == 0.0 {
        return Ok(ContinuationResult {
            state: start_state,
            trace,
            guard,
            newton_iterations: total,
        });
    }

    let make = |tau: f64| grid_problem(params, &domain, tau * t_end);
    let correct = |x: &[f64], tau: f64| {
        let u = State::from_flat(&domain, l, x);
        nehari_factors(params, &u, tau * t_end).map(|f| scale_blocks(x, &f))
    };
    let mut record = |tau: f64, out: &NewtonOutcome| {
        let u = State::from_flat(&domain, l, &out.x);
        total += out.iterations;
        trace.push(trace_row(params, &u, tau * t_end, out.rel_residual, out.iterations));
    };
    let x = continuation(&make, start.x, &correct, cfg.steps(), opts, &mut record).map_err(|e| match e {
        Error::StepFloorReached { last_t } => Error::StepFloorReached { last_t: last_t * t_end },
        e => e,
    })?;
    Ok(ContinuationResult {
        state: State::from_flat(&domain, l, &x),
        trace,
        guard,
        newton_iterations: total,
    })
}

/// Writes `t,norm_u1,…,norm_uℓ,min_u1,…,min_uℓ,residual`.
pub fn write_trace_csv(trace: &[TraceRow], mut w: impl Write) -> std::io::Result<()> {
    let l = trace.first().map_or(0, |r| r.norms.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=l).map(|i| format!("norm_u{i}")));
    header.extend((1..=l).map(|i| format!("min_u{i}")));
    header.push("residual".into());
    writeln!(w, "{}", header.join(","))?;
    for row in trace {
        let mut cells = vec![format!("{:.16e}", row.t)];
        cells.extend(row.norms.iter().map(|v| format!("{v:.16e}")));
        cells.extend(row.mins.iter().map(|v| format!("{v:.16e}")));
        cells.push(format!("{:.16e}", row.residual));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Solves the projected system on the `k` lowest sine modes at parameter `t`.
///
/// The `t = 0` start is the truncation of the grid ground states, re-solved in
/// the Galerkin space and continued to `t`.
pub fn galerkin_solve(
    params: &SystemParams,
    domain: &Domain,
    k: usize,
    t: f64,
    cfg: &ContinuationConfig,
) -> Result<State> {
    cfg.validate()?;
    if k == 0 || k > domain.len() {
        return Err(Error::ModeOutOfRange { k, max: domain.len() });
    }
    let l = params.len();
    let base = uncoupled_product(params, domain)?;
    let guard = cfg.guard_for(&base);
    let opts = cfg.newton_options(guard);
    let make = |tau: f64| GalerkinProblem::new(domain, Reaction::system(params, tau * t), k);
    let p0 = make(0.0);
    let start = newton(&p0, p0.from_grid(&base.to_flat()), opts)?;
    let x = if t == 0.0 {
        start.x
    } else {
        let correct = |x: &[f64], tau: f64| {
            let u = State::from_flat(domain, l, &p0.to_grid(x));
            nehari_factors(params, &u, tau * t).map(|f| scale_blocks(x, &f))
        };
        continuation(&make, start.x, &correct, cfg.steps(), opts, &mut |_, _| {})?
    };
    Ok(State::from_flat(domain, l, &p0.to_grid(&x)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Overlap {
    pub i: usize,
    pub j: usize,
    /// `∫ u_i⁺ u_j⁺`
    pub integral: f64,
    /// `∫ u_i⁺ u_j⁺ / (‖u_i⁺‖_{L²} ‖u_j⁺‖_{L²})`
    pub normalized: f64,
}

/// Certificate and diagnostics of a computed state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub t: f64,
    pub strong_residuals: Vec<f64>,
    pub relative_residual: f64,
    pub nehari_residuals: Vec<f64>,
    /// `max_i |nehari_i| / max_i ‖u_i‖²`
    pub nehari_relative: f64,
    /// Nehari scaling of the normalized state; equals the component norms on `N_t`.
    pub s: Vec<f64>,
    pub norms: Vec<f64>,
    pub min_values: Vec<f64>,
    pub max_values: Vec<f64>,
    pub energy_j: f64,
    pub psi: Option<f64>,
    pub overlaps: Vec<Overlap>,
    pub fully_nontrivial: bool,
    pub strictly_positive: bool,
    pub residual_ok: bool,
    pub nehari_ok: bool,
    pub certified: bool,
    pub converged: bool,
    pub iterations: usize,
}

pub fn overlaps(u: &State) -> Vec<Overlap> {
    let vol = u.domain().cell_volume();
    let pos: Vec<Vec<f64>> = u
        .components()
        .iter()
        .map(|c| c.values().iter().map(|v| v.max(0.0)).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let integral = vol * dot(&pos[i], &pos[j]);
            let ni = (vol * dot(&pos[i], &pos[i])).sqrt();
            let nj = (vol * dot(&pos[j], &pos[j])).sqrt();
            let normalized = if ni > 0.0 && nj > 0.0 { integral / (ni * nj) } else { 0.0 };
            out.push(Overlap { i, j, integral, normalized });
        }
    }
    out
}

/// Strong and Nehari residuals, positivity, overlaps and energies of `u` at `t`.
pub fn verify_solution(params: &SystemParams, u: &State, t: f64) -> Result<SolveReport> {
    check(params, u)?;
    let vol = u.domain().cell_volume();
    let r = residual_F(params, u, t)?;
    let strong_residuals: Vec<f64> = r.components().iter().map(GridFunction::l2_norm).collect();
    let relative_residual = relative_residual(params, u, t)?;
    let nehari_residuals = nehari_residual(params, u, t)?;
    let a = coeffs_from_state(params, u, t)?.a;
    let amax = a.iter().copied().fold(0.0, f64::max);
    let nehari_relative = if amax > 0.0 {
        nehari_residuals.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / amax
    } else {
        f64::INFINITY
    };
    let check = fully_nontrivial_check_at(params, u, t)?;
    let s = normalize_to_sphere(u)
        .and_then(|n| project_to_nehari(params, &n, t))
        .map(|(s, _)| s)
        .unwrap_or_default();
    let min_values: Vec<f64> = u.components().iter().map(GridFunction::min_value).collect();
    let residual_ok = relative_residual <= CERT_TOL;
    let nehari_ok = nehari_relative <= CERT_TOL;
    let fully_nontrivial = check.fully_nontrivial;
    let certified = residual_ok && nehari_ok && fully_nontrivial;
    let _ = vol;
    Ok(SolveReport {
        t,
        strong_residuals,
        relative_residual,
        nehari_residuals,
        nehari_relative,
        s,
        norms: u.component_norms(),
        strictly_positive: min_values.iter().all(|&m| m > 0.0),
        min_values,
        max_values: u.components().iter().map(GridFunction::max_value).collect(),
        energy_j: energy_j(params, u)?,
        psi: psi(params, u).ok(),
        overlaps: overlaps(u),
        fully_nontrivial,
        residual_ok,
        nehari_ok,
        certified,
        converged: certified,
        iterations: 0,
    })
}

/// One point of a coupling-strength sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub kappa: f64,
    pub report: Option<SolveReport>,
    pub error: Option<String>,
}

/// Re-solves the `t = 1` system with `λ_ij ← κ λ_ij` for each multiplier,
/// continuing in `κ` from the previous successful point.
pub fn lambda_sweep(
    params: &SystemParams,
    multipliers: &[f64],
    domain: &Domain,
    cfg: &ContinuationConfig,
) -> Result<Vec<SweepPoint>> {
    if multipliers.is_empty() {
        return Err(Error::InvalidParams("empty multiplier schedule".into()));
    }
    if multipliers.iter().any(|&k| !(k >= 1.0)) || multipliers.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("multipliers must be >= 1 and ascending".into()));
    }
    let base = continue_in_t(params, domain, cfg)?;
    let l = params.len();
    let mut anchor_kappa = 1.0;
    let mut anchor = base.state.clone();
    let mut points = Vec::with_capacity(multipliers.len());
    for &kappa in multipliers {
        let solved = if kappa == anchor_kappa {
            Ok((anchor.clone(), 0))
        } else {
            let from = anchor_kappa;
            let scaled = |tau: f64| params.with_lambda_scaled(from + tau * (kappa - from));
            let make = |tau: f64| grid_problem(&scaled(tau), domain, 1.0);
            let correct = |x: &[f64], tau: f64| {
                let u = State::from_flat(domain, l, x);
                nehari_factors(&scaled(tau), &u, 1.0).map(|f| scale_blocks(x, &f))
            };
            let mut iterations = 0;
            continuation(
                &make,
                anchor.to_flat(),
                &correct,
                cfg.steps(),
                cfg.newton_options(base.guard),
                &mut |_, out| iterations += out.iterations,
            )
            .map(|x| (State::from_flat(domain, l, &x), iterations))
        };
        match solved.and_then(|(u, it)| {
            let mut rep = verify_solution(&params.with_lambda_scaled(kappa), &u, 1.0)?;
            rep.iterations = it;
            Ok((u, rep))
        }) {
            Ok((u, rep)) => {
                anchor = u;
                anchor_kappa = kappa;
                points.push(SweepPoint {
                    kappa,
                    report: Some(rep),
                    error: None,
                });
            }
            Err(e) => points.push(SweepPoint {
                kappa,
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(points)
}

/// Writes `kappa,norm_u1,…,norm_uℓ,overlap_ij…,residual,status`.
pub fn write_sweep_csv(points: &[SweepPoint], l: usize, mut w: impl Write) -> std::io::Result<()> {
    let mut header = vec!["kappa".to_string()];
    header.extend((1..=l).map(|i| format!("norm_u{i}")));
    for i in 1..=l {
        for j in i + 1..=l {
            header.push(format!("overlap_{i}{j}"));
        }
    }
    header.push("residual".into());
    header.push("status".into());
    writeln!(w, "{}", header.join(","))?;
    let pairs = l * (l - 1) / 2;
    for pt in points {
        let mut cells = vec![format!("{:.16e}", pt.kappa)];
        match &pt.report {
            Some(r) => {
                cells.extend(r.norms.iter().map(|v| format!("{v:.16e}")));
                cells.extend(r.overlaps.iter().map(|o| format!("{:.16e}", o.integral)));
                cells.push(format!("{:.16e}", r.relative_residual));
                cells.push(if r.certified { "ok" } else { "uncertified" }.into());
            }
            None => {
                cells.extend(std::iter::repeat_n("nan".to_string(), l + pairs + 1));
                cells.push("failed".into());
            }
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
