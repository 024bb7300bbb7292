//! Synchronized solutions `(t₁w, t₂w)` of two-species systems.
//!
//! A pair `(w, ρw)` solves the system exactly when both exponent sums agree
//! (`q := α₁₂+β₁₂ = α₂₁+β₂₁`) and `λ₁₂/λ₂₁ = (μ₁/μ₂)^{(α₂₁−β₁₂−1)/(p−1)}`. The
//! profile then solves the scalar problem `−Δw = μ₁ w^p − a w^q` with
//! `a = −λ₁₂ (μ₁/μ₂)^{β₁₂/(p−1)}` and `ρ = (μ₁/μ₂)^{1/(p−1)}`.

use std::io::Write;

use log::{debug, warn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dot, lp_integral, Domain, GridFunction};
use crate::nehari::{State, SystemParams};
use crate::scalar::{scalar_residual, two_term_scalar_from};
use crate::system::{jacobian_apply, relative_residual, residual_F};

/// Absolute tolerance on the exponent sums.
pub const EXPONENT_TOL: f64 = 1e-12;
/// Relative tolerance on `λ₁₂/λ₂₁`.
pub const RATIO_TOL: f64 = 1e-10;
/// Relative strong-residual certificate of [`sync_solve`].
pub const SYNC_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncFailure {
    ExponentMismatch,
    RatioMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncVerdict {
    pub holds: bool,
    /// Common exponent sum, when the sums agree.
    pub q: Option<f64>,
    pub a: f64,
    pub rho: f64,
    /// `(μ₁/μ₂)^{(α₂₁−β₁₂−1)/(p−1)}`, the ratio `λ₁₂/λ₂₁` must equal.
    pub required_ratio: f64,
    pub actual_ratio: f64,
    pub reason: Option<SyncFailure>,
}

fn check_pair(params: &SystemParams) -> Result<()> {
    params.validate()?;
    if params.len() != 2 {
        return Err(Error::InvalidParams(format!(
            "synchronized solutions need two species, got {}",
            params.len()
        )));
    }
    if params.lambda[1] >= 0.0 || params.lambda[2] >= 0.0 {
        return Err(Error::InvalidParams("synchronization needs lambda12, lambda21 < 0".into()));
    }
    Ok(())
}

pub fn sync_criterion(params: &SystemParams) -> Result<SyncVerdict> {
    check_pair(params)?;
    let p = params.p;
    let (mu1, mu2) = (params.mu[0], params.mu[1]);
    let (l12, l21) = (params.lambda[1], params.lambda[2]);
    let (a12, b12) = (params.alpha[1], params.beta[1]);
    let (a21, b21) = (params.alpha[2], params.beta[2]);
    let ratio = mu1 / mu2;
    let rho = ratio.powf(1.0 / (p - 1.0));
    let a = -l12 * ratio.powf(b12 / (p - 1.0));
    let required_ratio = ratio.powf((a21 - b12 - 1.0) / (p - 1.0));
    let actual_ratio = l12 / l21;
    let q_ok = ((a12 + b12) - (a21 + b21)).abs() <= EXPONENT_TOL;
    let ratio_ok = (actual_ratio - required_ratio).abs() <= RATIO_TOL * actual_ratio.abs();
    let reason = if !q_ok {
        Some(SyncFailure::ExponentMismatch)
    } else if !ratio_ok {
        Some(SyncFailure::RatioMismatch)
    } else {
        None
    };
    Ok(SyncVerdict {
        holds: reason.is_none(),
        q: q_ok.then_some(a12 + b12),
        a,
        rho,
        required_ratio,
        actual_ratio,
        reason,
    })
}

/// Builds `(w, ρw)` from the profile equation `−Δw + a(w⁺)^q = μ₁(w⁺)^p`.
pub fn sync_solve(params: &SystemParams, domain: &Domain) -> Result<State> {
    sync_solve_from(params, &domain.first_eigenfunction())
}

/// As [`sync_solve`], starting the profile solve from `init`.
pub fn sync_solve_from(params: &SystemParams, init: &GridFunction) -> Result<State> {
    let v = sync_criterion(params)?;
    let Some(q) = v.q.filter(|_| v.holds) else {
        return Err(Error::CriterionFails(match v.reason {
            Some(SyncFailure::ExponentMismatch) => format!(
                "exponent sums differ: {} vs {}",
                params.alpha[1] + params.beta[1],
                params.alpha[2] + params.beta[2]
            ),
            _ => format!(
                "lambda12/lambda21 = {} but synchronization requires {}",
                v.actual_ratio, v.required_ratio
            ),
        }));
    };
    let w = two_term_scalar_from(params.mu[0], params.p, v.a, q, init)?;
    let u = State::new(vec![w.clone(), w.scaled(v.rho)])?;
    let res = relative_residual(params, &u, 1.0)?;
    if res > SYNC_TOL {
        return Err(Error::NonConvergence(format!(
            "synchronized pair residual {res:e} exceeds {SYNC_TOL:e}"
        )));
    }
    Ok(u)
}

/// Best synchronized approximation of a two-species state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzFit {
    pub t1: f64,
    pub t2: f64,
    /// Relative strong residual of `(t₁w, t₂w)` in the full system at `t = 1`.
    pub residual: f64,
}

/// Fits `(t₁w, t₂w)` to `u` and measures how far the ansatz is from solving the system.
///
/// The profile `w` is the leading left singular vector of the `2 × n` matrix of
/// nodal values (best rank-one fit); `(t₁, t₂)` is then refined by Gauss-Newton
/// on the strong residual.
pub fn synchronized_ansatz_gap(params: &SystemParams, u: &State) -> Result<AnsatzFit> {
    check_pair(params)?;
    if u.len() != 2 {
        return Err(Error::InvalidParams("ansatz fit needs a two-species state".into()));
    }
    let domain = u.domain();
    let (x, y) = (u.component(0).values(), u.component(1).values());
    // eigenvector of the 2×2 Gram matrix
    let (g11, g12, g22) = (dot(x, x), dot(x, y), dot(y, y));
    let tr = g11 + g22;
    let det = g11 * g22 - g12 * g12;
    let top = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let (mut c1, mut c2) = if g12.abs() > 0.0 { (g12, top - g11) } else if g11 >= g22 { (1.0, 0.0) } else { (0.0, 1.0) };
    let cn = (c1 * c1 + c2 * c2).sqrt();
    c1 /= cn;
    c2 /= cn;
    let w = GridFunction::from_raw(domain, x.iter().zip(y).map(|(a, b)| c1 * a + c2 * b).collect());
    let mut t = [c1, c2];
    let eval = |t: &[f64; 2]| -> Result<(State, f64)> {
        let s = State::new(vec![w.scaled(t[0]), w.scaled(t[1])])?;
        let r = residual_F(params, &s, 1.0)?;
        let rn = dot(&r.to_flat(), &r.to_flat()).sqrt();
        Ok((r, rn))
    };
    let (mut r, mut rn) = eval(&t)?;
    for _ in 0..50 {
        let s = State::new(vec![w.scaled(t[0]), w.scaled(t[1])])?;
        let zero = GridFunction::zeros(domain);
        let j1 = jacobian_apply(params, &s, 1.0, &State::new(vec![w.clone(), zero.clone()])?)?.to_flat();
        let j2 = jacobian_apply(params, &s, 1.0, &State::new(vec![zero, w.clone()])?)?.to_flat();
        let rf = r.to_flat();
        let (a11, a12, a22) = (dot(&j1, &j1), dot(&j1, &j2), dot(&j2, &j2));
        let (b1, b2) = (-dot(&j1, &rf), -dot(&j2, &rf));
        let d = a11 * a22 - a12 * a12;
        if d.abs() <= 1e-300 {
            break;
        }
        let step = [(a22 * b1 - a12 * b2) / d, (a11 * b2 - a12 * b1) / d];
        let mut damp = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = [t[0] + damp * step[0], t[1] + damp * step[1]];
            let (rt, rtn) = eval(&trial)?;
            if rtn < rn {
                improved = rtn < rn * (1.0 - 1e-12);
                t = trial;
                r = rt;
                rn = rtn;
                break;
            }
            damp *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let ansatz = State::new(vec![w.scaled(t[0]), w.scaled(t[1])])?;
    Ok(AnsatzFit {
        t1: t[0],
        t2: t[1],
        residual: relative_residual(params, &ansatz, 1.0)?,
    })
}

/// Population variance of `u₂/u₁` over nodes where `u₁` is not negligible.
pub fn nodal_ratio_variance(u: &State) -> Result<f64> {
    if u.len() != 2 {
        return Err(Error::InvalidParams("ratio needs a two-species state".into()));
    }
    let x = u.component(0);
    let floor = 1e-8 * x.max_abs();
    let ratios: Vec<f64> = x
        .values()
        .iter()
        .zip(u.component(1).values())
        .filter(|(a, _)| **a > floor)
        .map(|(a, b)| b / a)
        .collect();
    if ratios.is_empty() {
        return Err(Error::ZeroComponent(0));
    }
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    Ok(ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnboundedRow {
    pub a: f64,
    pub norm_w: f64,
    pub int_wq1: f64,
    pub int_wp1: f64,
    pub residual: f64,
    /// `|‖w‖² + a∫w^{q+1} − μ∫w^{p+1}| / μ∫w^{p+1}`
    pub nehari_relative: f64,
    /// `‖w‖² ≤ μ∫w^{p+1}`
    pub lower_bound_ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnboundedTable {
    pub mu: f64,
    pub p: f64,
    pub q: f64,
    pub rows: Vec<UnboundedRow>,
    /// First row from which the norm column is strictly increasing to the end.
    pub trend_start: Option<usize>,
    pub lower_bound_ok: bool,
}

impl UnboundedTable {
    /// Norms strictly increase over every row.
    pub fn strictly_increasing(&self) -> bool {
        self.trend_start == Some(0)
    }

    /// Writes `a,norm_w,int_wq1,int_wp1,residual`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "a,norm_w,int_wq1,int_wp1,residual")?;
        for r in &self.rows {
            if r.error.is_some() {
                writeln!(w, "{:.16e},nan,nan,nan,nan", r.a)?;
            } else {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.a, r.norm_w, r.int_wq1, r.int_wp1, r.residual
                )?;
            }
        }
        Ok(())
    }
}

/// Absorption levels of the per-row continuation grow by at most this factor.
const GROWTH: f64 = 2.0;

/// Solves `−Δw = μw^p − aw^q` for each `a` and tabulates norms and integrals.
pub fn unboundedness_experiment(mu: f64, p: f64, q: f64, a_list: &[f64], domain: &Domain) -> Result<UnboundedTable> {
    unboundedness_experiment_with(mu, p, q, a_list, domain, 1)
}

/// As [`unboundedness_experiment`] with rows spread over `workers` threads.
///
/// Rows are independent: each one continues in `a` from a level `≤ 1` by
/// doubling, because the profiles concentrate as `a` grows. The table does not
/// depend on `workers`.
pub fn unboundedness_experiment_with(
    mu: f64,
    p: f64,
    q: f64,
    a_list: &[f64],
    domain: &Domain,
    workers: usize,
) -> Result<UnboundedTable> {
    if a_list.is_empty() {
        return Err(Error::InvalidParams("empty absorption schedule".into()));
    }
    if a_list.iter().any(|&a| !(a >= 0.0 && a.is_finite())) || a_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("absorption values must be nonnegative and strictly ascending".into()));
    }
    if !(q > 1.0 && q < p) {
        return Err(Error::InvalidParams(format!("need 1 < q < p, got q = {q}, p = {p}")));
    }
    let workers = workers.clamp(1, a_list.len());
    let mut rows: Vec<Option<UnboundedRow>> = vec![None; a_list.len()];
    std::thread::scope(|scope| {
        let chunk = a_list.len().div_ceil(workers);
        for (as_, out) in a_list.chunks(chunk).zip(rows.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (&a, slot) in as_.iter().zip(out) {
                    *slot = Some(match solve_row(mu, p, q, a, domain) {
                        Ok(w) => row_of(mu, p, q, a, &w),
                        Err(e) => {
                            warn!("a = {a}: {e}");
                            failed_row(a, e)
                        }
                    });
                }
            });
        }
    });
    let rows: Vec<UnboundedRow> = rows.into_iter().map(Option::unwrap).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm_w).collect();
    let mut trend_start = None;
    for k in (0..norms.len()).rev() {
        if !norms[k].is_finite() {
            break;
        }
        if k + 1 < norms.len() && !(norms[k] < norms[k + 1]) {
            break;
        }
        trend_start = Some(k);
    }
    let lower_bound_ok = rows.iter().all(|r| r.lower_bound_ok);
    Ok(UnboundedTable {
        mu,
        p,
        q,
        rows,
        trend_start,
        lower_bound_ok,
    })
}

fn solve_row(mu: f64, p: f64, q: f64, a: f64, domain: &Domain) -> Result<GridFunction> {
    let mut level = a;
    let mut levels = vec![a];
    while level > 1.0 {
        level /= GROWTH;
        levels.push(level);
    }
    let mut w = domain.first_eigenfunction();
    for &level in levels.iter().rev() {
        debug!("absorption continuation at a = {level}");
        w = two_term_scalar_from(mu, p, level, q, &w)?;
    }
    Ok(w)
}

fn failed_row(a: f64, e: Error) -> UnboundedRow {
    UnboundedRow {
        a,
        norm_w: f64::NAN,
        int_wq1: f64::NAN,
        int_wp1: f64::NAN,
        residual: f64::NAN,
        nehari_relative: f64::NAN,
        lower_bound_ok: false,
        error: Some(e.to_string()),
    }
}

fn row_of(mu: f64, p: f64, q: f64, a: f64, w: &GridFunction) -> UnboundedRow {
    let norm = w.h1_norm();
    let iq = lp_integral(w, q + 1.0, true);
    let ip = lp_integral(w, p + 1.0, true);
    let rhs = mu * ip;
    let r = scalar_residual(w, mu, p, a, q);
    let wl2 = w.l2_norm();
    UnboundedRow {
        a,
        norm_w: norm,
        int_wq1: iq,
        int_wp1: ip,
        residual: if wl2 > 0.0 { r.l2_norm() / wl2 } else { r.l2_norm() },
        nehari_relative: (norm * norm + a * iq - rhs).abs() / rhs,
        lower_bound_ok: norm * norm <= rhs,
        error: None,
    }
}
