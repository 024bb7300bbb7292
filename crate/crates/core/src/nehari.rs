//! Nehari machinery for the `t`-parametrized system
//!
//! ```text
//! −Δu_i = μ_i (u_i⁺)^p + t Σ_{j≠i} λ_ij (u_i⁺)^{α_ij} (u_j⁺)^{β_ij}
//! ```
//!
//! `K_t(u)` is the inverse Laplacian of the right-hand side, `I_t(u) = u − K_t(u)`,
//! and the Nehari set `N_t` consists of states with every `u_i ≠ 0` and
//! `⟨I_t,i(u), u_i⟩ = 0`. Every state whose components have nonvanishing
//! positive parts is scaled onto `N_t` componentwise by the unique zero of the
//! scaling map with coefficients computed from the state ([`project_to_nehari`]).

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{h1_inner, poisson_values, Domain, GridFunction};
use crate::reaction::{cross_power_sum, positive_power_sum, Reaction};
use crate::scaling::{solve_scaling, ScalingCoeffs};

/// Nehari-residual tolerance relative to `max a_{u,i}`.
pub const NEHARI_TOL: f64 = 1e-9;
/// `b_{u,i}` below this (scaled by `a_{u,i}^{(p+1)/2}`) counts as a vanishing positive part.
pub const BOUNDARY_B: f64 = 1e-14;

/// Exponents and coefficients of the competitive system.
///
/// Matrices are `ℓ×ℓ` row-major with ignored diagonal. Neither `λ_ij = λ_ji`
/// nor `β_ij = α_ji` is assumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub p: f64,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SystemParams {
    pub fn new(p: f64, mu: Vec<f64>, lambda: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let params = Self {
            p,
            mu,
            lambda,
            alpha,
            beta,
        };
        params.validate()?;
        Ok(params)
    }

    /// Two species with Lotka–Volterra exponents `α = β = 1`.
    pub fn lotka_volterra(p: f64, mu: [f64; 2], lambda12: f64, lambda21: f64) -> Result<Self> {
        Self::new(
            p,
            mu.to_vec(),
            vec![0.0, lambda12, lambda21, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
        )
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.len() + j
    }

    /// Same exponents with every `λ_ij` multiplied by `kappa`.
    pub fn with_lambda_scaled(&self, kappa: f64) -> Self {
        let mut c = self.clone();
        c.lambda.iter_mut().for_each(|v| *v *= kappa);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.len();
        let bad = |m: String| Err(Error::InvalidParams(m));
        if l < 2 {
            return bad(format!("need at least 2 species, got {l}"));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must exceed 1", self.p));
        }
        if self.lambda.len() != l * l || self.alpha.len() != l * l || self.beta.len() != l * l {
            return bad(format!("lambda, alpha and beta must be {l}x{l} matrices"));
        }
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("mu[{i}] = {m} must be positive"));
            }
        }
        for i in 0..l {
            for j in (0..l).filter(|&j| j != i) {
                let k = self.idx(i, j);
                let (lam, a, b) = (self.lambda[k], self.alpha[k], self.beta[k]);
                if !(lam <= 0.0 && lam.is_finite()) {
                    return bad(format!("lambda[{i}][{j}] = {lam} must be negative (competitive)"));
                }
                if lam == 0.0 {
                    warn!("lambda[{i}][{j}] = 0: species {i} and {j} decouple");
                }
                if !(a > 0.0 && b > 0.0) {
                    return bad(format!("alpha[{i}][{j}] = {a} and beta[{i}][{j}] = {b} must be positive"));
                }
                if a + b >= self.p {
                    return bad(format!(
                        "alpha[{i}][{j}] + beta[{i}][{j}] = {} must be < p = {}",
                        a + b,
                        self.p
                    ));
                }
            }
        }
        Ok(())
    }
}

/// An `ℓ`-tuple of grid functions on a shared domain.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    components: Vec<GridFunction>,
}

impl State {
    pub fn new(components: Vec<GridFunction>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidParams("a state needs at least one component".into()));
        };
        if components.iter().any(|c| c.domain() != first.domain()) {
            return Err(Error::DomainMismatch);
        }
        Ok(Self { components })
    }

    pub(crate) fn from_flat(domain: &Domain, l: usize, flat: &[f64]) -> Self {
        let n = domain.len();
        Self {
            components: (0..l)
                .map(|i| GridFunction::from_raw(domain, flat[i * n..(i + 1) * n].to_vec()))
                .collect(),
        }
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        self.components.iter().flat_map(|c| c.values().iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        self.components[0].domain()
    }

    pub fn components(&self) -> &[GridFunction] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &GridFunction {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<GridFunction> {
        self.components
    }

    /// Componentwise `s_i · u_i`.
    pub fn scaled_by(&self, s: &[f64]) -> Self {
        Self {
            components: self.components.iter().zip(s).map(|(c, &si)| c.scaled(si)).collect(),
        }
    }

    /// Dirichlet norms `‖u_i‖`.
    pub fn component_norms(&self) -> Vec<f64> {
        self.components.iter().map(GridFunction::h1_norm).collect()
    }

    /// `‖u‖ = (Σ ‖u_i‖²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.component_norms().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    fn check_len(&self, params: &SystemParams) -> Result<()> {
        if self.len() != params.len() {
            return Err(Error::InvalidParams(format!(
                "state has {} components, parameters describe {}",
                self.len(),
                params.len()
            )));
        }
        Ok(())
    }
}

/// Scaling-map coefficients `(a_u, b_u, d_u)` of a state at homotopy parameter `t`.
pub fn coeffs_from_state(params: &SystemParams, u: &State, t: f64) -> Result<ScalingCoeffs> {
    u.check_len(params)?;
    let l = params.len();
    let vol = u.domain().cell_volume();
    let a = u.component_norms().iter().map(|v| v * v).collect();
    let b = (0..l)
        .map(|i| params.mu[i] * vol * positive_power_sum(u.component(i).values(), params.p + 1.0))
        .collect();
    let mut d = vec![0.0; l * l];
    for i in 0..l {
        for j in (0..l).filter(|&j| j != i) {
            let k = params.idx(i, j);
            if params.lambda[k] == 0.0 || t == 0.0 {
                continue;
            }
            d[k] = t
                * (-params.lambda[k])
                * vol
                * cross_power_sum(
                    u.component(i).values(),
                    u.component(j).values(),
                    params.alpha[k] + 1.0,
                    params.beta[k],
                );
        }
    }
    Ok(ScalingCoeffs {
        p: params.p,
        a,
        b,
        d,
        alpha: params.alpha.clone(),
        beta: params.beta.clone(),
    })
}

/// `K_t(u)`: componentwise inverse Laplacian of the reaction terms.
#[allow(non_snake_case)]
pub fn K_apply(params: &SystemParams, u: &State, t: f64) -> Result<State> {
    u.check_len(params)?;
    let g = Reaction::system(params, t).eval(&u.to_flat());
    let n = u.domain().len();
    let mut flat = Vec::with_capacity(g.len());
    for i in 0..params.len() {
        flat.extend(poisson_values(u.domain(), &g[i * n..(i + 1) * n]));
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver("non-finite Poisson solution".into()));
    }
    Ok(State::from_flat(u.domain(), params.len(), &flat))
}

/// `⟨I_t,i(u), u_i⟩ = ‖u_i‖² − ⟨K_t,i(u), u_i⟩` for every `i`.
pub fn nehari_residual(params: &SystemParams, u: &State, t: f64) -> Result<Vec<f64>> {
    let k = K_apply(params, u, t)?;
    (0..params.len())
        .map(|i| {
            let ui = u.component(i);
            Ok(h1_inner(ui, ui)? - h1_inner(k.component(i), ui)?)
        })
        .collect()
}

/// `u_i / ‖u_i‖` for every component.
pub fn normalize_to_sphere(u: &State) -> Result<State> {
    let norms = u.component_norms();
    if let Some(i) = norms.iter().position(|&n| !(n > 0.0)) {
        return Err(Error::ZeroComponent(i));
    }
    Ok(u.scaled_by(&norms.iter().map(|n| 1.0 / n).collect::<Vec<_>>()))
}

fn check_projectable(c: &ScalingCoeffs) -> Result<()> {
    for i in 0..c.len() {
        if !(c.a[i] > 0.0) {
            return Err(Error::ZeroComponent(i));
        }
        if c.b[i] <= BOUNDARY_B * c.a[i].powf(0.5 * (c.p + 1.0)) {
            return Err(Error::NotInU(i));
        }
    }
    Ok(())
}

/// Nehari projection `m_t(u) = s_u u`; returns `(s_u, s_u u)`.
pub fn project_to_nehari(params: &SystemParams, u: &State, t: f64) -> Result<(Vec<f64>, State)> {
    let c = coeffs_from_state(params, u, t)?;
    check_projectable(&c)?;
    let s = solve_scaling(&c)?;
    let su = u.scaled_by(&s);
    Ok((s, su))
}

/// `S_t(u) = s_u u − K_t(s_u u)`.
#[allow(non_snake_case)]
pub fn S_map(params: &SystemParams, u: &State, t: f64) -> Result<State> {
    let (_, su) = project_to_nehari(params, u, t)?;
    let k = K_apply(params, &su, t)?;
    let comps = su
        .components()
        .iter()
        .zip(k.components())
        .map(|(a, b)| a.axpy(-1.0, b))
        .collect::<Result<Vec<_>>>()?;
    State::new(comps)
}

/// `J(u) = ½ Σ ‖u_i‖² − 1/(p+1) Σ μ_i ∫ (u_i⁺)^{p+1}`.
pub fn energy_j(params: &SystemParams, u: &State) -> Result<f64> {
    let c = coeffs_from_state(params, u, 0.0)?;
    let p = params.p;
    Ok(0.5 * c.a.iter().sum::<f64>() - c.b.iter().sum::<f64>() / (p + 1.0))
}

/// `Ψ` on the sphere product from the integrals `b_i = μ_i ∫ (u_i⁺)^{p+1}`:
/// `(½ − 1/(p+1)) Σ b_i^{−2/(p−1)}`.
pub fn psi_from_integrals(p: f64, b: &[f64]) -> f64 {
    (0.5 - 1.0 / (p + 1.0)) * b.iter().map(|v| v.powf(-2.0 / (p - 1.0))).sum::<f64>()
}

/// `Ψ(u) = J(s⁰_u u)` in closed form.
///
/// Written as `(½ − 1/(p+1)) Σ a_i^{(p+1)/(p−1)} b_i^{−2/(p−1)}`, which is
/// homogeneous of degree zero in each component and reduces to
/// [`psi_from_integrals`] on the sphere product.
pub fn psi(params: &SystemParams, u: &State) -> Result<f64> {
    let c = coeffs_from_state(params, u, 0.0)?;
    check_projectable(&c)?;
    let p = params.p;
    Ok((0.5 - 1.0 / (p + 1.0))
        * c.a
            .iter()
            .zip(&c.b)
            .map(|(a, b)| a.powf((p + 1.0) / (p - 1.0)) * b.powf(-2.0 / (p - 1.0)))
            .sum::<f64>())
}

/// `s⁰_u`: the uncoupled Nehari scaling, `(a_i / b_i)^{1/(p−1)}`.
pub fn uncoupled_scaling(params: &SystemParams, u: &State) -> Result<Vec<f64>> {
    let c = coeffs_from_state(params, u, 0.0)?;
    check_projectable(&c)?;
    Ok(c
        .a
        .iter()
        .zip(&c.b)
        .map(|(a, b)| (a / b).powf(1.0 / (params.p - 1.0)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentCheck {
    pub norm: f64,
    /// `μ_i ∫ (u_i⁺)^{p+1}`
    pub power_integral: f64,
    /// `‖u_i‖² ≤ μ_i ∫ (u_i⁺)^{p+1}` within tolerance.
    pub chain_holds: bool,
    /// `‖u_i‖^{p+1} / μ_i ∫ (u_i⁺)^{p+1}`; the Sobolev-type quotient that bounds `‖u_i‖` below on `N`.
    pub sobolev_quotient: f64,
    pub min: f64,
    pub max: f64,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NontrivialReport {
    pub components: Vec<ComponentCheck>,
    pub nehari_residual: Vec<f64>,
    pub on_manifold: bool,
    pub fully_nontrivial: bool,
}

/// Norms, positivity and the Nehari chain `‖u_i‖² ≤ μ_i ∫(u_i⁺)^{p+1}` at `t = 1`.
pub fn fully_nontrivial_check(params: &SystemParams, u: &State) -> Result<NontrivialReport> {
    fully_nontrivial_check_at(params, u, 1.0)
}

pub fn fully_nontrivial_check_at(params: &SystemParams, u: &State, t: f64) -> Result<NontrivialReport> {
    let c = coeffs_from_state(params, u, t)?;
    let res = nehari_residual(params, u, t)?;
    let scale = c.a.iter().copied().fold(0.0, f64::max);
    let on_manifold = scale > 0.0 && res.iter().all(|r| r.abs() <= 10.0 * NEHARI_TOL * scale);
    let components: Vec<ComponentCheck> = (0..params.len())
        .map(|i| {
            let norm = c.a[i].sqrt();
            let b = c.b[i];
            let comp = u.component(i);
            ComponentCheck {
                norm,
                power_integral: b,
                chain_holds: c.a[i] <= b + 10.0 * NEHARI_TOL * scale,
                sobolev_quotient: if b > 0.0 { norm.powf(params.p + 1.0) / b } else { f64::INFINITY },
                min: comp.min_value(),
                max: comp.max_value(),
                nontrivial: norm > 0.0 && b > BOUNDARY_B * c.a[i].powf(0.5 * (params.p + 1.0)),
            }
        })
        .collect();
    let fully_nontrivial = components.iter().all(|c| c.nontrivial);
    Ok(NontrivialReport {
        components,
        nehari_residual: res,
        on_manifold,
        fully_nontrivial,
    })
}
