//! Nodal reaction terms and their semismooth linearization.
//!
//! For species `i` the reaction is
//! `g_i(u) = μ_i (u_i⁺)^p − a (u_i⁺)^q + Σ_{j≠i} tλ_ij (u_i⁺)^{α_ij} (u_j⁺)^{β_ij}`,
//! where the absorption term `a (u⁺)^q` is only used by the scalar two-term
//! problem. The derivative of `x ↦ x⁺` is taken to be 0 at `x ≤ 0`, and nodal
//! factors with negative exponents are evaluated at `max(u, CLAMP)`.

use crate::nehari::SystemParams;

pub(crate) const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Reaction {
    pub l: usize,
    pub p: f64,
    pub mu: Vec<f64>,
    pub absorption: Option<(f64, f64)>,
    /// `t·λ_ij`, row-major.
    pub coupling: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// `(u⁺)^e` for `e > 0`.
#[inline]
fn ppow(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        v.powf(e)
    } else {
        0.0
    }
}

/// Derivative factor `(u⁺)^{e−1}` (zero at nonpositive nodes, clamped below).
#[inline]
fn dpow(v: f64, e: f64) -> f64 {
    if v > 0.0 {
        if e < 1.0 {
            v.max(CLAMP).powf(e - 1.0)
        } else {
            v.powf(e - 1.0)
        }
    } else {
        0.0
    }
}

impl Reaction {
    pub fn system(params: &SystemParams, t: f64) -> Self {
        Self {
            l: params.len(),
            p: params.p,
            mu: params.mu.clone(),
            absorption: None,
            coupling: params.lambda.iter().map(|v| t * v).collect(),
            alpha: params.alpha.clone(),
            beta: params.beta.clone(),
        }
    }

    pub fn scalar(mu: f64, p: f64, absorption: Option<(f64, f64)>) -> Self {
        Self {
            l: 1,
            p,
            mu: vec![mu],
            absorption,
            coupling: vec![0.0],
            alpha: vec![1.0],
            beta: vec![1.0],
        }
    }

    fn coupled(&self, i: usize, j: usize) -> Option<usize> {
        let k = i * self.l + j;
        (i != j && self.coupling[k] != 0.0).then_some(k)
    }

    /// Nodal `g_i(u)` for every species; `u` is species-major.
    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len() / self.l;
        let mut out = vec![0.0; u.len()];
        for i in 0..self.l {
            let ui = &u[i * n..(i + 1) * n];
            let gi = &mut out[i * n..(i + 1) * n];
            let mu = self.mu[i];
            for (g, &v) in gi.iter_mut().zip(ui) {
                *g = mu * ppow(v, self.p);
                if let Some((a, q)) = self.absorption {
                    *g -= a * ppow(v, q);
                }
            }
            for j in 0..self.l {
                let Some(k) = self.coupled(i, j) else { continue };
                let uj = &u[j * n..(j + 1) * n];
                let (lam, al, be) = (self.coupling[k], self.alpha[k], self.beta[k]);
                for ((g, &vi), &vj) in gi.iter_mut().zip(ui).zip(uj) {
                    if vi > 0.0 && vj > 0.0 {
                        *g += lam * vi.powf(al) * vj.powf(be);
                    }
                }
            }
        }
        out
    }

    /// Nodal partials `∂g_i/∂u_j`, indexed `[i * l + j]`; `None` marks an
    /// identically zero block.
    pub fn linearize(&self, u: &[f64]) -> Vec<Option<Vec<f64>>> {
        let l = self.l;
        let n = u.len() / l;
        let mut blocks: Vec<Option<Vec<f64>>> = vec![None; l * l];
        for i in 0..l {
            let ui = &u[i * n..(i + 1) * n];
            let mut diag: Vec<f64> = ui
                .iter()
                .map(|&v| {
                    let mut c = self.p * self.mu[i] * dpow(v, self.p);
                    if let Some((a, q)) = self.absorption {
                        c -= a * q * dpow(v, q);
                    }
                    c
                })
                .collect();
            for j in 0..l {
                let Some(k) = self.coupled(i, j) else { continue };
                let uj = &u[j * n..(j + 1) * n];
                let (lam, al, be) = (self.coupling[k], self.alpha[k], self.beta[k]);
                let mut off = vec![0.0; n];
                for node in 0..n {
                    let (vi, vj) = (ui[node], uj[node]);
                    diag[node] += lam * al * dpow(vi, al) * ppow(vj, be);
                    off[node] = lam * be * ppow(vi, al) * dpow(vj, be);
                }
                blocks[k] = Some(off);
            }
            blocks[i * l + i] = Some(diag);
        }
        blocks
    }
}

/// `Σ (u⁺)^e` helper shared by the integral coefficients.
pub(crate) fn positive_power_sum(u: &[f64], e: f64) -> f64 {
    u.iter().map(|&v| ppow(v, e)).sum()
}

/// `Σ (u_i⁺)^{ea} (u_j⁺)^{eb}`.
pub(crate) fn cross_power_sum(ui: &[f64], uj: &[f64], ea: f64, eb: f64) -> f64 {
    ui.iter()
        .zip(uj)
        .map(|(&a, &b)| if a > 0.0 && b > 0.0 { a.powf(ea) * b.powf(eb) } else { 0.0 })
        .sum()
}
