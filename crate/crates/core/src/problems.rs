//! Grid (finite-difference) and Galerkin (truncated sine basis) realizations of
//! the strong-form system `−Δ_h u_i − g_i(u) = 0`.

use crate::grid::{dot, laplacian_values, poisson_values, Domain};
use crate::newton::NewtonProblem;
use crate::reaction::{positive_power_sum, Reaction};
use crate::scalar::unique_scaling_root;

pub(crate) struct GridProblem {
    pub domain: Domain,
    pub reaction: Reaction,
    /// Rescale a single-species iterate onto its Nehari manifold after each step.
    pub reproject: bool,
}

impl GridProblem {
    pub fn new(domain: &Domain, reaction: Reaction) -> Self {
        Self {
            domain: domain.clone(),
            reaction,
            reproject: false,
        }
    }

    fn n(&self) -> usize {
        self.domain.len()
    }

    /// One-dimensional Nehari scaling factor of a single-species iterate.
    pub fn scalar_nehari_factor(&self, u: &[f64]) -> Option<f64> {
        let vol = self.domain.cell_volume();
        let r = &self.reaction;
        let norm2 = vol * dot(u, &laplacian_values(&self.domain, u));
        let mu_b = r.mu[0] * vol * positive_power_sum(u, r.p + 1.0);
        if !(norm2 > 0.0 && mu_b > 0.0) {
            return None;
        }
        let (a, q) = r.absorption.unwrap_or((0.0, 1.0));
        let a_a = if a > 0.0 { a * vol * positive_power_sum(u, q + 1.0) } else { 0.0 };
        Some(unique_scaling_root(norm2, a_a, mu_b, r.p, q))
    }
}

impl NewtonProblem for GridProblem {
    type Lin = Vec<Option<Vec<f64>>>;

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let g = self.reaction.eval(x);
        let mut out = Vec::with_capacity(x.len());
        for i in 0..self.reaction.l {
            let lap = laplacian_values(&self.domain, &x[i * n..(i + 1) * n]);
            out.extend(lap.iter().zip(&g[i * n..(i + 1) * n]).map(|(a, b)| a - b));
        }
        out
    }

    fn linearize(&self, x: &[f64]) -> Self::Lin {
        self.reaction.linearize(x)
    }

    fn apply(&self, lin: &Self::Lin, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let l = self.reaction.l;
        let mut out = Vec::with_capacity(v.len());
        for i in 0..l {
            let mut yi = laplacian_values(&self.domain, &v[i * n..(i + 1) * n]);
            for j in 0..l {
                if let Some(c) = &lin[i * l + j] {
                    let vj = &v[j * n..(j + 1) * n];
                    yi.iter_mut().zip(c).zip(vj).for_each(|((y, c), v)| *y -= c * v);
                }
            }
            out.extend(yi);
        }
        out
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        v.chunks(n).flat_map(|b| poisson_values(&self.domain, b)).collect()
    }

    fn norm(&self, v: &[f64]) -> f64 {
        (self.domain.cell_volume() * dot(v, v)).sqrt()
    }

    fn guard_norm(&self, x: &[f64]) -> f64 {
        let n = self.n();
        let vol = self.domain.cell_volume();
        x.chunks(n)
            .map(|b| vol * dot(b, &laplacian_values(&self.domain, b)))
            .sum::<f64>()
            .sqrt()
    }

    fn post_step(&self, x: &mut [f64]) {
        if self.reproject && self.reaction.l == 1 {
            if let Some(s) = self.scalar_nehari_factor(x) {
                x.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
}

/// The projected system on the span of the `k` lowest sine modes.
///
/// Unknowns are the retained coefficients, species-major; the equations are
/// `λ_m c_{i,m} − ĝ_{i,m}(u) = 0` with `ĝ` the sine coefficients of the nodal
/// reaction.
pub(crate) struct GalerkinProblem {
    pub domain: Domain,
    pub reaction: Reaction,
    pub modes: Vec<usize>,
    eig: Vec<f64>,
    mode_mass: f64,
}

impl GalerkinProblem {
    pub fn new(domain: &Domain, reaction: Reaction, k: usize) -> Self {
        let modes = domain.modes_by_eigenvalue()[..k].to_vec();
        let eig = modes.iter().map(|&m| domain.mode_eigenvalue(m)).collect();
        let (nx, ny) = domain.nodes();
        let mut mass = domain.cell_volume() * (nx + 1) as f64 / 2.0;
        if domain.dim() == 2 {
            mass *= (ny + 1) as f64 / 2.0;
        }
        Self {
            domain: domain.clone(),
            reaction,
            modes,
            eig,
            mode_mass: mass,
        }
    }

    fn k(&self) -> usize {
        self.modes.len()
    }

    /// Nodal values of every species from retained coefficients.
    pub fn to_grid(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k();
        let n = self.domain.len();
        let mut out = Vec::with_capacity(n * self.reaction.l);
        for block in x.chunks(k) {
            let mut full = vec![0.0; n];
            for (&m, &c) in self.modes.iter().zip(block) {
                full[m] = c;
            }
            out.extend(self.domain.synthesize(&full));
        }
        out
    }

    /// Retained coefficients of nodal values (orthogonal projection).
    pub fn from_grid(&self, values: &[f64]) -> Vec<f64> {
        let n = self.domain.len();
        values
            .chunks(n)
            .flat_map(|b| {
                let c = self.domain.analyze(b);
                self.modes.iter().map(move |&m| c[m]).collect::<Vec<_>>()
            })
            .collect()
    }
}

impl NewtonProblem for GalerkinProblem {
    type Lin = Vec<Option<Vec<f64>>>;

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let u = self.to_grid(x);
        let g_hat = self.from_grid(&self.reaction.eval(&u));
        let k = self.k();
        x.iter()
            .zip(&g_hat)
            .enumerate()
            .map(|(idx, (c, g))| self.eig[idx % k] * c - g)
            .collect()
    }

    fn linearize(&self, x: &[f64]) -> Self::Lin {
        self.reaction.linearize(&self.to_grid(x))
    }

    fn apply(&self, lin: &Self::Lin, v: &[f64]) -> Vec<f64> {
        let n = self.domain.len();
        let l = self.reaction.l;
        let dv = self.to_grid(v);
        let mut dg = vec![0.0; n * l];
        for i in 0..l {
            for j in 0..l {
                if let Some(c) = &lin[i * l + j] {
                    let src = &dv[j * n..(j + 1) * n];
                    dg[i * n..(i + 1) * n]
                        .iter_mut()
                        .zip(c)
                        .zip(src)
                        .for_each(|((g, c), s)| *g += c * s);
                }
            }
        }
        let dg_hat = self.from_grid(&dg);
        let k = self.k();
        v.iter()
            .zip(&dg_hat)
            .enumerate()
            .map(|(idx, (c, g))| self.eig[idx % k] * c - g)
            .collect()
    }

    fn precondition(&self, v: &[f64]) -> Vec<f64> {
        let k = self.k();
        v.iter().enumerate().map(|(idx, c)| c / self.eig[idx % k]).collect()
    }

    fn norm(&self, v: &[f64]) -> f64 {
        (self.mode_mass * dot(v, v)).sqrt()
    }

    fn guard_norm(&self, x: &[f64]) -> f64 {
        let k = self.k();
        (self.mode_mass
            * x.iter()
                .enumerate()
                .map(|(idx, c)| self.eig[idx % k] * c * c)
                .sum::<f64>())
        .sqrt()
    }
}
