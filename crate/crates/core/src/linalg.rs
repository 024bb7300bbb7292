//! Right-preconditioned restarted GMRES for the Newton linearizations.
//!
//! The linearized operators are `−Δ_h − C` with a bounded nodal coupling `C`.
//! Preconditioning by the fast Poisson solve turns them into compact
//! perturbations of the identity, so the iteration count does not grow with
//! the grid size.

use crate::error::{Error, Result};
use crate::grid::dot;

#[derive(Debug, Clone, Copy)]
pub(crate) struct GmresOptions {
    pub rel_tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            restart: 120,
            max_iter: 1200,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`.
    pub rel_residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `A x = b` with right preconditioner `M⁻¹`, starting from zero.
///
/// Returns the best iterate together with its true relative residual; the
/// caller decides whether that is good enough.
pub(crate) fn gmres(
    mut apply: impl FnMut(&[f64]) -> Vec<f64>,
    mut precond: impl FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    opts: GmresOptions,
) -> Result<GmresOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x,
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = opts.rel_tol * bnorm;
    let m = opts.restart.max(1);
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut total = 0;

    while total < opts.max_iter {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, already rotated
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut steps = 0;

        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            let mut col = vec![0.0; j + 2];
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    col[i] += hij;
                    w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= hij * vk);
                }
            }
            let wnorm = norm(&w);
            col[j + 1] = wnorm;
            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i] * a + cs[i] * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);
            steps = j + 1;
            total += 1;
            if g[j + 1].abs() <= target || wnorm <= 1e-300 || total >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wnorm).collect());
        }

        // back substitution on the triangular system
        let mut y = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc -= h[k][i] * y[k];
            }
            if h[i][i] == 0.0 {
                return Err(Error::LinearSolver("GMRES breakdown on singular operator".into()));
            }
            y[i] = acc / h[i][i];
        }
        let mut comb = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            comb.iter_mut().zip(v).for_each(|(c, vk)| *c += yi * vk);
        }
        let dx = precond(&comb);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);

        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        beta = norm(&r);
        if !beta.is_finite() {
            return Err(Error::LinearSolver("non-finite GMRES residual".into()));
        }
        if beta <= target {
            break;
        }
    }

    Ok(GmresOutcome {
        x,
        iterations: total,
        rel_residual: beta / bnorm,
    })
}
