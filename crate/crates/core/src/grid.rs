//! Finite-difference discretization of `H¹₀` on intervals and rectangles.
//!
//! Functions are stored by their values at interior nodes; boundary values are
//! implicitly zero. The discrete operator is the standard 3-point (1D) or
//! 5-point (2D) `−Δ_h`. Integrals are cell-volume weighted node sums, which
//! keeps the Dirichlet form and the `L²` pairing exactly dual:
//! `h1_inner(f, g) = vol · Σ f · (−Δ_h g)`.
//!
//! The discrete sine functions `sin(mπx/L_x)·sin(nπy/L_y)` sampled at the nodes
//! are exact eigenvectors of `−Δ_h`, so the sine transform diagonalizes the
//! operator. [`poisson_solve`] and the Galerkin truncation are built on it.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

struct SineTables {
    /// `sin_x[m * nx + i] = sin((m+1)(i+1)π/(nx+1))`.
    sin_x: Vec<f64>,
    sin_y: Vec<f64>,
    eig_x: Vec<f64>,
    eig_y: Vec<f64>,
    /// Flat mode indices sorted by eigenvalue, ties by `(m_x, m_y)`.
    order: Vec<usize>,
}

fn sine_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n * n];
    for m in 0..n {
        for i in 0..n {
            // reduce the integer product mod 2(n+1) so large arguments stay exact
            let k = ((m + 1) * (i + 1)) % (2 * (n + 1));
            t[m * n + i] = (std::f64::consts::PI * k as f64 / (n + 1) as f64).sin();
        }
    }
    t
}

fn direction_eigenvalues(n: usize, length: f64) -> Vec<f64> {
    let h = length / (n + 1) as f64;
    (1..=n)
        .map(|m| {
            let s = (m as f64 * std::f64::consts::PI * h / (2.0 * length)).sin();
            4.0 / (h * h) * s * s
        })
        .collect()
}

/// An interval `(0, L_x)` or a rectangle `(0, L_x) × (0, L_y)` with a uniform
/// grid of interior nodes.
#[derive(Clone)]
pub struct Domain {
    dim: usize,
    lengths: [f64; 2],
    nodes: [usize; 2],
    tables: Arc<SineTables>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.lengths == other.lengths && self.nodes == other.nodes
    }
}

impl fmt::Debug for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "Domain(0,{}) n={}", self.lengths[0], self.nodes[0]),
            _ => write!(
                f,
                "Domain(0,{})x(0,{}) n={}x{}",
                self.lengths[0], self.lengths[1], self.nodes[0], self.nodes[1]
            ),
        }
    }
}

impl Domain {
    /// The interval `(0, length)` with `n` interior nodes.
    pub fn interval(length: f64, n: usize) -> Result<Self> {
        Self::build(1, [length, 1.0], [n, 1])
    }

    /// The rectangle `(0, lx) × (0, ly)` with `nx × ny` interior nodes.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::build(2, [lx, ly], [nx, ny])
    }

    /// The unit square with `n × n` interior nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::rectangle(1.0, 1.0, n, n)
    }

    fn build(dim: usize, lengths: [f64; 2], nodes: [usize; 2]) -> Result<Self> {
        for d in 0..dim {
            if !(lengths[d].is_finite() && lengths[d] > 0.0) {
                return Err(Error::InvalidDomain(format!(
                    "side length {} must be positive",
                    lengths[d]
                )));
            }
            if nodes[d] < 3 {
                return Err(Error::InvalidDomain(format!(
                    "need at least 3 interior nodes per direction, got {}",
                    nodes[d]
                )));
            }
        }
        let (nx, ny) = (nodes[0], nodes[1]);
        let eig_x = direction_eigenvalues(nx, lengths[0]);
        let (sin_y, eig_y) = if dim == 2 {
            (sine_table(ny), direction_eigenvalues(ny, lengths[1]))
        } else {
            (Vec::new(), Vec::new())
        };
        let eig = |k: usize| {
            if dim == 2 {
                eig_x[k % nx] + eig_y[k / nx]
            } else {
                eig_x[k]
            }
        };
        let mut order: Vec<usize> = (0..nx * ny).collect();
        order.sort_by(|&a, &b| {
            eig(a)
                .total_cmp(&eig(b))
                .then((a % nx, a / nx).cmp(&(b % nx, b / nx)))
        });
        Ok(Self {
            dim,
            lengths,
            nodes,
            tables: Arc::new(SineTables {
                sin_x: sine_table(nx),
                sin_y,
                eig_x,
                eig_y,
                order,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    /// Interior node counts `(n_x, n_y)`; `n_y = 1` in 1D.
    pub fn nodes(&self) -> (usize, usize) {
        (self.nodes[0], self.nodes[1])
    }

    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        let hx = self.lengths[0] / (self.nodes[0] + 1) as f64;
        let hy = if self.dim == 2 {
            self.lengths[1] / (self.nodes[1] + 1) as f64
        } else {
            1.0
        };
        (hx, hy)
    }

    /// Quadrature weight of a single node.
    pub fn cell_volume(&self) -> f64 {
        let (hx, hy) = self.spacing();
        hx * hy
    }

    /// Coordinates of the node with flat index `k` (row-major, `x` fastest).
    pub fn node(&self, k: usize) -> (f64, f64) {
        let (hx, hy) = self.spacing();
        let nx = self.nodes[0];
        let x = (k % nx + 1) as f64 * hx;
        let y = if self.dim == 2 { (k / nx + 1) as f64 * hy } else { 0.0 };
        (x, y)
    }

    /// Eigenvalue of `−Δ_h` for the mode with flat index `k`
    /// (mode numbers `(k % n_x + 1, k / n_x + 1)`).
    pub fn mode_eigenvalue(&self, k: usize) -> f64 {
        let t = &self.tables;
        if self.dim == 2 {
            t.eig_x[k % self.nodes[0]] + t.eig_y[k / self.nodes[0]]
        } else {
            t.eig_x[k]
        }
    }

    /// Flat mode indices in ascending eigenvalue order.
    pub fn modes_by_eigenvalue(&self) -> &[usize] {
        &self.tables.order
    }

    /// Smallest eigenvalue of `−Δ_h`.
    pub fn first_eigenvalue(&self) -> f64 {
        self.mode_eigenvalue(self.tables.order[0])
    }

    /// `L²`-normalized sampled first eigenfunction (positive at every node).
    pub fn first_eigenfunction(&self) -> GridFunction {
        let (lx, ly) = (self.lengths[0], self.lengths[1]);
        let dim = self.dim;
        let f = GridFunction::from_fn(self, |x, y| {
            let sx = (std::f64::consts::PI * x / lx).sin();
            if dim == 2 {
                sx * (std::f64::consts::PI * y / ly).sin()
            } else {
                sx
            }
        });
        let n = f.l2_norm();
        f.scaled(1.0 / n)
    }

    fn transform_x(&self, data: &[f64]) -> Vec<f64> {
        let (nx, ny) = self.nodes();
        let table = &self.tables.sin_x;
        let mut out = vec![0.0; nx * ny];
        for row in 0..ny {
            let src = &data[row * nx..(row + 1) * nx];
            let dst = &mut out[row * nx..(row + 1) * nx];
            for (m, d) in dst.iter_mut().enumerate() {
                let w = &table[m * nx..(m + 1) * nx];
                *d = w.iter().zip(src).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    fn transform_y(&self, data: &[f64]) -> Vec<f64> {
        let (nx, ny) = self.nodes();
        let table = &self.tables.sin_y;
        let mut out = vec![0.0; nx * ny];
        for m in 0..ny {
            let dst = &mut out[m * nx..(m + 1) * nx];
            for j in 0..ny {
                let w = table[m * ny + j];
                let src = &data[j * nx..(j + 1) * nx];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
        out
    }

    /// Unnormalized sine synthesis: values from coefficients.
    pub(crate) fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let tmp = self.transform_x(coeffs);
        if self.dim == 2 {
            self.transform_y(&tmp)
        } else {
            tmp
        }
    }

    /// Sine analysis: coefficients `c` with `f = Σ c_k φ_k` at the nodes.
    pub(crate) fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let (nx, ny) = self.nodes();
        let mut c = self.transform_x(values);
        let mut scale = 2.0 / (nx + 1) as f64;
        if self.dim == 2 {
            c = self.transform_y(&c);
            scale *= 2.0 / (ny + 1) as f64;
        }
        c.iter_mut().for_each(|v| *v *= scale);
        c
    }
}

/// Values of a Dirichlet-zero function at the interior nodes of a [`Domain`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(domain: &Domain) -> Self {
        Self {
            domain: domain.clone(),
            values: vec![0.0; domain.len()],
        }
    }

    /// Checked constructor: the value count must match and every value must be finite.
    pub fn from_values(domain: &Domain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidDomain(format!(
                "expected {} values, got {}",
                domain.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain(format!("non-finite value at node {k}")));
        }
        Ok(Self {
            domain: domain.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(domain: &Domain, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self {
            domain: domain.clone(),
            values,
        }
    }

    /// Samples `f(x, y)` at the interior nodes (`y = 0` in 1D).
    pub fn from_fn(domain: &Domain, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.len())
            .map(|k| {
                let (x, y) = domain.node(k);
                f(x, y)
            })
            .collect();
        Self::from_raw(domain, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &GridFunction) -> Result<Self> {
        self.check(other)?;
        Ok(Self::from_raw(
            &self.domain,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        ))
    }

    fn check(&self, other: &GridFunction) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    /// Cell-weighted `L²` pairing.
    pub fn l2_dot(&self, other: &GridFunction) -> Result<f64> {
        self.check(other)?;
        Ok(self.domain.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.domain.cell_volume() * dot(&self.values, &self.values)).sqrt()
    }

    /// Dirichlet norm `(h1_inner(f, f))^{1/2}`.
    pub fn h1_norm(&self) -> f64 {
        h1_inner(self, self).map(f64::sqrt).unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV dump with header `x,value` (1D) or `x,y,value` (2D), 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        if self.domain.dim == 1 {
            writeln!(w, "x,value")?;
        } else {
            writeln!(w, "x,y,value")?;
        }
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.domain.node(k);
            if self.domain.dim == 1 {
                writeln!(w, "{:.16e},{:.16e}", x, v)?;
            } else {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", x, y, v)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Raw `−Δ_h` on a value slice laid out like the domain's nodes.
pub(crate) fn laplacian_values(domain: &Domain, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = domain.nodes();
    let (hx, hy) = domain.spacing();
    let (cx, cy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let mut out = vec![0.0; f.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let c = f[k];
            let left = if i > 0 { f[k - 1] } else { 0.0 };
            let right = if i + 1 < nx { f[k + 1] } else { 0.0 };
            let mut v = cx * (2.0 * c - left - right);
            if domain.dim == 2 {
                let down = if j > 0 { f[k - nx] } else { 0.0 };
                let up = if j + 1 < ny { f[k + nx] } else { 0.0 };
                v += cy * (2.0 * c - down - up);
            }
            out[k] = v;
        }
    }
    out
}

/// Raw `(−Δ_h)⁻¹` on a value slice via the sine diagonalization.
pub(crate) fn poisson_values(domain: &Domain, g: &[f64]) -> Vec<f64> {
    let mut c = domain.analyze(g);
    for (k, v) in c.iter_mut().enumerate() {
        *v /= domain.mode_eigenvalue(k);
    }
    domain.synthesize(&c)
}

/// The centered-difference `−Δ_h f` with zero boundary values.
pub fn laplacian_apply(f: &GridFunction) -> GridFunction {
    GridFunction::from_raw(&f.domain, laplacian_values(&f.domain, &f.values))
}

/// Solves `−Δ_h f = g` by sine-transform diagonalization.
pub fn poisson_solve(g: &GridFunction) -> Result<GridFunction> {
    let values = poisson_values(&g.domain, &g.values);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolver("non-finite Poisson solution".into()));
    }
    Ok(GridFunction::from_raw(&g.domain, values))
}

/// Discrete Dirichlet form `vol · Σ f · (−Δ_h g)`.
pub fn h1_inner(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check(g)?;
    let lg = laplacian_values(&g.domain, &g.values);
    Ok(f.domain.cell_volume() * dot(&f.values, &lg))
}

/// Cell-weighted `Σ (f⁺)^r` (or `Σ |f|^r` when `positive_part_only` is off).
pub fn lp_integral(f: &GridFunction, r: f64, positive_part_only: bool) -> f64 {
    debug_assert!(r >= 1.0);
    let s: f64 = if positive_part_only {
        f.values.iter().map(|&v| if v > 0.0 { v.powf(r) } else { 0.0 }).sum()
    } else {
        f.values.iter().map(|&v| v.abs().powf(r)).sum()
    };
    f.domain.cell_volume() * s
}

pub fn positive_part(f: &GridFunction) -> GridFunction {
    f.map(|v| v.max(0.0))
}

pub fn negative_part(f: &GridFunction) -> GridFunction {
    f.map(|v| v.min(0.0))
}

/// Coefficients in the discrete sine eigenbasis, laid out like the nodes
/// (flat index `k` is mode `(k % n_x + 1, k / n_x + 1)`).
pub fn spectral_transform(f: &GridFunction) -> Vec<f64> {
    f.domain.analyze(&f.values)
}

/// Inverse of [`spectral_transform`].
pub fn spectral_synthesize(domain: &Domain, coeffs: &[f64]) -> Result<GridFunction> {
    if coeffs.len() != domain.len() {
        return Err(Error::InvalidDomain(format!(
            "expected {} coefficients, got {}",
            domain.len(),
            coeffs.len()
        )));
    }
    Ok(GridFunction::from_raw(domain, domain.synthesize(coeffs)))
}

/// Keeps the `k` lowest-eigenvalue sine modes of `f`.
pub fn spectral_truncate(f: &GridFunction, k: usize) -> Result<GridFunction> {
    let n = f.domain.len();
    if k > n {
        return Err(Error::ModeOutOfRange { k, max: n });
    }
    let c = spectral_transform(f);
    let mut kept = vec![0.0; n];
    for &m in &f.domain.modes_by_eigenvalue()[..k] {
        kept[m] = c[m];
    }
    spectral_synthesize(&f.domain, &kept)
}
