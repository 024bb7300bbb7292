//! The finite-dimensional scaling map
//!
//! ```text
//! M_i(s) = a_i s_i − b_i s_i^p + Σ_{j≠i} d_ij s_i^{α_ij} s_j^{β_ij},   s ∈ (0,∞)^ℓ
//! ```
//!
//! With all `b_i > 0` it has exactly one zero, inside a box `(r, R)^ℓ` that
//! depends only on the coefficient bounds. The Nehari projection of a state is
//! this zero for the coefficients computed from the state.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Coefficients `(a_i, b_i, d_ij)` and exponents `(p, α_ij, β_ij)` of the scaling map.
///
/// Matrices are `ℓ×ℓ` row-major; diagonal entries are ignored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingCoeffs {
    pub p: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Root tolerance of [`solve_scaling`], relative to `max a_i`.
pub const ROOT_TOL: f64 = 1e-12;
/// Relative determinant threshold below which a zero is reported degenerate.
pub const DEGENERATE_DET: f64 = 1e-10;

const MAX_NEWTON: usize = 200;
const MAX_ROUNDS: usize = 20;
const FIXED_POINT_SWEEPS: usize = 200;

impl ScalingCoeffs {
    /// Builds and validates a coefficient set.
    pub fn new(
        p: f64,
        a: Vec<f64>,
        b: Vec<f64>,
        d: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let c = Self {
            p,
            a,
            b,
            d,
            alpha,
            beta,
        };
        c.validate()?;
        Ok(c)
    }

    /// Uncoupled coefficients (`d = 0`) with unit exponents.
    pub fn decoupled(p: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let l = a.len();
        // exponents are irrelevant when d = 0; any admissible pair will do
        let e = p / 4.0;
        Self::new(p, a, b, vec![0.0; l * l], vec![e; l * l], vec![e; l * l])
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let l = self.a.len();
        let bad = |m: String| Err(Error::InvalidParams(m));
        if l == 0 {
            return bad("need at least one component".into());
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return bad(format!("p = {} must exceed 1", self.p));
        }
        if self.b.len() != l || self.d.len() != l * l || self.alpha.len() != l * l || self.beta.len() != l * l {
            return bad("coefficient arrays have inconsistent sizes".into());
        }
        for i in 0..l {
            if !(self.a[i] > 0.0 && self.a[i].is_finite()) {
                return bad(format!("a[{i}] = {} must be positive", self.a[i]));
            }
            if !(self.b[i] >= 0.0 && self.b[i].is_finite()) {
                return bad(format!("b[{i}] = {} must be nonnegative", self.b[i]));
            }
            for j in (0..l).filter(|&j| j != i) {
                let k = i * l + j;
                if !(self.d[k] >= 0.0 && self.d[k].is_finite()) {
                    return bad(format!("d[{i}][{j}] = {} must be nonnegative", self.d[k]));
                }
                if !(self.alpha[k] > 0.0 && self.beta[k] > 0.0) {
                    return bad(format!("alpha[{i}][{j}], beta[{i}][{j}] must be positive"));
                }
                if self.alpha[k] + self.beta[k] >= self.p {
                    return bad(format!(
                        "alpha[{i}][{j}] + beta[{i}][{j}] = {} must be < p = {}",
                        self.alpha[k] + self.beta[k],
                        self.p
                    ));
                }
            }
        }
        Ok(())
    }

    /// The normalized coefficients for which `s⁰` is mapped to `(1,…,1)`:
    /// `a_i s⁰_i`, `b_i (s⁰_i)^p`, `d_ij (s⁰_i)^{α_ij} (s⁰_j)^{β_ij}`.
    pub fn rescaled(&self, s0: &[f64]) -> Result<Self> {
        check_positive(s0)?;
        let l = self.len();
        let mut c = self.clone();
        for i in 0..l {
            c.a[i] *= s0[i];
            c.b[i] *= s0[i].powf(self.p);
            for j in (0..l).filter(|&j| j != i) {
                let k = i * l + j;
                c.d[k] *= s0[i].powf(self.alpha[k]) * s0[j].powf(self.beta[k]);
            }
        }
        Ok(c)
    }

    /// A random admissible set with `ℓ = l`, for property checks.
    ///
    /// `p ∈ [2, 5]`, `a_i, b_i ∈ [0.2, 5]`, `d_ij ∈ [0, 3]`, and `α_ij + β_ij`
    /// uniform in `[0.3, 0.95 p]` with each share at least 10%.
    pub fn random(rng: &mut impl Rng, l: usize) -> Self {
        let p = rng.gen_range(2.0..=5.0);
        let a = (0..l).map(|_| rng.gen_range(0.2..=5.0)).collect();
        let b = (0..l).map(|_| rng.gen_range(0.2..=5.0)).collect();
        let mut d = vec![0.0; l * l];
        let mut alpha = vec![1.0; l * l];
        let mut beta = vec![1.0; l * l];
        for i in 0..l {
            for j in (0..l).filter(|&j| j != i) {
                let k = i * l + j;
                d[k] = rng.gen_range(0.0..=3.0);
                let sum = rng.gen_range(0.3..0.95 * p);
                let share = rng.gen_range(0.1..=0.9);
                alpha[k] = share * sum;
                beta[k] = (1.0 - share) * sum;
            }
        }
        Self {
            p,
            a,
            b,
            d,
            alpha,
            beta,
        }
    }

    fn max_a(&self) -> f64 {
        self.a.iter().copied().fold(0.0, f64::max)
    }
}

fn check_positive(s: &[f64]) -> Result<()> {
    match s.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(Error::NonPositive {
            index,
            value: s[index],
        }),
        None => Ok(()),
    }
}

/// Componentwise value of `M(s)`.
pub fn eval_m(c: &ScalingCoeffs, s: &[f64]) -> Result<Vec<f64>> {
    check_positive(s)?;
    let l = c.len();
    Ok((0..l)
        .map(|i| {
            let mut v = c.a[i] * s[i] - c.b[i] * s[i].powf(c.p);
            for j in (0..l).filter(|&j| j != i) {
                let k = i * l + j;
                if c.d[k] != 0.0 {
                    v += c.d[k] * s[i].powf(c.alpha[k]) * s[j].powf(c.beta[k]);
                }
            }
            v
        })
        .collect())
}

/// Analytic Jacobian `∂M_i/∂s_j`.
pub fn jacobian_m(c: &ScalingCoeffs, s: &[f64]) -> Result<DMatrix<f64>> {
    check_positive(s)?;
    let l = c.len();
    let mut jac = DMatrix::zeros(l, l);
    for i in 0..l {
        let mut diag = c.a[i] - c.p * c.b[i] * s[i].powf(c.p - 1.0);
        for j in (0..l).filter(|&j| j != i) {
            let k = i * l + j;
            if c.d[k] == 0.0 {
                continue;
            }
            diag += c.d[k] * c.alpha[k] * s[i].powf(c.alpha[k] - 1.0) * s[j].powf(c.beta[k]);
            jac[(i, j)] = c.d[k] * c.beta[k] * s[i].powf(c.alpha[k]) * s[j].powf(c.beta[k] - 1.0);
        }
        jac[(i, i)] = diag;
    }
    Ok(jac)
}

/// Bracketing box `(r, R)`: `M_i > 0` whenever `s_i ≤ r`, and `M_i < 0`
/// whenever `s_i = max_j s_j ≥ R`.
pub fn bracket(c: &ScalingCoeffs) -> Result<(f64, f64)> {
    if let Some(i) = c.b.iter().position(|&b| b <= 0.0) {
        return Err(Error::NoZero(i));
    }
    let l = c.len();
    let a_lo = c.a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_hi = c.max_a();
    let b_lo = c.b.iter().copied().fold(f64::INFINITY, f64::min);
    let b_hi = c.b.iter().copied().fold(0.0, f64::max);
    let mut d_hi: f64 = 0.0;
    for i in 0..l {
        for j in (0..l).filter(|&j| j != i) {
            d_hi = d_hi.max(c.d[i * l + j]);
        }
    }
    let r = 0.5 * (a_lo / b_hi).powf(1.0 / (c.p - 1.0));
    // t ↦ ā t − b t^p + Σ d̄ t^{α+β} stays negative once it is negative
    let upper = |i: usize, t: f64| {
        let mut v = a_hi * t - b_lo * t.powf(c.p);
        for j in (0..l).filter(|&j| j != i) {
            let k = i * l + j;
            v += d_hi * t.powf(c.alpha[k] + c.beta[k]);
        }
        v
    };
    let mut big = 2.0 * r;
    while (0..l).any(|i| upper(i, big) >= 0.0) {
        big *= 2.0;
        if !big.is_finite() {
            return Err(Error::NonConvergence("upper bracket overflow".into()));
        }
    }
    Ok((r, big))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Unique positive zero of `M`, started from the box midpoint.
pub fn solve_scaling(c: &ScalingCoeffs) -> Result<Vec<f64>> {
    let (r, big) = bracket(c)?;
    let mid = vec![0.5 * (r + big); c.len()];
    solve_scaling_from(c, &mid)
}

/// Unique positive zero of `M` from an explicit starting point.
///
/// Damped Newton with steps clipped into `[r/2, 2R]^ℓ`; when Newton stalls, a
/// sweep of the monotone fixed-point map
/// `s_i ← ((a_i s_i + Σ d_ij s_i^{α_ij} s_j^{β_ij}) / b_i)^{1/p}` is inserted
/// before Newton is retried.
pub fn solve_scaling_from(c: &ScalingCoeffs, start: &[f64]) -> Result<Vec<f64>> {
    let (r, big) = bracket(c)?;
    check_positive(start)?;
    let (lo, hi) = (0.5 * r, 2.0 * big);
    let tol = |s: &[f64]| ROOT_TOL * c.max_a() * s.iter().copied().fold(1.0, f64::max);
    let mut s: Vec<f64> = start.iter().map(|v| v.clamp(lo, hi)).collect();

    for _round in 0..MAX_ROUNDS {
        let mut m = eval_m(c, &s)?;
        let mut stalled = false;
        for _ in 0..MAX_NEWTON {
            let res = max_abs(&m);
            if res <= tol(&s) {
                return Ok(polish(c, s, m, lo, hi));
            }
            let jac = jacobian_m(c, &s)?;
            let rhs = nalgebra::DVector::from_iterator(m.len(), m.iter().map(|v| -v));
            let Some(step) = jac.lu().solve(&rhs) else {
                stalled = true;
                break;
            };
            let mut damping = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = s
                    .iter()
                    .zip(step.iter())
                    .map(|(si, di)| (si + damping * di).clamp(lo, hi))
                    .collect();
                let mt = eval_m(c, &trial)?;
                if max_abs(&mt) < res {
                    s = trial;
                    m = mt;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if !accepted {
                // round-off floor: accept a residual a few ulps above the target
                if res <= 1e3 * tol(&s) {
                    return Ok(s);
                }
                stalled = true;
                break;
            }
        }
        if !stalled && max_abs(&m) <= tol(&s) {
            return Ok(s);
        }
        s = fixed_point_sweeps(c, &s, FIXED_POINT_SWEEPS);
    }
    Err(Error::NonConvergence(format!(
        "scaling map zero not found after {MAX_ROUNDS} Newton/fixed-point rounds"
    )))
}

// a few undamped Newton steps past the tolerance, kept while they help
fn polish(c: &ScalingCoeffs, mut s: Vec<f64>, mut m: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    for _ in 0..3 {
        let Ok(jac) = jacobian_m(c, &s) else { break };
        let rhs = nalgebra::DVector::from_iterator(m.len(), m.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else { break };
        let trial: Vec<f64> = s.iter().zip(step.iter()).map(|(si, di)| (si + di).clamp(lo, hi)).collect();
        let Ok(mt) = eval_m(c, &trial) else { break };
        if max_abs(&mt) >= max_abs(&m) {
            break;
        }
        s = trial;
        m = mt;
    }
    s
}

fn fixed_point_sweeps(c: &ScalingCoeffs, start: &[f64], sweeps: usize) -> Vec<f64> {
    let l = c.len();
    let mut s = start.to_vec();
    for _ in 0..sweeps {
        s = (0..l)
            .map(|i| {
                let mut num = c.a[i] * s[i];
                for j in (0..l).filter(|&j| j != i) {
                    let k = i * l + j;
                    num += c.d[k] * s[i].powf(c.alpha[k]) * s[j].powf(c.beta[k]);
                }
                (num / c.b[i]).powf(1.0 / c.p)
            })
            .collect();
    }
    s
}

/// Sign of the Jacobian determinant at the zero, or 0 when the zero is
/// numerically degenerate (relative to the Hadamard bound of the matrix).
pub fn degree_sign_check(c: &ScalingCoeffs, s: &[f64]) -> Result<i32> {
    let jac = jacobian_m(c, s)?;
    let det = jac.clone().lu().determinant();
    let scale: f64 = jac.row_iter().map(|row| row.norm()).product();
    if !(det.abs() >= DEGENERATE_DET * scale) {
        return Ok(0);
    }
    Ok(if det > 0.0 { 1 } else { -1 })
}

/// Max-norm distance between the zeros for two coefficient sets.
pub fn continuity_probe(c: &ScalingCoeffs, c2: &ScalingCoeffs, s_of_c: &[f64]) -> Result<f64> {
    if c.len() != c2.len() || s_of_c.len() != c.len() {
        return Err(Error::InvalidParams("coefficient sets of different sizes".into()));
    }
    let s2 = solve_scaling(c2)?;
    Ok(s_of_c
        .iter()
        .zip(&s2)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric() -> ScalingCoeffs {
        ScalingCoeffs::new(
            3.0,
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![0.0, 1.0, 1.0, 0.0],
            vec![1.0; 4],
            vec![1.0; 4],
        )
        .unwrap()
    }

    #[test]
    fn hand_evaluations() {
        let c = symmetric();
        assert_eq!(eval_m(&c, &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(eval_m(&c, &[2.0, 2.0]).unwrap(), vec![-10.0, -10.0]);
        assert!(matches!(eval_m(&c, &[1.0, 0.0]), Err(Error::NonPositive { index: 1, .. })));
    }

    #[test]
    fn decoupled_jacobian_and_degree() {
        let c = ScalingCoeffs::decoupled(3.0, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let j = jacobian_m(&c, &[1.0, 1.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -2.0]));
        assert_eq!(degree_sign_check(&c, &[1.0, 1.0]).unwrap(), 1);
        let c3 = ScalingCoeffs::decoupled(3.0, vec![1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(degree_sign_check(&c3, &[1.0; 3]).unwrap(), -1);
    }

    #[test]
    fn off_diagonal_with_unit_beta() {
        let mut c = symmetric();
        c.alpha[1] = 0.7;
        let s = [1.3, 0.4];
        let j = jacobian_m(&c, &s).unwrap();
        assert_eq!(j[(0, 1)], 1.0 * 1.3f64.powf(0.7));
    }

    #[test]
    fn bracket_for_decoupled_unit() {
        let c = ScalingCoeffs::decoupled(3.0, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let (r, big) = bracket(&c).unwrap();
        assert_eq!(r, 0.5);
        assert!(eval_m(&c, &[r, r]).unwrap().iter().all(|&v| v > 0.0));
        assert!(eval_m(&c, &[big, r]).unwrap()[0] < 0.0);
    }

    #[test]
    fn bracket_contains_symmetric_root() {
        let (r, big) = bracket(&symmetric()).unwrap();
        assert!(r < 1.0 && 1.0 < big);
    }

    #[test]
    fn symmetric_root_and_errors() {
        let s = solve_scaling(&symmetric()).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12);
        let c = ScalingCoeffs::decoupled(3.0, vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(solve_scaling(&c), Err(Error::NoZero(0)));
    }

    #[test]
    fn rejects_supercritical_coupling_exponents() {
        let mut c = symmetric();
        c.alpha[1] = 2.5;
        assert!(matches!(c.validate(), Err(Error::InvalidParams(m)) if m.contains("must be < p")));
    }

    #[test]
    fn probe_is_zero_for_identical_coefficients() {
        let c = symmetric();
        let s = solve_scaling(&c).unwrap();
        assert_eq!(continuity_probe(&c, &c, &s).unwrap(), 0.0);
    }
}
