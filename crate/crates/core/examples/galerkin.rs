//! Galerkin truncation: the coupled system projected onto the `k` lowest sine
//! modes, compared with the full grid solve.

use nehari_forge::grid::lp_integral;
use nehari_forge::system::{continue_in_t, galerkin_solve};
use nehari_forge::{ContinuationConfig, Domain, SystemParams};

fn main() -> nehari_forge::Result<()> {
    let domain = Domain::unit_square(15)?;
    let params = SystemParams::lotka_volterra(3.0, [1.0, 2.0], -0.5, -0.3)?;
    let cfg = ContinuationConfig::default();

    // one mode, uncoupled: c = (λ₁ / (μ ∫φ₁⁴))^{1/2} for the normalized eigenfunction
    let one = galerkin_solve(&params, &domain, 1, 0.0, &cfg)?;
    let phi = domain.first_eigenfunction();
    for (i, mu) in params.mu.iter().enumerate() {
        let c = (domain.first_eigenvalue() / (mu * lp_integral(&phi, 4.0, false))).sqrt();
        let got = one.component(i).l2_dot(&phi)?;
        println!("k = 1, species {}: coefficient {got:.12} (closed form {c:.12})", i + 1);
    }

    let full = continue_in_t(&params, &domain, &cfg)?.state;
    for k in [4, 16, 64, domain.len()] {
        let g = galerkin_solve(&params, &domain, k, 1.0, &cfg)?;
        let dist: f64 = g
            .components()
            .iter()
            .zip(full.components())
            .map(|(a, b)| a.axpy(-1.0, b).map(|d| d.h1_norm().powi(2)))
            .sum::<nehari_forge::Result<f64>>()?
            .sqrt();
        println!("k = {k:>3}: H1 distance to the grid solution {:.3e}", dist / full.norm());
    }
    Ok(())
}
