//! Least-energy positive solution of `−Δu = μ u^p` and its convergence under refinement.

use nehari_forge::grid::lp_integral;
use nehari_forge::scalar::{least_energy_scalar, scalar_energy, scalar_residual};
use nehari_forge::Domain;

fn main() -> nehari_forge::Result<()> {
    let p = 3.0;
    let mut energies = Vec::new();
    for n in [31, 63, 127] {
        let d = Domain::unit_square(n)?;
        let u = least_energy_scalar(1.0, p, &d)?;
        let res = scalar_residual(&u, 1.0, p, 0.0, 1.0).l2_norm() / u.l2_norm();
        let a = u.h1_norm().powi(2);
        let e = scalar_energy(&u, 1.0, p);
        println!(
            "n = {n:>3}: max {:.6}, energy {e:.10}, residual {res:.1e}, nehari gap {:.1e}",
            u.max_value(),
            (a - lp_integral(&u, p + 1.0, true)).abs() / a
        );
        energies.push(e);
    }
    let order = ((energies[0] - energies[1]) / (energies[1] - energies[2])).log2();
    println!("observed energy order {order:.3}");

    // u_μ = μ^{−1/(p−1)} u₁
    let d = Domain::unit_square(63)?;
    let u1 = least_energy_scalar(1.0, p, &d)?;
    let u4 = least_energy_scalar(4.0, p, &d)?;
    println!("mu-law defect {:.1e}", u4.axpy(-1.0, &u1.scaled(0.5))?.max_abs() / u4.max_abs());
    Ok(())
}
