//! Discrete Dirichlet Laplacian on a rectangle: eigenpairs and the fast Poisson solve.

use std::f64::consts::PI;

use nehari_forge::grid::{laplacian_apply, poisson_solve, spectral_synthesize, spectral_transform};
use nehari_forge::{Domain, GridFunction};

fn main() -> nehari_forge::Result<()> {
    let d = Domain::rectangle(2.0, 1.0, 63, 31)?;
    let exact = PI * PI * (0.25 + 1.0);
    println!("first eigenvalue {:.8} (continuum {exact:.8})", d.first_eigenvalue());
    for &k in d.modes_by_eigenvalue().iter().take(5) {
        let mut c = vec![0.0; d.len()];
        c[k] = 1.0;
        let phi = spectral_synthesize(&d, &c)?;
        let lam = d.mode_eigenvalue(k);
        let defect = laplacian_apply(&phi).axpy(-lam, &phi)?.max_abs();
        println!("mode {k:>5}: eigenvalue {lam:>10.4}, defect {defect:.1e}");
    }

    let f = GridFunction::from_fn(&d, |x, y| x * (2.0 - x) * (y * 5.0).sin());
    let u = poisson_solve(&f)?;
    println!("poisson round trip {:.1e}", laplacian_apply(&u).axpy(-1.0, &f)?.max_abs());
    let coeffs = spectral_transform(&f);
    let back = spectral_synthesize(&d, &coeffs)?;
    println!("sine transform round trip {:.1e}", back.axpy(-1.0, &f)?.max_abs());
    Ok(())
}
