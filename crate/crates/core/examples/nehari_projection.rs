//! Projecting arbitrary positive states onto the Nehari manifold of a three-species system.

use nehari_forge::nehari::{energy_j, nehari_residual, normalize_to_sphere, project_to_nehari, psi, uncoupled_scaling};
use nehari_forge::{Domain, GridFunction, State, SystemParams};

fn bump(d: &Domain, cx: f64, cy: f64) -> GridFunction {
    GridFunction::from_fn(d, move |x, y| {
        x * (1.0 - x) * y * (1.0 - y) * (-((x - cx).powi(2) + (y - cy).powi(2)) / 0.05).exp()
    })
}

fn main() -> nehari_forge::Result<()> {
    let d = Domain::unit_square(48)?;
    let params = SystemParams::new(
        3.0,
        vec![1.0, 2.0, 0.5],
        vec![0.0, -0.4, -1.0, -0.7, 0.0, -0.2, -0.3, -0.9, 0.0],
        vec![0.0, 1.0, 0.6, 1.2, 0.0, 1.0, 0.8, 1.5, 0.0],
        vec![0.0, 1.0, 1.4, 0.5, 0.0, 1.0, 1.1, 0.9, 0.0],
    )?;
    let u = State::new(vec![bump(&d, 0.3, 0.3), bump(&d, 0.7, 0.4), bump(&d, 0.5, 0.7)])?;
    let v = normalize_to_sphere(&u)?;

    let s0 = uncoupled_scaling(&params, &v)?;
    println!("uncoupled scaling {s0:.6?}");
    println!("J(s0 v) = {:.10}, Psi(v) = {:.10}", energy_j(&params, &v.scaled_by(&s0))?, psi(&params, &v)?);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (s, su) = project_to_nehari(&params, &v, t)?;
        let gap = nehari_residual(&params, &su, t)?.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        println!("t = {t:.2}: s = {s:.6?}, max Nehari residual {gap:.1e}");
    }
    Ok(())
}
