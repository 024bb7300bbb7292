//! Strengthening the competition: re-solve with `λ ← κλ` and watch norms and
//! the overlap `∫u₁⁺u₂⁺`.
//!
//! Parameters off the synchronization manifold tend to segregate; on it the
//! components stay proportional and grow.

use nehari_forge::system::{lambda_sweep, write_sweep_csv};
use nehari_forge::{ContinuationConfig, Domain, SystemParams};

fn main() -> nehari_forge::Result<()> {
    let domain = Domain::unit_square(48)?;
    let kappas = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let cfg = ContinuationConfig::default();

    println!("# generic: mu = (1, 4), lambda12 = lambda21 = -1");
    let generic = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -1.0, -1.0)?;
    let points = lambda_sweep(&generic, &kappas, &domain, &cfg)?;
    write_sweep_csv(&points, 2, std::io::stdout())?;

    println!("# synchronized: mu = (1, 4), lambda12 = -2, lambda21 = -1");
    let synced = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -2.0, -1.0)?;
    let points = lambda_sweep(&synced, &kappas, &domain, &cfg)?;
    write_sweep_csv(&points, 2, std::io::stdout())?;
    Ok(())
}
