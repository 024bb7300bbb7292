//! Synchronized pairs: the criterion, the construction `(w, ρw)`, and the
//! residual gap left by the best synchronized ansatz when the criterion fails.

use nehari_forge::sync::{nodal_ratio_variance, sync_criterion, sync_solve, synchronized_ansatz_gap};
use nehari_forge::system::{continue_in_t, verify_solution};
use nehari_forge::{ContinuationConfig, Domain, SystemParams};

fn main() -> nehari_forge::Result<()> {
    let domain = Domain::unit_square(64)?;

    let good = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -2.0, -1.0)?;
    let verdict = sync_criterion(&good)?;
    println!("criterion: holds={} a={} rho={}", verdict.holds, verdict.a, verdict.rho);
    let pair = sync_solve(&good, &domain)?;
    let report = verify_solution(&good, &pair, 1.0)?;
    println!(
        "pair: residual {:.3e}, nehari {:.3e}, ratio variance {:.3e}",
        report.relative_residual,
        report.nehari_relative,
        nodal_ratio_variance(&pair)?
    );

    let bad = SystemParams::lotka_volterra(3.0, [1.0, 4.0], -1.0, -1.0)?;
    let verdict = sync_criterion(&bad)?;
    println!(
        "violating: holds={} reason={:?} required ratio {}",
        verdict.holds, verdict.reason, verdict.required_ratio
    );
    let full = continue_in_t(&bad, &domain, &ContinuationConfig::default())?.state;
    let fit = synchronized_ansatz_gap(&bad, &full)?;
    println!(
        "full solve: ratio variance {:.3e}; best ansatz t=({:.4}, {:.4}) residual {:.3e}",
        nodal_ratio_variance(&full)?,
        fit.t1,
        fit.t2,
        fit.residual
    );
    Ok(())
}
