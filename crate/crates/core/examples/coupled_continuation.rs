//! Continuation from the uncoupled ground states to the coupled system on the
//! unit square, with a certificate of the endpoint.
//!
//! ```text
//! cargo run --release --example coupled_continuation -- 64
//! ```

use nehari_forge::system::{continue_in_t, verify_solution, write_trace_csv};
use nehari_forge::{ContinuationConfig, Domain, SystemParams};

fn main() -> nehari_forge::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let params = SystemParams::lotka_volterra(3.0, [1.0, 1.0], -0.5, -0.5)?;
    let domain = Domain::unit_square(n)?;
    let run = continue_in_t(&params, &domain, &ContinuationConfig::default())?;

    write_trace_csv(&run.trace, std::io::stdout())?;
    let report = verify_solution(&params, &run.state, 1.0)?;
    println!();
    println!("newton iterations    {}", run.newton_iterations);
    println!("relative residual    {:.3e}", report.relative_residual);
    println!("nehari residual      {:.3e}", report.nehari_relative);
    println!("component norms      {:?}", report.norms);
    println!("s of normalized u    {:?}", report.s);
    println!("interior minima      {:?}", report.min_values);
    println!("overlap              {:.6}", report.overlaps[0].integral);
    println!("certified            {}", report.certified);
    Ok(())
}
