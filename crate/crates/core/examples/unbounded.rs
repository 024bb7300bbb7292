//! Growth of the profiles `−Δw = w^p − a w^q` as the absorption `a` increases.
//!
//! ```text
//! cargo run --release --example unbounded -- 1 10 100
//! ```

use nehari_forge::sync::unboundedness_experiment;
use nehari_forge::Domain;

fn main() -> nehari_forge::Result<()> {
    let mut a_list: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    if a_list.is_empty() {
        a_list = vec![1.0, 10.0, 100.0];
    }
    let domain = Domain::unit_square(64)?;
    let table = unboundedness_experiment(1.0, 3.0, 2.0, &a_list, &domain)?;
    table.write_csv(std::io::stdout())?;
    println!("strictly increasing: {}", table.strictly_increasing());
    for row in &table.rows {
        println!("a = {:>6}: nehari identity {:.2e}, lower bound {}", row.a, row.nehari_relative, row.lower_bound_ok);
    }
    Ok(())
}
