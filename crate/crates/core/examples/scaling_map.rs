//! The scaling map `M(s)` and its unique positive zero.

use nehari_forge::scaling::{bracket, degree_sign_check, eval_m, solve_scaling, ScalingCoeffs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nehari_forge::Result<()> {
    // symmetric two-species coefficients; the zero is (1, 1)
    let c = ScalingCoeffs::new(3.0, vec![1.0; 2], vec![2.0; 2], vec![0.0, 1.0, 1.0, 0.0], vec![1.0; 4], vec![1.0; 4])?;
    let s = solve_scaling(&c)?;
    println!("symmetric: s = {s:?}, degree sign {}", degree_sign_check(&c, &s)?);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for l in 2..=4 {
        let c = ScalingCoeffs::random(&mut rng, l);
        let s = solve_scaling(&c)?;
        let (r, big) = bracket(&c)?;
        let res = eval_m(&c, &s)?.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        println!(
            "l = {l}: p = {:.3}, s = {s:.6?}, box [{r:.3e}, {big:.3e}], |M(s)| = {res:.1e}, degree sign {}",
            c.p,
            degree_sign_check(&c, &s)?
        );
    }
    Ok(())
}
