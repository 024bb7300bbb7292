use nehari_forge::scaling::{
    bracket, continuity_probe, degree_sign_check, eval_m, jacobian_m, solve_scaling, solve_scaling_from, ScalingCoeffs,
};
use nehari_forge::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coeffs(seed: u64, l: usize) -> ScalingCoeffs {
    ScalingCoeffs::random(&mut ChaCha8Rng::seed_from_u64(seed), l)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

fn symmetric() -> ScalingCoeffs {
    ScalingCoeffs::new(3.0, vec![1.0; 2], vec![2.0; 2], vec![0.0, 1.0, 1.0, 0.0], vec![1.0; 4], vec![1.0; 4]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_is_found_and_unique(seed in any::<u64>(), l in 2usize..=4) {
        let c = coeffs(seed, l);
        let s = solve_scaling(&c).unwrap();
        let amax = c.a.iter().copied().fold(0.0, f64::max);
        let smax = s.iter().copied().fold(1.0, f64::max);
        let res = eval_m(&c, &s).unwrap();
        prop_assert!(res.iter().all(|r| r.abs() <= 1e-9 * amax * smax), "{res:?}");
        let (r, big) = bracket(&c).unwrap();
        prop_assert!(s.iter().all(|&v| v > r && v < big));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..8 {
            let start: Vec<f64> = (0..l).map(|_| rng.gen_range(0.5 * r..2.0 * big)).collect();
            let s2 = solve_scaling_from(&c, &start).unwrap();
            prop_assert!(max_diff(&s, &s2) <= 1e-9 * smax);
        }
    }

    #[test]
    fn boundary_faces_point_inward(seed in any::<u64>(), l in 2usize..=4) {
        let c = coeffs(seed, l);
        let (r, big) = bracket(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        for i in 0..l {
            let mut s: Vec<f64> = (0..l).map(|_| rng.gen_range(r..=big)).collect();
            s[i] = r;
            prop_assert!(eval_m(&c, &s).unwrap()[i] > 0.0);
            s[i] = big;
            prop_assert!(eval_m(&c, &s).unwrap()[i] < 0.0);
        }
    }

    #[test]
    fn degree_sign_matches_dimension(seed in any::<u64>(), l in 1usize..=4) {
        let c = coeffs(seed, l);
        let s = solve_scaling(&c).unwrap();
        let sign = degree_sign_check(&c, &s).unwrap();
        let expected = if l % 2 == 0 { 1 } else { -1 };
        prop_assert_eq!(sign, expected);
    }

    #[test]
    fn decoupled_closed_form(p in 1.5f64..6.0, a in prop::collection::vec(0.1f64..10.0, 1..5), bs in 0.1f64..10.0) {
        let b: Vec<f64> = a.iter().map(|x| bs * (1.0 + x)).collect();
        let c = ScalingCoeffs::decoupled(p, a.clone(), b.clone()).unwrap();
        let s = solve_scaling(&c).unwrap();
        for i in 0..a.len() {
            let exact = (a[i] / b[i]).powf(1.0 / (p - 1.0));
            prop_assert!((s[i] - exact).abs() <= 1e-12 * exact.max(1.0), "{} vs {exact}", s[i]);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>(), l in 2usize..=4) {
        let c = coeffs(seed, l);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..l).map(|_| rng.gen_range(0.5..2.0)).collect();
        let jac = jacobian_m(&c, &s).unwrap();
        for j in 0..l {
            let h = 1e-6 * s[j];
            let (mut sp, mut sm) = (s.clone(), s.clone());
            sp[j] += h;
            sm[j] -= h;
            let (mp, mm) = (eval_m(&c, &sp).unwrap(), eval_m(&c, &sm).unwrap());
            for i in 0..l {
                let fd = (mp[i] - mm[i]) / (2.0 * h);
                prop_assert!((fd - jac[(i, j)]).abs() <= 1e-6 * (1.0 + jac[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn rescaling_moves_decoupled_zero_to_ones(seed in any::<u64>(), l in 1usize..=4) {
        let c = coeffs(seed, l);
        let decoupled = ScalingCoeffs::decoupled(c.p, c.a.clone(), c.b.clone()).unwrap();
        let s0 = solve_scaling(&decoupled).unwrap();
        let n = decoupled.rescaled(&s0).unwrap();
        let ones = solve_scaling(&n).unwrap();
        prop_assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }
}

#[test]
fn symmetric_fixture_zero_is_ones() {
    let s = solve_scaling(&symmetric()).unwrap();
    assert!(max_diff(&s, &[1.0, 1.0]) < 1e-12);
    assert_eq!(degree_sign_check(&symmetric(), &s).unwrap(), 1);
}

#[test]
fn vanishing_b_has_no_zero() {
    let c = ScalingCoeffs::decoupled(3.0, vec![1.0, 1.0], vec![0.0, 2.0]).unwrap();
    assert_eq!(solve_scaling(&c), Err(Error::NoZero(0)));
    assert_eq!(bracket(&c), Err(Error::NoZero(0)));
}

#[test]
fn invalid_coefficients_are_rejected() {
    assert!(ScalingCoeffs::decoupled(1.0, vec![1.0], vec![1.0]).is_err());
    assert!(ScalingCoeffs::decoupled(3.0, vec![-1.0], vec![1.0]).is_err());
    assert!(ScalingCoeffs::new(3.0, vec![1.0; 2], vec![1.0; 2], vec![0.0, -1.0, 0.0, 0.0], vec![1.0; 4], vec![1.0; 4]).is_err());
    let e = ScalingCoeffs::new(3.0, vec![1.0; 2], vec![1.0; 2], vec![0.0; 4], vec![2.0; 4], vec![1.0; 4]).unwrap_err();
    assert!(e.to_string().contains("must be < p"));
    assert!(matches!(eval_m(&symmetric(), &[1.0, 0.0]), Err(Error::NonPositive { index: 1, .. })));
}

#[test]
fn continuity_probe_shrinks_with_perturbation() {
    let c = symmetric();
    let s = solve_scaling(&c).unwrap();
    assert_eq!(continuity_probe(&c, &c, &s).unwrap(), 0.0);

    let mut tiny = c.clone();
    tiny.a[0] += 1e-8;
    assert!(continuity_probe(&c, &tiny, &s).unwrap() <= 1e-4);

    let mut prev = f64::INFINITY;
    for k in 1..=6 {
        let mut c2 = c.clone();
        c2.a[0] = 1.0 + 10f64.powi(-k);
        let probe = continuity_probe(&c, &c2, &s).unwrap();
        assert!(probe < prev, "probe {probe} at k = {k}");
        prev = probe;
    }
}

#[test]
fn small_exponents_near_small_components() {
    // α < 1 makes ∂M/∂s blow up as s_i → 0; the fallback must still converge
    let c = ScalingCoeffs::new(
        4.0,
        vec![0.2, 5.0],
        vec![5.0, 0.2],
        vec![0.0, 3.0, 3.0, 0.0],
        vec![0.1, 0.1, 0.1, 0.1],
        vec![2.5, 2.5, 2.5, 2.5],
    )
    .unwrap();
    let s = solve_scaling(&c).unwrap();
    let res = eval_m(&c, &s).unwrap();
    assert!(res.iter().all(|r| r.abs() < 1e-9 * 5.0 * s.iter().copied().fold(1.0, f64::max)));
}
