use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slp::adapt::{beta_log_likelihood, beta_mle, lepski_beta, split_halves, LepskiConfig, ShapeBounds};
use slp::densities::BetaDensity;
use slp::estimators::Sample;
use slp::Error;

fn bounds() -> ShapeBounds {
    ShapeBounds::new(0.05, 50.0).unwrap()
}

#[test]
fn mle_recovers_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for &(a1, a2) in &[(4.0, 1.0), (2.0, 3.0), (0.8, 1.6)] {
        let xs = BetaDensity::new(a1, a2).unwrap().sample(20_000, &mut rng);
        let (h1, h2) = beta_mle(&xs, bounds()).unwrap();
        assert!((h1 / a1 - 1.0).abs() < 0.06, "a1 {a1}: {h1}");
        assert!((h2 / a2 - 1.0).abs() < 0.06, "a2 {a2}: {h2}");
    }
}

#[test]
fn mle_is_a_local_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let xs = BetaDensity::new(3.0, 2.0).unwrap().sample(2000, &mut rng);
    let (a1, a2) = beta_mle(&xs, bounds()).unwrap();
    let best = beta_log_likelihood(&xs, a1, a2).unwrap();
    for (d1, d2) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3)] {
        assert!(beta_log_likelihood(&xs, a1 + d1, a2 + d2).unwrap() <= best + 1e-9);
    }
}

#[test]
fn constant_data_is_flat() {
    assert!(matches!(beta_mle(&[0.4; 50], bounds()), Err(Error::FlatLikelihood(_))));
}

#[test]
fn halves_partition_rows() {
    let sx: Vec<f64> = (0..7).map(|i| i as f64 / 10.0).collect();
    let tx: Vec<f64> = (0..4).map(|i| 0.05 + i as f64 / 10.0).collect();
    let s = Sample::from_parts(&sx, &sx, &tx, &tx).unwrap();
    let (a, b) = split_halves(&s);
    assert_eq!((a.n(), a.n_target()), (3, 2));
    assert_eq!((b.n(), b.n_target()), (4, 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lepski_estimate_stays_in_range(seed in 0u64..10_000, amp in 0.0f64..2.0, noise in 0.0f64..1.0) {
        let cfg = LepskiConfig::new(0.5, 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..2048).map(|_| rng.random()).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| amp * (9.0 * x).cos() + noise * rng.random_range(-1.0..1.0)).collect();
        let o = lepski_beta(&xs, &ys, &cfg).unwrap();
        prop_assert!(o.beta_hat >= cfg.beta_lo && o.beta_hat <= cfg.beta_hi);
        prop_assert!(o.tau_hat >= o.tau_low && o.tau_hat <= o.tau_star);
    }
}
