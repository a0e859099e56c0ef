use proptest::prelude::*;

use slp::rates::{critical_sizes, sar, tlr, Region};

const BETA: f64 = 0.5;

proptest! {
    #[test]
    fn sar_is_at_least_one(ln in 2.0f64..9.0, lt in 0.0f64..10.0, a in 1.0f64..8.0) {
        prop_assert!(sar(10f64.powf(ln), 10f64.powf(lt), a, BETA) >= 1.0 - 1e-12);
    }

    #[test]
    fn regions_are_ordered_in_target_size(ln in 2.0f64..9.0, lt in 0.0f64..9.0, dt in 0.0f64..2.0, a in 3.2f64..8.0) {
        let n = 10f64.powf(ln);
        let r1 = tlr(n, 10f64.powf(lt), a, BETA).region;
        let r2 = tlr(n, 10f64.powf(lt + dt), a, BETA).region;
        prop_assert!((r1 as u8) <= (r2 as u8));
    }

    #[test]
    fn rate_is_continuous_across_boundaries(ln in 3.0f64..9.0, a in 3.2f64..8.0) {
        let n = 10f64.powf(ln);
        let (lower, equal, upper) = critical_sizes(n, a, 1.0, BETA);
        for b in [lower, equal, upper] {
            let below = tlr(n, b * (1.0 - 1e-9), a, BETA).rate_value;
            let above = tlr(n, b * (1.0 + 1e-9), a, BETA).rate_value;
            prop_assert!(below / above <= 4.0 && above / below <= 4.0, "jump at {b}: {below} vs {above}");
        }
    }

    #[test]
    fn sar_rises_then_falls(ln in 4.0f64..9.0, a in 3.2f64..8.0) {
        let n = 10f64.powf(ln);
        let (lower, equal, upper) = critical_sizes(n, a, 1.0, BETA);
        let steps = 40;
        let path = |lo: f64, hi: f64| -> Vec<f64> {
            (0..=steps).map(|i| sar(n, lo * (hi / lo).powf(i as f64 / steps as f64), a, BETA)).collect()
        };
        let up = path(lower * 1.001, equal);
        let down = path(equal * 1.001, upper);
        prop_assert!(up.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)));
        prop_assert!(down.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }
}

#[test]
fn regular_sources_have_no_acceleration() {
    for a in [1.0, 2.0, 3.0] {
        assert_eq!(sar(1e6, 1e4, a, BETA), 1.0);
        let r = tlr(1e6, 1e4, a, BETA);
        assert!(!r.slp);
        assert!(matches!(r.region, Region::SD | Region::TD));
    }
}

#[test]
fn peak_acceleration_grows_with_n() {
    let peak = |n: f64| sar(n, critical_sizes(n, 6.0, 1.0, BETA).1, 6.0, BETA);
    assert!(peak(1e4) < peak(1e6) && peak(1e6) < peak(1e8));
    assert!(peak(1e8) > 4.0);
}
