use proptest::prelude::*;
use rov_core::processes::{
    simulate_gbm, simulate_mean_reverting, simulate_risk_neutral_gbm, GbmParams, MeanRevParams,
    RiskNeutralParams, ShockMatrix,
};
use rov_core::rng::PathStream;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gbm_paths_stay_positive(mu in -1.0f64..1.0, sigma in 0.0f64..1.5, s0 in 1e-3f64..1e4, seed in any::<u64>()) {
        let m = simulate_gbm(&GbmParams::new(mu, sigma).unwrap(), s0, 20, 50, seed).unwrap();
        for p in 0..50 {
            prop_assert!(m.path(p).iter().all(|v| *v > 0.0));
        }
        let rn = simulate_risk_neutral_gbm(&RiskNeutralParams::new(mu, sigma).unwrap(), s0, 20, 50, seed).unwrap();
        for p in 0..50 {
            prop_assert!(rn.path(p).iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn shock_rows_match_standalone_streams(seed in any::<u64>(), path in 0usize..30) {
        let shocks = ShockMatrix::standard_normal(30, 6, seed).unwrap();
        let mut s = PathStream::new(seed, path);
        let direct: Vec<f64> = (0..6).map(|_| s.next_normal()).collect();
        prop_assert_eq!(shocks.row(path), direct.as_slice());
    }
}

#[test]
fn discounted_risk_neutral_mean_is_s0() {
    let (r, s0) = (0.06, 300.0);
    let m = simulate_risk_neutral_gbm(&RiskNeutralParams::new(r, 0.09).unwrap(), s0, 10, 100_000, 31).unwrap();
    for t in [1, 5, 10] {
        let (mean, se) = m.mean_and_stderr_at(t);
        let d = (-r * t as f64).exp();
        assert!(
            (mean * d - s0).abs() <= 3.0 * se * d,
            "t={t}: {} vs {s0} (se {})",
            mean * d,
            se * d
        );
    }
}

#[test]
fn mean_reverting_started_at_level_stays_there() {
    let p = MeanRevParams::new(0.05, 2.6, 0.047).unwrap();
    let m = simulate_mean_reverting(&p, 2.6, 10, 100_000, 32).unwrap();
    for t in 1..=10 {
        let (mean, se) = m.mean_and_stderr_at(t);
        assert!((mean - 2.6).abs() <= 3.0 * se, "t={t}: {mean} (se {se})");
    }
}

#[test]
fn log_return_variance_grows_linearly() {
    let sigma = 0.098;
    let n = 100_000;
    let m = simulate_gbm(&GbmParams::new(0.015, sigma).unwrap(), 1300.0, 10, n, 33).unwrap();
    for t in [1, 5, 10] {
        let logs: Vec<f64> = (0..n).map(|p| (m.get(p, t) / 1300.0).ln()).collect();
        let mean = logs.iter().sum::<f64>() / n as f64;
        let var = logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = sigma * sigma * t as f64;
        let se = target * (2.0 / (n - 1) as f64).sqrt();
        assert!((var - target).abs() <= 3.0 * se, "t={t}: {var} vs {target} (se {se})");
    }
}

#[test]
fn repeated_simulation_is_bit_identical() {
    let p = MeanRevParams::new(0.05, 2.6, 0.047).unwrap();
    let a = simulate_mean_reverting(&p, 2.0, 10, 5_000, 9).unwrap();
    let b = simulate_mean_reverting(&p, 2.0, 10, 5_000, 9).unwrap();
    assert_eq!(a, b);
    let mut x = Vec::new();
    let mut y = Vec::new();
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}
