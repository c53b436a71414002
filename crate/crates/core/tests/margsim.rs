use prodisp::fitting::hill_estimator;
use prodisp::margsim::{marginal_from_average, verify_tail_equality, LaborShareLaw};
use prodisp::FirmDistribution;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pareto_sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FirmDistribution::pareto(1.5, 1.0).unwrap().sample(&mut rng, n)
}

const UNIFORM_SHARE: LaborShareLaw = LaborShareLaw::UniformInterval { lo: 0.5, hi: 1.0 };

#[test]
fn independent_shares_preserve_the_index() {
    let mut passes = 0;
    for seed in 0..10 {
        let c = pareto_sample(100_000, seed);
        let cm = marginal_from_average(&c, &UNIFORM_SHARE, 1000 + seed).unwrap();
        let r = verify_tail_equality(&c, &cm).unwrap();
        assert!((r.average.mu_hat - 1.5).abs() < 0.1);
        assert!((r.marginal.mu_hat - 1.5).abs() < 0.1);
        assert!(!r.independence_violated, "seed {seed}: rho {}", r.share_correlation);
        passes += usize::from(r.equal);
    }
    assert!(passes >= 9, "{passes} of 10");
}

#[test]
fn constant_share_is_a_rescaling() {
    let c = pareto_sample(100_000, 5);
    let cm = marginal_from_average(&c, &LaborShareLaw::Degenerate { value: 0.7 }, 1).unwrap();
    for (a, m) in c.iter().zip(&cm) {
        assert_eq!(*m, 0.7 * a);
    }
    let r = verify_tail_equality(&c, &cm).unwrap();
    assert!((r.average.mu_hat - r.marginal.mu_hat).abs() < 1e-12 * r.average.mu_hat);
    assert!((r.marginal.c0_hat / r.average.c0_hat - 0.7).abs() < 1e-12);
    assert!(r.equal);
}

#[test]
fn unit_share_is_the_identity() {
    let c = pareto_sample(1_000, 2);
    let cm = marginal_from_average(&c, &LaborShareLaw::Degenerate { value: 1.0 }, 9).unwrap();
    assert_eq!(c, cm);
}

#[test]
fn correlated_shares_break_the_index() {
    let c = pareto_sample(100_000, 3);
    let c_max = c.iter().copied().fold(0.0, f64::max);
    let cm: Vec<f64> = c.iter().map(|&x| (x / c_max).min(1.0) * x).collect();
    let r = verify_tail_equality(&c, &cm).unwrap();
    assert!(!r.equal, "{r:?}");
    assert!(r.independence_violated);
    assert!(r.share_correlation > 0.99);
}

#[test]
fn measurement_error_reading() {
    // multiplicative noise in (0.5, 1] recorded on c is the same operation
    let c = pareto_sample(100_000, 4);
    let observed = marginal_from_average(&c, &UNIFORM_SHARE, 77).unwrap();
    let truth = hill_estimator(&c, 0.1).unwrap();
    let noisy = hill_estimator(&observed, 0.1).unwrap();
    assert!(truth.agrees_with(&noisy, 3.0));
}

#[test]
fn same_seed_same_marginals() {
    let c = pareto_sample(10_000, 6);
    let a = marginal_from_average(&c, &UNIFORM_SHARE, 12).unwrap();
    let b = marginal_from_average(&c, &UNIFORM_SHARE, 12).unwrap();
    let other = marginal_from_average(&c, &UNIFORM_SHARE, 13).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, other);
}

#[test]
fn mismatched_lengths() {
    let c = pareto_sample(1_000, 1);
    assert!(verify_tail_equality(&c, &c[..999]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_never_exceed_averages(
        seed in 0u64..10_000,
        lo in 0.01f64..0.99,
        width in 0.0f64..1.0,
    ) {
        let hi = (lo + width * (1.0 - lo)).max(lo + 1e-6).min(1.0);
        let law = LaborShareLaw::UniformInterval { lo, hi };
        let c = pareto_sample(500, seed);
        let cm = marginal_from_average(&c, &law, seed).unwrap();
        for (a, m) in c.iter().zip(&cm) {
            prop_assert!(*m <= *a && *m >= lo * a * (1.0 - 1e-15));
        }
        let max_c = c.iter().copied().fold(0.0, f64::max);
        let max_m = cm.iter().copied().fold(0.0, f64::max);
        prop_assert!(max_m <= max_c);
    }
}
