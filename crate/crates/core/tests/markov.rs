use prodisp::markov::{
    aggregate_integrals, count_exponent, log_bins, master_residual, simulate, simulate_replicas,
    stationary_powerlaw_approx, stationary_solution, MarkovConfig, SimulationOptions,
};
use proptest::prelude::*;

/// `n(c) = n(1) r^{c-1} c^{-alpha}`, the product formula summed by hand:
/// every factor `((c-1)/c)^alpha` telescopes.
fn closed_form(cfg: &MarkovConfig, c: u64) -> f64 {
    let n1 = cfg.entry_rate / cfg.a_minus;
    n1 * cfg.rate_ratio().powf((c - 1) as f64) * (c as f64).powf(-cfg.rate_exponent)
}

#[test]
fn product_formula_matches_telescoped_closed_form() {
    for (alpha, eps) in [(2.0, 1e-4), (2.5, 1e-3), (1.0, 1e-3), (3.0, 0.1)] {
        let cfg = MarkovConfig::with_cutoff_ratio(alpha, eps);
        let s = stationary_solution(&cfg).unwrap();
        for c in [1u64, 2, 3, 10, 100, 1000].into_iter().filter(|&c| c <= s.c_max()) {
            let e = closed_form(&cfg, c);
            assert!((s.count(c) - e).abs() / e < 1e-11, "alpha {alpha}, c {c}");
        }
    }
}

#[test]
fn zipf_profile_with_cutoff() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-4);
    let s = stationary_solution(&cfg).unwrap();
    let shape = |c: f64| c.powi(-2) * (-c / 1e4).exp();
    let norm = s.count(10) / shape(10.0);
    for c in 10..=1000u64 {
        let r = s.count(c) / (norm * shape(c as f64));
        assert!((r - 1.0).abs() < 1e-3, "c = {c}: {r}");
    }
}

#[test]
fn single_level_state() {
    let cfg = MarkovConfig::new(0.3, 4.0, 2.0, 2.0).with_c_max(1);
    let s = stationary_solution(&cfg).unwrap();
    assert_eq!(s.counts, vec![0.5]);
}

#[test]
fn recursion_and_boundary_hold_exactly() {
    let cfg = MarkovConfig::new(0.7, 1.3, 2.5, 0.4);
    let s = stationary_solution(&cfg).unwrap();
    let n1 = s.count(1);
    assert!((1.3 * n1 - 0.4).abs() <= f64::EPSILON * 0.4);
    for c in 1..s.c_max() {
        let expected = 0.7 * (c as f64).powf(2.5) / (1.3 * ((c + 1) as f64).powf(2.5));
        let ratio = s.count(c + 1) / s.count(c);
        assert!((ratio - expected).abs() / expected < 1e-13, "c = {c}");
    }
}

#[test]
fn exact_solution_has_vanishing_residual() {
    for (alpha, eps) in [(2.0, 1e-4), (2.0, 1e-2), (3.0, 1e-3)] {
        let cfg = MarkovConfig::with_cutoff_ratio(alpha, eps);
        let s = stationary_solution(&cfg).unwrap();
        let res = master_residual(&cfg, &s).unwrap();
        let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(worst < 1e-12 * cfg.entry_rate, "alpha {alpha}: {worst}");
    }
}

#[test]
fn rate_identity_from_the_solution() {
    for (alpha, eps) in [(2.0, 1e-2), (2.5, 1e-3), (3.0, 0.3)] {
        let cfg = MarkovConfig::with_cutoff_ratio(alpha, eps);
        let s = stationary_solution(&cfg).unwrap();
        let ratio = 1.0 - s.count(1) / s.weighted_index(alpha);
        let configured = cfg.rate_ratio();
        assert!((ratio - configured).abs() / configured < 1e-6, "alpha {alpha}");
    }
}

#[test]
fn stationary_count_exponent_equals_rate_exponent() {
    for alpha in [2.0, 2.5, 3.0] {
        let cfg = MarkovConfig::with_cutoff_ratio(alpha, 1e-4);
        let s = stationary_solution(&cfg).unwrap();
        let e = count_exponent(&s, 10, 1000).unwrap();
        assert!((e - alpha).abs() < 0.05 * alpha, "alpha {alpha}: {e}");
        // firm-weighted cumulative index is one less, read off well below
        // the cutoff
        let cfg = MarkovConfig::with_cutoff_ratio(alpha, 1e-6).with_c_max(100_000);
        let cum = stationary_solution(&cfg).unwrap().cumulative();
        let slope = -(cum[999] / cum[99]).ln() / 10f64.ln();
        assert!((slope - (alpha - 1.0)).abs() < 0.01 * alpha, "alpha {alpha}: {slope}");
    }
}

#[test]
fn power_law_approximant() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-4);
    let a = stationary_powerlaw_approx(&cfg).unwrap();
    assert_eq!(a.exponent, 2.0);
    assert!((a.cutoff - 1e4).abs() / 1e4 < 1e-3, "{}", a.cutoff);
    assert!((a.cutoff_nominal - 1e4).abs() / 1e4 < 1e-6);

    let cfg = MarkovConfig::with_cutoff_ratio(2.5, 1e-4);
    let a = stationary_powerlaw_approx(&cfg).unwrap();
    let s = stationary_solution(&cfg).unwrap();
    for c in 10..=(a.cutoff / 10.0) as u64 {
        let e = s.count(c);
        assert!((a.eval(c as f64) - e).abs() / e < 0.01, "c = {c}");
    }
    assert!(a.max_rel_deviation < 0.01);
}

#[test]
fn vanishing_cutoff_ratio_leaves_a_pure_power() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-9).with_c_max(10_000);
    let s = stationary_solution(&cfg).unwrap();
    for c in [10u64, 100, 1000, 10_000] {
        let r = s.count(c) * (c as f64).powi(2);
        assert!((r - 1.0).abs() < 1e-5, "c = {c}: {r}");
    }
}

#[test]
fn simulation_matches_exact_solution_within_noise() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-2).with_c_max(400);
    let exact = stationary_solution(&cfg).unwrap();
    let opts = SimulationOptions {
        se_levels: 400,
        ..SimulationOptions::default()
    };
    let sim = simulate_replicas(&cfg, 20_000.0, 7, 2, &opts).unwrap();
    let bins = log_bins(1, 400, 4);
    let stats = sim.bin_statistics(&bins).unwrap();
    let mut outside = 0;
    for b in &stats {
        let e: f64 = (b.lo..=b.hi).map(|c| exact.count(c)).sum();
        if (b.mean - e).abs() > 3.0 * b.stderr {
            outside += 1;
        }
    }
    assert!(outside <= 1, "{outside} of {} bins outside 3 se", stats.len());
    // residuals of the empirical state are small relative to the flows
    let res = master_residual(&cfg, &sim.state).unwrap();
    assert!(res[0].abs() < 0.1 * cfg.entry_rate, "{}", res[0]);
}

#[test]
fn simulated_zipf_tail() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-3).with_c_max(1000);
    let opts = SimulationOptions {
        se_levels: 16,
        ..SimulationOptions::default()
    };
    let sim = simulate(&cfg, 20_000.0, 11, &opts).unwrap();
    let e = count_exponent(&sim.state, 2, 100).unwrap();
    // cumulative index mu = alpha - 1 = 1
    assert!((e - 1.0 - 1.0).abs() < 0.1, "{e}");
}

#[test]
fn simulation_is_deterministic() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-2);
    let opts = SimulationOptions::default();
    let a = simulate(&cfg, 500.0, 3, &opts).unwrap();
    let b = simulate(&cfg, 500.0, 3, &opts).unwrap();
    assert_eq!(a, b);
    let c = simulate(&cfg, 500.0, 4, &opts).unwrap();
    assert_ne!(a.summary, c.summary);
}

#[test]
fn ks_distance_shrinks_with_horizon() {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-2).with_c_max(400);
    let exact = stationary_solution(&cfg).unwrap();
    let opts = SimulationOptions::default();
    let ks: Vec<f64> = [250.0, 2500.0, 25_000.0]
        .iter()
        .map(|&h| simulate_replicas(&cfg, h, 5, 4, &opts).unwrap().ks_distance(&exact))
        .collect();
    assert!(ks[0] > ks[1] && ks[1] > ks[2], "{ks:?}");
}

#[test]
fn index_integral_diverges_below_two() {
    let c: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&r| aggregate_integrals(1.5, r).unwrap().aggregate_index)
        .collect();
    assert!(c[0] < c[1] && c[1] < c[2], "{c:?}");
    assert!(c[2] > 10.0 * c[0]);
    assert!(aggregate_integrals(1.5, 0.0).unwrap().index_divergent);
}

#[test]
fn zipf_regime_is_finite_and_index_dominated() {
    let r = aggregate_integrals(2.0, 1e-4).unwrap();
    assert!(r.total_firms.is_finite() && r.aggregate_index.is_finite());
    assert!(r.aggregate_index / r.total_firms > 5.0);
}

#[test]
fn firm_integral_matches_the_discrete_sum() {
    // alpha = 3 at zero cutoff: K = zeta(3) per unit n(1)
    let r = aggregate_integrals(3.0, 0.0).unwrap();
    let cfg = MarkovConfig::with_cutoff_ratio(3.0, 1e-9).with_c_max(200_000);
    let s = stationary_solution(&cfg).unwrap();
    assert!((r.total_firms - s.total_firms).abs() < 1e-5, "{} vs {}", r.total_firms, s.total_firms);
    assert!((r.total_firms - 1.202_056_903_159_594).abs() < 1e-9);
    assert!(r.aggregate_index.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn counts_are_positive_with_exact_boundary(
        alpha in 1.0f64..4.0,
        eps in 1e-3f64..0.5,
        p in 0.1f64..5.0,
        a_minus in 0.5f64..3.0,
    ) {
        let cfg = MarkovConfig::new(a_minus * (1.0 - eps), a_minus, alpha, p);
        let s = stationary_solution(&cfg).unwrap();
        prop_assert!(s.counts.iter().all(|&n| n > 0.0));
        prop_assert!((a_minus * s.count(1) - p).abs() <= 4.0 * f64::EPSILON * p);
        let res = master_residual(&cfg, &s).unwrap();
        prop_assert!(res.iter().all(|r| r.abs() < 1e-11 * p));
    }
}
