//! Acceptance suite: every criterion at its stated tolerance and runtime
//! budget, one PASS/FAIL line each.
//!
//! Criteria listed in `EXPECTED_FAIL` are not attainable as stated; the
//! blocking analysis lives in the decisions ledger. They are still run in
//! full and reported as FAIL. The target fails if any other criterion
//! fails, or if an expected failure starts passing.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command as Process, ExitCode};
use std::time::{Duration, Instant};

use prodisp::equilibrium::{demand_of_beta, EquilibriumSolver};
use prodisp::fitting::{gb2_mle, hill_estimator, pareto_quantile_grid, Gb2Params};
use prodisp::margsim::{marginal_from_average, verify_tail_equality, LaborShareLaw};
use prodisp::markov::{
    aggregate_integrals, count_exponent, log_bins, master_residual, simulate_replicas,
    stationary_solution, MarkovConfig, SimulationOptions,
};
use prodisp::superstats::{
    decreasing_log_grid, delta_of, generalized_boltzmann, mu_worker_of, verify_small_beta_scaling,
    SuperstatConfig,
};
use prodisp::FirmDistribution;
use prodisp_cli::commands::{execute, Command};
use prodisp_cli::scenario::Scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

/// 4: the K clause. 10: the worker index and delta clauses.
const EXPECTED_FAIL: &[u32] = &[4, 10];

type Check = std::result::Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn verdict(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (step * i as f64).exp()).collect()
}

fn uniform_grid_closed_form() -> Check {
    let grid = FirmDistribution::uniform_grid(0.01, 100_000).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for beta in [0.01, 0.05] {
        let d = demand_of_beta(&grid, beta).map_err(|e| e.to_string())?;
        let r = rel(d, 1.0 / beta);
        worst = worst.max(r);
        parts.push(format!("D({beta}) = {d:.4}"));
    }
    verdict(worst < 0.01, format!("{}, worst rel {worst:.2e}", parts.join(", ")))
}

fn demand_temperature_properties() -> Check {
    let solver = EquilibriumSolver::default();
    let kinds = [
        FirmDistribution::uniform_grid(0.01, 100_000),
        FirmDistribution::pareto(1.5, 1.0),
        FirmDistribution::exponential(0.5),
        FirmDistribution::gb2(Gb2Params::new(2.0, 50.0, 1.2, 0.75).map_err(|e| e.to_string())?),
    ];
    let mut worst_var: f64 = 0.0;
    let mut monotone = true;
    for d in &kinds {
        let d = d.as_ref().map_err(|e| e.to_string())?;
        let lo = d.mean().map_or(1e-4, |m| 1e-3 / m);
        let mut prev = f64::INFINITY;
        for beta in log_grid(lo, 10.0, 50) {
            let m = solver.boltzmann_moments(d, beta, true).map_err(|e| e.to_string())?;
            monotone &= m.mean < prev;
            prev = m.mean;
            let h = 1e-4 * beta;
            let up = solver.demand_of_beta(d, beta + h).map_err(|e| e.to_string())?;
            let down = solver.demand_of_beta(d, beta - h).map_err(|e| e.to_string())?;
            let var = m.variance.unwrap_or(f64::NAN);
            worst_var = worst_var.max(rel(-(up - down) / (2.0 * h), var));
        }
    }
    let mut worst_hi: f64 = 0.0;
    for d in [FirmDistribution::pareto(1.5, 1.0), FirmDistribution::pareto(3.0, 2.5)] {
        let d = d.map_err(|e| e.to_string())?;
        let inf = d.support_lower();
        worst_hi = worst_hi.max(rel(demand_of_beta(&d, 1e3 / inf).map_err(|e| e.to_string())?, inf));
    }
    let mut worst_lo: f64 = 0.0;
    for d in [FirmDistribution::pareto(2.5, 1.0), FirmDistribution::exponential(2.0)] {
        let d = d.map_err(|e| e.to_string())?;
        let mean = d.mean().map_err(|e| e.to_string())?;
        worst_lo = worst_lo.max(rel(demand_of_beta(&d, 1e-6 / mean).map_err(|e| e.to_string())?, mean));
    }
    verdict(
        monotone && worst_var < 1e-4 && worst_hi < 0.05 && worst_lo < 0.01,
        format!(
            "monotone {monotone}, variance identity {worst_var:.1e}, large-beta {worst_hi:.1e}, small-beta {worst_lo:.1e}"
        ),
    )
}

fn markov_exact_vs_simulated() -> Check {
    let cfg = MarkovConfig::with_cutoff_ratio(2.0, 1e-4).with_c_max(1000);
    let exact = stationary_solution(&cfg).map_err(|e| e.to_string())?;
    let res = master_residual(&cfg, &exact).map_err(|e| e.to_string())?;
    let worst_res = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let exponent = count_exponent(&exact, 10, 1000).map_err(|e| e.to_string())?;
    let opts = SimulationOptions {
        se_levels: 1000,
        ..SimulationOptions::default()
    };
    let sim = simulate_replicas(&cfg, 5e4, 0, 4, &opts).map_err(|e| e.to_string())?;
    let stats = sim.bin_statistics(&log_bins(1, 1000, 4)).map_err(|e| e.to_string())?;
    let mut worst_z: f64 = 0.0;
    let mut outside = 0;
    for b in &stats {
        let e: f64 = (b.lo..=b.hi).map(|c| exact.count(c)).sum();
        let z = (b.mean - e).abs() / b.stderr;
        worst_z = worst_z.max(z);
        outside += usize::from(!(z <= 3.0));
    }
    verdict(
        outside == 0 && worst_res < 1e-12 * cfg.entry_rate && (exponent - 2.0).abs() <= 0.1,
        format!(
            "{outside} of {} bins beyond 3 se (max |z| {worst_z:.2}), residual {worst_res:.1e}, count exponent {exponent:.4}",
            stats.len()
        ),
    )
}

fn finiteness_argument() -> Check {
    let a = aggregate_integrals(1.5, 1e-2).map_err(|e| e.to_string())?;
    let b = aggregate_integrals(1.5, 1e-4).map_err(|e| e.to_string())?;
    let growth = b.aggregate_index / a.aggregate_index;
    let k_change = rel(b.total_firms, a.total_firms);
    verdict(
        growth >= 10.0 && k_change < 0.05,
        format!(
            "C {:.2} -> {:.2} (x{growth:.2}), K {:.4} -> {:.4} ({:.1}%)",
            a.aggregate_index,
            b.aggregate_index,
            a.total_firms,
            b.total_firms,
            100.0 * k_change
        ),
    )
}

fn superstat_asymptotics() -> Check {
    let firms = FirmDistribution::pareto(1.5, 1.0).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    for gamma in [0.0, 0.25, 0.5, 0.75] {
        let cfg = SuperstatConfig::with_default_beta_max(gamma, firms.clone())
            .map_err(|e| e.to_string())?;
        let c = 1e3 / cfg.beta_max;
        let b = generalized_boltzmann(&cfg, c).map_err(|e| e.to_string())?;
        ratios.push(b.value / cfg.bfactor_asymptotic(c));
    }
    let ok = ratios.iter().all(|r| (0.98..=1.02).contains(r));
    verdict(ok, format!("ratios {ratios:.5?}"))
}

fn index_algebra() -> Check {
    let w = |mf, d| mu_worker_of(mf, d).map_err(|e| e.to_string());
    let hand = w(1.5, -1.0)? == 2.5 && w(3.0, 0.5)? == 3.5;
    let mut continuous = true;
    for d in [-2.0, -1.0, 0.0, 0.5, 0.9] {
        // both branch formulas at mu_F = 2
        continuous &= w(2.0, d)? == 2.0 + (2.0 - 1.0) * (1.0 - d) && w(2.0, d)? == 3.0 - d;
    }
    let mut worst_round: f64 = 0.0;
    for mf in [1.1, 1.5, 1.9, 2.0, 2.5, 4.0] {
        for d in [-3.0, -1.0, -0.25, 0.0, 0.5, 0.99] {
            let back = delta_of(mf, w(mf, d)?).map_err(|e| e.to_string())?;
            let m = if mf >= 2.0 { 1.0 } else { mf - 1.0 };
            let scale = w(mf, d)? / m + d.abs();
            worst_round = worst_round.max((back - d).abs() / (f64::EPSILON * scale));
        }
    }
    let mut worst_fixed: f64 = 0.0;
    for d in [-2.0, -1.0, 0.0, 0.5] {
        worst_fixed = worst_fixed.max((w(1.0 + 1e-3, d)? - 1.0).abs());
    }
    verdict(
        hand && continuous && worst_round <= 8.0 && worst_fixed < 5e-3,
        format!(
            "hand values {hand}, continuity {continuous}, roundtrip {worst_round:.1} eps-units, fixed point {worst_fixed:.1e}"
        ),
    )
}

fn small_beta_scaling() -> Check {
    let p3 = FirmDistribution::pareto(3.0, 1.0).map_err(|e| e.to_string())?;
    let p15 = FirmDistribution::pareto(1.5, 1.0).map_err(|e| e.to_string())?;
    let a = verify_small_beta_scaling(&p3, &decreasing_log_grid(1e-3, 1e-5, 16))
        .map_err(|e| e.to_string())?;
    let b = verify_small_beta_scaling(&p15, &decreasing_log_grid(1e-6, 1e-9, 16))
        .map_err(|e| e.to_string())?;
    verdict(
        (a.slope - 1.0).abs() <= 0.03
            && (b.slope - 0.5).abs() <= 0.03
            && a.r_squared > 0.999
            && b.r_squared > 0.999,
        format!(
            "mu_F=3 slope {:.4} (R2 {:.6}), mu_F=1.5 slope {:.4} (R2 {:.6})",
            a.slope, a.r_squared, b.slope, b.r_squared
        ),
    )
}

fn marginal_vs_average() -> Check {
    let pareto = FirmDistribution::pareto(1.5, 1.0).map_err(|e| e.to_string())?;
    let law = LaborShareLaw::UniformInterval { lo: 0.5, hi: 1.0 };
    let mut equal = 0;
    for seed in 0..10u64 {
        let c = pareto.sample(&mut ChaCha8Rng::seed_from_u64(seed), 100_000);
        let cm = marginal_from_average(&c, &law, 1000 + seed).map_err(|e| e.to_string())?;
        equal += usize::from(verify_tail_equality(&c, &cm).map_err(|e| e.to_string())?.equal);
    }
    let c = pareto.sample(&mut ChaCha8Rng::seed_from_u64(99), 100_000);
    let cm = marginal_from_average(&c, &LaborShareLaw::Degenerate { value: 0.7 }, 0)
        .map_err(|e| e.to_string())?;
    let r = verify_tail_equality(&c, &cm).map_err(|e| e.to_string())?;
    let gap = rel(r.marginal.mu_hat, r.average.mu_hat);
    verdict(
        equal >= 9 && gap < 1e-12,
        format!("{equal} of 10 seeds agree within 3 sigma; degenerate share gap {gap:.1e}"),
    )
}

fn estimator_suite() -> Check {
    let mut worst_hill: f64 = 0.0;
    for mu in [1.0, 1.5, 2.5] {
        let fit = hill_estimator(&pareto_quantile_grid(mu, 1.0, 1_000_000), 0.1)
            .map_err(|e| e.to_string())?;
        worst_hill = worst_hill.max((fit.mu_hat - mu).abs());
    }
    let truth = Gb2Params::new(2.0, 50.0, 1.2, 0.75).map_err(|e| e.to_string())?;
    let xs = FirmDistribution::gb2(truth)
        .map_err(|e| e.to_string())?
        .sample(&mut ChaCha8Rng::seed_from_u64(0), 50_000);
    let fit = gb2_mle(&xs, None).map_err(|e| e.to_string())?;
    let p = fit.params;
    let errs = [rel(p.a, 2.0), rel(p.b, 50.0), rel(p.p, 1.2), rel(p.q, 0.75)];
    let worst_gb2 = errs.iter().copied().fold(0.0, f64::max);
    let hill = hill_estimator(&xs, 0.1).map_err(|e| e.to_string())?;
    let tail = fit.tail_fit();
    let agree = tail.agrees_with(&hill, 3.0);
    verdict(
        worst_hill < 1e-3 && worst_gb2 < 0.05 && agree,
        format!(
            "Hill worst {worst_hill:.1e}; GB2 rel errors a {:.3} b {:.3} p {:.3} q {:.3}; a*q {:.4}+-{:.4} vs Hill {:.4}+-{:.4}",
            errs[0], errs[1], errs[2], errs[3], tail.mu_hat, tail.stderr, hill.mu_hat, hill.stderr
        ),
    )
}

fn field(v: &Value, path: &[&str]) -> Option<f64> {
    path.iter().try_fold(v, |v, k| v.get(k))?.as_f64()
}

fn synthetic_economy() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let (mut pass_a, mut pass_b, mut pass_c) = (0, 0, 0);
    let mut rows = Vec::new();
    for seed in 0..10u64 {
        let mut scn = Scenario::builtin();
        scn.seed = Some(seed);
        scn.out = Some(tmp.path().join(format!("seed{seed}")));
        let out = execute(&Command::Pipeline { input: None }, &scn).map_err(|e| e.to_string())?;
        let text = std::fs::read(out.join("summary.json")).map_err(|e| e.to_string())?;
        let summary: Value = serde_json::from_slice(&text).map_err(|e| e.to_string())?;
        let fits = summary["fits"].as_array().ok_or("summary has no fits")?;
        let n = fits.len();
        let (mut near, mut mw, mut mf, mut delta_ok) = (0, 0.0, 0.0, 0);
        for f in fits {
            let w = field(f, &["worker", "mu_hat"]).ok_or("worker fit")?;
            let se = field(f, &["worker", "stderr"]).ok_or("worker stderr")?;
            near += usize::from((w - 2.5).abs() <= 3.0 * se);
            mw += w / n as f64;
            mf += field(f, &["firm", "mu_hat"]).ok_or("firm fit")? / n as f64;
            if let (Some(d), Some(s)) = (field(f, &["delta", "delta"]), field(f, &["delta", "stderr"])) {
                delta_ok += usize::from((d + 1.0).abs() <= 3.0 * s);
            }
        }
        // a clause holds for a seed when at least 90% of its years are in band
        pass_a += usize::from(near * 10 >= n * 9);
        pass_b += usize::from(mw > mf);
        pass_c += usize::from(delta_ok * 10 >= n * 9);
        rows.push(format!("{seed}:{mw:.2}/{mf:.2}"));
    }
    verdict(
        pass_a >= 9 && pass_b >= 9 && pass_c >= 9,
        format!(
            "seeds passing: mu_W near 2.5 {pass_a}/10, mu_W > mu_F {pass_b}/10, delta near -1 {pass_c}/10; mean mu_W/mu_F {}",
            rows.join(" ")
        ),
    )
}

fn read_tree(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path())?,
        );
    }
    Ok(files)
}

fn cli_determinism() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let commands = [
        "equilibrium",
        "stationary",
        "simulate",
        "superstat",
        "fit",
        "mcarlo",
        "gen",
        "pipeline",
    ];
    let mut differing = Vec::new();
    for cmd in commands {
        let mut trees = Vec::new();
        for run in ["a", "b"] {
            let out = tmp.path().join(format!("{cmd}-{run}"));
            let status = Process::new(env!("CARGO_BIN_EXE_prodisp"))
                .args(["--seed", "7", "--out"])
                .arg(&out)
                .arg(cmd)
                .env_remove("PRODISP_SEED")
                .env_remove("PRODISP_OUT")
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{cmd}: {}", String::from_utf8_lossy(&status.stderr)));
            }
            trees.push(read_tree(&out).map_err(|e| e.to_string())?);
        }
        if trees[0] != trees[1] || trees[0].is_empty() {
            differing.push(cmd);
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} subcommands rerun, differing: {differing:?}", commands.len()),
    )
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "uniform-grid closed form", budget: Duration::from_secs(1), run: uniform_grid_closed_form },
        Criterion { id: 2, name: "demand-temperature properties", budget: Duration::from_secs(10), run: demand_temperature_properties },
        Criterion { id: 3, name: "markov exact vs simulated", budget: Duration::from_secs(120), run: markov_exact_vs_simulated },
        Criterion { id: 4, name: "finiteness argument", budget: Duration::from_secs(10), run: finiteness_argument },
        Criterion { id: 5, name: "superstatistics asymptotics", budget: Duration::from_secs(5), run: superstat_asymptotics },
        Criterion { id: 6, name: "index algebra", budget: Duration::from_secs(1), run: index_algebra },
        Criterion { id: 7, name: "small-beta scaling", budget: Duration::from_secs(30), run: small_beta_scaling },
        Criterion { id: 8, name: "marginal vs average", budget: Duration::from_secs(30), run: marginal_vs_average },
        Criterion { id: 9, name: "estimator suite", budget: Duration::from_secs(120), run: estimator_suite },
        Criterion { id: 10, name: "synthetic economy closed loop", budget: Duration::from_secs(300), run: synthetic_economy },
        Criterion { id: 11, name: "CLI determinism", budget: Duration::from_secs(60), run: cli_determinism },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = Vec::new();
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > c.budget {
            pass = false;
            detail.push_str(&format!("; over budget {:?}", c.budget));
        }
        let expected_fail = EXPECTED_FAIL.contains(&c.id);
        let tag = match (pass, expected_fail) {
            (true, false) => "PASS",
            (false, true) => "FAIL (expected, see ledger)",
            (false, false) => "FAIL",
            (true, true) => "PASS (unexpected)",
        };
        println!(
            "criterion {:>2} {tag}: {} [{:.2}s] {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
        if pass == expected_fail {
            unexpected.push(c.id);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes: {unexpected:?}");
        ExitCode::FAILURE
    }
}
