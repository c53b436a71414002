//! The eight subcommands. Each writes its files into a [`RunDir`] and
//! returns the JSON summary; [`execute`] adds the manifest and commits.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use prodisp::equilibrium::{uniform_closed_form, EquilibriumSolver, WorkerDensity};
use prodisp::fitting::{
    gb2_mle, hill_estimator, rank_size, select_fit_range, Gb2Params, ParetoFit,
};
use prodisp::margsim::{marginal_from_average, verify_tail_equality_with};
use prodisp::markov::{
    count_exponent, log_bins, master_residual, simulate_replicas, stationary_powerlaw_approx,
    stationary_solution, SimulationOptions,
};
use prodisp::stats::replica_seed;
use prodisp::superstats::{
    decreasing_log_grid, generalized_boltzmann, mu_worker_of, upper_level_index,
    verify_small_beta_scaling, worker_dist_super,
};
use prodisp::FirmDistribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::analysis::{analyze_year, FitSettings, YearFits};
use crate::economy::generate_synthetic_economy;
use crate::error::{CliError, Result};
use crate::output::{num, rank_size_rows, RunDir, SCHEMA_VERSION, SUMMARY_FILE};
use crate::panel::{ingest_panel, sector_aggregate, trim_outliers, worker_weighted_sample, Panel};
use crate::scenario::{Block, FitBlock, PanelBlock, Scenario};

/// Worker-level construction reported in every panel-based summary.
pub const WORKER_WEIGHTING_NOTE: &str =
    "worker-level distribution built by firm-size weighting: each firm contributes weight L at c = Y/L";

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Equilibrium { demand: Option<f64>, beta: Option<f64> },
    Stationary,
    Simulate { horizon: Option<f64>, replicas: Option<usize> },
    Superstat { gamma: Option<f64> },
    Fit { input: Option<PathBuf>, year: Option<i32> },
    Mcarlo { samples: Option<usize> },
    Gen,
    Pipeline { input: Option<PathBuf> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Equilibrium { .. } => "equilibrium",
            Command::Stationary => "stationary",
            Command::Simulate { .. } => "simulate",
            Command::Superstat { .. } => "superstat",
            Command::Fit { .. } => "fit",
            Command::Mcarlo { .. } => "mcarlo",
            Command::Gen => "gen",
            Command::Pipeline { .. } => "pipeline",
        }
    }

    /// Blocks the command needs from the scenario.
    pub fn required_blocks(&self, scn: &Scenario) -> Vec<Block> {
        match self {
            Command::Equilibrium { .. } => vec![Block::Firms, Block::Equilibrium],
            Command::Stationary => vec![Block::Markov],
            Command::Simulate { .. } => vec![Block::Markov, Block::Simulation],
            Command::Superstat { .. } => {
                if scn.superstat.and_then(|s| s.gamma).is_some() {
                    vec![Block::Firms]
                } else {
                    vec![Block::Firms, Block::Demand]
                }
            }
            Command::Fit { .. } => vec![Block::Fit],
            Command::Mcarlo { .. } => vec![Block::Firms, Block::LaborShare, Block::Mcarlo],
            Command::Gen => vec![Block::Firms, Block::Demand, Block::Economy],
            Command::Pipeline { input: Some(_) } => vec![],
            Command::Pipeline { input: None } => vec![Block::Firms, Block::Demand, Block::Economy],
        }
    }

    /// Folds subcommand flags into the scenario.
    pub fn apply_overrides(&self, scn: &mut Scenario) {
        match self {
            Command::Equilibrium { demand, beta } => {
                if demand.is_some() || beta.is_some() {
                    scn.equilibrium = Some(crate::scenario::EquilibriumBlock {
                        demand: *demand,
                        beta: *beta,
                    });
                }
            }
            Command::Simulate { horizon, replicas } => {
                if let Some(s) = scn.simulation.as_mut() {
                    if let Some(h) = horizon {
                        s.horizon = *h;
                    }
                    if let Some(r) = replicas {
                        s.replicas = *r;
                    }
                }
            }
            Command::Superstat { gamma: Some(g) } => {
                scn.superstat.get_or_insert_with(Default::default).gamma = Some(*g);
            }
            Command::Mcarlo { samples: Some(n) } => {
                if let Some(m) = scn.mcarlo.as_mut() {
                    m.samples = *n;
                }
            }
            _ => {}
        }
    }
}

/// Runs a command into the scenario's output directory. On failure the
/// staged files are kept and the error names the failing stage.
pub fn execute(cmd: &Command, scn: &Scenario) -> Result<PathBuf> {
    scn.require(cmd.name(), &cmd.required_blocks(scn))?;
    scn.validate()?;
    let mut run = RunDir::create(&scn.out_dir())?;
    let mut summary = match dispatch(cmd, scn, &mut run) {
        Ok(v) => v,
        Err(CliError::Stage { stage, source, .. }) => return Err(run.abandon(&stage, *source)),
        Err(e) => return Err(run.abandon(cmd.name(), e)),
    };
    let mut manifest = run.manifest().to_vec();
    manifest.push(SUMMARY_FILE.to_string());
    if let Value::Object(map) = &mut summary {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        map.insert("command".into(), json!(cmd.name()));
        map.insert("seed".into(), json!(scn.seed()));
        map.insert("manifest".into(), json!(manifest));
    }
    if let Err(e) = run.write_json(SUMMARY_FILE, &summary) {
        return Err(run.abandon("summary", e));
    }
    run.commit()
}

fn dispatch(cmd: &Command, scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    match cmd {
        Command::Equilibrium { .. } => equilibrium(scn, run),
        Command::Stationary => stationary(scn, run),
        Command::Simulate { .. } => simulate(scn, run),
        Command::Superstat { .. } => superstat(scn, run),
        Command::Fit { input, year } => fit(scn, run, input.as_deref(), *year),
        Command::Mcarlo { .. } => mcarlo(scn, run),
        Command::Gen => gen(scn, run),
        Command::Pipeline { input } => pipeline(scn, run, input.as_deref()),
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ CliError::Stage { .. } => e,
        e => CliError::Stage {
            stage: name.to_string(),
            artifacts: PathBuf::new(),
            source: Box::new(e),
        },
    })
}

fn equilibrium(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    scn.require("equilibrium", &[Block::Firms, Block::Equilibrium])?;
    let firms = scn.firms.clone().expect("required");
    let block = scn.equilibrium.expect("required");
    let solver = EquilibriumSolver::default();
    let beta = match (block.demand, block.beta) {
        (Some(d), _) => solver.beta_of_demand(&firms, d)?,
        (None, Some(b)) => b,
        (None, None) => unreachable!("validated"),
    };
    let state = solver.worker_distribution(&firms, beta)?;
    match &state.worker_density {
        WorkerDensity::Levels {
            levels,
            probabilities,
        } => run.write_csv(
            "worker_density.csv",
            &["c", "probability"],
            levels.iter().zip(probabilities).map(|(c, p)| vec![num(*c), num(*p)]),
        )?,
        WorkerDensity::Tabulated {
            grid,
            density,
            survival,
            ..
        } => run.write_csv(
            "worker_density.csv",
            &["c", "density", "survival"],
            grid.iter()
                .zip(density)
                .zip(survival)
                .map(|((c, d), s)| vec![num(*c), num(*d), num(*s)]),
        )?,
    }
    let closed_form = match firms {
        FirmDistribution::UniformGrid { spacing, count } => {
            Some(uniform_closed_form(spacing, count, beta)?)
        }
        _ => None,
    };
    Ok(json!({
        "firms": firms,
        "beta": state.beta,
        "temperature": state.temperature(),
        "demand": state.demand,
        "log_partition": state.log_partition,
        "uniform_closed_form": closed_form,
    }))
}

fn stationary(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    scn.require("stationary", &[Block::Markov])?;
    let cfg = scn.markov.expect("required");
    let state = stationary_solution(&cfg)?;
    let approx = stationary_powerlaw_approx(&cfg)?;
    let residual = master_residual(&cfg, &state)?;
    let max_residual = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let cumulative = state.cumulative();
    run.write_csv(
        "stationary.csv",
        &["c", "count", "cumulative", "approx"],
        state.counts.iter().enumerate().map(|(i, n)| {
            let c = (i + 1) as f64;
            vec![num(c), num(*n), num(cumulative[i]), num(approx.eval(c))]
        }),
    )?;
    let window_hi = (state.c_max() / 10).max(20).min(state.c_max());
    let exponent = count_exponent(&state, 1, window_hi).ok();
    Ok(json!({
        "markov": cfg,
        "c_max": state.c_max(),
        "total_firms": state.total_firms,
        "aggregate_index": state.aggregate_index,
        "truncated_tail_mass": state.truncated_tail_mass,
        "warnings": state.warnings,
        "max_master_residual": max_residual,
        "count_exponent": { "window": [1, window_hi], "value": exponent },
        "approximation": {
            "exponent": approx.exponent,
            "cutoff_nominal": approx.cutoff_nominal,
            "cutoff": approx.cutoff,
            "amplitude": approx.amplitude,
            "max_rel_deviation": approx.max_rel_deviation,
            "window": approx.window,
        },
    }))
}

fn simulate(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    scn.require("simulate", &[Block::Markov, Block::Simulation])?;
    let cfg = scn.markov.expect("required");
    let sim = scn.simulation.expect("required");
    let opts = SimulationOptions {
        warmup_fraction: sim.warmup_fraction,
        batches: sim.batches,
        ..SimulationOptions::default()
    };
    let result = simulate_replicas(&cfg, sim.horizon, scn.seed(), sim.replicas, &opts)?;
    let exact = stationary_solution(&cfg)?;
    let top = (opts.se_levels as u64).min(exact.c_max());
    let bins = log_bins(1, top, 4);
    let stats = result.bin_statistics(&bins)?;
    let mut within = 0;
    let rows: Vec<Vec<String>> = stats
        .iter()
        .map(|b| {
            let e: f64 = (b.lo..=b.hi).map(|c| exact.count(c)).sum();
            let z = if b.stderr > 0.0 { (b.mean - e) / b.stderr } else { 0.0 };
            if z.abs() <= 3.0 {
                within += 1;
            }
            vec![b.lo.to_string(), b.hi.to_string(), num(b.mean), num(b.stderr), num(e), num(z)]
        })
        .collect();
    run.write_csv(
        "bins.csv",
        &["lo", "hi", "simulated", "stderr", "exact", "z"],
        rows,
    )?;
    run.write_csv(
        "occupancy.csv",
        &["c", "simulated", "exact"],
        result
            .state
            .counts
            .iter()
            .enumerate()
            .map(|(i, n)| vec![(i + 1).to_string(), num(*n), num(exact.count(i as u64 + 1))]),
    )?;
    Ok(json!({
        "markov": cfg,
        "trajectory": result.summary,
        "bins": stats.len(),
        "bins_within_3_se": within,
        "ks_distance": result.ks_distance(&exact),
    }))
}

fn superstat(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    scn.require("superstat", &[Block::Firms])?;
    if scn.superstat.and_then(|s| s.gamma).is_none() {
        scn.require("superstat", &[Block::Demand])?;
    }
    let cfg = scn.superstat_config()?;
    let grid = decreasing_log_grid(1e4 / cfg.beta_max, 1e-2 / cfg.beta_max, 121);
    let mut rows = Vec::with_capacity(grid.len());
    for &c in grid.iter().rev() {
        let b = generalized_boltzmann(&cfg, c)?;
        rows.push(vec![num(c), num(b.value), num(b.error), num(cfg.bfactor_asymptotic(c))]);
    }
    run.write_csv("bfactor.csv", &["c", "b", "b_error", "asymptotic"], rows)?;

    let mu_f = cfg.firm_dist.tail_index();
    let mut tail = Value::Null;
    if cfg.firm_dist.support_lower() > 0.0 && mu_f.is_some() {
        let w = worker_dist_super(&cfg)?;
        run.write_csv(
            "worker_density.csv",
            &["c", "density", "survival"],
            w.grid
                .iter()
                .zip(&w.density)
                .zip(&w.survival)
                .map(|((c, d), s)| vec![num(*c), num(*d), num(*s)]),
        )?;
        let hill = hill_estimator(&w.quantile_grid(100_000), 0.1)?;
        tail = json!({ "mu_w_predicted": w.mu_w, "hill_on_table": hill, "z_b": w.z_b });
    }
    let demand = match scn.demand {
        Some(_) => {
            let law = scn.demand_law()?;
            json!({
                "law": law,
                "gamma": law.gamma()?,
                "mu_w": law.mu_worker()?,
                "sector_index": upper_level_index(law.mu_f, law.delta)?,
            })
        }
        None => Value::Null,
    };
    let scaling = match mu_f {
        Some(mu) if mu != 2.0 && cfg.firm_dist.mean().is_ok() => {
            let (hi, lo) = if mu < 2.0 { (1e-6, 1e-9) } else { (1e-3, 1e-5) };
            let grid = decreasing_log_grid(hi, lo, 16);
            match verify_small_beta_scaling(&cfg.firm_dist, &grid) {
                Ok(f) => json!(f),
                Err(e) => json!({ "error": e.to_string() }),
            }
        }
        _ => Value::Null,
    };
    Ok(json!({
        "gamma": cfg.gamma,
        "beta_max": cfg.beta_max,
        "firms": cfg.firm_dist,
        "mu_f": mu_f,
        "tail": tail,
        "demand": demand,
        "small_beta_scaling": scaling,
    }))
}

fn synthetic_gb2(scn: &Scenario) -> Result<(Gb2Params, Vec<f64>)> {
    let syn = scn.fit.and_then(|f| f.synthetic).ok_or_else(|| CliError::MissingBlocks {
        command: "fit".into(),
        missing: vec!["fit.synthetic (or --input)".into()],
    })?;
    let dist = FirmDistribution::gb2(syn.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed());
    Ok((syn.params, dist.sample(&mut rng, syn.samples)))
}

fn load_panel(scn: &Scenario, input: &Path) -> Result<(Panel, Vec<crate::panel::Rejection>)> {
    let ceiling = scn.panel.unwrap_or_default().rejection_ceiling;
    let report = ingest_panel(input, ceiling)?;
    Ok((report.panel, report.rejections))
}

fn fit(scn: &Scenario, run: &mut RunDir, input: Option<&Path>, year: Option<i32>) -> Result<Value> {
    scn.require("fit", &[Block::Fit])?;
    let block = scn.fit.expect("required");
    let (samples, source, truth) = match input {
        Some(path) => {
            let (panel, rejections) = load_panel(scn, path)?;
            let (trimmed, _) = trim_outliers(&panel, scn.trim_top());
            let y = match year {
                Some(y) => y,
                None => *trimmed
                    .years
                    .keys()
                    .next_back()
                    .ok_or_else(|| CliError::Invalid("panel has no rows".into()))?,
            };
            let recs = trimmed
                .years
                .get(&y)
                .ok_or_else(|| CliError::Invalid(format!("panel has no year {y}")))?;
            let c: Vec<f64> = recs.iter().map(|r| r.productivity).collect();
            let src = json!({
                "panel": path.display().to_string(),
                "year": y,
                "trim_top": scn.trim_top(),
                "rejections": rejections,
            });
            (c, src, Value::Null)
        }
        None => {
            let (params, c) = synthetic_gb2(scn)?;
            (c, json!({ "synthetic_gb2": params }), json!(params))
        }
    };
    let hill = hill_estimator(&samples, block.tail_fraction)?;
    let range = select_fit_range(&samples)?;
    let gb2 = if block.gb2 {
        Some(gb2_mle(&samples, None)?)
    } else {
        None
    };
    let points = rank_size(&samples)?;
    run.write_csv(
        "rank_size.csv",
        &["c", "survival", "gb2_survival"],
        points.iter().map(|&(c, s)| {
            let g = gb2.as_ref().map_or(String::new(), |f| num(f.params.survival(c)));
            vec![num(c), num(s), g]
        }),
    )?;
    let gb2_json = gb2.as_ref().map(|f| {
        let tail = f.tail_fit();
        json!({
            "params": f.params,
            "stderr": f.stderr,
            "log_likelihood": f.log_likelihood,
            "gradient_norm": f.gradient_norm,
            "winner": f.winner,
            "tail": tail,
            "hill_agreement_z": (tail.mu_hat - hill.mu_hat).abs() / tail.stderr.hypot(hill.stderr),
        })
    });
    Ok(json!({
        "source": source,
        "truth": truth,
        "samples": samples.len(),
        "hill": hill,
        "fit_range": range,
        "gb2": gb2_json,
    }))
}

fn mcarlo(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    scn.require("mcarlo", &[Block::Firms, Block::LaborShare, Block::Mcarlo])?;
    let firms = scn.firms.clone().expect("required");
    let law = scn.labor_share.expect("required");
    let block = scn.mcarlo.expect("required");
    let tail_fraction = scn.fit.unwrap_or_default().tail_fraction;
    let mut reports = Vec::with_capacity(block.replicates);
    for r in 0..block.replicates.max(1) {
        let s = replica_seed(scn.seed(), r as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let c = firms.sample(&mut rng, block.samples);
        let cm = marginal_from_average(&c, &law, s.wrapping_add(1))?;
        if r == 0 {
            run.write_csv("rank_size_c.csv", &["c", "survival"], rank_size_rows(&rank_size(&c)?))?;
            run.write_csv(
                "rank_size_cm.csv",
                &["c_m", "survival"],
                rank_size_rows(&rank_size(&cm)?),
            )?;
        }
        reports.push(verify_tail_equality_with(&c, &cm, tail_fraction)?);
    }
    let equal = reports.iter().filter(|r| r.equal).count();
    Ok(json!({
        "firms": firms,
        "labor_share": law,
        "samples": block.samples,
        "replicates": reports.len(),
        "equal_within_3_sigma": equal,
        "comparisons": reports,
    }))
}

fn write_panel(run: &mut RunDir, name: &str, panel: &Panel) -> Result<()> {
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).map_err(|source| CliError::Csv {
        path: name.into(),
        source,
    })?;
    run.write_bytes(name, &buf)
}

fn gen(scn: &Scenario, run: &mut RunDir) -> Result<Value> {
    let eco = generate_synthetic_economy(scn)?;
    write_panel(run, "panel.csv", &eco.panel)?;
    run.write_csv(
        "demand_draws.csv",
        &["year", "subperiod", "demand", "beta"],
        eco.draws.iter().flat_map(|d| {
            d.demands
                .iter()
                .zip(&d.betas)
                .enumerate()
                .map(move |(k, (dm, b))| vec![d.year.to_string(), k.to_string(), num(*dm), num(*b)])
        }),
    )?;
    let law = scn.demand_law()?;
    Ok(json!({
        "firms": scn.firms,
        "demand": law,
        "economy": scn.economy,
        "counts_by_year": eco.panel.counts_by_year(),
        "total_workers": eco.panel.total_workers(),
        "mu_w_predicted": law.mu_worker()?,
    }))
}

fn fit_panel(panel: &Panel, settings: &FitSettings) -> Result<Vec<YearFits>> {
    panel
        .years
        .iter()
        .map(|(y, recs)| analyze_year(*y, recs, settings))
        .collect()
}

fn pipeline(scn: &Scenario, run: &mut RunDir, input: Option<&Path>) -> Result<Value> {
    let fit_block: FitBlock = scn.fit.unwrap_or_default();
    let panel_block: PanelBlock = scn.panel.unwrap_or_default();
    let (panel, rejections, generator) = match input {
        Some(path) => {
            let (p, r) = stage("ingest", load_panel(scn, path))?;
            (p, r, Value::Null)
        }
        None => {
            scn.require("pipeline", &[Block::Firms, Block::Demand, Block::Economy])?;
            let eco = stage("generate", generate_synthetic_economy(scn))?;
            stage("generate", write_panel(run, "panel.csv", &eco.panel))?;
            let law = stage("generate", scn.demand_law())?;
            let g = json!({
                "demand": law,
                "economy": scn.economy,
                "mu_w_predicted": stage("generate", law.mu_worker().map_err(CliError::from))?,
            });
            (eco.panel, Vec::new(), g)
        }
    };

    let trim_top = scn.trim_top();
    let (trimmed, audit) = trim_outliers(&panel, trim_top);
    stage(
        "trim",
        run.write_csv(
            "trim_audit.csv",
            &["year", "firm_id", "productivity"],
            audit
                .iter()
                .map(|e| vec![e.year.to_string(), e.firm_id.clone(), num(e.productivity)]),
        ),
    )?;

    let settings = FitSettings {
        tail_fraction: fit_block.tail_fraction,
        gb2: fit_block.panel_gb2,
        worker_weighting: panel_block.worker_weighting,
        trimmed: trim_top,
    };
    let fits = stage("fit", fit_panel(&trimmed, &settings))?;
    let mut firm_rows = Vec::new();
    let mut worker_rows = Vec::new();
    let mut sector_rows = Vec::new();
    for (y, recs) in &trimmed.years {
        let c: Vec<f64> = recs.iter().map(|r| r.productivity).collect();
        for (v, s) in stage("fit", rank_size(&c).map_err(CliError::from))? {
            firm_rows.push(vec![y.to_string(), num(v), num(s)]);
        }
        for (v, s) in worker_weighted_sample(recs).rank_size() {
            worker_rows.push(vec![y.to_string(), num(v), num(s)]);
        }
        for s in sector_aggregate(recs) {
            sector_rows.push(vec![
                y.to_string(),
                s.sector,
                num(s.productivity),
                s.workers.to_string(),
                s.firms.to_string(),
            ]);
        }
    }
    stage("fit", run.write_csv("firm_rank_size.csv", &["year", "c", "survival"], firm_rows))?;
    stage(
        "fit",
        run.write_csv("worker_rank_size.csv", &["year", "c", "survival"], worker_rows),
    )?;
    stage(
        "sectors",
        run.write_csv(
            "sectors.csv",
            &["year", "sector", "productivity", "workers", "firms"],
            sector_rows,
        ),
    )?;

    let delta_by_year: BTreeMap<String, Value> = fits
        .iter()
        .map(|f| (f.year.to_string(), json!(f.delta)))
        .collect();
    // indices one aggregation level up, from the yearly firm index and delta
    let sector_index: BTreeMap<String, Value> = fits
        .iter()
        .map(|f| {
            let v = f
                .delta
                .and_then(|d| upper_level_index(f.firm.mu_hat, d.delta).ok());
            (f.year.to_string(), json!(v))
        })
        .collect();

    let robustness = stage("robustness", robustness(&panel, &settings))?;
    let fit_list: Vec<Value> = fits.iter().map(|f| json!(f)).collect();
    Ok(json!({
        "generator": generator,
        "rejections": rejections,
        "trim_top": trim_top,
        "trimmed_firms": audit.len(),
        "worker_weighting": WORKER_WEIGHTING_NOTE,
        "fits": fit_list,
        "delta_by_year": delta_by_year,
        "sector_index_by_year": sector_index,
        "robustness": robustness,
        "mu_w_of_pooled_delta": pooled_prediction(&fits),
    }))
}

/// Reruns the firm and worker fits with 10 and 20 trimmed firms per year.
fn robustness(panel: &Panel, settings: &FitSettings) -> Result<Value> {
    let mut by_cut = BTreeMap::new();
    for cut in [10usize, 20] {
        let (p, _) = trim_outliers(panel, cut);
        let s = FitSettings {
            gb2: false,
            trimmed: cut,
            ..*settings
        };
        by_cut.insert(cut, fit_panel(&p, &s)?);
    }
    let rows: Vec<Value> = by_cut[&10]
        .iter()
        .zip(&by_cut[&20])
        .map(|(a, b)| {
            let d = |x: &ParetoFit, y: &ParetoFit| {
                json!({
                    "delta_mu": y.mu_hat - x.mu_hat,
                    "band": 3.0 * x.stderr.hypot(y.stderr),
                    "within_band": x.agrees_with(y, 3.0),
                })
            };
            json!({
                "year": a.year,
                "firm": d(&a.firm, &b.firm),
                "worker": d(&a.worker, &b.worker),
            })
        })
        .collect();
    Ok(json!({ "cuts": [10, 20], "by_year": rows }))
}

/// `mu_W` predicted from the inverse-variance mean of the yearly deltas at
/// the mean firm index.
fn pooled_prediction(fits: &[YearFits]) -> Value {
    let (mut w, mut wd, mut mf) = (0.0, 0.0, 0.0);
    for f in fits {
        mf += f.firm.mu_hat / fits.len() as f64;
        if let Some(d) = f.delta {
            let v = 1.0 / (d.stderr * d.stderr);
            w += v;
            wd += v * d.delta;
        }
    }
    if w == 0.0 {
        return Value::Null;
    }
    let delta = wd / w;
    json!({
        "delta": delta,
        "stderr": w.sqrt().recip(),
        "mu_f": mf,
        "mu_w": mu_worker_of(mf, delta).ok(),
    })
}
