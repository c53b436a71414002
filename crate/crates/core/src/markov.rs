//! Jump Markov process for firm productivity.
//!
//! A firm at level `c` moves to `c + 1` at rate `w+(c) = a+ c^alpha` and to
//! `c - 1` at rate `w-(c) = a- c^alpha`; new firms enter at `c = 1` at rate
//! `p` and a firm leaving `c = 1` exits. The state space is truncated at
//! `c_max` with a reflecting upper boundary (`w+(c_max) = 0`), under which
//! the product formula stays an exact stationary solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::quad::Quadrature;
use crate::stats::{compensated_sum, ks_distance_pmf, replica_seed};

/// Default truncation in units of the cutoff `c* = 1 / (1 - a+/a-)`.
pub const DEFAULT_CUTOFF_MULTIPLE: f64 = 20.0;
/// Truncations below this multiple of `c*` produce a warning.
pub const MIN_CUTOFF_MULTIPLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovConfig {
    pub a_plus: f64,
    pub a_minus: f64,
    /// Exponent of `c` in both transition rates.
    pub rate_exponent: f64,
    /// Entry rate `p` of new firms at `c = 1`.
    pub entry_rate: f64,
    /// Truncation level; `None` selects `ceil(20 c*)`.
    #[serde(default)]
    pub c_max: Option<u64>,
    /// Impose `n(1)/C_(alpha) = p`, i.e. `a+ = a- (1 - p)`, as in the
    /// city-size variant of the model. Off by default.
    #[serde(default)]
    pub city_constraint: bool,
}

impl MarkovConfig {
    pub fn new(a_plus: f64, a_minus: f64, rate_exponent: f64, entry_rate: f64) -> Self {
        MarkovConfig {
            a_plus,
            a_minus,
            rate_exponent,
            entry_rate,
            c_max: None,
            city_constraint: false,
        }
    }

    /// Configuration with `n(1)/C_(alpha) = cutoff_ratio` and `a- = p = 1`.
    pub fn with_cutoff_ratio(rate_exponent: f64, cutoff_ratio: f64) -> Self {
        MarkovConfig::new(1.0 - cutoff_ratio, 1.0, rate_exponent, 1.0)
    }

    pub fn with_c_max(mut self, c_max: u64) -> Self {
        self.c_max = Some(c_max);
        self
    }

    /// The up-rate actually used (derived under the city constraint).
    pub fn effective_a_plus(&self) -> f64 {
        if self.city_constraint {
            self.a_minus * (1.0 - self.entry_rate)
        } else {
            self.a_plus
        }
    }

    /// `a+/a-`.
    pub fn rate_ratio(&self) -> f64 {
        self.effective_a_plus() / self.a_minus
    }

    /// `c* = (n(1)/C_(alpha))^{-1} = 1 / (1 - a+/a-)`.
    pub fn cutoff(&self) -> f64 {
        1.0 / (1.0 - self.rate_ratio())
    }

    pub fn resolved_c_max(&self) -> u64 {
        self.c_max
            .unwrap_or_else(|| (DEFAULT_CUTOFF_MULTIPLE * self.cutoff()).ceil().max(1.0) as u64)
    }

    fn validate_rates(&self) -> Result<()> {
        if !(self.a_minus > 0.0 && self.a_minus.is_finite()) {
            return Err(invalid("a_minus", "must be positive"));
        }
        if !(self.rate_exponent >= 1.0 && self.rate_exponent.is_finite()) {
            return Err(invalid("rate_exponent", "must be at least 1"));
        }
        if !(self.entry_rate >= 0.0 && self.entry_rate.is_finite()) {
            return Err(invalid("entry_rate", "must be non-negative"));
        }
        if self.city_constraint && !(self.entry_rate > 0.0 && self.entry_rate < 1.0) {
            return Err(invalid(
                "entry_rate",
                "the city constraint n(1)/C = p needs 0 < p < 1",
            ));
        }
        let a_plus = self.effective_a_plus();
        if !(a_plus > 0.0 && a_plus.is_finite()) {
            return Err(invalid("a_plus", "must be positive"));
        }
        if self.c_max == Some(0) {
            return Err(invalid("c_max", "must be at least 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_rates()?;
        if !(self.entry_rate > 0.0) {
            return Err(invalid("entry_rate", "must be positive"));
        }
        if self.effective_a_plus() >= self.a_minus {
            return Err(invalid(
                "a_plus",
                format!(
                    "a+ = {} must be below a- = {} for a normalizable stationary state",
                    self.effective_a_plus(),
                    self.a_minus
                ),
            ));
        }
        Ok(())
    }

    fn up_rate(&self, c: u64, c_max: u64) -> f64 {
        if c >= c_max {
            0.0
        } else {
            self.effective_a_plus() * (c as f64).powf(self.rate_exponent)
        }
    }

    fn down_rate(&self, c: u64) -> f64 {
        self.a_minus * (c as f64).powf(self.rate_exponent)
    }
}

/// Expected firm counts `n(c)`, `c = 1..=c_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryState {
    pub counts: Vec<f64>,
    /// `K = sum n(c)`.
    pub total_firms: f64,
    /// `C = sum c n(c)`.
    pub aggregate_index: f64,
    /// Estimated fraction of the untruncated firm count beyond `c_max`.
    pub truncated_tail_mass: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl StationaryState {
    pub fn from_counts(counts: Vec<f64>) -> Self {
        let total_firms = compensated_sum(counts.iter().copied());
        let aggregate_index =
            compensated_sum(counts.iter().enumerate().map(|(i, n)| (i + 1) as f64 * n));
        StationaryState {
            counts,
            total_firms,
            aggregate_index,
            truncated_tail_mass: 0.0,
            warnings: Vec::new(),
        }
    }

    pub fn c_max(&self) -> u64 {
        self.counts.len() as u64
    }

    /// `n(c)` for `c >= 1`; zero outside the state space.
    pub fn count(&self, c: u64) -> f64 {
        if c == 0 {
            0.0
        } else {
            self.counts.get(c as usize - 1).copied().unwrap_or(0.0)
        }
    }

    /// `C_(alpha) = sum c^alpha n(c)`.
    pub fn weighted_index(&self, alpha: f64) -> f64 {
        compensated_sum(
            self.counts
                .iter()
                .enumerate()
                .map(|(i, n)| ((i + 1) as f64).powf(alpha) * n),
        )
    }

    /// Firm-weighted cumulative count `N_>(c) = sum_{c' >= c} n(c')`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.len()];
        let mut acc = 0.0;
        for i in (0..self.counts.len()).rev() {
            acc += self.counts[i];
            out[i] = acc;
        }
        out
    }
}

/// Exact stationary solution by the product formula
/// `n(c) = n(1) prod_{k=1}^{c-1} w+(c-k) / w-(c-k+1)` with `w-(1) n(1) = p`,
/// accumulated in log space.
pub fn stationary_solution(cfg: &MarkovConfig) -> Result<StationaryState> {
    cfg.validate()?;
    let c_max = cfg.resolved_c_max();
    let alpha = cfg.rate_exponent;
    let ln_ratio = cfg.rate_ratio().ln();
    let ln_n1 = (cfg.entry_rate / cfg.a_minus).ln();
    let mut counts = Vec::with_capacity(c_max as usize);
    let mut ln_n = ln_n1;
    counts.push(ln_n1.exp());
    for c in 2..=c_max {
        // w+(c-1)/w-(c) = (a+/a-) ((c-1)/c)^alpha
        ln_n += ln_ratio + alpha * ((c - 1) as f64 / c as f64).ln();
        counts.push(ln_n.exp());
    }
    let mut state = StationaryState::from_counts(counts);

    // untruncated tail beyond c_max, bounded by the geometric majorant
    let r = cfg.rate_ratio();
    let last = *state.counts.last().expect("c_max >= 1");
    let tail = last * r / (1.0 - r);
    state.truncated_tail_mass = tail / (state.total_firms + tail);
    let cutoff = cfg.cutoff();
    if (c_max as f64) < MIN_CUTOFF_MULTIPLE * cutoff {
        state.warnings.push(format!(
            "c_max = {c_max} is below {MIN_CUTOFF_MULTIPLE} c* = {:.1}; truncated tail mass ~ {:.3e}",
            MIN_CUTOFF_MULTIPLE * cutoff,
            state.truncated_tail_mass
        ));
    }
    Ok(state)
}

/// Master-equation right-hand side at every `c = 1..=c_max`, using the
/// truncated rates (`w+(c_max) = 0`).
pub fn master_residual(cfg: &MarkovConfig, state: &StationaryState) -> Result<Vec<f64>> {
    let c_max = state.c_max();
    if let Some(m) = cfg.c_max {
        if m != c_max {
            return Err(Error::DimensionMismatch(format!(
                "configuration truncates at {m}, state has {c_max} levels"
            )));
        }
    }
    let n = |c: u64| state.count(c);
    Ok((1..=c_max)
        .map(|c| {
            let inflow_up = if c > 1 { cfg.up_rate(c - 1, c_max) * n(c - 1) } else { 0.0 };
            let inflow_down = if c < c_max { cfg.down_rate(c + 1) * n(c + 1) } else { 0.0 };
            let outflow = (cfg.up_rate(c, c_max) + cfg.down_rate(c)) * n(c);
            let entry = if c == 1 { cfg.entry_rate } else { 0.0 };
            compensated_sum([inflow_up, inflow_down, -outflow, entry])
        })
        .collect())
}

/// Closed-form approximant `A c^{-alpha} e^{-c/c*}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawApprox {
    pub exponent: f64,
    /// Cutoff as defined through the aggregates, `C_(alpha)/n(1)`.
    pub cutoff_nominal: f64,
    /// Cutoff of the exponential form closed self-consistently.
    pub cutoff: f64,
    pub amplitude: f64,
    /// Closure iterates.
    pub trace: Vec<f64>,
    /// Largest relative deviation from the exact solution over the
    /// evaluation window.
    pub max_rel_deviation: f64,
    pub window: (u64, u64),
}

impl PowerLawApprox {
    pub fn eval(&self, c: f64) -> f64 {
        self.amplitude * c.powf(-self.exponent) * (-c / self.cutoff).exp()
    }
}

/// The power law with exponential cutoff, with `c*` closed by requiring the
/// approximant to satisfy the stationarity of `C`:
/// `(a- - a+) C_(alpha) = p`, where `C_(alpha)` is evaluated on the
/// approximant itself. Damped (0.5) fixed-point iteration from the
/// pure-power guess `c* = c_max`, tolerance 1e-8 relative.
pub fn stationary_powerlaw_approx(cfg: &MarkovConfig) -> Result<PowerLawApprox> {
    cfg.validate()?;
    let c_max = cfg.resolved_c_max();
    let n1 = cfg.entry_rate / cfg.a_minus;
    let target = cfg.entry_rate / (cfg.a_minus - cfg.effective_a_plus()) / n1;
    let m = c_max as f64;
    // sum_{c=1}^{c_max} e^{-(c-1)/c*}
    let geometric = |cs: f64| -(-m / cs).exp_m1() / -(-1.0 / cs).exp_m1();

    let mut cs = m;
    let mut trace = vec![cs];
    let mut converged = false;
    for _ in 0..500 {
        let next = cs + (target - geometric(cs));
        let damped = 0.5 * cs + 0.5 * next.max(f64::MIN_POSITIVE);
        trace.push(damped);
        let done = (damped - cs).abs() <= 1e-8 * damped;
        cs = damped;
        if done {
            converged = true;
            break;
        }
    }
    if !converged || !cs.is_finite() {
        let tail = trace.len().saturating_sub(8);
        return Err(Error::ClosureNotConverged {
            iterations: trace.len() - 1,
            trace: trace[tail..].to_vec(),
        });
    }

    let exact = stationary_solution(cfg)?;
    let lo = 10u64.min(c_max);
    let hi = ((cs / 10.0).floor() as u64).clamp(lo, c_max);
    let mut approx = PowerLawApprox {
        exponent: cfg.rate_exponent,
        cutoff_nominal: exact.weighted_index(cfg.rate_exponent) / n1,
        cutoff: cs,
        amplitude: n1 * (1.0 / cs).exp(),
        trace,
        max_rel_deviation: 0.0,
        window: (lo, hi),
    };
    let mut dev = 0.0f64;
    let points = 200;
    for i in 0..=points {
        let c = ((lo as f64) * ((hi as f64 / lo as f64).powf(i as f64 / points as f64))).round() as u64;
        let e = exact.count(c);
        dev = dev.max((approx.eval(c as f64) - e).abs() / e);
    }
    approx.max_rel_deviation = dev;
    Ok(approx)
}

/// `K` and `C` per unit `n(1)` from the gamma-weighted integrals
/// `K = 1/Gamma(alpha) int t^{alpha-1} / (e^t - 1 + r) dt` and
/// `C = 1/Gamma(alpha-1) int t^{alpha-2} / (e^t - 1 + r) dt`, with
/// `r = n(1)/C_(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateIntegrals {
    pub alpha: f64,
    pub cutoff_ratio: f64,
    /// `f64::INFINITY` when divergent.
    pub total_firms: f64,
    pub aggregate_index: f64,
    pub firms_divergent: bool,
    pub index_divergent: bool,
}

pub fn aggregate_integrals(alpha: f64, cutoff_ratio: f64) -> Result<AggregateIntegrals> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid("alpha", "must exceed 1"));
    }
    if !(0.0..1.0).contains(&cutoff_ratio) {
        return Err(invalid("cutoff_ratio", "must lie in [0, 1)"));
    }
    let q = Quadrature::with_rel_tol(1e-11);
    let integral = |power: f64| -> Result<f64> {
        let f = |t: f64| {
            if t <= 0.0 {
                return 0.0;
            }
            (power * t.ln()).exp() / (t.exp_m1() + cutoff_ratio)
        };
        Ok(q.integrate_lower(f, 1.0)?.value + q.integrate_upper(f, 1.0, 1.0)?.value)
    };
    // with r = 0 the small-t behaviour is t^{power-1}
    let firms_divergent = cutoff_ratio == 0.0 && alpha <= 1.0;
    let index_divergent = cutoff_ratio == 0.0 && alpha <= 2.0;
    let total_firms = if firms_divergent {
        f64::INFINITY
    } else {
        integral(alpha - 1.0)? / gamma(alpha)
    };
    let aggregate_index = if index_divergent {
        f64::INFINITY
    } else {
        integral(alpha - 2.0)? / gamma(alpha - 1.0)
    };
    Ok(AggregateIntegrals {
        alpha,
        cutoff_ratio,
        total_firms,
        aggregate_index,
        firms_divergent,
        index_divergent,
    })
}

/// Settings for the event-driven simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Leading fraction of the horizon discarded.
    pub warmup_fraction: f64,
    /// Equal-time batches after warm-up, for Monte Carlo standard errors.
    pub batches: usize,
    /// Levels `1..=se_levels` keep per-batch occupancies.
    pub se_levels: usize,
    /// Initial firms per level (index `c - 1`); empty by default.
    #[serde(default)]
    pub initial: Vec<u64>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            warmup_fraction: 0.2,
            batches: 32,
            se_levels: 1024,
            initial: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub horizon: f64,
    pub warmup: f64,
    pub events: u64,
    pub entries: u64,
    pub exits: u64,
    pub final_population: u64,
    /// Time-averaged population after warm-up.
    pub mean_population: f64,
    pub replicas: usize,
}

/// Time-averaged occupancies after warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub state: StationaryState,
    /// `batch_means[b][c - 1]` for `c <= se_levels`.
    pub batch_means: Vec<Vec<f64>>,
    pub summary: TrajectorySummary,
}

/// Mean and Monte Carlo standard error of the occupancy summed over a
/// level range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStatistic {
    pub lo: u64,
    pub hi: u64,
    pub mean: f64,
    pub stderr: f64,
}

impl SimulationResult {
    /// Statistics for inclusive level ranges within `se_levels`.
    pub fn bin_statistics(&self, bins: &[(u64, u64)]) -> Result<Vec<BinStatistic>> {
        let levels = self.batch_means.first().map_or(0, Vec::len) as u64;
        let b = self.batch_means.len();
        if b < 2 {
            return Err(invalid("batches", "need at least two batches"));
        }
        bins.iter()
            .map(|&(lo, hi)| {
                if lo == 0 || hi < lo || hi > levels {
                    return Err(invalid(
                        "bins",
                        format!("range [{lo}, {hi}] outside 1..={levels}"),
                    ));
                }
                let sums: Vec<f64> = self
                    .batch_means
                    .iter()
                    .map(|bm| bm[lo as usize - 1..hi as usize].iter().sum())
                    .collect();
                let mean = sums.iter().sum::<f64>() / b as f64;
                let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
                Ok(BinStatistic {
                    lo,
                    hi,
                    mean,
                    stderr: (var / b as f64).sqrt(),
                })
            })
            .collect()
    }

    /// KS distance between the empirical and exact firm distributions,
    /// both restricted to their common levels and renormalized.
    pub fn ks_distance(&self, exact: &StationaryState) -> f64 {
        let n = self.state.counts.len().min(exact.counts.len());
        ks_distance_pmf(&self.state.counts[..n], &exact.counts[..n])
    }
}

/// Log-spaced inclusive integer bins covering `lo..=hi`.
pub fn log_bins(lo: u64, hi: u64, per_decade: usize) -> Vec<(u64, u64)> {
    let mut bins = Vec::new();
    let mut start = lo.max(1);
    let factor = 10f64.powf(1.0 / per_decade as f64);
    while start <= hi {
        let end = (((start as f64) * factor).ceil() as u64 - 1).max(start).min(hi);
        bins.push((start, end));
        start = end + 1;
    }
    bins
}

/// Binary indexed tree over level rates.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn from_weights(w: &[f64]) -> Self {
        let n = w.len();
        let mut tree = vec![0.0; n + 1];
        for i in 1..=n {
            tree[i] += w[i - 1];
            let j = i + (i & i.wrapping_neg());
            if j <= n {
                let v = tree[i];
                tree[j] += v;
            }
        }
        Fenwick { tree }
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `u`.
    fn find(&self, mut u: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }
}

/// Exact event-driven (Gillespie) simulation of the process from the
/// configured initial state over `[0, horizon]`.
pub fn simulate(
    cfg: &MarkovConfig,
    horizon: f64,
    seed: u64,
    opts: &SimulationOptions,
) -> Result<SimulationResult> {
    cfg.validate_rates()?;
    if cfg.effective_a_plus() >= cfg.a_minus {
        return Err(Error::PopulationExplosion {
            a_plus: cfg.effective_a_plus(),
            a_minus: cfg.a_minus,
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", "must be positive"));
    }
    if !(opts.warmup_fraction >= 0.0 && opts.warmup_fraction < 1.0) {
        return Err(invalid("warmup_fraction", "must lie in [0, 1)"));
    }
    if opts.batches == 0 {
        return Err(invalid("batches", "must be at least 1"));
    }
    let c_max = cfg.resolved_c_max() as usize;
    if opts.initial.len() > c_max {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} levels, c_max is {c_max}",
            opts.initial.len()
        )));
    }
    let se_levels = opts.se_levels.min(c_max);

    let per_firm: Vec<f64> = (1..=c_max as u64)
        .map(|c| cfg.up_rate(c, c_max as u64) + cfg.down_rate(c))
        .collect();
    let up_share: Vec<f64> = (1..=c_max as u64)
        .map(|c| cfg.up_rate(c, c_max as u64) / (cfg.up_rate(c, c_max as u64) + cfg.down_rate(c)))
        .collect();
    let mut occ = vec![0u64; c_max];
    occ[..opts.initial.len()].copy_from_slice(&opts.initial);
    let weights = |occ: &[u64]| -> Vec<f64> {
        occ.iter().zip(&per_firm).map(|(&n, &w)| n as f64 * w).collect()
    };
    let mut fen = Fenwick::from_weights(&weights(&occ));
    let mut level_total: f64 = weights(&occ).iter().sum();
    let mut population: u64 = occ.iter().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warmup = opts.warmup_fraction * horizon;
    let batch_len = (horizon - warmup) / opts.batches as f64;
    let boundary = |i: usize| {
        if i == opts.batches {
            horizon
        } else {
            warmup + batch_len * i as f64
        }
    };

    let mut last = vec![0.0f64; c_max];
    let mut acc = vec![0.0f64; c_max];
    let mut totals = vec![0.0f64; c_max];
    let mut batch_means = Vec::with_capacity(opts.batches);
    let mut pop_integral = 0.0;
    let mut pop_last = 0.0;
    // boundary 0 closes the warm-up
    let mut next_boundary = 0usize;

    let (mut events, mut entries, mut exits) = (0u64, 0u64, 0u64);
    let mut t = 0.0;
    let rebuild_every = 1u64 << 20;

    let flush = |at: f64,
                     index: usize,
                     occ: &[u64],
                     last: &mut [f64],
                     acc: &mut [f64],
                     totals: &mut [f64],
                     batch_means: &mut Vec<Vec<f64>>| {
        for c in 0..c_max {
            acc[c] += occ[c] as f64 * (at - last[c]);
            last[c] = at;
        }
        if index > 0 {
            for c in 0..c_max {
                totals[c] += acc[c];
            }
            batch_means.push(acc[..se_levels].iter().map(|a| a / batch_len).collect());
        }
        acc.iter_mut().for_each(|a| *a = 0.0);
    };

    loop {
        let total = cfg.entry_rate + level_total.max(0.0);
        let dt = if total > 0.0 {
            let e: f64 = Exp1.sample(&mut rng);
            e / total
        } else {
            f64::INFINITY
        };
        let t_next = t + dt;
        while next_boundary <= opts.batches && boundary(next_boundary) <= t_next.min(horizon) {
            let at = boundary(next_boundary);
            if next_boundary == 0 {
                pop_last = at;
            } else {
                pop_integral += population as f64 * (at - pop_last);
                pop_last = at;
            }
            flush(at, next_boundary, &occ, &mut last, &mut acc, &mut totals, &mut batch_means);
            next_boundary += 1;
        }
        if t_next >= horizon {
            break;
        }
        t = t_next;
        events += 1;

        let u: f64 = rng.random::<f64>() * total;
        let (from, to) = if u < cfg.entry_rate {
            entries += 1;
            (None, Some(0usize))
        } else {
            let mut level = fen.find(u - cfg.entry_rate);
            if occ[level] == 0 {
                // rounding in the tree; rebuild and redraw within the level rates
                fen = Fenwick::from_weights(&weights(&occ));
                level_total = weights(&occ).iter().sum();
                level = fen.find(rng.random::<f64>() * level_total);
                if occ[level] == 0 {
                    level = occ.iter().position(|&n| n > 0).expect("positive level rate");
                }
            }
            if rng.random::<f64>() < up_share[level] {
                (Some(level), Some(level + 1))
            } else if level == 0 {
                exits += 1;
                (Some(0), None)
            } else {
                (Some(level), Some(level - 1))
            }
        };
        if next_boundary > 0 {
            pop_integral += population as f64 * (t - pop_last);
            pop_last = t;
        }
        for (c, delta) in [(from, -1i64), (to, 1i64)] {
            if let Some(c) = c {
                acc[c] += occ[c] as f64 * (t - last[c]);
                last[c] = t;
                occ[c] = (occ[c] as i64 + delta) as u64;
                fen.add(c, delta as f64 * per_firm[c]);
                level_total += delta as f64 * per_firm[c];
            }
        }
        match (from, to) {
            (None, Some(_)) => population += 1,
            (Some(_), None) => population -= 1,
            _ => {}
        }
        if events % rebuild_every == 0 {
            fen = Fenwick::from_weights(&weights(&occ));
            level_total = weights(&occ).iter().sum();
        }
    }

    let span = horizon - warmup;
    let counts: Vec<f64> = totals.iter().map(|a| a / span).collect();
    Ok(SimulationResult {
        state: StationaryState::from_counts(counts),
        batch_means,
        summary: TrajectorySummary {
            horizon,
            warmup,
            events,
            entries,
            exits,
            final_population: population,
            mean_population: pop_integral / span,
            replicas: 1,
        },
    })
}

/// Independent replicas with seeds `replica_seed(seed, i)`, run in
/// parallel and pooled in replica order: occupancies are averaged and the
/// batches of all replicas are concatenated.
pub fn simulate_replicas(
    cfg: &MarkovConfig,
    horizon: f64,
    seed: u64,
    replicas: usize,
    opts: &SimulationOptions,
) -> Result<SimulationResult> {
    if replicas == 0 {
        return Err(invalid("replicas", "must be at least 1"));
    }
    let runs: Vec<SimulationResult> = (0..replicas)
        .into_par_iter()
        .map(|i| simulate(cfg, horizon, replica_seed(seed, i as u64), opts))
        .collect::<Result<_>>()?;
    let r = replicas as f64;
    let levels = runs[0].state.counts.len();
    let counts: Vec<f64> = (0..levels)
        .map(|c| runs.iter().map(|run| run.state.counts[c]).sum::<f64>() / r)
        .collect();
    let mut summary = runs[0].summary.clone();
    summary.events = runs.iter().map(|x| x.summary.events).sum();
    summary.entries = runs.iter().map(|x| x.summary.entries).sum();
    summary.exits = runs.iter().map(|x| x.summary.exits).sum();
    summary.final_population = runs.iter().map(|x| x.summary.final_population).sum();
    summary.mean_population = runs.iter().map(|x| x.summary.mean_population).sum::<f64>() / r;
    summary.replicas = replicas;
    let batch_means = runs.into_iter().flat_map(|x| x.batch_means).collect();
    Ok(SimulationResult {
        state: StationaryState::from_counts(counts),
        batch_means,
        summary,
    })
}

/// Maximum-likelihood exponent `s` of a discrete power law `n(c) ~ c^{-s}`
/// restricted to `lo..=hi`, treating `counts` as weights.
pub fn count_exponent(state: &StationaryState, lo: u64, hi: u64) -> Result<f64> {
    if lo == 0 || hi <= lo || hi > state.c_max() {
        return Err(invalid("window", format!("[{lo}, {hi}] not inside 1..={}", state.c_max())));
    }
    let cs: Vec<f64> = (lo..=hi).map(|c| c as f64).collect();
    let ws: Vec<f64> = (lo..=hi).map(|c| state.count(c)).collect();
    let w: f64 = ws.iter().sum();
    if !(w > 0.0) {
        return Err(Error::InvalidDistribution("no mass in the window".into()));
    }
    let target = compensated_sum(cs.iter().zip(&ws).map(|(c, n)| n * c.ln())) / w;
    // model mean of ln c decreases in s
    let model = |s: f64| {
        let l0 = cs[0].ln();
        let (mut z, mut zl) = (0.0, 0.0);
        for c in &cs {
            let e = (-s * (c.ln() - l0)).exp();
            z += e;
            zl += e * c.ln();
        }
        zl / z
    };
    let (mut a, mut b) = (-20.0, 20.0);
    if !(model(a) >= target && model(b) <= target) {
        return Err(Error::RootNotFound("count exponent outside [-20, 20]".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if model(m) > target {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level_is_the_boundary_condition() {
        let cfg = MarkovConfig::new(0.5, 2.0, 2.0, 3.0).with_c_max(1);
        let s = stationary_solution(&cfg).unwrap();
        assert_eq!(s.counts, vec![1.5]);
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn alpha_one_is_geometric_over_c() {
        let cfg = MarkovConfig::new(1.0 - 1e-3, 1.0, 1.0, 1.0);
        let s = stationary_solution(&cfg).unwrap();
        let r: f64 = 1.0 - 1e-3;
        for c in [1u64, 2, 10, 500, 5000] {
            let expected = r.powi(c as i32 - 1) / c as f64;
            assert!((s.count(c) - expected).abs() / expected < 1e-12, "c = {c}");
        }
    }

    #[test]
    fn perturbation_is_local() {
        let cfg = MarkovConfig::new(0.9, 1.0, 2.0, 1.0).with_c_max(50);
        let mut s = stationary_solution(&cfg).unwrap();
        s.counts[4] *= 2.0;
        let res = master_residual(&cfg, &s).unwrap();
        for (i, r) in res.iter().enumerate() {
            let c = i + 1;
            if (4..=6).contains(&c) {
                assert!(r.abs() > 1e-6, "c = {c}");
            } else {
                assert!(r.abs() < 1e-14, "c = {c}: {r}");
            }
        }
    }

    #[test]
    fn explosion_guard() {
        let cfg = MarkovConfig::new(1.0, 1.0, 2.0, 1.0).with_c_max(100);
        assert!(matches!(
            simulate(&cfg, 10.0, 1, &SimulationOptions::default()),
            Err(Error::PopulationExplosion { .. })
        ));
    }

    #[test]
    fn empty_economy_stays_empty() {
        let mut cfg = MarkovConfig::new(0.5, 1.0, 2.0, 0.0);
        cfg.c_max = Some(100);
        let r = simulate(&cfg, 1e3, 3, &SimulationOptions::default()).unwrap();
        assert_eq!(r.summary.events, 0);
        assert_eq!(r.summary.final_population, 0);
        assert!(r.state.counts.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn fenwick_finds_levels() {
        let f = Fenwick::from_weights(&[1.0, 0.0, 2.0, 3.0]);
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(1.5), 2);
        assert_eq!(f.find(3.0), 3);
        assert_eq!(f.find(5.9), 3);
    }

    #[test]
    fn log_bins_cover_the_range() {
        let bins = log_bins(1, 1000, 4);
        assert_eq!(bins[0], (1, 1));
        assert_eq!(bins.last().unwrap().1, 1000);
        for w in bins.windows(2) {
            assert_eq!(w[0].1 + 1, w[1].0);
        }
    }

    #[test]
    fn aggregate_integrals_reject_bad_input() {
        assert!(aggregate_integrals(1.0, 0.1).is_err());
        assert!(aggregate_integrals(2.0, 1.0).is_err());
        let r = aggregate_integrals(1.5, 0.0).unwrap();
        assert!(r.index_divergent && !r.firms_divergent);
        assert!(r.total_firms.is_finite());
    }
}
