//! Superstatistics: Boltzmann factors averaged over fluctuating demand.
//!
//! With inverse temperatures distributed as `f(beta) ~ beta^{-gamma}` on
//! `(0, beta_max]`, the averaged factor `B(c)` decays as a power of `c`
//! rather than exponentially, and the worker distribution inherits a Pareto
//! tail with index `mu_W = mu_F - gamma + 1`. Rewriting `gamma` through the
//! demand exponent `delta` gives the index relation across aggregation
//! levels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::dist::FirmDistribution;
use crate::equilibrium::EquilibriumSolver;
use crate::error::{invalid, Error, Result};
use crate::quad::Quadrature;
use crate::stats::linear_regression;

/// Default `beta_max` in units of `1 / <c>_0`.
pub const DEFAULT_BETA_MAX_FACTOR: f64 = 100.0;
/// R^2 below which a small-beta scaling fit is rejected.
pub const SCALING_R2_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperstatConfig {
    pub gamma: f64,
    pub beta_max: f64,
    pub firm_dist: FirmDistribution,
}

impl SuperstatConfig {
    pub fn new(gamma: f64, beta_max: f64, firm_dist: FirmDistribution) -> Result<Self> {
        let cfg = SuperstatConfig {
            gamma,
            beta_max,
            firm_dist,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `beta_max = 100 / <c>_0`, or `100 / c0` when the mean diverges.
    pub fn with_default_beta_max(gamma: f64, firm_dist: FirmDistribution) -> Result<Self> {
        let scale = match firm_dist.mean() {
            Ok(m) => m,
            Err(Error::DivergentMoment { .. }) => firm_dist.support_lower().max(f64::MIN_POSITIVE),
            Err(e) => return Err(e),
        };
        SuperstatConfig::new(gamma, DEFAULT_BETA_MAX_FACTOR / scale, firm_dist)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma < 1.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be finite and below 1"));
        }
        if !(self.beta_max > 0.0 && self.beta_max.is_finite()) {
            return Err(invalid("beta_max", "must be positive"));
        }
        if self.firm_dist.is_discrete() {
            return Err(invalid("firm_dist", "needs a continuous firm density"));
        }
        self.firm_dist.validate()
    }

    /// `N = int_0^{beta_max} beta^{-gamma} d beta = beta_max^{1-gamma} / (1-gamma)`.
    pub fn weight_normalization(&self) -> f64 {
        self.beta_max.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    /// Normalized weight `f(beta)`.
    pub fn weight(&self, beta: f64) -> f64 {
        if beta <= 0.0 || beta > self.beta_max {
            0.0
        } else {
            beta.powf(-self.gamma) / self.weight_normalization()
        }
    }

    /// Large-`c` form of `B(c)` under the normalized weight.
    pub fn bfactor_asymptotic(&self, c: f64) -> f64 {
        bfactor_asymptotic(self.gamma, c) / self.weight_normalization()
    }
}

/// `B(c)` with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BFactor {
    pub value: f64,
    pub error: f64,
}

/// `B(c) = int_0^{beta_max} f(beta) e^{-beta c} d beta`.
///
/// The substitution `v = (beta/beta_max)^{1-gamma}` absorbs the integrable
/// singularity at `beta = 0`: `B(c) = int_0^1 exp(-c beta_max v^{1/(1-gamma)}) dv`.
pub fn generalized_boltzmann(cfg: &SuperstatConfig, c: f64) -> Result<BFactor> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(invalid("c", "must be finite and non-negative"));
    }
    if !(cfg.gamma < 1.0) || !(cfg.beta_max > 0.0) {
        cfg.validate()?;
    }
    if c == 0.0 {
        return Ok(BFactor {
            value: 1.0,
            error: 0.0,
        });
    }
    let s = 1.0 / (1.0 - cfg.gamma);
    let x = c * cfg.beta_max;
    let f = |v: f64| if v <= 0.0 { 1.0 } else { (-x * v.powf(s)).exp() };
    let est = Quadrature::with_rel_tol(1e-12).integrate_lower(f, 1.0)?;
    Ok(BFactor {
        value: est.value,
        error: est.error,
    })
}

/// `Gamma(1-gamma) c^{gamma-1}`: the large-`c` form of `B(c)` for the
/// unnormalized weight `beta^{-gamma}`.
pub fn bfactor_asymptotic(gamma: f64, c: f64) -> f64 {
    gamma_fn(1.0 - gamma) * c.powf(gamma - 1.0)
}

/// Tabulated worker distribution `P^W(c) = P^F(c) B(c) / Z_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperWorkerDistribution {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// `P^W_>(c)` at the grid points.
    pub survival: Vec<f64>,
    pub z_b: f64,
    /// Predicted tail index `mu_F - gamma + 1`.
    pub mu_w: f64,
}

impl SuperWorkerDistribution {
    /// Inverse of the tabulated survival function, log-log interpolated;
    /// beyond the table the last segment's power law is extended.
    pub fn quantile(&self, u: f64) -> f64 {
        // survival level s = 1 - u
        let s = (1.0 - u).clamp(f64::MIN_POSITIVE, 1.0);
        let n = self.grid.len();
        if s >= self.survival[0] {
            return self.grid[0];
        }
        let j = match self.survival.iter().position(|&v| v <= s) {
            Some(0) => return self.grid[0],
            Some(j) => j,
            None => n - 1,
        };
        let (x0, x1) = (self.grid[j - 1].ln(), self.grid[j].ln());
        let (y0, y1) = (self.survival[j - 1].ln(), self.survival[j].ln());
        let slope = (y1 - y0) / (x1 - x0);
        (x0 + (s.ln() - y0) / slope).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }

    /// Deterministic sample at the quantiles `i/(n+1)`.
    pub fn quantile_grid(&self, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| self.quantile(i as f64 / (n + 1) as f64))
            .collect()
    }
}

/// Number of points in the tabulated superstatistical worker density.
pub const SUPER_TABLE_POINTS: usize = 2048;

/// Tabulates `P^W` on a log grid from the firm support infimum to the
/// `1 - 1e-6` quantile. Requires a firm density with positive support
/// infimum (Pareto or a lower-truncated law).
pub fn worker_dist_super(cfg: &SuperstatConfig) -> Result<SuperWorkerDistribution> {
    cfg.validate()?;
    let lo = cfg.firm_dist.support_lower();
    if !(lo > 0.0) {
        return Err(invalid(
            "firm_dist",
            "tabulation needs a firm density with positive support infimum",
        ));
    }
    let mu_f = cfg
        .firm_dist
        .tail_index()
        .ok_or_else(|| invalid("firm_dist", "needs a power-law tail"))?;
    let q = Quadrature::with_rel_tol(1e-10);
    let unnorm = |c: f64| -> f64 {
        let ln_p = cfg.firm_dist.ln_density(c).unwrap_or(f64::NEG_INFINITY);
        if ln_p == f64::NEG_INFINITY {
            return 0.0;
        }
        match generalized_boltzmann(cfg, c) {
            Ok(b) => ln_p.exp() * b.value,
            Err(_) => f64::NAN,
        }
    };
    let tail = |c: f64| -> Result<f64> { Ok(q.integrate_upper(unnorm, c, c.max(lo))?.value) };
    let z_b = tail(lo)?;

    let target = 1e-6 * z_b;
    let mut hi = lo * 2.0;
    while tail(hi)? > target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::RootNotFound("tabulation upper bound".into()));
        }
    }
    let mut below = hi / 2.0;
    while hi / below - 1.0 > 1e-9 {
        let mid = (below * hi).sqrt();
        if tail(mid)? > target {
            below = mid;
        } else {
            hi = mid;
        }
    }

    let n = SUPER_TABLE_POINTS;
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|j| lo * (ratio * j as f64).exp()).collect();
    grid[n - 1] = hi;
    let density: Vec<f64> = grid.iter().map(|&c| unnorm(c) / z_b).collect();
    let mut survival = vec![0.0; n];
    survival[n - 1] = tail(hi)? / z_b;
    for j in (0..n - 1).rev() {
        survival[j] = survival[j + 1] + q.integrate(unnorm, grid[j], grid[j + 1])?.value / z_b;
    }
    Ok(SuperWorkerDistribution {
        grid,
        density,
        survival,
        z_b,
        mu_w: mu_f - cfg.gamma + 1.0,
    })
}

fn check_mu_f(mu_f: f64) -> Result<()> {
    if !(mu_f > 1.0 && mu_f.is_finite()) {
        return Err(invalid("mu_f", format!("must exceed 1, got {mu_f}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta < 1.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be below 1, got {delta}")));
    }
    Ok(())
}

/// `gamma` implied by the demand exponent: `gamma = delta` for
/// `mu_F >= 2`, `gamma = 1 + (mu_F - 1)(delta - 1)` below.
pub fn gamma_of_delta(mu_f: f64, delta: f64) -> Result<f64> {
    check_mu_f(mu_f)?;
    check_delta(delta)?;
    Ok(if mu_f >= 2.0 {
        delta
    } else {
        1.0 + (mu_f - 1.0) * (delta - 1.0)
    })
}

/// Worker-level Pareto index from the firm-level index and the demand
/// exponent. Both branches are written as `mu_F + m (1 - delta)` with
/// `m = 1` above `mu_F = 2` and `m = mu_F - 1` below, so they coincide
/// exactly at `mu_F = 2`.
pub fn mu_worker_of(mu_f: f64, delta: f64) -> Result<f64> {
    check_mu_f(mu_f)?;
    check_delta(delta)?;
    let m = if mu_f >= 2.0 { 1.0 } else { mu_f - 1.0 };
    Ok(mu_f + m * (1.0 - delta))
}

/// Inverse of [`mu_worker_of`] in `delta`.
pub fn delta_of(mu_f: f64, mu_w: f64) -> Result<f64> {
    check_mu_f(mu_f)?;
    if !(mu_w > mu_f) {
        return Err(Error::InconsistentIndices { mu_f, mu_w });
    }
    let m = if mu_f >= 2.0 { 1.0 } else { mu_f - 1.0 };
    Ok(1.0 - (mu_w - mu_f) / m)
}

/// The next aggregation level up: the index `mu_upper` whose worker-level
/// image under [`mu_worker_of`] with exponent `delta` is `mu_lower`.
pub fn upper_level_index(mu_lower: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if !(mu_lower > 1.0 && mu_lower.is_finite()) {
        return Err(invalid("mu_lower", "must exceed 1"));
    }
    // mu_worker_of(2, delta) = 3 - delta separates the branches
    Ok(if mu_lower >= 3.0 - delta {
        mu_lower + delta - 1.0
    } else {
        1.0 + (mu_lower - 1.0) / (2.0 - delta)
    })
}

/// Demand fluctuations `f_D(D) ~ (<c>_0 - D)^{-delta}` on
/// `[<c>_0 - width, <c>_0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandLaw {
    pub delta: f64,
    pub mean_ceiling: f64,
    pub mu_f: f64,
    pub width: f64,
}

impl DemandLaw {
    pub fn new(delta: f64, mean_ceiling: f64, mu_f: f64, width: f64) -> Result<Self> {
        let law = DemandLaw {
            delta,
            mean_ceiling,
            mu_f,
            width,
        };
        law.validate()?;
        Ok(law)
    }

    /// Law for a Pareto firm distribution, whose ceiling is its mean.
    pub fn for_firms(delta: f64, firms: &FirmDistribution, width: f64) -> Result<Self> {
        let mu_f = firms
            .tail_index()
            .ok_or_else(|| invalid("firm_dist", "needs a power-law tail"))?;
        DemandLaw::new(delta, firms.mean()?, mu_f, width)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        check_mu_f(self.mu_f)?;
        if !(self.mean_ceiling > 0.0 && self.mean_ceiling.is_finite()) {
            return Err(invalid("mean_ceiling", "must be positive and finite"));
        }
        if !(self.width > 0.0 && self.width < self.mean_ceiling) {
            return Err(invalid("width", "must lie in (0, mean_ceiling)"));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        self.mean_ceiling - self.width
    }

    pub fn gamma(&self) -> Result<f64> {
        gamma_of_delta(self.mu_f, self.delta)
    }

    pub fn mu_worker(&self) -> Result<f64> {
        mu_worker_of(self.mu_f, self.delta)
    }
}

/// Normalized demand density with an inverse-CDF sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandDensity {
    pub law: DemandLaw,
}

impl DemandDensity {
    /// `(1-delta) (<c>_0 - D)^{-delta} / W^{1-delta}`.
    pub fn pdf(&self, d: f64) -> f64 {
        let l = &self.law;
        let x = l.mean_ceiling - d;
        if !(x > 0.0 && x <= l.width) {
            return 0.0;
        }
        (1.0 - l.delta) * x.powf(-l.delta) / l.width.powf(1.0 - l.delta)
    }

    pub fn cdf(&self, d: f64) -> f64 {
        let l = &self.law;
        let x = (l.mean_ceiling - d).clamp(0.0, l.width);
        1.0 - (x / l.width).powf(1.0 - l.delta)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let l = &self.law;
        l.mean_ceiling - l.width * (1.0 - u).powf(1.0 / (1.0 - l.delta))
    }

    pub fn mean(&self) -> f64 {
        let l = &self.law;
        l.mean_ceiling - l.width * (1.0 - l.delta) / (2.0 - l.delta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

pub fn demand_density(law: &DemandLaw) -> Result<DemandDensity> {
    law.validate()?;
    Ok(DemandDensity { law: *law })
}

/// Log-log fit of `<c>_0 - D(beta)` against `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 1 for `mu_F > 2`, `mu_F - 1` for `1 < mu_F < 2`.
    pub expected_slope: f64,
}

/// Fits the small-beta scaling of the demand gap.
pub fn verify_small_beta_scaling(
    firm_dist: &FirmDistribution,
    beta_grid: &[f64],
) -> Result<ScalingFit> {
    let mu_f = firm_dist
        .tail_index()
        .ok_or_else(|| invalid("firm_dist", "needs a power-law tail"))?;
    check_mu_f(mu_f)?;
    if mu_f == 2.0 {
        return Err(invalid(
            "mu_f",
            "the boundary mu_F = 2 carries logarithmic corrections",
        ));
    }
    if beta_grid.len() < 3 {
        return Err(invalid("beta_grid", "needs at least three points"));
    }
    if beta_grid.windows(2).any(|w| !(w[1] < w[0])) || !(beta_grid[beta_grid.len() - 1] > 0.0) {
        return Err(invalid("beta_grid", "must be positive and strictly decreasing"));
    }
    let ceiling = firm_dist.mean()?;
    let solver = EquilibriumSolver::default();
    let mut x = Vec::with_capacity(beta_grid.len());
    let mut y = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let gap = ceiling - solver.demand_of_beta(firm_dist, beta)?;
        if !(gap > 0.0) {
            return Err(Error::PoorFit {
                r_squared: f64::NAN,
                threshold: SCALING_R2_THRESHOLD,
                slope: f64::NAN,
            });
        }
        x.push(beta.ln());
        y.push(gap.ln());
    }
    let fit = linear_regression(&x, &y);
    if !(fit.r_squared >= SCALING_R2_THRESHOLD) {
        return Err(Error::PoorFit {
            r_squared: fit.r_squared,
            threshold: SCALING_R2_THRESHOLD,
            slope: fit.slope,
        });
    }
    Ok(ScalingFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        expected_slope: if mu_f > 2.0 { 1.0 } else { mu_f - 1.0 },
    })
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn decreasing_log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    let step = (lo / hi).ln() / (n.max(2) - 1) as f64;
    (0..n).map(|i| hi * (step * i as f64).exp()).collect()
}
