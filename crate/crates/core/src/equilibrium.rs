//! Maximum-entropy macro-equilibrium.
//!
//! Workers spread over firm productivities so as to maximize entropy under
//! the resource constraint and the aggregate-demand constraint. The result is
//! the Boltzmann form `P^W(c) = P^F(c) e^{-beta c} / Z(beta)` with
//! `D = -d ln Z / d beta = <c>_beta`. Everything here is a pure function of
//! the firm distribution and `beta`.
//!
//! Moments are accumulated about the infimum of the support, so variances
//! stay accurate when `beta` is large and the worker density collapses onto
//! the least productive firms.

use serde::{Deserialize, Serialize};

use crate::dist::FirmDistribution;
use crate::error::{invalid, Error, Result};
use crate::quad::Quadrature;
use crate::stats::NeumaierSum;

/// Number of points in a tabulated worker density.
pub const TABLE_POINTS: usize = 2048;
/// The tabulated range ends at the `1 - TABLE_TAIL_MASS` quantile.
pub const TABLE_TAIL_MASS: f64 = 1e-6;

/// Normalized moments of the worker distribution at a given `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannMoments {
    pub beta: f64,
    pub log_partition: f64,
    /// `<c>_beta`, the aggregate demand.
    pub mean: f64,
    /// `<c^2>_beta - <c>_beta^2`, when requested and finite.
    pub variance: Option<f64>,
}

/// Worker density of a solved equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerDensity {
    /// `p_k = e^{-beta c_k} / Z` on the firm levels.
    Levels {
        levels: Vec<f64>,
        probabilities: Vec<f64>,
    },
    /// Continuous density tabulated on a log-spaced grid.
    Tabulated {
        grid: Vec<f64>,
        density: Vec<f64>,
        /// `P^W_>(c)` at each grid point.
        survival: Vec<f64>,
        /// Worker mass below the first grid point (zero when the grid starts
        /// at the infimum of the support).
        mass_below: f64,
    },
}

/// A solved macro-equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub beta: f64,
    pub demand: f64,
    pub partition_value: f64,
    pub log_partition: f64,
    pub source: FirmDistribution,
    pub worker_density: WorkerDensity,
}

impl EquilibriumState {
    /// Closed-form worker density at `c` for the continuous kinds.
    pub fn density_at(&self, c: f64) -> Option<f64> {
        self.source
            .ln_density(c)
            .map(|ln_p| (ln_p - self.beta * c - self.log_partition).exp())
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }
}

/// Uniform-grid approximations `Z ~ 1/(beta dc)` and `D ~ 1/beta`, checked
/// against the exact geometric sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformClosedForm {
    pub partition_approx: f64,
    pub demand_approx: f64,
    pub partition_exact: f64,
    pub demand_exact: f64,
    pub partition_rel_error: f64,
    pub demand_rel_error: f64,
    /// `beta * dc <= 0.1`.
    pub fine_spacing: bool,
    /// `beta * K * dc >= 10`.
    pub wide_support: bool,
}

impl UniformClosedForm {
    pub fn valid(&self) -> bool {
        self.fine_spacing && self.wide_support
    }
}

/// Quadrature and root-finding settings for equilibrium computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSolver {
    pub quadrature: Quadrature,
    /// Relative tolerance on the demand residual in `beta_of_demand`.
    pub root_rel_tol: f64,
    /// Relative bracket width at which bisection hands over to Newton.
    pub bisection_rel_width: f64,
}

impl Default for EquilibriumSolver {
    fn default() -> Self {
        EquilibriumSolver {
            quadrature: Quadrature::default(),
            root_rel_tol: 1e-12,
            bisection_rel_width: 1e-3,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid("beta", format!("must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// Shifted moments `m_n = <(c - lo)^n>_beta` for `n <= order`, plus `ln Z`.
struct Shifted {
    log_partition: f64,
    lo: f64,
    m1: f64,
    m2: f64,
}

impl EquilibriumSolver {
    fn shifted(&self, dist: &FirmDistribution, beta: f64, order: u32) -> Result<Shifted> {
        check_beta(beta)?;
        dist.validate()?;
        let lo = dist.support_lower();
        if beta == 0.0 {
            if let Some(index) = dist.tail_index() {
                if index <= order as f64 {
                    return Err(Error::DivergentMoment {
                        order,
                        tail_index: index,
                    });
                }
            }
        }
        match dist {
            FirmDistribution::DiscreteLevels { levels } => {
                Ok(discrete_moments(levels.iter().copied(), 1.0, beta, lo))
            }
            FirmDistribution::UniformGrid { spacing, count } => Ok(discrete_moments(
                (1..=*count).map(|k| k as f64 * spacing),
                1.0,
                beta,
                lo,
            )),
            FirmDistribution::EmpiricalSample { values } => Ok(discrete_moments(
                values.iter().copied(),
                1.0 / values.len() as f64,
                beta,
                lo,
            )),
            _ => {
                let j0 = self.continuous_integral(dist, beta, 0)?;
                let m1 = if order >= 1 {
                    self.continuous_integral(dist, beta, 1)? / j0
                } else {
                    f64::NAN
                };
                let m2 = if order >= 2 {
                    self.continuous_integral(dist, beta, 2)? / j0
                } else {
                    f64::NAN
                };
                Ok(Shifted {
                    log_partition: j0.ln() - beta * lo,
                    lo,
                    m1,
                    m2,
                })
            }
        }
    }

    /// `J_n = int (c - lo)^n P^F(c) e^{-beta (c - lo)} dc`.
    fn continuous_integral(&self, dist: &FirmDistribution, beta: f64, n: u32) -> Result<f64> {
        let lo = dist.support_lower();
        let scale = dist.length_scale();
        let h0 = if beta > 0.0 { scale.min(1.0 / beta) } else { scale };
        let integrand = |c: f64| {
            let x = c - lo;
            let ln_p = dist.ln_density(c).expect("continuous kind");
            if ln_p == f64::NEG_INFINITY || (n > 0 && x <= 0.0) {
                return 0.0;
            }
            let ln_pow = if n == 0 { 0.0 } else { n as f64 * x.ln() };
            (ln_pow + ln_p - beta * x).exp()
        };
        let q = &self.quadrature;
        let total = if lo > 0.0 {
            q.integrate_upper(integrand, lo, h0)?.value
        } else {
            let split = h0;
            q.integrate_lower(integrand, split)?.value
                + q.integrate_upper(integrand, split, h0)?.value
        };
        Ok(total)
    }

    pub fn boltzmann_moments(
        &self,
        dist: &FirmDistribution,
        beta: f64,
        with_variance: bool,
    ) -> Result<BoltzmannMoments> {
        let order = if with_variance { 2 } else { 1 };
        let s = self.shifted(dist, beta, order)?;
        let variance = if with_variance {
            Some((s.m2 - s.m1 * s.m1).max(0.0))
        } else {
            None
        };
        Ok(BoltzmannMoments {
            beta,
            log_partition: s.log_partition,
            mean: s.lo + s.m1,
            variance,
        })
    }

    pub fn log_partition(&self, dist: &FirmDistribution, beta: f64) -> Result<f64> {
        Ok(self.shifted(dist, beta, 0)?.log_partition)
    }

    /// `Z(beta)`: a plain sum over levels for the discrete kinds, the Laplace
    /// transform of the density for the continuous ones.
    pub fn partition_function(&self, dist: &FirmDistribution, beta: f64) -> Result<f64> {
        Ok(self.log_partition(dist, beta)?.exp())
    }

    /// `<c^n>_beta` for `n` in {0, 1, 2}.
    pub fn moment(&self, dist: &FirmDistribution, beta: f64, n: u32) -> Result<f64> {
        match n {
            0 => {
                check_beta(beta)?;
                Ok(1.0)
            }
            1 => {
                let s = self.shifted(dist, beta, 1)?;
                Ok(s.lo + s.m1)
            }
            2 => {
                let s = self.shifted(dist, beta, 2)?;
                Ok(s.lo * s.lo + 2.0 * s.lo * s.m1 + s.m2)
            }
            _ => Err(invalid("n", format!("moment order must be 0, 1 or 2, got {n}"))),
        }
    }

    /// Aggregate demand `D(beta) = <c>_beta`.
    pub fn demand_of_beta(&self, dist: &FirmDistribution, beta: f64) -> Result<f64> {
        if beta == 0.0 && !dist.is_discrete() {
            return dist.mean();
        }
        self.moment(dist, beta, 1)
    }

    /// Inverts `D(beta)` on the attainable interval `(inf support, <c>_0)`.
    ///
    /// Bisection in `ln beta` narrows the bracket to `bisection_rel_width`,
    /// then Newton steps use `dD/dbeta = -Var_beta(c)` and fall back to
    /// bisection whenever a step leaves the bracket.
    pub fn beta_of_demand(&self, dist: &FirmDistribution, demand: f64) -> Result<f64> {
        dist.validate()?;
        let lower = dist.support_lower();
        let upper = match dist.mean() {
            Ok(m) => m,
            Err(Error::DivergentMoment { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !(demand > lower && demand < upper) {
            return Err(Error::DemandOutOfRange {
                demand,
                lower,
                upper,
            });
        }
        let excess = |beta: f64| -> Result<f64> { Ok(self.demand_of_beta(dist, beta)? - demand) };

        // bracket: excess(lo) > 0 > excess(hi)
        let guess = 1.0 / (demand - lower);
        let (mut lo, mut hi);
        if excess(guess)? > 0.0 {
            lo = guess;
            hi = guess * 4.0;
            let mut steps = 0;
            while excess(hi)? > 0.0 {
                lo = hi;
                hi *= 4.0;
                steps += 1;
                if steps > 600 || !hi.is_finite() {
                    return Err(Error::RootNotFound(format!(
                        "no upper bracket for demand {demand}"
                    )));
                }
            }
        } else {
            hi = guess;
            lo = guess / 4.0;
            let mut steps = 0;
            while excess(lo)? <= 0.0 {
                hi = lo;
                lo /= 4.0;
                steps += 1;
                if steps > 600 || lo == 0.0 {
                    return Err(Error::RootNotFound(format!(
                        "no lower bracket for demand {demand}"
                    )));
                }
            }
        }

        while hi / lo - 1.0 > self.bisection_rel_width {
            let mid = (lo * hi).sqrt();
            if excess(mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }

        let mut beta = (lo * hi).sqrt();
        for _ in 0..100 {
            let m = self.boltzmann_moments(dist, beta, true)?;
            let f = m.mean - demand;
            if f.abs() <= self.root_rel_tol * demand {
                return Ok(beta);
            }
            if f > 0.0 {
                lo = beta;
            } else {
                hi = beta;
            }
            let slope = -m.variance.unwrap_or(0.0);
            let mut next = if slope < 0.0 { beta - f / slope } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = (lo * hi).sqrt();
            }
            if (next - beta).abs() <= 4.0 * f64::EPSILON * beta {
                return Ok(next);
            }
            beta = next;
        }
        Err(Error::RootNotFound(format!(
            "Newton polishing did not reach tolerance for demand {demand}"
        )))
    }

    /// Solves the equilibrium at `beta`.
    pub fn worker_distribution(
        &self,
        dist: &FirmDistribution,
        beta: f64,
    ) -> Result<EquilibriumState> {
        let moments = self.boltzmann_moments(dist, beta, false)?;
        let log_partition = moments.log_partition;
        let worker_density = match dist {
            FirmDistribution::DiscreteLevels { levels } => {
                levels_density(levels.clone(), 0.0, beta, log_partition)
            }
            FirmDistribution::UniformGrid { spacing, count } => levels_density(
                (1..=*count).map(|k| k as f64 * spacing).collect(),
                0.0,
                beta,
                log_partition,
            ),
            FirmDistribution::EmpiricalSample { values } => levels_density(
                values.clone(),
                (values.len() as f64).ln(),
                beta,
                log_partition,
            ),
            _ => self.tabulate(dist, beta, log_partition)?,
        };
        Ok(EquilibriumState {
            beta,
            demand: moments.mean,
            partition_value: log_partition.exp(),
            log_partition,
            source: dist.clone(),
            worker_density,
        })
    }

    /// Worker mass above `c`.
    fn worker_survival(
        &self,
        dist: &FirmDistribution,
        beta: f64,
        log_partition: f64,
        c: f64,
    ) -> Result<f64> {
        let scale = dist.length_scale();
        let h0 = if beta > 0.0 { scale.min(1.0 / beta) } else { scale };
        let integrand = |x: f64| match dist.ln_density(x) {
            Some(ln_p) if ln_p > f64::NEG_INFINITY => (ln_p - beta * (x - c)).exp(),
            _ => 0.0,
        };
        let start = c.max(dist.support_lower());
        let shift = -beta * c - log_partition;
        if start > 0.0 {
            let v = self.quadrature.integrate_upper(integrand, start, h0)?.value;
            Ok(v * shift.exp())
        } else {
            let q = &self.quadrature;
            let v = q.integrate_lower(integrand, h0)?.value + q.integrate_upper(integrand, h0, h0)?.value;
            Ok(v * shift.exp())
        }
    }

    fn tabulate(
        &self,
        dist: &FirmDistribution,
        beta: f64,
        log_partition: f64,
    ) -> Result<WorkerDensity> {
        let ln_density = |c: f64| match dist.ln_density(c) {
            Some(ln_p) if ln_p > f64::NEG_INFINITY => (ln_p - beta * c - log_partition).exp(),
            _ => 0.0,
        };
        let lower_support = dist.support_lower();
        let scale = dist.length_scale();

        // upper end: survival falls to the tail mass
        let mut hi = scale.max(lower_support) * 2.0;
        while self.worker_survival(dist, beta, log_partition, hi)? > TABLE_TAIL_MASS {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::RootNotFound("tabulation upper bound".into()));
            }
        }
        let mut below = hi / 2.0;
        for _ in 0..60 {
            let mid = (below * hi).sqrt();
            if self.worker_survival(dist, beta, log_partition, mid)? > TABLE_TAIL_MASS {
                below = mid;
            } else {
                hi = mid;
            }
            if hi / below - 1.0 < 1e-9 {
                break;
            }
        }

        // lower end: the support infimum, or the lower quantile when it is 0
        let (lo, mass_below) = if lower_support > 0.0 {
            (lower_support, 0.0)
        } else {
            let cdf = |c: f64| -> Result<f64> {
                Ok(self.quadrature.integrate_lower(ln_density, c)?.value)
            };
            let mut lo = scale;
            while cdf(lo)? > TABLE_TAIL_MASS {
                lo /= 2.0;
            }
            let mut above = lo * 2.0;
            for _ in 0..60 {
                let mid = (lo * above).sqrt();
                if cdf(mid)? > TABLE_TAIL_MASS {
                    above = mid;
                } else {
                    lo = mid;
                }
                if above / lo - 1.0 < 1e-9 {
                    break;
                }
            }
            (lo, cdf(lo)?)
        };

        let ratio = (hi / lo).ln() / (TABLE_POINTS - 1) as f64;
        let mut grid: Vec<f64> = (0..TABLE_POINTS)
            .map(|j| lo * (ratio * j as f64).exp())
            .collect();
        grid[TABLE_POINTS - 1] = hi;
        let density: Vec<f64> = grid.iter().map(|&c| ln_density(c)).collect();
        let mut survival = vec![0.0; TABLE_POINTS];
        survival[TABLE_POINTS - 1] = self.worker_survival(dist, beta, log_partition, hi)?;
        for j in (0..TABLE_POINTS - 1).rev() {
            let seg = self
                .quadrature
                .integrate(ln_density, grid[j], grid[j + 1])?
                .value;
            survival[j] = survival[j + 1] + seg;
        }
        Ok(WorkerDensity::Tabulated {
            grid,
            density,
            survival,
            mass_below,
        })
    }
}

fn discrete_moments<I: Iterator<Item = f64>>(levels: I, weight: f64, beta: f64, lo: f64) -> Shifted {
    let mut s0 = NeumaierSum::default();
    let mut s1 = NeumaierSum::default();
    let mut s2 = NeumaierSum::default();
    for c in levels {
        let x = c - lo;
        let w = (-beta * x).exp();
        s0.add(w);
        s1.add(w * x);
        s2.add(w * x * x);
    }
    let z = s0.total();
    Shifted {
        log_partition: (weight * z).ln() - beta * lo,
        lo,
        m1: s1.total() / z,
        m2: s2.total() / z,
    }
}

fn levels_density(levels: Vec<f64>, ln_count: f64, beta: f64, log_partition: f64) -> WorkerDensity {
    let probabilities = levels
        .iter()
        .map(|&c| (-beta * c - log_partition - ln_count).exp())
        .collect();
    WorkerDensity::Levels {
        levels,
        probabilities,
    }
}

/// `Z(beta)` with default settings.
pub fn partition_function(dist: &FirmDistribution, beta: f64) -> Result<f64> {
    EquilibriumSolver::default().partition_function(dist, beta)
}

/// `<c^n>_beta` with default settings.
pub fn moment(dist: &FirmDistribution, beta: f64, n: u32) -> Result<f64> {
    EquilibriumSolver::default().moment(dist, beta, n)
}

/// `D(beta)` with default settings.
pub fn demand_of_beta(dist: &FirmDistribution, beta: f64) -> Result<f64> {
    EquilibriumSolver::default().demand_of_beta(dist, beta)
}

/// `beta(D)` with default settings.
pub fn beta_of_demand(dist: &FirmDistribution, demand: f64) -> Result<f64> {
    EquilibriumSolver::default().beta_of_demand(dist, demand)
}

/// Equilibrium at `beta` with default settings.
pub fn worker_distribution(dist: &FirmDistribution, beta: f64) -> Result<EquilibriumState> {
    EquilibriumSolver::default().worker_distribution(dist, beta)
}

/// Exact geometric sums for levels `c_k = k dc`, `k = 1..=count`:
/// `Z = (1 - e^{-beta K dc}) / (e^{beta dc} - 1)` and
/// `D = dc / (1 - e^{-beta dc}) - K dc / (e^{beta K dc} - 1)`.
pub fn uniform_grid_exact(delta_c: f64, count: u64, beta: f64) -> (f64, f64) {
    let k = count as f64;
    let z = -(-beta * k * delta_c).exp_m1() / (beta * delta_c).exp_m1();
    let d = delta_c / -(-beta * delta_c).exp_m1() - k * delta_c / (beta * k * delta_c).exp_m1();
    (z, d)
}

/// The continuum approximation of the uniform grid with a validity report.
pub fn uniform_closed_form(delta_c: f64, count: u64, beta: f64) -> Result<UniformClosedForm> {
    if !(delta_c > 0.0) {
        return Err(invalid("delta_c", "must be positive"));
    }
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be positive"));
    }
    let partition_approx = 1.0 / (beta * delta_c);
    let demand_approx = 1.0 / beta;
    let (partition_exact, demand_exact) = uniform_grid_exact(delta_c, count, beta);
    Ok(UniformClosedForm {
        partition_approx,
        demand_approx,
        partition_exact,
        demand_exact,
        partition_rel_error: (partition_approx - partition_exact).abs() / partition_exact,
        demand_rel_error: (demand_approx - demand_exact).abs() / demand_exact,
        fine_spacing: beta * delta_c <= 0.1,
        wide_support: beta * count as f64 * delta_c >= 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn discrete_partition_at_zero_counts_levels() {
        let levels: Vec<f64> = (1..=33).map(|k| k as f64 * 0.7).collect();
        let d = FirmDistribution::discrete(levels).unwrap();
        assert!((partition_function(&d, 0.0).unwrap() - 33.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_continuous_partition_at_zero_is_one() {
        for d in [
            FirmDistribution::pareto(1.5, 1.0).unwrap(),
            FirmDistribution::pareto(0.8, 2.0).unwrap(),
            FirmDistribution::exponential(3.0).unwrap(),
        ] {
            assert!(rel(partition_function(&d, 0.0).unwrap(), 1.0) < 1e-10, "{d:?}");
        }
    }

    #[test]
    fn exponential_closed_forms() {
        let d = FirmDistribution::exponential(1.0).unwrap();
        assert!(rel(partition_function(&d, 0.5).unwrap(), 2.0 / 3.0) < 1e-10);
        assert!(rel(moment(&d, 0.0, 1).unwrap(), 1.0) < 1e-10);
        assert!(rel(demand_of_beta(&d, 1.0).unwrap(), 0.5) < 1e-10);
        assert!(rel(beta_of_demand(&d, 0.5).unwrap(), 1.0) < 1e-9);
        // second moment 2/(lambda+beta)^2
        assert!(rel(moment(&d, 1.0, 2).unwrap(), 0.5) < 1e-10);
    }

    #[test]
    fn zeroth_moment_is_exactly_one() {
        let d = FirmDistribution::pareto(1.5, 1.0).unwrap();
        assert_eq!(moment(&d, 0.3, 0).unwrap(), 1.0);
    }

    #[test]
    fn divergent_second_moment() {
        let d = FirmDistribution::pareto(1.5, 1.0).unwrap();
        assert!(matches!(
            moment(&d, 0.0, 2),
            Err(Error::DivergentMoment { order: 2, .. })
        ));
        // any positive beta regularizes it
        assert!(moment(&d, 1e-3, 2).unwrap().is_finite());
    }

    #[test]
    fn single_level_demand_is_the_level() {
        let d = FirmDistribution::discrete(vec![4.2]).unwrap();
        for beta in [0.0, 0.1, 10.0, 1e4] {
            assert!(rel(demand_of_beta(&d, beta).unwrap(), 4.2) < 1e-14);
        }
    }

    #[test]
    fn two_level_worker_probabilities() {
        let d = FirmDistribution::discrete(vec![1.0, 2.0]).unwrap();
        let state = worker_distribution(&d, std::f64::consts::LN_2).unwrap();
        match state.worker_density {
            WorkerDensity::Levels { probabilities, .. } => {
                assert!((probabilities[0] - 2.0 / 3.0).abs() < 1e-15);
                assert!((probabilities[1] - 1.0 / 3.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_beta_is_rejected() {
        let d = FirmDistribution::exponential(1.0).unwrap();
        assert!(matches!(
            demand_of_beta(&d, -0.1),
            Err(Error::InvalidParameter { name: "beta", .. })
        ));
    }

    #[test]
    fn demand_above_mean_is_out_of_range() {
        let d = FirmDistribution::pareto(1.5, 1.0).unwrap();
        let err = beta_of_demand(&d, 3.0).unwrap_err();
        assert!(matches!(err, Error::DemandOutOfRange { upper, .. } if (upper - 3.0).abs() < 1e-12));
        assert!(beta_of_demand(&d, 1.0).is_err());
    }

    #[test]
    fn uniform_closed_form_validity_flags() {
        let r = uniform_closed_form(1.0, 2, 10.0).unwrap();
        assert!(r.wide_support);
        assert!(!r.fine_spacing);
        assert!(!r.valid());

        let r = uniform_closed_form(0.01, 100_000, 0.05).unwrap();
        assert!(r.valid());
        assert_eq!(r.demand_approx, 20.0);
        assert!(r.demand_rel_error < 0.01);
        assert!(r.partition_rel_error < 0.01);
    }

    #[test]
    fn uniform_exact_sum_matches_brute_force() {
        let (dc, k, beta) = (0.3, 50u64, 0.7);
        let z: f64 = (1..=k).map(|j| (-beta * j as f64 * dc).exp()).sum();
        let d: f64 = (1..=k)
            .map(|j| j as f64 * dc * (-beta * j as f64 * dc).exp())
            .sum::<f64>()
            / z;
        let (ze, de) = uniform_grid_exact(dc, k, beta);
        assert!(rel(ze, z) < 1e-13);
        assert!(rel(de, d) < 1e-13);
    }
}
