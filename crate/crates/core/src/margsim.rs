//! Marginal versus average productivity under Cobb-Douglas technology.
//!
//! With `Y = A K^{1-alpha} L^alpha`, marginal labor productivity is
//! `c_M = alpha c`. When `alpha` is independent of `c` and bounded away
//! from zero, `c_M` has the same Pareto index as `c`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fitting::{hill_estimator, ParetoFit, DEFAULT_TAIL_FRACTION};
use crate::stats::spearman;

/// Distribution of the labor share `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LaborShareLaw {
    UniformInterval { lo: f64, hi: f64 },
    Degenerate { value: f64 },
}

impl LaborShareLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LaborShareLaw::UniformInterval { lo, hi } => {
                if !(lo > 0.0 && lo < hi && hi <= 1.0) {
                    return Err(invalid("labor_share", "need 0 < lo < hi <= 1"));
                }
            }
            LaborShareLaw::Degenerate { value } => {
                if !(value > 0.0 && value <= 1.0) {
                    return Err(invalid("labor_share", "need 0 < value <= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            LaborShareLaw::UniformInterval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            LaborShareLaw::Degenerate { value } => value,
        }
    }
}

/// `c_M = alpha c` with `alpha` drawn independently per firm.
pub fn marginal_from_average(c_samples: &[f64], law: &LaborShareLaw, seed: u64) -> Result<Vec<f64>> {
    law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(c_samples.iter().map(|&c| law.draw(&mut rng) * c).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailComparison {
    pub average: ParetoFit,
    pub marginal: ParetoFit,
    /// `|mu_c - mu_M| / sqrt(se_c^2 + se_M^2)`.
    pub z_score: f64,
    pub equal: bool,
    /// Spearman correlation between `c` and the implied share `c_M / c`.
    pub share_correlation: f64,
    /// Set when the share correlation is significant at three standard errors.
    pub independence_violated: bool,
}

/// Hill fits for `c` and `c_M` with the 3-sigma equality verdict.
pub fn verify_tail_equality(c_samples: &[f64], cm_samples: &[f64]) -> Result<TailComparison> {
    verify_tail_equality_with(c_samples, cm_samples, DEFAULT_TAIL_FRACTION)
}

pub fn verify_tail_equality_with(
    c_samples: &[f64],
    cm_samples: &[f64],
    tail_fraction: f64,
) -> Result<TailComparison> {
    if c_samples.len() != cm_samples.len() {
        return Err(crate::Error::DimensionMismatch(format!(
            "{} averages but {} marginals",
            c_samples.len(),
            cm_samples.len()
        )));
    }
    let average = hill_estimator(c_samples, tail_fraction)?;
    let marginal = hill_estimator(cm_samples, tail_fraction)?;
    let diff = (average.mu_hat - marginal.mu_hat).abs();
    let se = average.stderr.hypot(marginal.stderr);
    let z_score = if diff == 0.0 { 0.0 } else { diff / se };
    let shares: Vec<f64> = c_samples.iter().zip(cm_samples).map(|(c, m)| m / c).collect();
    let share_correlation = spearman(c_samples, &shares);
    let n = c_samples.len() as f64;
    Ok(TailComparison {
        average,
        marginal,
        z_score,
        equal: diff <= 3.0 * se,
        share_correlation,
        independence_violated: share_correlation.abs() > 3.0 / (n - 1.0).sqrt(),
    })
}
