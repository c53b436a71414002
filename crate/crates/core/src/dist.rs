//! Firm productivity distributions `P^F(c)`.
//!
//! Productivities are in units of 10^6 yen/person throughout, so inverse
//! temperatures are in person/10^6 yen.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{invalid, Error, Result};
use crate::fitting::Gb2Params;

/// The productivity distribution across firms.
///
/// Discrete kinds (`DiscreteLevels`, `UniformGrid`) follow the level-counting
/// convention: every level carries weight one, so `Z(0) = K`. An
/// `EmpiricalSample` is a normalized sample with weight `1/n` per firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FirmDistribution {
    DiscreteLevels { levels: Vec<f64> },
    /// Levels `c_k = k * spacing` for `k = 1..=count`.
    UniformGrid { spacing: f64, count: u64 },
    Pareto { index: f64, scale: f64 },
    Exponential { rate: f64 },
    Gb2(Gb2Params),
    EmpiricalSample { values: Vec<f64> },
}

impl FirmDistribution {
    pub fn discrete(levels: Vec<f64>) -> Result<Self> {
        let d = FirmDistribution::DiscreteLevels { levels };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform_grid(spacing: f64, count: u64) -> Result<Self> {
        let d = FirmDistribution::UniformGrid { spacing, count };
        d.validate()?;
        Ok(d)
    }

    pub fn pareto(index: f64, scale: f64) -> Result<Self> {
        let d = FirmDistribution::Pareto { index, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        let d = FirmDistribution::Exponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn gb2(params: Gb2Params) -> Result<Self> {
        let d = FirmDistribution::Gb2(params);
        d.validate()?;
        Ok(d)
    }

    /// Builds an empirical distribution; the values are sorted ascending.
    pub fn empirical(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        let d = FirmDistribution::EmpiricalSample { values };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FirmDistribution::DiscreteLevels { levels } => {
                if levels.is_empty() {
                    return Err(Error::InvalidDistribution("no levels".into()));
                }
                if levels.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
                    return Err(Error::InvalidDistribution(
                        "levels must be finite and strictly positive".into(),
                    ));
                }
                if levels.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidDistribution(
                        "levels must be strictly increasing".into(),
                    ));
                }
            }
            FirmDistribution::UniformGrid { spacing, count } => {
                if !(*spacing > 0.0 && spacing.is_finite()) {
                    return Err(invalid("spacing", "must be positive"));
                }
                if *count == 0 {
                    return Err(invalid("count", "must be at least 1"));
                }
            }
            FirmDistribution::Pareto { index, scale } => {
                if !(*index > 0.0 && index.is_finite()) {
                    return Err(invalid("index", "Pareto index must be positive"));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("scale", "Pareto scale must be positive"));
                }
            }
            FirmDistribution::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid("rate", "must be positive"));
                }
            }
            FirmDistribution::Gb2(p) => p.validate()?,
            FirmDistribution::EmpiricalSample { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidDistribution("empty sample".into()));
                }
                if let Some((index, &value)) = values
                    .iter()
                    .enumerate()
                    .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
                {
                    return Err(Error::NonPositiveSample { index, value });
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidDistribution("sample must be sorted".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            FirmDistribution::DiscreteLevels { .. }
                | FirmDistribution::UniformGrid { .. }
                | FirmDistribution::EmpiricalSample { .. }
        )
    }

    /// Infimum of the support.
    pub fn support_lower(&self) -> f64 {
        match self {
            FirmDistribution::DiscreteLevels { levels } => levels[0],
            FirmDistribution::UniformGrid { spacing, .. } => *spacing,
            FirmDistribution::Pareto { scale, .. } => *scale,
            FirmDistribution::Exponential { .. } | FirmDistribution::Gb2(_) => 0.0,
            FirmDistribution::EmpiricalSample { values } => values[0],
        }
    }

    /// Upper-tail index of the survival function, `None` for light tails.
    pub fn tail_index(&self) -> Option<f64> {
        match self {
            FirmDistribution::Pareto { index, .. } => Some(*index),
            FirmDistribution::Gb2(p) => Some(p.a * p.q),
            _ => None,
        }
    }

    /// Characteristic length used to seed quadrature segments.
    pub(crate) fn length_scale(&self) -> f64 {
        match self {
            FirmDistribution::Pareto { scale, .. } => *scale,
            FirmDistribution::Exponential { rate } => 1.0 / rate,
            FirmDistribution::Gb2(p) => p.b,
            FirmDistribution::DiscreteLevels { levels } => levels[0],
            FirmDistribution::UniformGrid { spacing, .. } => *spacing,
            FirmDistribution::EmpiricalSample { values } => values[0],
        }
    }

    /// Unconstrained mean `<c>_0`, i.e. the demand ceiling as beta -> 0.
    pub fn mean(&self) -> Result<f64> {
        match self {
            FirmDistribution::DiscreteLevels { levels } => {
                Ok(levels.iter().sum::<f64>() / levels.len() as f64)
            }
            FirmDistribution::UniformGrid { spacing, count } => {
                Ok(spacing * (*count as f64 + 1.0) / 2.0)
            }
            FirmDistribution::Pareto { index, scale } => {
                if *index <= 1.0 {
                    Err(Error::DivergentMoment {
                        order: 1,
                        tail_index: *index,
                    })
                } else {
                    Ok(index * scale / (index - 1.0))
                }
            }
            FirmDistribution::Exponential { rate } => Ok(1.0 / rate),
            FirmDistribution::Gb2(p) => {
                if p.a * p.q <= 1.0 {
                    Err(Error::DivergentMoment {
                        order: 1,
                        tail_index: p.a * p.q,
                    })
                } else {
                    let inv_a = 1.0 / p.a;
                    Ok(p.b * (ln_beta(p.p + inv_a, p.q - inv_a) - ln_beta(p.p, p.q)).exp())
                }
            }
            FirmDistribution::EmpiricalSample { values } => {
                Ok(values.iter().sum::<f64>() / values.len() as f64)
            }
        }
    }

    /// Log of the density for the continuous kinds; `None` for discrete kinds.
    pub fn ln_density(&self, c: f64) -> Option<f64> {
        let v = match self {
            FirmDistribution::Pareto { index, scale } => {
                if c < *scale {
                    f64::NEG_INFINITY
                } else {
                    index.ln() + index * scale.ln() - (index + 1.0) * c.ln()
                }
            }
            FirmDistribution::Exponential { rate } => {
                if c < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * c
                }
            }
            FirmDistribution::Gb2(p) => p.ln_pdf(c),
            _ => return None,
        };
        Some(v)
    }

    pub fn density(&self, c: f64) -> Option<f64> {
        self.ln_density(c).map(f64::exp)
    }

    /// Survival function `P^F_>(c)` of the continuous kinds.
    pub fn survival(&self, c: f64) -> Option<f64> {
        let v = match self {
            FirmDistribution::Pareto { index, scale } => {
                if c <= *scale {
                    1.0
                } else {
                    (c / scale).powf(-index)
                }
            }
            FirmDistribution::Exponential { rate } => (-rate * c.max(0.0)).exp(),
            FirmDistribution::Gb2(p) => p.survival(c),
            _ => return None,
        };
        Some(v)
    }

    /// Draws `n` independent productivities (continuous kinds by inverse
    /// transform or their standard representation; discrete kinds uniformly
    /// over levels).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match self {
            FirmDistribution::Pareto { index, scale } => {
                let d = Pareto::new(*scale, *index).expect("validated Pareto parameters");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            FirmDistribution::Exponential { rate } => {
                let d = Exp::new(*rate).expect("validated rate");
                (0..n).map(|_| d.sample(rng)).collect()
            }
            FirmDistribution::Gb2(p) => p.sample(rng, n),
            FirmDistribution::DiscreteLevels { levels } => (0..n)
                .map(|_| levels[rng.random_range(0..levels.len())])
                .collect(),
            FirmDistribution::UniformGrid { spacing, count } => (0..n)
                .map(|_| spacing * rng.random_range(1..=*count) as f64)
                .collect(),
            FirmDistribution::EmpiricalSample { values } => (0..n)
                .map(|_| values[rng.random_range(0..values.len())])
                .collect(),
        }
    }
}

impl Gb2Params {
    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        // X = b (Y / (1 - Y))^{1/a} with Y ~ Beta(p, q)
        let beta = Beta::new(self.p, self.q).expect("validated GB2 shapes");
        (0..n)
            .map(|_| {
                let y: f64 = beta.sample(rng);
                self.b * (y / (1.0 - y)).powf(1.0 / self.a)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_unsorted_levels_and_nonpositive_values() {
        assert!(FirmDistribution::discrete(vec![1.0, 1.0]).is_err());
        assert!(FirmDistribution::discrete(vec![2.0, 1.0]).is_err());
        assert!(FirmDistribution::discrete(vec![0.0, 1.0]).is_err());
        assert!(FirmDistribution::empirical(vec![1.0, -2.0]).is_err());
        assert!(FirmDistribution::pareto(0.0, 1.0).is_err());
        assert!(FirmDistribution::uniform_grid(0.01, 0).is_err());
    }

    #[test]
    fn pareto_mean_requires_index_above_one() {
        let d = FirmDistribution::pareto(1.5, 1.0).unwrap();
        assert!((d.mean().unwrap() - 3.0).abs() < 1e-15);
        let heavy = FirmDistribution::pareto(0.9, 1.0).unwrap();
        assert!(matches!(
            heavy.mean(),
            Err(Error::DivergentMoment { order: 1, .. })
        ));
    }

    #[test]
    fn pareto_sampler_matches_survival() {
        let d = FirmDistribution::pareto(1.5, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = d.sample(&mut rng, 200_000);
        let above = xs.iter().filter(|&&x| x > 8.0).count() as f64 / xs.len() as f64;
        let expected = d.survival(8.0).unwrap();
        assert!((above - expected).abs() < 4.0 * (expected / 200_000.0).sqrt());
    }
}
