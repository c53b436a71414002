//! Synthetic economies: Pareto firms, fluctuating demand, and Boltzmann
//! allocation of workers.
//!
//! Each year draws fresh firm productivities. The year is split into
//! sub-periods; each draws a demand `D`, solves for `beta`, and allocates
//! its share of the workforce multinomially with probabilities proportional
//! to `e^{-beta c_i}`. A firm's workforce is its allocation summed over the
//! year, raised to one when empty so every record satisfies `L >= 1`.

use prodisp::equilibrium::EquilibriumSolver;
use prodisp::stats::replica_seed;
use prodisp::superstats::demand_density;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::panel::{FirmRecord, Panel};
use crate::scenario::{Block, Scenario, SectorRule};

/// The realized demand path of one year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDraws {
    pub year: i32,
    pub demands: Vec<f64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Economy {
    pub panel: Panel,
    pub draws: Vec<YearDraws>,
}

pub fn generate_synthetic_economy(scenario: &Scenario) -> Result<Economy> {
    scenario.require("gen", &[Block::Firms, Block::Demand, Block::Economy])?;
    scenario.validate()?;
    let firms = scenario.firms.clone().expect("checked above");
    let eco = scenario.economy.expect("checked above");
    let block = scenario.demand.expect("checked above");
    let law = scenario.demand_law()?;
    let density = demand_density(&law)?;
    if firms.tail_index().is_none_or(|mu| mu <= 1.0) {
        return Err(CliError::Invalid(
            "economy: firm distribution needs a Pareto tail with index above 1".into(),
        ));
    }
    let solver = EquilibriumSolver::default();
    let mut records = Vec::with_capacity(eco.years as usize * eco.firms);
    let mut draws = Vec::with_capacity(eco.years as usize);

    for y in 0..eco.years {
        let year = eco.first_year + y as i32;
        let mut rng = ChaCha8Rng::seed_from_u64(replica_seed(scenario.seed(), y as u64));
        let c = firms.sample(&mut rng, eco.firms);
        let sectors = assign_sectors(&c, eco.sectors, eco.sector_rule, &mut rng);
        let c_min = c.iter().copied().fold(f64::INFINITY, f64::min);

        let s = eco.subperiods as u64;
        let mut labor = vec![0u64; eco.firms];
        let mut demands = Vec::with_capacity(eco.subperiods);
        let mut betas = Vec::with_capacity(eco.subperiods);
        for k in 0..s {
            let d = match block.fixed {
                Some(d) => d,
                None => density.quantile(rng.random::<f64>()),
            };
            let beta = solver.beta_of_demand(&firms, d)?;
            demands.push(d);
            betas.push(beta);
            let n = eco.workers / s + u64::from(k < eco.workers % s);
            let weights: Vec<f64> = c.iter().map(|&ci| (-beta * (ci - c_min)).exp()).collect();
            multinomial(n, &weights, &mut labor, &mut rng);
        }
        for (i, (&ci, &li)) in c.iter().zip(&labor).enumerate() {
            let li = li.max(1);
            records.push(FirmRecord::new(
                format!("F{:06}", i + 1),
                year,
                ci * li as f64,
                li,
                format!("S{:02}", sectors[i] + 1),
            ));
        }
        draws.push(YearDraws {
            year,
            demands,
            betas,
        });
    }
    Ok(Economy {
        panel: Panel::from_records(records),
        draws,
    })
}

/// Adds a multinomial draw of `n` trials to `counts` by sequential
/// conditional binomials.
fn multinomial<R: Rng + ?Sized>(n: u64, weights: &[f64], counts: &mut [u64], rng: &mut R) {
    let mut remaining_mass: f64 = weights.iter().sum();
    let mut remaining = n;
    for (w, count) in weights.iter().zip(counts.iter_mut()) {
        if remaining == 0 {
            break;
        }
        let p = (w / remaining_mass).clamp(0.0, 1.0);
        let k = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, p)
                .expect("probability lies in [0, 1]")
                .sample(rng)
        };
        *count += k;
        remaining -= k;
        remaining_mass -= w;
    }
}

fn assign_sectors<R: Rng + ?Sized>(c: &[f64], sectors: usize, rule: SectorRule, rng: &mut R) -> Vec<usize> {
    match rule {
        SectorRule::Random => c.iter().map(|_| rng.random_range(0..sectors)).collect(),
        SectorRule::SizeStratified => {
            let mut order: Vec<usize> = (0..c.len()).collect();
            order.sort_by(|&i, &j| c[i].total_cmp(&c[j]).then(i.cmp(&j)));
            let mut out = vec![0; c.len()];
            for (rank, &i) in order.iter().enumerate() {
                out[i] = rank * sectors / c.len();
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0; 4];
        multinomial(1000, &[1.0, 2.0, 0.0, 1.0], &mut counts, &mut rng);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts[2], 0);
    }

    #[test]
    fn stratified_sectors_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c: Vec<f64> = (0..66).map(|i| (66 - i) as f64).collect();
        let s = assign_sectors(&c, 33, SectorRule::SizeStratified, &mut rng);
        for k in 0..33 {
            assert_eq!(s.iter().filter(|&&x| x == k).count(), 2);
        }
        assert_eq!(s[65], 0);
    }

    #[test]
    fn conservation_and_floor() {
        let mut scn = Scenario::builtin();
        if let Some(e) = scn.economy.as_mut() {
            e.years = 2;
            e.firms = 200;
            e.workers = 10_000;
            e.subperiods = 8;
        }
        let eco = generate_synthetic_economy(&scn).unwrap();
        for recs in eco.panel.years.values() {
            assert_eq!(recs.len(), 200);
            let total: u64 = recs.iter().map(|r| r.workers).sum();
            let floored = recs.iter().filter(|r| r.workers == 1).count() as u64;
            assert!(total >= 10_000 && total <= 10_000 + floored);
            assert!(recs.iter().all(|r| r.workers >= 1));
        }
    }
}
