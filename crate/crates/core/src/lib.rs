//! Productivity dispersion as a stochastic macro-equilibrium.
//!
//! - [`equilibrium`]: maximum-entropy worker allocation for a given firm
//!   productivity distribution and aggregate demand.
//! - [`markov`]: the jump process that generates power-law firm productivity.
//! - [`superstats`]: Boltzmann factors averaged over fluctuating demand and
//!   the Pareto-index algebra across aggregation levels.
//! - [`fitting`]: rank-size cumulatives, Hill and GB2 tail estimation.
//! - [`margsim`]: marginal versus average productivity under Cobb-Douglas.
//!
//! Productivities are in 10^6 yen/person.

pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod fitting;
pub mod margsim;
pub mod markov;
pub mod quad;
pub mod stats;
pub mod superstats;

pub use dist::FirmDistribution;
pub use equilibrium::{EquilibriumSolver, EquilibriumState};
pub use error::{Error, Result};
pub use fitting::{Gb2Params, ParetoFit};
