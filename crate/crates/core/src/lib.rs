//! Estimation and analysis of the payoff matrices consistent with observed
//! (approximate) Nash equilibrium play in `n x n` bimatrix games.

pub mod construct;
pub mod distance;
pub mod experiments;
pub mod feasible;
pub mod games;
pub mod instances;
pub mod generate;
pub mod lp;
pub mod rates;
pub mod rng;
