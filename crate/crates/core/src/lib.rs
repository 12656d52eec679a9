//! Super-hedging prices without martingale measures.
//!
//! The one-step infimum super-hedging cost of a claim is the concave
//! envelope of its payoff relative to the conditional support of the next
//! price, evaluated at the current price — a Fenchel biconjugate, with
//! `-inf` (an immediate profit) when the current price leaves the
//! support's convex hull. This crate realizes that calculus exactly on
//! finite scenario trees and in the deterministic-multiplier interval
//! model, and wraps it in arbitrage classifiers, a martingale-measure
//! feasibility search, calibration estimators and a rolling hedging
//! backtest.

pub mod backtest;
pub mod bs;
pub mod calibrate;
pub mod config;
pub mod convex;
pub mod error;
pub mod lattice;
pub mod payoff;
pub mod series;
pub mod simplex;
pub mod tree;

pub use backtest::{
    run_episode, run_rolling, var_95, BacktestResult, EpisodeResult, RollingConfig, StrikeRule,
};
pub use bs::{bs_reference_price, VolCurve};
pub use calibrate::{
    asymmetric_estimate, coverage_ratio, symmetric_estimate, CalibratedModel, Estimate,
    EstimatorKind, WindowConfig,
};
pub use config::Config;
pub use convex::{
    biconjugate_price, biconjugate_price_sampled, concave_envelope_relative, fenchel_conjugate,
    fenchel_conjugate_sampled, one_step_price_convex, support_function, OneStepPrice, SupportSet,
};
pub use error::{Error, Result};
pub use lattice::{
    lambda_weights, price_recursive, IntervalModelParams, LambdaWeights, LatticeLevel,
    ValueLattice,
};
pub use payoff::PiecewisePayoff;
pub use series::{weekly_episodes, Episode, Frequency, PriceSeries};
pub use tree::{
    random_tree, AipReport, ArbitrageWitness, MartingaleMeasure, NaReport, PriceProcess,
    RandomTreeConfig, ScenarioTree,
};
