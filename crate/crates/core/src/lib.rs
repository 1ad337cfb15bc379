//! Priority-aware collaborative perception for V2V networks: a desk-scale
//! simulator plus the two-stage optimizer that jointly picks link
//! establishment, transmission rates, and compression ratios.
//!
//! Pipeline: [`scenario`] generates a seeded highway world and per-vehicle
//! BEV rasters, [`channel`] models subchannel capacities, [`priority`]
//! scores how well each helper's view matches each receiver, and
//! [`optimizer`] runs the rate program / greedy link selection alternation.
//! [`baselines`] holds the fairness and throughput comparison schemes and
//! [`cli`] drives seeded runs and parameter sweeps.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod geometry;
pub mod optimizer;
pub mod priority;
pub mod scenario;

use thiserror::Error;

/// Umbrella error for the full pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Priority(#[from] priority::PriorityError),
    #[error(transparent)]
    Optimizer(#[from] optimizer::OptimizerError),
    #[error(transparent)]
    Baseline(#[from] baselines::BaselineError),
}
