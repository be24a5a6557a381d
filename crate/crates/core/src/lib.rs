//! The two-armed bandit (linear reward-inaction) stochastic approximation
//! algorithm, with the tools to check its convergence behaviour: seeded
//! path simulation, Monte Carlo absorption estimates, closed-form bounds,
//! a Markov-operator absorption solver, the Pólya urn correspondence and an
//! online stopping rule.

pub mod acceptance;
pub mod bandit;
pub mod bounds;
pub mod config;
pub mod error;
pub mod mean_field;
pub mod montecarlo;
pub mod noise;
pub mod numeric;
pub mod operator;
pub mod polya;
pub mod schedule;
pub mod stopping;

pub use bandit::{BanditParams, Trajectory};
pub use error::{Error, Result};
pub use montecarlo::{ClassifierConfig, McEstimate, Outcome};
pub use noise::DriverNoise;
pub use schedule::{Fallibility, StepSchedule};
