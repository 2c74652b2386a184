//! Planning posted latencies and prices for a parallel road network shared by
//! selfish human drivers and the riders of an autonomous ride-hailing service.
//!
//! The crate is organised bottom-up:
//!
//! - [`road`]: free-flow latency and headway-based mixed-autonomy capacity.
//! - [`choice`]: how riders trade latency against price across a menu.
//! - [`population`]: distributions of rider preferences.
//! - [`learning`]: Bayesian per-rider inference from pairwise queries with
//!   information-gain query selection, and population fitting.
//! - [`planner`]: the menu optimizer, its brute-force oracle and the
//!   latency-pinning transformation that justifies the reduced search.
//! - [`simulator`]: closed-loop experiments against a simulated population.
//! - [`io`]: configuration, record files, result bundles and the commands
//!   used by the `mixroute` binary.

pub mod choice;
pub mod io;
pub mod learning;
pub mod planner;
pub mod population;
pub mod road;
pub mod seeds;
pub mod simulator;

pub use choice::{ChoiceDistribution, ChoiceMode, ChoiceNoise, Menu, MenuOption, WeightVector};
pub use population::PopulationModel;
pub use road::{CongestionProfile, FlowAssignment, Network, Road};
