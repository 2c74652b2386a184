//! Configuration, observation records and the command implementations.

pub mod commands;
pub mod config;
pub mod records;
pub mod units;
