//! Scenario configuration, batch execution and artifact export for the
//! lightcone engine.

pub mod config;
pub mod expr;
pub mod runner;
pub mod tasks;
