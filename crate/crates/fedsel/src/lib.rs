//! Simulator and solver suite for edge-server-assisted federated learning:
//! wireless link budgets, heterogeneous device populations, per-round
//! participant selection (greedy, Best-SINR and an exact knapsack oracle),
//! a spectrum resource-block allocation environment with baseline and
//! Q-learning allocators, and a reproducible sweep harness.

pub mod config;
pub mod error;
pub mod experiments;
pub mod linkbudget;
pub mod plot;
pub mod population;
pub mod selection;
pub mod spectrum;

pub use error::{Error, Result};
