//! Adaptive anomaly detection for a three-tier hierarchical edge computing
//! deployment.
//!
//! Three autoencoders of increasing size run on the IoT device, an edge
//! server and the cloud. A small policy network looks at summary statistics
//! of each week of sensor data and picks the tier to run detection on,
//! trading detection accuracy against network and compute delay.
//!
//! Module map:
//! - [`nn`]: dense networks with manual backpropagation
//! - [`detectors`]: the AE-IoT / AE-Edge / AE-Cloud autoencoders
//! - [`scoring`]: Gaussian logPD scores, thresholds, day verdicts
//! - [`features`]: the 28-value context for the policy
//! - [`policy`]: contextual-bandit policy trained with REINFORCE
//! - [`cost`]: delay and reward arithmetic
//! - [`sim`]: scheme simulator and evaluation reports
//! - [`data`]: CSV ingestion, synthetic data, standardization, splits
//! - [`cli`]: the commands behind the `hec-adapt` binary

pub mod cli;
pub mod config;
pub mod cost;
pub mod data;
pub mod detectors;
pub mod error;
pub mod features;
pub mod io;
pub mod nn;
pub mod policy;
pub mod scoring;
pub mod sim;

pub use error::{Error, Result};
