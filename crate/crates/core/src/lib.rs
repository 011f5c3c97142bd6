//! Value of access (VoA) for social-network timelines.
//!
//! * [`model`]: expected novel impressions per access for fixed, average,
//!   Poisson-distributed and deterministic-interval variants, with summation
//!   and quadrature cross-checks.
//! * [`optimizer`]: utility per hour and the utility-maximizing access rate.
//! * [`simulator`]: trace-driven FIFO timeline simulation and synthetic
//!   Monte Carlo.
//! * [`analytics`]: VoA from recorded snapshots, overlap tables and viewer ECDF.
//! * [`trace_io`]: post/impression parsers and CSV writers.
//! * [`cli`]: the `voa` command line.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod model;
pub mod optimizer;
mod quad;
pub mod simulator;
pub mod trace_io;

pub use error::{Result, VoaError};
pub use model::{ModelParams, Variant, VoaEstimate};
pub use simulator::{AccessSchedule, Post, SimConfig, VoaCurve};
