//! Simulation and analysis of two-wing Bell experiments in which the local
//! setting may shift the detection time, so that post-selection on
//! coincidences depends on both settings.
//!
//! The crate is organised bottom-up:
//!
//! * [`types`] and [`rng`]: domain values and the reproducible randomness contract.
//! * [`lhv`]: local response models and a quantum reference sampler.
//! * [`exact`]: exact measures for piecewise-constant models by breakpoint sweeping.
//! * [`engine`]: Monte Carlo estimation of conditional correlations and CHSH statistics.
//! * [`inequality`]: the coincidence-restricted CHSH bounds and a finite-model checker.
//! * [`config`] and [`report`]: the JSON/CSV surfaces used by the `bellsim` binary.

pub mod config;
pub mod engine;
pub mod exact;
pub mod inequality;
pub mod lhv;
pub mod report;
pub mod rng;
pub mod types;

pub use engine::{ChshEstimate, ExperimentConfig, PairEstimate};
pub use exact::{PairStatistics, PiecewiseResponse};
pub use inequality::{DeltaGammaReport, FiniteModel};
pub use lhv::{ClassicModel, LocalModel, ModelSpec, OctantModel, QmSinglet};
pub use rng::{trial_rng, RunSeed, TrialRng};
pub use types::{
    canonicalize_angle, is_coincident, ChshSettings, CoincidenceWindow, HiddenVariable, LocalResponse, Outcome,
    Setting, TrialRecord, TypeError,
};

/// The four setting pairs of a CHSH experiment, in the order AC', AD', BC', BD'.
pub const PAIR_LABELS: [&str; 4] = ["AC'", "AD'", "BC'", "BD'"];

/// For each pair, which left setting (0 = a, 1 = b) and right setting (0 = c, 1 = d) it uses.
pub const PAIR_SETTINGS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
