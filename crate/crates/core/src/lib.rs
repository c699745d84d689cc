//! Sequential social learning with a changing binary state.
//!
//! Agents arrive one per period, each sees every earlier action plus a
//! private signal about a hidden state that flips with probability
//! `epsilon` per period, and acts to match the current state. The crate
//! simulates this process exactly in log-odds space, measures how often
//! actions change relative to the state, and checks the results against
//! closed-form bounds and enumeration oracles.
//!
//! - [`model`]: parameters, derived constants and one-step maps
//! - [`sim`]: seeded sample paths
//! - [`analytics`]: change frequencies, sign-switch gaps, cascade episodes, reports
//! - [`oracle`]: exact enumeration and certified gap intervals
//! - [`io`]: file formats
//! - [`cli`]: the `fadsim` command line

pub mod analytics;
pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    choose_action, classify_region, derive_constants, f0, f1, posterior_llr, signal_prob_up,
    Action, DerivedConstants, Likelihood, Model, ModelParams, Region, Sign, Signal, StateValue,
};
pub use sim::{simulate, simulate_l_chain, RunConfig, Simulator, Trace, TraceStep};
