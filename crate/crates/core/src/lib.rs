//! Cooperative relay access policies for NACK-based MACs.
//!
//! * [`binary_model`]: the 256-state binary network model and its labels.
//! * [`policy_synth`]: relay policies for any subset of observed state elements.
//! * [`perf_eval`]: exact and Monte-Carlo probabilities of relay transmissions.
//! * [`sinr_sim`]: a fading-channel discrete-event simulator for the SINR protocols.
//! * [`cli`]: the command-line front end.

pub mod binary_model;
#[cfg(feature = "cli")]
pub mod cli;
pub mod perf_eval;
pub mod policy_synth;
pub mod sinr_sim;
