//! Packet-level simulator for NACK-triggered decode-and-forward relaying
//! under path loss, correlated Rayleigh fading and SINR capture.
//!
//! Time is kept in integer nanoseconds and events are ordered by
//! `(time, priority, insertion)`, so a run is a pure function of its
//! configuration. Relay decisions read the channel but never draw random
//! numbers; a protocol that never forwards replays the no-relay run exactly.

mod channel;
mod config;
mod engine;
mod phy;
mod protocol;
mod sweep;

use thiserror::Error;

pub use channel::{bessel_j0, db_to_linear, dbm_to_mw, path_gain, ChannelField, FadingProcess};
pub use config::{
    Flow, FlowSpec, MacConfig, NodeSpec, PhyConfig, Protocol, Role, RunConfig, SimConfig, Topology,
    TopologySpec, TrafficConfig, SCHEMA_VERSION,
};
pub use engine::{
    run_simulation, run_simulation_with, FlowStats, FrameKind, RelayTxRecord, SimOptions,
    SimReport, TxRecord,
};
pub use phy::{decode, sinr, Airtime, SinrTracker};
pub use protocol::{relay_decision_cons2, relay_decision_greed2, NetworkSnapshot};
pub use sweep::{
    flow_separation_sweep, parse_range, replica_seed, simulate_rows, write_sweep_csv, PointSummary,
    SweepPoint, SweepRow, SweepTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}
