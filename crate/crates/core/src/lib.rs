//! Cascading line failures in power grids modelled as networks of swing
//! equations, with distributed frequency control.
//!
//! * [`grid`]: topology, lines and per-node machine parameters.
//! * [`flow`]: line flows, the equilibrium solver and the static cascade.
//! * [`dynamics`]: the controlled swing equations and the dynamic cascade.
//! * [`spectral`]: closed-loop modes of the linearized model and the
//!   critical control gain.
//! * [`ingest`]: built-in case, native TOML files, IEEE CDF and overrides.
//! * [`harness`] and [`report`]: batch experiments and their output.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod ingest;
pub mod report;
pub mod spectral;

pub use dynamics::{
    simulate_cascade, simulate_cascade_traced, CascadeReport, ControlConfig, ControlMode,
    DynamicState, Outcome, SimConfig, TripEvent, TripMark,
};
pub use error::{ErrorCategory, GridError, Result, Violation};
pub use flow::{
    line_flows, solve_equilibrium, static_cascade, FlowMap, OverloadThreshold, PhaseVector,
};
pub use grid::{GridTopology, Line, LineKey, MachineParams, NodeId, Weighting};
pub use harness::{
    classify_all_lines, critical_gain_table, gain_sweep, pinning_experiment, ClassificationTable,
    GainCurve, LineLabel, SweepSpec,
};
pub use ingest::{builtin_five_node, load_case, GridCase};
pub use spectral::{critical_gain, CriticalGain, LinearModelParams};
