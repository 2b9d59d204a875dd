//! Deterministic fat-tree data-center simulator for dual-structure
//! multicast.
//!
//! The library models a k-ary fat tree, an SDN controller that splits
//! multicast groups into hypervisor-translated mice and tree-routed
//! elephants by a cumulative traffic threshold, and a replay engine that
//! charges every packet onto directed links. Reports compare rule state,
//! link-traffic balance, and switch update churn against a single
//! shared-tree baseline.
//!
//! Everything is deterministic: the same configuration and seed produce
//! byte-identical traces, reports, and CSV files on every run.
//!
//! ```
//! use dusm::config::validate_config;
//! use dusm::runner::run_cell;
//!
//! let plan = validate_config("k = 4\ngroups = 8\ntotal_bytes = \"1MB\"\n")?;
//! let output = run_cell(&plan.cells[0])?;
//! assert!(output.report.totals.sends > 0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod config;
pub mod controller;
pub mod dataplane;
pub mod guide;
pub mod hash;
pub mod metrics;
pub mod runner;
pub mod sim;
pub mod topology;
pub mod workload;

pub use config::{parse_size, validate_config, CellConfig, ConfigError, ExperimentPlan, OutputFormat};
pub use controller::{
    compute_steiner_tree, count_multicast_rules, pim_baseline_tree, select_roots, ControlError,
    ControlSettings, Controller, GroupClass, Mode, MulticastGroup, RootSelection, SteinerTree,
    SwitchState, UpdateDelta,
};
pub use dataplane::{
    deliver_elephant, deliver_mice, match_tree, packet_key, HypervisorState, LinkLedger,
};
pub use metrics::{
    box_stats, build_families, build_observations, observations_csv, summary_csv, BoxStats,
    FamilyTable, Observation,
};
pub use runner::{
    emit_report, run_cell, run_matrix, simulate_events, CellOutput, MatrixOutcome, RunError,
};
pub use sim::{Report, SimError, SimSettings, Simulation, Totals};
pub use topology::{
    build_fat_tree, FatTreeTopology, HostId, Layer, Link, LinkClass, LinkId, NodeId,
    TopologyError,
};
pub use workload::{
    generate_synthetic, parse_trace, place_members, rank_bytes, write_trace, zipf_exponent,
    Event, EventKind, GroupAddress, Placement, TraceError, WorkloadError, WorkloadSpec,
};
