//! Simulator and cost-model laboratory for network-oblivious algorithms.
//!
//! Programs are written for the machine M(v) in [`machine`], folded onto
//! `p` processors by [`folding`], and priced by [`metrics`]. The
//! [`algorithms`] module holds the reference programs and [`protocol`] the
//! ascend/descend execution on a hierarchical machine.

pub mod algorithms;
pub mod fixtures;
pub mod folding;
pub mod machine;
pub mod metrics;
pub mod oracles;
pub mod problem;
pub mod protocol;

pub use folding::{degree_profile, fold, superstep_degree, DegreeProfile, FoldedTrace};
pub use machine::{run, AlgorithmSpec, Machine, MachineError, RunConfig, Trace, VpIndex};
pub use metrics::{comm_complexity, comm_time, DbspParams, EvalParams, MetricsReport, Q};
