//! Design-space exploration for streaming CNN accelerators.
//!
//! The crate maps CNN inference workloads onto streaming accelerator
//! architectures through an analytical Synchronous Dataflow model:
//!
//! - [`ir`] parses and shape-checks textual network descriptions;
//! - [`design`] holds candidate accelerator configurations and the algebraic
//!   moves between them (folding, partitioning, weights reloading);
//! - [`sdf`] builds the token-rate view of a mapping and checks consistency
//!   with exact rational arithmetic;
//! - [`perf`] provides the analytical cycle, latency, throughput, resource
//!   and bandwidth models, plus [`sim`], a discrete-event pipeline oracle;
//! - [`dse`] casts design selection as optimization: exhaustive
//!   enumeration, seeded simulated annealing, Pareto-front extraction;
//! - [`multi`] jointly maps several CNNs under shared resources with a
//!   deterministic memory-transfer schedule.
//!
//! All estimators are pure; every random choice flows from an explicit seed.

pub mod design;
pub mod dse;
pub mod ir;
pub mod multi;
pub mod perf;
pub mod sdf;
pub mod sim;
pub mod util;
