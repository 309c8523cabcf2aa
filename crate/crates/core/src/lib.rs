//! Formal/informal worker classification and Generalized Entropy inequality
//! decomposition for household survey microdata.
//!
//! The pipeline is `ingest` (layout-driven parsing) then `taxonomy`
//! (classification), feeding either `tabulate` (informality shares) or
//! `decompose` (GE within/between decomposition, optionally nested).

pub mod decompose;
pub mod emit;
pub mod ingest;
pub mod pipeline;
pub mod stats;
pub mod summation;
pub mod tabulate;
pub mod taxonomy;

pub use stats::{ge_index, weighted_mean, GeIndex, StatsError, WeightedSample, DEFAULT_ALPHA};
pub use taxonomy::{classify_enterprise, classify_worker, DecisionTable, EmploymentClass, IndeterminatePolicy, SectorClass};
