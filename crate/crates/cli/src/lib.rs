// Guard clauses are written `!(x > a)` so NaN falls into the reject branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Experiment runner for the SRPT heavy-traffic scaling laboratory: JSON
//! config parsing and validation, seeded parallel simulation pipelines with
//! deterministic file outputs, S-inversion and reflected-Brownian comparison
//! utilities, and event-log replay.
//!
//! All randomness is derived from (base_seed, r, replication, stream tag),
//! so reruns of the same config are byte-identical regardless of the worker
//! count.

pub mod config;
pub mod pipeline;
pub mod replay;
pub mod report;
