#![no_std]
// Guard clauses are written `!(x > a)` so NaN falls into the reject branch;
// frozen oracle constants keep their full decimal expansions.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]
//! Discrete-event simulation of the preemptive shortest-remaining-processing-time
//! (SRPT) single-server queue, together with the heavy-traffic machinery needed
//! to study it numerically: processing-time distributions with closed-form
//! truncated moments, the tail first-moment function `S` and its generalized
//! inverse, r-indexed system sequences at near-critical load, diffusion-style
//! path scalings with a corrective spatial factor, a reflected-Brownian-motion
//! oracle, and trend/goodness-of-fit statistics over replication ensembles.
//!
//! The crate is `no_std` + `alloc`; all I/O, file formats, and the experiment
//! CLI live in the companion `srpt-lab` crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dist;
pub mod htseq;
pub mod rbm;
pub mod rng;
pub mod scaling;
pub mod sim;
pub mod special;
pub mod stats;
