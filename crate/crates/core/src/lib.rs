//! Interpretable imitation learning for multi-vehicle traffic control.
//!
//! The crate is organised as a pipeline:
//!
//! * [`sim`] - a seeded discrete-time traffic simulator on looped tracks joined by junctions;
//! * [`policy`] - the opaque controllers being imitated and the two reference representations;
//! * [`features`] - typed enumeration and evaluation of candidate features built from the Markov state;
//! * [`tree`] - decision-tree induction under a pairwise action loss, cost-complexity pruning, export;
//! * [`harness`] - dataset assembly, metrics (accuracy, mean time between failures) and experiments.

pub mod dataset;
pub mod error;
pub mod features;
pub mod harness;
pub mod policy;
pub mod sim;
pub mod tree;

pub use error::{Error, Result};
