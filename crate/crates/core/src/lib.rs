//! Out-of-distribution benchmark engine for materials property regression.
//!
//! The crate covers the whole pipeline: periodic structures and neighbor
//! lists, SOAP descriptors, structure-aware data splitting, an evidential
//! message-passing reference model trained with dropout, and the accuracy and
//! uncertainty metrics used to score out-of-distribution predictions.

pub mod dataset;
pub mod descriptors;
pub mod error;
pub mod evidential;
pub mod harness;
pub mod metrics;
pub mod neighbors;
pub mod refmodel;
pub mod runtime;
pub mod seed;
pub mod splitting;
pub mod structure;

pub use error::{Error, Result};

pub use neighbors::{neighbor_list, NeighborList};
pub use structure::{CrystalStructure, LabeledDataset, Lattice};
