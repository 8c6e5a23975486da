//! Ordinal embedding from triplet comparisons.
//!
//! Given answers to questions of the form "is item `i` closer to item `j`
//! or to item `k`?", an ordinal embedding algorithm finds Euclidean
//! coordinates for the items that satisfy as many of those comparisons as
//! possible. This crate bundles:
//!
//! - eight embedding algorithms: four that optimize coordinates directly
//!   (SOE, STE, t-STE, CKLx), three that optimize a Gram matrix under a
//!   rank-constrained PSD projection (GNMDS, CKL, FORTE), and a neural
//!   network that maps binary index codes to coordinates (OENN);
//! - triplet generation from ground-truth data, including held-out test
//!   triplets and an oracle for active queries;
//! - evaluation metrics: train/test triplet error, Procrustes disparity,
//!   and kNN error;
//! - synthetic dataset generators, CSV/flat-file serialization, and a
//!   seeded benchmark runner that emits plot-ready CSV tables.
//!
//! Everything is deterministic for a fixed seed: one master seed fans out
//! into named substreams for data generation, triplet sampling, parameter
//! initialization, shuffling, and evaluation splits.

pub mod data_io;
mod error;
pub mod eval;
mod linalg;
pub mod objectives;
pub mod oenn;
pub mod optim;
pub mod rng;
pub mod runner;
pub mod triplets;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AlgoConfig, Algorithm, Dataset, Embedding, EvalReport, GramMatrix, Triplet, TripletSet,
};
