//! Self-training pipeline for sketch-extrude CAD program synthesis.
//!
//! The crate is organised around the loop that turns unlabeled point clouds
//! into program/shape training pairs:
//!
//! - [`dsl`]: the mini sketch-extrude language (parser, printer, validator).
//! - [`geometry`]: the executor, turning programs into membership oracles,
//!   surface samples and occupancy grids.
//! - [`metrics`]: Chamfer distance, IoU and program-length statistics.
//! - [`proposer`]: pluggable program generators (grammar sampler,
//!   retrieve-and-mutate, remote HTTP).
//! - [`augment`]: program expansion and shortening.
//! - [`selftrain`]: candidate selection, training-pair policies and the
//!   iteration engine.
//! - [`cli`]: command implementations, configuration and persistence.

pub mod augment;
pub mod cli;
pub mod dsl;
pub mod geometry;
pub mod metrics;
pub mod planar;
pub mod proposer;
pub mod seed;
pub mod selftrain;
