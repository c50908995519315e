//! Output-bound estimation and falsification for feedforward neural networks.
//!
//! The pipeline treats a network as a black box: it draws a Latin hypercube
//! sample over the input box of a VNNLIB specification, refines the most
//! extreme sampled outputs with box-constrained L-BFGS-B, and decides the
//! specification's violation formula against those estimated output ranges.
//! A run ends in `holds`, `violated` (with a concrete counterexample) or
//! `unknown`.
//!
//! Estimated bounds are *inner* approximations: every bound is attained by a
//! witness input, but the true range may be wider. A `holds` verdict therefore
//! means no violation was found within the estimated ranges, not a proof.

pub mod bounds_engine;
pub mod checker;
pub mod cli;
pub mod onnx_runtime;
pub mod optimizer;
pub mod sampler;
pub mod spec_parser;
