//! A reasoning workbench for existential rules.
//!
//! The crate provides a Skolem chase with bounded BCQ entailment, semi-naive
//! datalog evaluation, reification of higher-arity signatures to binary ones,
//! a cliquewidth expression algebra with constructions (tree decomposition to
//! expression, recoloring, color-driven saturation), and a sound, terminating
//! first-order rewriting procedure for the grid rule set.
//!
//! All instance-level values are immutable after construction and safe to
//! share across threads. With the default `parallel` feature, the chase step
//! and per-term type computation use data-parallel inner loops; sequential
//! fallbacks are always available.

pub mod binarycase;
pub mod chase;
pub mod cliquewidth;
pub mod datalog;
pub mod gridrw;
pub mod kernel;
pub mod reify;
pub mod rules;
