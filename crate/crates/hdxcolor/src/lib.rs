//! Glauber dynamics for list colorings and numerical verification of matrix
//! trickle-down certificates on the associated weighted simplicial complexes.
//!
//! The crate is organised bottom-up: [`graphs`] holds instances, [`complex`]
//! enumerates the coloring complex, [`spectral`] has the eigenvalue and
//! Loewner-order tools, [`trickledown`] verifies matrix families,
//! [`certificates`] builds the coloring-specific families, and [`sampler`]
//! runs the chain and computes exact mixing diagnostics.

pub mod certificates;
pub mod complex;
pub mod graphs;
pub mod io;
pub mod sampler;
pub mod spectral;
pub mod trickledown;
