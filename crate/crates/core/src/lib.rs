//! Exact analysis of inverse M-matrices supported by dyadic trees.
//!
//! The crate builds the matrix `U` carried by an annotated dyadic tree,
//! inverts it exactly, and decides from the tree alone which indices are
//! exiting roots of the associated sub-Markov kernel and which ordered pairs
//! are links (negative off-diagonal entries of `U⁻¹`). Every structural
//! verdict can be checked against the exact inverse.

pub mod builder;
pub mod checks;
pub mod document;
pub mod dot;
pub mod error;
pub mod inverse;
pub mod links;
pub mod matrix;
pub mod rational;
pub mod roots;
pub mod selftest;
pub mod tree;

pub use error::{Error, Result};
