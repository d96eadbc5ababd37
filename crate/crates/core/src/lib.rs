//! Decision procedures and finite witnesses for star/comb duality on
//! countable graphs presented by a finite term algebra.
//!
//! A graph is given as an [`term_graphs::OmegaTerm`]: a finite expression
//! built from finite labelled graphs, `Omega` (base plus countably many
//! identical copies), `Chain` (base plus a glued sequence of segments) and
//! the complete graph `KOmega`. Every vertex of such a graph has a finite
//! address, every infinite vertex set of interest has a finite pattern
//! description, and all structural verdicts (connectivity, ends, critical
//! vertex sets, domination, star/comb existence, ranks) are decided exactly
//! from the term and cross-checked against finite truncations.

pub mod boundary;
pub mod normal_trees;
pub mod separations;
pub mod term_graphs;
pub mod tree_decomp;

pub use term_graphs::{AddrPattern, FiniteGraph, OmegaTerm, UPattern, VertexAddr};
