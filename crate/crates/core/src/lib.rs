//! Decompose digraphs into directed linear forests.
//!
//! A directed linear forest is a vertex-disjoint union of directed paths;
//! equivalently, an arc set in which every in- and out-degree is at most
//! one and no directed cycle appears. This crate provides:
//!
//! - [`digraph`]: digraph/multigraph types and generators,
//! - [`coloring`]: partial (s,t)-edge-colorings, list assignments, and all
//!   validity predicates,
//! - [`params`]: the parameter recursion and its size-bound audit,
//! - [`reserve`]: randomized per-vertex reserve color sets and the list
//!   split into working and reserve lists,
//! - [`suspicious`]: enumeration of suspicious directed paths and their
//!   count bounds,
//! - [`nibble`]: the five-step iterative random coloring procedure,
//! - [`finisher`]: completion of leftover arcs from reserve lists by
//!   resampling,
//! - [`oracle`]: exact linear arboricity and list colorability on small
//!   instances by backtracking.

pub mod coloring;
pub mod dd;
pub mod digraph;
pub mod finisher;
pub mod generate;
pub mod io;
pub mod nibble;
pub mod oracle;
pub mod params;
pub mod reserve;
pub mod rng;
pub mod suspicious;

pub use coloring::{Color, ListAssignment, PartialColoring};
pub use digraph::{ArcId, Digraph, Multigraph, Vertex};
