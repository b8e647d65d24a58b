//! Digraph and multigraph representations.
//!
//! A digraph here is finite, loopless and has no parallel arcs, but may
//! contain 2-cycles (both `uv` and `vu`). Vertices are dense indices
//! `0..n`. Arcs are identified by their insertion index, which every other
//! module uses as a stable handle.

use std::collections::HashMap;
use thiserror::Error;

pub type Vertex = u32;
pub type ArcId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DigraphError {
    #[error("loop at vertex {0}")]
    Loop(Vertex),
    #[error("parallel arc ({0}, {1})")]
    ParallelArc(Vertex, Vertex),
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(Vertex, u32),
}

/// Immutable digraph with per-vertex in/out adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: u32,
    arcs: Vec<(Vertex, Vertex)>,
    out_adj: Vec<Vec<ArcId>>,
    in_adj: Vec<Vec<ArcId>>,
    index: HashMap<(Vertex, Vertex), ArcId>,
}

impl Digraph {
    pub fn new(n: u32, arcs: Vec<(Vertex, Vertex)>) -> Result<Self, DigraphError> {
        let mut out_adj = vec![Vec::new(); n as usize];
        let mut in_adj = vec![Vec::new(); n as usize];
        let mut index = HashMap::with_capacity(arcs.len());
        for (id, &(u, v)) in arcs.iter().enumerate() {
            if u >= n {
                return Err(DigraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(DigraphError::VertexOutOfRange(v, n));
            }
            if u == v {
                return Err(DigraphError::Loop(u));
            }
            if index.insert((u, v), id).is_some() {
                return Err(DigraphError::ParallelArc(u, v));
            }
            out_adj[u as usize].push(id);
            in_adj[v as usize].push(id);
        }
        Ok(Digraph { n, arcs, out_adj, in_adj, index })
    }

    pub fn empty(n: u32) -> Self {
        Digraph::new(n, Vec::new()).expect("empty digraph is always valid")
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[(Vertex, Vertex)] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> (Vertex, Vertex) {
        self.arcs[id]
    }

    pub fn arc_id(&self, u: Vertex, v: Vertex) -> Option<ArcId> {
        self.index.get(&(u, v)).copied()
    }

    pub fn has_arc(&self, u: Vertex, v: Vertex) -> bool {
        self.index.contains_key(&(u, v))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> {
        0..self.n
    }

    /// Arc ids leaving `v`, in insertion order.
    pub fn out_arcs(&self, v: Vertex) -> &[ArcId] {
        &self.out_adj[v as usize]
    }

    /// Arc ids entering `v`, in insertion order.
    pub fn in_arcs(&self, v: Vertex) -> &[ArcId] {
        &self.in_adj[v as usize]
    }

    pub fn out_degree(&self, v: Vertex) -> usize {
        self.out_adj[v as usize].len()
    }

    pub fn in_degree(&self, v: Vertex) -> usize {
        self.in_adj[v as usize].len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.out_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Maximum of all in- and out-degrees.
    pub fn max_degree(&self) -> usize {
        self.max_out_degree().max(self.max_in_degree())
    }

    /// `Some(d)` when every vertex has in- and out-degree exactly `d`.
    pub fn regularity(&self) -> Option<usize> {
        if self.n == 0 {
            return None;
        }
        let d = self.out_degree(0);
        for v in self.vertices() {
            if self.out_degree(v) != d || self.in_degree(v) != d {
                return None;
            }
        }
        Some(d)
    }

    /// Forgets orientation; a 2-cycle becomes a pair of parallel edges.
    pub fn underlying(&self) -> Multigraph {
        let edges = self.arcs.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        Multigraph::new(self.n, edges).expect("underlying multigraph of a digraph has no loops")
    }

    /// Round-trip consistency of the adjacency structure with the arc set.
    /// Construction guarantees this; exposed for tests and fuzzing.
    pub fn check_consistency(&self) -> bool {
        let mut seen = 0usize;
        for v in self.vertices() {
            for &a in self.out_arcs(v) {
                if self.arcs[a].0 != v {
                    return false;
                }
                seen += 1;
            }
            for &a in self.in_arcs(v) {
                if self.arcs[a].1 != v {
                    return false;
                }
            }
        }
        seen == self.arcs.len() && self.index.len() == self.arcs.len()
    }
}

/// Undirected multigraph: parallel edges allowed, loops are not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    n: u32,
    edges: Vec<(Vertex, Vertex)>,
}

impl Multigraph {
    /// Edges are stored with endpoints ordered `u <= v`.
    pub fn new(n: u32, edges: Vec<(Vertex, Vertex)>) -> Result<Self, DigraphError> {
        let mut norm = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= n {
                return Err(DigraphError::VertexOutOfRange(u, n));
            }
            if v >= n {
                return Err(DigraphError::VertexOutOfRange(v, n));
            }
            if u == v {
                return Err(DigraphError::Loop(u));
            }
            norm.push((u.min(v), u.max(v)));
        }
        Ok(Multigraph { n, edges: norm })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn multiplicity(&self, u: Vertex, v: Vertex) -> usize {
        let key = (u.min(v), u.max(v));
        self.edges.iter().filter(|&&e| e == key).count()
    }

    /// Edge multiset equality regardless of insertion order.
    pub fn same_edges(&self, other: &Multigraph) -> bool {
        if self.n != other.n {
            return false;
        }
        let mut a = self.edges.clone();
        let mut b = other.edges.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}
