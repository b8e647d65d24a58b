//! Color the leftover arcs from their reserve lists.
//!
//! The leftovers form a multigraph (a 2-cycle of uncolored arcs yields two
//! parallel edges) and need a proper 1-edge-coloring: every edge colored
//! from its list, no two incident edges sharing a color. When each list
//! holds at least 8 times the color-incidence bound such a coloring exists;
//! resampling violated incident pairs finds one constructively.

use crate::coloring::{Color, ListAssignment, PartialColoring};
use crate::digraph::{ArcId, Digraph, Multigraph, Vertex};
use crate::rng;
use rand::Rng;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FinishError {
    #[error("uncolored arc {arc} ({u} -> {v}) has an empty reserve list")]
    EmptyReserveList { arc: ArcId, u: Vertex, v: Vertex },
    #[error("resample budget {0} exhausted; lists too small for the incidence bound")]
    BudgetExhausted(u64),
}

/// Leftover multigraph plus per-edge lists. `l` is the minimum list size,
/// `n` the incidence bound: the most edges incident to any edge that share
/// one listed color.
#[derive(Debug, Clone)]
pub struct FinishInstance {
    pub graph: Multigraph,
    pub lists: Vec<Vec<Color>>,
    pub l: usize,
    pub n: usize,
    /// For instances built from a digraph: edge index -> original arc id.
    pub arc_ids: Option<Vec<ArcId>>,
}

impl FinishInstance {
    pub fn from_parts(graph: Multigraph, lists: Vec<Vec<Color>>) -> Self {
        assert_eq!(graph.num_edges(), lists.len());
        let mut lists = lists;
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        let l = lists.iter().map(Vec::len).min().unwrap_or(0);
        let n = incidence_bound(&graph, &lists);
        FinishInstance { graph, lists, l, n, arc_ids: None }
    }

    pub fn is_empty(&self) -> bool {
        self.graph.num_edges() == 0
    }

    /// The sufficient condition for the resampling argument.
    pub fn ll_condition_holds(&self) -> bool {
        self.l >= 8 * self.n
    }

    pub fn default_budget(&self) -> u64 {
        100 * (self.graph.num_edges() as u64).max(1) * (self.l as u64).max(1)
    }
}

fn edges_incident(graph: &Multigraph, e: usize, f: usize) -> bool {
    let (a, b) = graph.edges()[e];
    let (c, d) = graph.edges()[f];
    a == c || a == d || b == c || b == d
}

fn incidence_bound(graph: &Multigraph, lists: &[Vec<Color>]) -> usize {
    let m = graph.num_edges();
    let mut worst = 0usize;
    for e in 0..m {
        for &c in &lists[e] {
            let count = (0..m)
                .filter(|&f| f != e && edges_incident(graph, e, f) && lists[f].binary_search(&c).is_ok())
                .count();
            worst = worst.max(count);
        }
    }
    worst
}

/// Collect the uncolored arcs of `gamma` into a finish instance with their
/// reserve lists.
pub fn build_instance(
    d: &Digraph,
    gamma: &PartialColoring,
    reserve_lists: &ListAssignment,
) -> Result<FinishInstance, FinishError> {
    let mut edges = Vec::new();
    let mut lists = Vec::new();
    let mut arc_ids = Vec::new();
    for a in 0..d.num_arcs() {
        if gamma.is_colored(a) {
            continue;
        }
        let (u, v) = d.arc(a);
        let list = reserve_lists.get(a);
        if list.is_empty() {
            return Err(FinishError::EmptyReserveList { arc: a, u, v });
        }
        edges.push((u, v));
        lists.push(list.to_vec());
        arc_ids.push(a);
    }
    let graph = Multigraph::new(d.n(), edges).expect("arcs of a digraph have no loops");
    let mut inst = FinishInstance::from_parts(graph, lists);
    inst.arc_ids = Some(arc_ids);
    Ok(inst)
}

#[derive(Debug, Clone)]
pub struct FinishOutcome {
    /// Edge index -> chosen color.
    pub colors: Vec<Color>,
    pub resamples: u64,
    /// Whether l >= 8n held; the attempt is made either way.
    pub ll_condition_ok: bool,
}

/// Proper list 1-edge-coloring by resampling.
///
/// Lists are first truncated to exactly `l` colors (keeping the smallest).
/// Start from a uniform assignment; while some incident pair shares a
/// color, resample both members of the lowest violated pair uniformly.
pub fn finish(inst: &FinishInstance, seed: u64, max_resamples: u64) -> Result<FinishOutcome, FinishError> {
    let m = inst.graph.num_edges();
    let mut lists = inst.lists.clone();
    for l in &mut lists {
        l.truncate(inst.l);
    }
    if lists.iter().any(Vec::is_empty) {
        // min list size is zero, so some list was empty to begin with
        return Err(FinishError::BudgetExhausted(0));
    }
    let mut rng = rng::stream(seed, "finisher");
    let mut colors: Vec<Color> = (0..m)
        .map(|e| lists[e][rng.random_range(0..lists[e].len())])
        .collect();

    let incident: Vec<Vec<usize>> = (0..m)
        .map(|e| (0..m).filter(|&f| f != e && edges_incident(&inst.graph, e, f)).collect())
        .collect();
    let mut violated: BTreeSet<(usize, usize)> = BTreeSet::new();
    for e in 0..m {
        for &f in &incident[e] {
            if e < f && colors[e] == colors[f] {
                violated.insert((e, f));
            }
        }
    }
    let mut resamples = 0u64;
    while let Some(&(e, f)) = violated.iter().next() {
        if resamples >= max_resamples {
            return Err(FinishError::BudgetExhausted(max_resamples));
        }
        resamples += 1;
        colors[e] = lists[e][rng.random_range(0..lists[e].len())];
        colors[f] = lists[f][rng.random_range(0..lists[f].len())];
        for &x in &[e, f] {
            for &g in &incident[x] {
                let key = (x.min(g), x.max(g));
                if colors[x] == colors[g] {
                    violated.insert(key);
                } else {
                    violated.remove(&key);
                }
            }
        }
    }
    Ok(FinishOutcome { colors, resamples, ll_condition_ok: inst.ll_condition_holds() })
}

/// Proper list 1-edge-coloring of the instance's multigraph?
pub fn verify_finish(inst: &FinishInstance, colors: &[Color]) -> bool {
    let m = inst.graph.num_edges();
    if colors.len() != m {
        return false;
    }
    for e in 0..m {
        if inst.lists[e].binary_search(&colors[e]).is_err() {
            return false;
        }
        for f in (e + 1)..m {
            if edges_incident(&inst.graph, e, f) && colors[e] == colors[f] {
                return false;
            }
        }
    }
    true
}

/// Exhaustive backtracking: does a proper list 1-edge-coloring exist?
/// Intended for small instances; the ground truth for `finish`.
pub fn exists_proper_coloring(inst: &FinishInstance) -> Option<Vec<Color>> {
    let m = inst.graph.num_edges();
    let mut lists = inst.lists.clone();
    for l in &mut lists {
        l.truncate(inst.l);
    }
    let incident: Vec<Vec<usize>> = (0..m)
        .map(|e| (0..m).filter(|&f| f != e && edges_incident(&inst.graph, e, f)).collect())
        .collect();
    let mut colors: Vec<Option<Color>> = vec![None; m];
    fn go(
        e: usize,
        m: usize,
        lists: &[Vec<Color>],
        incident: &[Vec<usize>],
        colors: &mut Vec<Option<Color>>,
    ) -> bool {
        if e == m {
            return true;
        }
        'next: for &c in &lists[e] {
            for &f in &incident[e] {
                if colors[f] == Some(c) {
                    continue 'next;
                }
            }
            colors[e] = Some(c);
            if go(e + 1, m, lists, incident, colors) {
                return true;
            }
            colors[e] = None;
        }
        false
    }
    if go(0, m, &lists, &incident, &mut colors) {
        Some(colors.into_iter().map(Option::unwrap).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::Digraph;

    #[test]
    fn empty_instance() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 1);
        let res = ListAssignment::empty(&d);
        let inst = build_instance(&d, &gamma, &res).unwrap();
        assert!(inst.is_empty());
        let out = finish(&inst, 1, 10).unwrap();
        assert!(out.colors.is_empty());
        assert!(verify_finish(&inst, &out.colors));
    }

    #[test]
    fn single_arc_instance() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let gamma = PartialColoring::new(&d);
        let mut res = ListAssignment::empty(&d);
        res.set(0, vec![5]);
        let inst = build_instance(&d, &gamma, &res).unwrap();
        assert_eq!((inst.l, inst.n), (1, 0));
        let out = finish(&inst, 3, 10).unwrap();
        assert_eq!(out.colors, vec![5]);
        assert_eq!(out.resamples, 0);
    }

    #[test]
    fn empty_reserve_is_an_error() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let gamma = PartialColoring::new(&d);
        let res = ListAssignment::empty(&d);
        assert!(matches!(
            build_instance(&d, &gamma, &res),
            Err(FinishError::EmptyReserveList { arc: 0, .. })
        ));
    }

    #[test]
    fn two_cycle_yields_parallel_edges() {
        let d = Digraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let gamma = PartialColoring::new(&d);
        let mut res = ListAssignment::empty(&d);
        res.set(0, vec![1, 2]);
        res.set(1, vec![1, 2]);
        let inst = build_instance(&d, &gamma, &res).unwrap();
        assert_eq!(inst.graph.multiplicity(0, 1), 2);
        assert_eq!(inst.n, 1);
        let out = finish(&inst, 5, 100).unwrap();
        assert!(verify_finish(&inst, &out.colors));
        assert_ne!(out.colors[0], out.colors[1]);
    }

    #[test]
    fn pigeonhole_budget_exhaustion() {
        let g = Multigraph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        let inst = FinishInstance::from_parts(g, vec![vec![1], vec![1]]);
        assert!(exists_proper_coloring(&inst).is_none());
        assert_eq!(finish(&inst, 1, 50).unwrap_err(), FinishError::BudgetExhausted(50));
    }

    #[test]
    fn disjoint_lists_need_no_resample() {
        let g = Multigraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let inst = FinishInstance::from_parts(g, vec![vec![1], vec![2]]);
        let out = finish(&inst, 1, 10).unwrap();
        assert_eq!(out.resamples, 0);
        assert!(verify_finish(&inst, &out.colors));
    }

    #[test]
    fn tight_path_instance_agrees_with_oracle() {
        // Path of three edges with pairwise-overlapping 2-lists.
        let g = Multigraph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let inst = FinishInstance::from_parts(g, vec![vec![1, 2], vec![1, 2], vec![1, 2]]);
        let oracle = exists_proper_coloring(&inst).unwrap();
        assert!(verify_finish(&inst, &oracle));
        let out = finish(&inst, 9, 10_000).unwrap();
        assert!(verify_finish(&inst, &out.colors));
    }

    #[test]
    fn triangle_with_two_colors_is_infeasible() {
        let g = Multigraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let inst = FinishInstance::from_parts(g, vec![vec![1, 2], vec![1, 2], vec![1, 2]]);
        assert!(exists_proper_coloring(&inst).is_none());
        assert!(finish(&inst, 4, 2000).is_err());
    }

    #[test]
    fn finish_is_deterministic() {
        let g = Multigraph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let lists: Vec<Vec<Color>> = (0..6).map(|_| (0..8).collect()).collect();
        let inst = FinishInstance::from_parts(g, lists);
        let a = finish(&inst, 42, 10_000).unwrap();
        let b = finish(&inst, 42, 10_000).unwrap();
        assert_eq!(a.colors, b.colors);
        assert_eq!(a.resamples, b.resamples);
    }
}
