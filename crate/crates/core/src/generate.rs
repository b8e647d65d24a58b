//! Generators for test families: symmetric complete digraphs, random regular
//! digraphs, paths, cycles, and Eulerian orientations of even multigraphs.

use crate::digraph::{Digraph, Multigraph, Vertex};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("degree {d} is not realizable on {n} vertices")]
    InfeasibleDegree { n: u32, d: u32 },
    #[error("random construction failed after {0} attempts")]
    RetriesExhausted(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrientError {
    #[error("vertex {0} has odd degree {1}")]
    OddDegree(Vertex, usize),
    #[error("edge {{{0}, {1}}} has multiplicity {2}; any orientation creates parallel arcs")]
    UnavoidableParallelArcs(Vertex, Vertex, usize),
}

/// K_n*: all ordered pairs of distinct vertices.
pub fn symmetric_complete(n: u32) -> Digraph {
    let mut arcs = Vec::with_capacity((n as usize) * (n as usize - 1).max(0));
    for u in 0..n {
        for v in 0..n {
            if u != v {
                arcs.push((u, v));
            }
        }
    }
    Digraph::new(n, arcs).expect("K_n* is loopless without parallels")
}

/// v0 -> v1 -> ... -> v_{n-1}.
pub fn directed_path(n: u32) -> Digraph {
    let arcs = (1..n).map(|v| (v - 1, v)).collect();
    Digraph::new(n, arcs).expect("path arcs are valid")
}

/// Directed cycle on n >= 2 vertices.
pub fn directed_cycle(n: u32) -> Digraph {
    assert!(n >= 2, "a directed cycle needs at least 2 vertices");
    let arcs = (0..n).map(|v| (v, (v + 1) % n)).collect();
    Digraph::new(n, arcs).expect("cycle arcs are valid")
}

/// Random digraph with every in- and out-degree equal to `d`.
///
/// Each attempt matches out-slots to in-slots by a random permutation and
/// then repairs loops and duplicate arcs with random swaps. Attempts that
/// cannot be repaired within the swap budget are redrawn, up to `max_tries`.
pub fn random_regular_digraph(
    n: u32,
    d: u32,
    seed: u64,
    max_tries: u32,
) -> Result<Digraph, GenerateError> {
    let mut rng = rng::stream(seed, "random-regular-digraph");
    random_regular_digraph_with(n, d, &mut rng, max_tries)
}

pub fn random_regular_digraph_with(
    n: u32,
    d: u32,
    rng: &mut impl Rng,
    max_tries: u32,
) -> Result<Digraph, GenerateError> {
    if d >= n.max(1) {
        return Err(GenerateError::InfeasibleDegree { n, d });
    }
    if d == 0 {
        return Ok(Digraph::empty(n));
    }
    let m = (n as usize) * (d as usize);
    for _ in 0..max_tries {
        // target[i] is the head vertex matched to out-slot i; slot i belongs
        // to tail vertex i / d.
        let mut target: Vec<Vertex> = (0..m).map(|i| (i / d as usize) as Vertex).collect();
        target.shuffle(rng);
        if repair_matching(n, d, &mut target, rng) {
            let arcs: Vec<(Vertex, Vertex)> = target
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i / d as usize) as Vertex, v))
                .collect();
            let g = Digraph::new(n, arcs).expect("repaired matching is simple");
            debug_assert_eq!(g.regularity(), Some(d as usize));
            return Ok(g);
        }
    }
    Err(GenerateError::RetriesExhausted(max_tries))
}

/// Swap heads between slots until no loop or duplicate arc remains.
fn repair_matching(n: u32, d: u32, target: &mut [Vertex], rng: &mut impl Rng) -> bool {
    use std::collections::HashSet;
    let m = target.len();
    let tail = |i: usize| (i / d as usize) as Vertex;
    let mut used: HashSet<(Vertex, Vertex)> = HashSet::with_capacity(m);
    let mut bad: Vec<usize> = Vec::new();
    for i in 0..m {
        if tail(i) == target[i] || !used.insert((tail(i), target[i])) {
            bad.push(i);
        }
    }
    // Each round retries every still-bad slot against a random partner.
    let budget = 100 * (m + n as usize);
    let mut steps = 0usize;
    while let Some(&i) = bad.last() {
        steps += 1;
        if steps > budget {
            return false;
        }
        let j = rng.random_range(0..m);
        if i == j {
            continue;
        }
        let (ti, tj) = (tail(i), tail(j));
        let (hi, hj) = (target[i], target[j]);
        // Swapping must fix slot i without breaking slot j.
        if ti == hj || tj == hi {
            continue;
        }
        let j_ok = used.contains(&(tj, hj));
        if used.contains(&(ti, hj)) || (j_ok && used.contains(&(tj, hi))) {
            continue;
        }
        if j_ok {
            used.remove(&(tj, hj));
            used.insert((tj, hi));
        }
        used.insert((ti, hj));
        target.swap(i, j);
        bad.pop();
        if !j_ok {
            // j was itself a bad slot; it stays queued with its new head.
            if let Some(pos) = bad.iter().position(|&b| b == j) {
                let fixed = tail(j) != target[j] && used.insert((tail(j), target[j]));
                if fixed {
                    bad.swap_remove(pos);
                }
            }
        }
    }
    true
}

/// Orient every edge of an even multigraph so in-degree equals out-degree.
///
/// Double edges are oriented as a 2-cycle; higher multiplicity cannot avoid
/// parallel arcs and is an error. The remaining simple graph is oriented
/// along an Euler tour of each component.
pub fn eulerian_orientation(g: &Multigraph) -> Result<Digraph, OrientError> {
    let n = g.n();
    for v in 0..n {
        let deg = g.degree(v);
        if deg % 2 != 0 {
            return Err(OrientError::OddDegree(v, deg));
        }
    }
    let mut mult = std::collections::HashMap::new();
    for &(u, v) in g.edges() {
        *mult.entry((u, v)).or_insert(0usize) += 1;
    }
    let mut arcs: Vec<(Vertex, Vertex)> = Vec::with_capacity(g.num_edges());
    let mut simple_adj: Vec<Vec<(Vertex, usize)>> = vec![Vec::new(); n as usize];
    let mut edge_count = 0usize;
    let mut keys: Vec<_> = mult.iter().map(|(&k, &c)| (k, c)).collect();
    keys.sort_unstable();
    for ((u, v), c) in keys {
        match c {
            1 => {
                simple_adj[u as usize].push((v, edge_count));
                simple_adj[v as usize].push((u, edge_count));
                edge_count += 1;
            }
            2 => {
                arcs.push((u, v));
                arcs.push((v, u));
            }
            _ => return Err(OrientError::UnavoidableParallelArcs(u, v, c)),
        }
    }
    // Hierholzer on the simple remainder, one tour per component.
    let mut edge_used = vec![false; edge_count];
    let mut next_slot = vec![0usize; n as usize];
    for start in 0..n {
        if next_slot[start as usize] >= simple_adj[start as usize].len() {
            continue;
        }
        let mut stack: Vec<Vertex> = vec![start];
        let mut tour: Vec<Vertex> = Vec::new();
        while let Some(&v) = stack.last() {
            let vs = v as usize;
            let mut advanced = false;
            while next_slot[vs] < simple_adj[vs].len() {
                let (w, e) = simple_adj[vs][next_slot[vs]];
                next_slot[vs] += 1;
                if !edge_used[e] {
                    edge_used[e] = true;
                    stack.push(w);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                tour.push(v);
                stack.pop();
            }
        }
        // The tour is closed (all degrees even), so consecutive pairs
        // orient each edge exactly once.
        for w in tour.windows(2) {
            arcs.push((w[1], w[0]));
        }
    }
    Ok(Digraph::new(n, arcs).expect("orientation of a multiplicity-<=2 multigraph is simple"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_complete_shape() {
        assert_eq!(symmetric_complete(1).num_arcs(), 0);
        let k3 = symmetric_complete(3);
        assert_eq!(k3.num_arcs(), 6);
        assert_eq!(k3.regularity(), Some(2));
        assert_eq!(k3.max_degree(), 2);
        let k5 = symmetric_complete(5);
        assert_eq!(k5.num_arcs(), 20);
        assert_eq!(k5.regularity(), Some(4));
    }

    #[test]
    fn random_regular_zero_and_forced() {
        let d0 = random_regular_digraph(4, 0, 1, 10).unwrap();
        assert_eq!(d0.num_arcs(), 0);
        // On 4 vertices only K_4* is 3-regular without parallels.
        let d3 = random_regular_digraph(4, 3, 9, 1000).unwrap();
        assert_eq!(d3.num_arcs(), 12);
        for u in 0..4 {
            for v in 0..4 {
                if u != v {
                    assert!(d3.has_arc(u, v));
                }
            }
        }
        assert!(random_regular_digraph(4, 4, 1, 10).is_err());
    }

    #[test]
    fn random_regular_is_regular_and_deterministic() {
        for d in [1, 3, 5] {
            let g = random_regular_digraph(10, d, 42, 1000).unwrap();
            assert_eq!(g.regularity(), Some(d as usize));
            assert!(g.check_consistency());
            let h = random_regular_digraph(10, d, 42, 1000).unwrap();
            assert_eq!(g, h);
        }
    }

    #[test]
    fn random_regular_large_dense() {
        let g = random_regular_digraph(200, 32, 7, 1000).unwrap();
        assert_eq!(g.regularity(), Some(32));
    }

    #[test]
    fn eulerian_orientation_cycle() {
        let c4 = Multigraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let d = eulerian_orientation(&c4).unwrap();
        for v in 0..4 {
            assert_eq!(d.out_degree(v), 1);
            assert_eq!(d.in_degree(v), 1);
        }
        assert!(d.underlying().same_edges(&c4));
    }

    #[test]
    fn eulerian_orientation_trivial_and_errors() {
        let single = Multigraph::new(1, vec![]).unwrap();
        assert_eq!(eulerian_orientation(&single).unwrap().num_arcs(), 0);
        let odd = Multigraph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(eulerian_orientation(&odd).unwrap_err(), OrientError::OddDegree(0, 1));
        let triple = Multigraph::new(2, vec![(0, 1), (0, 1), (0, 1), (0, 1)]).unwrap();
        assert!(matches!(
            eulerian_orientation(&triple),
            Err(OrientError::UnavoidableParallelArcs(0, 1, 4))
        ));
    }

    #[test]
    fn eulerian_orientation_k5() {
        // K5 is 4-regular; the orientation must be 2-diregular.
        let mut edges = Vec::new();
        for u in 0..5u32 {
            for v in (u + 1)..5 {
                edges.push((u, v));
            }
        }
        let k5 = Multigraph::new(5, edges).unwrap();
        let d = eulerian_orientation(&k5).unwrap();
        assert_eq!(d.regularity(), Some(2));
        assert!(d.underlying().same_edges(&k5));
    }

    #[test]
    fn eulerian_orientation_double_edges() {
        let g = Multigraph::new(3, vec![(0, 1), (0, 1), (1, 2), (1, 2), (0, 2), (2, 0)]).unwrap();
        let d = eulerian_orientation(&g).unwrap();
        for v in 0..3 {
            assert_eq!(d.out_degree(v), d.in_degree(v));
            assert_eq!(d.out_degree(v) * 2, g.degree(v));
        }
        assert!(d.underlying().same_edges(&g));
    }

    #[test]
    fn underlying_of_regular_orients_back() {
        let g = random_regular_digraph(30, 4, 3, 1000).unwrap();
        let under = g.underlying();
        let d = eulerian_orientation(&under).unwrap();
        assert_eq!(d.regularity(), Some(4));
        assert!(d.underlying().same_edges(&under));
    }
}
