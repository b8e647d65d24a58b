//! Suspicious directed paths: candidates for becoming monochromatic.
//!
//! A directed path is suspicious for color `c` when every colored arc on it
//! carries `c` and every uncolored arc lists `c`. The procedure watches,
//! for an uncolored arc uv, the paths from v back to u with small uncolored
//! length, plus all paths into u with uncolored length exactly `ell` whose
//! first arc is uncolored. Enumeration runs depth-first from the end vertex
//! backward along in-arcs; colored-c arcs are free, uncolored listed arcs
//! consume budget.

use crate::coloring::{Color, ListAssignment, PartialColoring};
use crate::digraph::{ArcId, Digraph, Vertex};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuspiciousError {
    #[error("more than {cap} suspicious paths; instance outside the tracked regime")]
    Overflow { cap: usize },
    #[error("arc {0} is colored; danger sets are defined for uncolored arcs")]
    ColoredArc(ArcId),
    #[error("color {color} not on the list of arc {arc}")]
    ColorNotListed { arc: ArcId, color: Color },
}

/// A suspicious path as a vertex sequence plus which arc positions are
/// uncolored. Position `i` is the arc `vertices[i] -> vertices[i+1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SuspiciousPath {
    pub vertices: Vec<Vertex>,
    pub color: Color,
    pub uncolored_positions: Vec<usize>,
}

impl SuspiciousPath {
    pub fn uncolored_len(&self) -> usize {
        self.uncolored_positions.len()
    }

    /// Re-validate the defining conditions against a state.
    pub fn check(
        &self,
        d: &Digraph,
        lists: &ListAssignment,
        gamma: &PartialColoring,
    ) -> bool {
        if self.vertices.len() < 2 {
            return false;
        }
        let distinct: BTreeSet<_> = self.vertices.iter().collect();
        if distinct.len() != self.vertices.len() {
            return false;
        }
        let unc: BTreeSet<_> = self.uncolored_positions.iter().copied().collect();
        for (i, w) in self.vertices.windows(2).enumerate() {
            let arc = match d.arc_id(w[0], w[1]) {
                Some(a) => a,
                None => return false,
            };
            match gamma.color(arc) {
                Some(c) => {
                    if c != self.color || unc.contains(&i) {
                        return false;
                    }
                }
                None => {
                    if !unc.contains(&i) || !lists.contains(arc, self.color) {
                        return false;
                    }
                }
            }
        }
        unc.iter().all(|&i| i + 1 < self.vertices.len())
    }
}

struct Search<'a> {
    d: &'a Digraph,
    lists: &'a ListAssignment,
    gamma: &'a PartialColoring,
    color: Color,
    cap: usize,
    out: Vec<SuspiciousPath>,
}

impl<'a> Search<'a> {
    /// Extend `rev_path` (kept in reverse: last pushed = current front)
    /// backward. `budget` counts remaining uncolored arcs to place.
    fn backward(
        &mut self,
        rev_path: &mut Vec<Vertex>,
        on_path: &mut Vec<bool>,
        budget: usize,
        accept: &mut dyn FnMut(&[Vertex], usize) -> bool,
        first_arc_uncolored: Option<bool>,
    ) -> Result<(), SuspiciousError> {
        let front = *rev_path.last().unwrap();
        for &a in self.d.in_arcs(front) {
            let (x, _) = self.d.arc(a);
            if on_path[x as usize] {
                continue;
            }
            let (free, cost) = match self.gamma.color(a) {
                Some(c) if c == self.color => (true, 0usize),
                Some(_) => continue,
                None => {
                    if self.lists.contains(a, self.color) {
                        (false, 1)
                    } else {
                        continue;
                    }
                }
            };
            if cost > budget {
                continue;
            }
            rev_path.push(x);
            on_path[x as usize] = true;
            let left = budget - cost;
            let arc_uncolored = !free;
            let full = accept(rev_path, left);
            if full && first_arc_uncolored.map_or(true, |req| req == arc_uncolored) {
                let mut vertices: Vec<Vertex> = rev_path.clone();
                vertices.reverse();
                let mut unc = Vec::new();
                for (i, w) in vertices.windows(2).enumerate() {
                    let arc = self.d.arc_id(w[0], w[1]).unwrap();
                    if !self.gamma.is_colored(arc) {
                        unc.push(i);
                    }
                }
                self.out.push(SuspiciousPath {
                    vertices,
                    color: self.color,
                    uncolored_positions: unc,
                });
                if self.out.len() > self.cap {
                    return Err(SuspiciousError::Overflow { cap: self.cap });
                }
            }
            // Keep extending: longer paths may also qualify, except once
            // the budget is gone and the front arc must stay first.
            let extend = !(first_arc_uncolored == Some(true) && left == 0 && arc_uncolored);
            if extend {
                self.backward(rev_path, on_path, left, accept, first_arc_uncolored)?;
            }
            on_path[x as usize] = false;
            rev_path.pop();
        }
        Ok(())
    }
}

/// P(v, u, c; k): suspicious directed paths from `v` to `u` for `c` with
/// uncolored length exactly `k`.
pub fn enumerate_from_to(
    d: &Digraph,
    lists: &ListAssignment,
    gamma: &PartialColoring,
    v: Vertex,
    u: Vertex,
    c: Color,
    k: usize,
    cap: usize,
) -> Result<Vec<SuspiciousPath>, SuspiciousError> {
    if v == u {
        return Ok(Vec::new());
    }
    let mut search = Search { d, lists, gamma, color: c, cap, out: Vec::new() };
    let mut rev_path = vec![u];
    let mut on_path = vec![false; d.n() as usize];
    on_path[u as usize] = true;
    search.backward(
        &mut rev_path,
        &mut on_path,
        k,
        &mut |path, left| left == 0 && *path.last().unwrap() == v,
        None,
    )?;
    let mut out = search.out;
    out.sort();
    Ok(out)
}

/// P(u, c; len): suspicious paths ending at `u` whose first arc is
/// uncolored and whose uncolored length is exactly `len`.
pub fn enumerate_tail(
    d: &Digraph,
    lists: &ListAssignment,
    gamma: &PartialColoring,
    u: Vertex,
    c: Color,
    len: usize,
    cap: usize,
) -> Result<Vec<SuspiciousPath>, SuspiciousError> {
    assert!(len >= 1, "tail paths have at least one uncolored arc");
    let mut search = Search { d, lists, gamma, color: c, cap, out: Vec::new() };
    let mut rev_path = vec![u];
    let mut on_path = vec![false; d.n() as usize];
    on_path[u as usize] = true;
    search.backward(
        &mut rev_path,
        &mut on_path,
        len,
        &mut |_, left| left == 0,
        Some(true),
    )?;
    let mut out = search.out;
    out.sort();
    Ok(out)
}

/// The danger set of an uncolored arc uv and color c:
/// all P(v, u, c; k) for 1 <= k < ell plus P(u, c; ell).
pub fn danger_set(
    d: &Digraph,
    lists: &ListAssignment,
    gamma: &PartialColoring,
    arc: ArcId,
    c: Color,
    ell: usize,
    cap: usize,
) -> Result<Vec<SuspiciousPath>, SuspiciousError> {
    if gamma.is_colored(arc) {
        return Err(SuspiciousError::ColoredArc(arc));
    }
    if !lists.contains(arc, c) {
        return Err(SuspiciousError::ColorNotListed { arc, color: c });
    }
    let (u, v) = d.arc(arc);
    let mut out = Vec::new();
    for k in 1..ell {
        out.extend(enumerate_from_to(d, lists, gamma, v, u, c, k, cap)?);
        if out.len() > cap {
            return Err(SuspiciousError::Overflow { cap });
        }
    }
    out.extend(enumerate_tail(d, lists, gamma, u, c, ell, cap)?);
    if out.len() > cap {
        return Err(SuspiciousError::Overflow { cap });
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CountBoundReport {
    /// (vertex, color) pairs breaking the list-update discipline: an arc
    /// into (out of) the vertex holds the color while uncolored incident
    /// arcs still list it.
    pub discipline_violations: Vec<(Vertex, Color)>,
    /// Max observed |N^-(w,c)|; must be <= the supplied bound.
    pub max_in_neighborhood: usize,
    pub n_bound: usize,
    /// Per k: the largest |P(v,u,c;k)| observed and the bound N^{k-1}.
    pub worst_from_to: Vec<(usize, usize, f64)>,
    /// Per k: the largest |P(u,c;k)| observed and the bound N^k.
    pub worst_tail: Vec<(usize, usize, f64)>,
    pub bounds_hold: bool,
}

impl CountBoundReport {
    pub fn preconditions_ok(&self) -> bool {
        self.discipline_violations.is_empty() && self.max_in_neighborhood <= self.n_bound
    }
}

/// Verify the suspicious-path count bounds |P(v,u,c;k)| <= N^{k-1} and
/// |P(u,c;k)| <= N^k for k <= k_max on the given state. The bounds are
/// only guaranteed for states produced by the list-update discipline, so
/// that precondition is checked and reported rather than assumed.
pub fn count_bound_check(
    d: &Digraph,
    lists: &ListAssignment,
    gamma: &PartialColoring,
    n_bound: usize,
    k_max: usize,
    cap: usize,
) -> Result<CountBoundReport, SuspiciousError> {
    let mut colors: BTreeSet<Color> = lists.color_universe();
    colors.extend(gamma.used_colors());

    let mut discipline = BTreeSet::new();
    let mut max_in = 0usize;
    for w in d.vertices() {
        for &c in &colors {
            let n_in = crate::coloring::color_neighbors(d, lists, gamma, w, c, crate::coloring::Direction::In);
            max_in = max_in.max(n_in.len());
            let in_colored = d.in_arcs(w).iter().any(|&a| gamma.color(a) == Some(c));
            if in_colored && !n_in.is_empty() {
                discipline.insert((w, c));
            }
            let out_colored = d.out_arcs(w).iter().any(|&a| gamma.color(a) == Some(c));
            if out_colored {
                let n_out =
                    crate::coloring::color_neighbors(d, lists, gamma, w, c, crate::coloring::Direction::Out);
                if !n_out.is_empty() {
                    discipline.insert((w, c));
                }
            }
        }
    }

    let n = n_bound as f64;
    let mut worst_from_to = Vec::new();
    let mut worst_tail = Vec::new();
    let mut bounds_hold = true;
    for k in 1..=k_max {
        let mut worst_ft = 0usize;
        let mut worst_t = 0usize;
        for &c in &colors {
            for u in d.vertices() {
                let tails = enumerate_tail(d, lists, gamma, u, c, k, cap)?;
                worst_t = worst_t.max(tails.len());
                for v in d.vertices() {
                    if v == u {
                        continue;
                    }
                    let fts = enumerate_from_to(d, lists, gamma, v, u, c, k, cap)?;
                    worst_ft = worst_ft.max(fts.len());
                }
            }
        }
        let ft_bound = n.powi(k as i32 - 1);
        let t_bound = n.powi(k as i32);
        if (worst_ft as f64) > ft_bound || (worst_t as f64) > t_bound {
            bounds_hold = false;
        }
        worst_from_to.push((k, worst_ft, ft_bound));
        worst_tail.push((k, worst_t, t_bound));
    }
    Ok(CountBoundReport {
        discipline_violations: discipline.into_iter().collect(),
        max_in_neighborhood: max_in,
        n_bound,
        worst_from_to,
        worst_tail,
        bounds_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::Digraph;

    /// Brute force: every simple directed path, filtered by the defining
    /// conditions. The independent oracle for the enumerators.
    pub(crate) fn naive_suspicious(
        d: &Digraph,
        lists: &ListAssignment,
        gamma: &PartialColoring,
        c: Color,
    ) -> Vec<SuspiciousPath> {
        let mut all = Vec::new();
        for start in d.vertices() {
            let mut path = vec![start];
            let mut on = vec![false; d.n() as usize];
            on[start as usize] = true;
            extend(d, &mut path, &mut on, &mut all);
        }
        fn extend(d: &Digraph, path: &mut Vec<Vertex>, on: &mut Vec<bool>, all: &mut Vec<Vec<Vertex>>) {
            let v = *path.last().unwrap();
            for &a in d.out_arcs(v) {
                let (_, w) = d.arc(a);
                if on[w as usize] {
                    continue;
                }
                path.push(w);
                on[w as usize] = true;
                all.push(path.clone());
                extend(d, path, on, all);
                on[w as usize] = false;
                path.pop();
            }
        }
        all.into_iter()
            .filter_map(|vertices| {
                let mut unc = Vec::new();
                for (i, w) in vertices.windows(2).enumerate() {
                    let arc = d.arc_id(w[0], w[1])?;
                    match gamma.color(arc) {
                        Some(col) if col == c => {}
                        Some(_) => return None,
                        None => {
                            if !lists.contains(arc, c) {
                                return None;
                            }
                            unc.push(i);
                        }
                    }
                }
                Some(SuspiciousPath { vertices, color: c, uncolored_positions: unc })
            })
            .collect()
    }

    fn two_arc_state() -> (Digraph, ListAssignment, PartialColoring) {
        // x=0 -> y=1 colored c, y -> z=2 uncolored with c listed.
        let d = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(1, vec![5]);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 5);
        (d, lists, gamma)
    }

    #[test]
    fn from_to_two_arc_example() {
        let (d, lists, gamma) = two_arc_state();
        let paths = enumerate_from_to(&d, &lists, &gamma, 0, 2, 5, 1, 1000).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![0, 1, 2]);
        assert_eq!(paths[0].uncolored_positions, vec![1]);
        assert!(paths[0].check(&d, &lists, &gamma));
        // Disconnected query finds nothing.
        assert!(enumerate_from_to(&d, &lists, &gamma, 2, 0, 5, 1, 1000).unwrap().is_empty());
    }

    #[test]
    fn from_to_fully_colored_k0() {
        let (d, lists, gamma) = two_arc_state();
        let paths = enumerate_from_to(&d, &lists, &gamma, 0, 1, 5, 0, 1000).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![0, 1]);
        assert!(paths[0].uncolored_positions.is_empty());
    }

    #[test]
    fn tail_single_uncolored() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(0, vec![3]);
        let gamma = PartialColoring::new(&d);
        let paths = enumerate_tail(&d, &lists, &gamma, 1, 3, 1, 1000).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![0, 1]);
        let isolated = enumerate_tail(&d, &lists, &gamma, 0, 3, 1, 1000).unwrap();
        assert!(isolated.is_empty());
    }

    #[test]
    fn tail_alternating_construction() {
        // uncolored, colored-c, uncolored ending at u=3; len 2.
        let d = Digraph::new(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(0, vec![9]);
        lists.set(2, vec![9]);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 1, 9);
        let paths = enumerate_tail(&d, &lists, &gamma, 3, 9, 2, 1000).unwrap();
        let oracle: Vec<_> = naive_suspicious(&d, &lists, &gamma, 9)
            .into_iter()
            .filter(|p| {
                *p.vertices.last().unwrap() == 3
                    && p.uncolored_len() == 2
                    && p.uncolored_positions.first() == Some(&0)
            })
            .collect();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![0, 1, 2, 3]);
        assert_eq!(paths, oracle);
    }

    #[test]
    fn tail_first_arc_must_be_uncolored() {
        // colored-c then uncolored into u: the only length-1 tail path is
        // the short one; the longer path starts colored.
        let d = Digraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(1, vec![4]);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 4);
        let paths = enumerate_tail(&d, &lists, &gamma, 2, 4, 1, 1000).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![1, 2]);
    }

    #[test]
    fn danger_set_union() {
        // Close the two-arc example into a triangle with uncolored z -> x.
        let d = Digraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(1, vec![5]);
        lists.set(2, vec![5]);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 5);
        // Arc 2 = z->x = (2,0): danger paths run x ->..-> z.
        let set = danger_set(&d, &lists, &gamma, 2, 5, 3, 1000).unwrap();
        assert!(set.iter().any(|p| p.vertices == vec![0, 1, 2] && p.uncolored_len() == 1));
        // ell = 1 keeps only the tail family.
        let tail_only = danger_set(&d, &lists, &gamma, 2, 5, 1, 1000).unwrap();
        let expect = enumerate_tail(&d, &lists, &gamma, 2, 5, 1, 1000).unwrap();
        assert_eq!(tail_only, expect);
        assert!(danger_set(&d, &lists, &gamma, 0, 5, 3, 1000).is_err()); // colored arc
    }

    #[test]
    fn overflow_reported() {
        let d = crate::generate::symmetric_complete(6);
        let lists = ListAssignment::uniform(&d, 1);
        let gamma = PartialColoring::new(&d);
        let err = enumerate_tail(&d, &lists, &gamma, 0, 0, 4, 3).unwrap_err();
        assert_eq!(err, SuspiciousError::Overflow { cap: 3 });
    }

    #[test]
    fn matches_naive_on_random_states() {
        use rand::Rng;
        let mut rng = crate::rng::stream(99, "suspicious-unit");
        for _ in 0..40 {
            let n = rng.random_range(3..7u32);
            let mut arcs = Vec::new();
            for u in 0..n {
                for v in 0..n {
                    if u != v && rng.random::<f64>() < 0.4 {
                        arcs.push((u, v));
                    }
                }
            }
            let d = Digraph::new(n, arcs).unwrap();
            let mut lists = ListAssignment::empty(&d);
            let mut gamma = PartialColoring::new(&d);
            for a in 0..d.num_arcs() {
                if rng.random::<f64>() < 0.4 {
                    // colored 0 or 1, degree constraints ignored on purpose
                    let c = rng.random_range(0..2);
                    let (u, v) = d.arc(a);
                    let ok_out = gamma.occupancy(u, c, crate::coloring::Direction::Out) == 0;
                    let ok_in = gamma.occupancy(v, c, crate::coloring::Direction::In) == 0;
                    if ok_out && ok_in {
                        gamma.assign(&d, a, c);
                        continue;
                    }
                }
                let mut l = Vec::new();
                for c in 0..2 {
                    if rng.random::<f64>() < 0.6 {
                        l.push(c);
                    }
                }
                lists.set(a, l);
            }
            let naive0 = naive_suspicious(&d, &lists, &gamma, 0);
            for u in 0..n {
                for k in 1..=3usize {
                    let got = enumerate_tail(&d, &lists, &gamma, u, 0, k, 100_000).unwrap();
                    let want: BTreeSet<_> = naive0
                        .iter()
                        .filter(|p| {
                            *p.vertices.last().unwrap() == u
                                && p.uncolored_len() == k
                                && p.uncolored_positions.first() == Some(&0)
                        })
                        .cloned()
                        .collect();
                    assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), want);
                }
                for v in 0..n {
                    if v == u {
                        continue;
                    }
                    for k in 0..=2usize {
                        let got = enumerate_from_to(&d, &lists, &gamma, v, u, 0, k, 100_000).unwrap();
                        let want: BTreeSet<_> = naive0
                            .iter()
                            .filter(|p| {
                                p.vertices[0] == v
                                    && *p.vertices.last().unwrap() == u
                                    && p.uncolored_len() == k
                            })
                            .cloned()
                            .collect();
                        assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn discipline_violation_flagged() {
        // Arc 0->1 colored c while uncolored arc 2->1 still lists c.
        let d = Digraph::new(3, vec![(0, 1), (2, 1)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(1, vec![6]);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 6);
        let report = count_bound_check(&d, &lists, &gamma, 2, 2, 10_000).unwrap();
        assert!(!report.preconditions_ok());
        assert_eq!(report.discipline_violations, vec![(1, 6)]);
    }

    #[test]
    fn empty_state_trivially_bounded() {
        let d = crate::generate::symmetric_complete(4);
        let lists = ListAssignment::empty(&d);
        let gamma = PartialColoring::new(&d);
        let report = count_bound_check(&d, &lists, &gamma, 1, 3, 10_000).unwrap();
        assert!(report.preconditions_ok());
        assert!(report.bounds_hold);
        assert_eq!(report.max_in_neighborhood, 0);
    }
}
