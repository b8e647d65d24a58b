//! Exact linear arboricity and list colorability by backtracking.
//!
//! The searches assign arcs to classes one at a time, keeping each class a
//! directed linear forest with O(1) incremental feasibility: per class and
//! vertex, an out-used/in-used flag plus the endpoints of the path through
//! each vertex. Class symmetry is broken by first-use order (an arc may
//! open class j only when classes below j are in use), which is what makes
//! the 20-arc symmetric complete digraphs tractable.

use crate::coloring::{Color, ColoringError, ListAssignment};
use crate::digraph::{ArcId, Digraph, Vertex};
use std::collections::HashMap;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy)]
pub struct SearchBudget {
    pub node_limit: u64,
    pub time_limit: Duration,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { node_limit: 200_000_000, time_limit: Duration::from_secs(55) }
    }
}

impl SearchBudget {
    pub fn nodes(node_limit: u64) -> Self {
        SearchBudget { node_limit, time_limit: Duration::from_secs(3600) }
    }
}

/// Result of an exact search: either the value, or honest bounds when the
/// budget ran out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LaOutcome {
    Exact { value: u32, witness: Vec<Color> },
    Bounds { lower: u32, upper: u32, witness: Vec<Color> },
}

impl LaOutcome {
    pub fn value(&self) -> Option<u32> {
        match self {
            LaOutcome::Exact { value, .. } => Some(*value),
            LaOutcome::Bounds { .. } => None,
        }
    }
}

/// max(Delta, ceil(d n / (n-1)) for d-regular d >= 1); 0 without arcs.
pub fn la_lower_bound(d: &Digraph) -> u32 {
    if d.num_arcs() == 0 {
        return 0;
    }
    let delta = d.max_degree() as u32;
    match d.regularity() {
        Some(r) if r >= 1 => {
            let n = d.n() as u64;
            let dr = r as u64;
            let ceil = ((dr * n) as f64 / (n - 1) as f64).ceil() as u32;
            delta.max(ceil)
        }
        _ => delta,
    }
}

/// Every color class a directed linear forest? The coloring must be total.
pub fn verify_decomposition(d: &Digraph, colors: &[Color]) -> Result<bool, ColoringError> {
    if colors.len() != d.num_arcs() {
        return Err(ColoringError::UncoloredArc(colors.len().min(d.num_arcs())));
    }
    let mut classes: HashMap<Color, Vec<ArcId>> = HashMap::new();
    for (a, &c) in colors.iter().enumerate() {
        classes.entry(c).or_default().push(a);
    }
    for class in classes.values() {
        if !crate::coloring::is_directed_linear_forest(d, class)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-class incremental state: a directed linear forest as disjoint
/// paths. `start_of[x]` / `end_of[x]` are maintained for path endpoints.
struct ClassState {
    out_used: Vec<bool>,
    in_used: Vec<bool>,
    start_of: Vec<Vertex>,
    end_of: Vec<Vertex>,
    size: usize,
}

impl ClassState {
    fn new(n: usize) -> Self {
        ClassState {
            out_used: vec![false; n],
            in_used: vec![false; n],
            start_of: (0..n as Vertex).collect(),
            end_of: (0..n as Vertex).collect(),
            size: 0,
        }
    }

    fn can_take(&self, u: Vertex, v: Vertex) -> bool {
        !self.out_used[u as usize] && !self.in_used[v as usize] && self.start_of[u as usize] != v
    }

    /// Caller must have checked `can_take`.
    fn take(&mut self, u: Vertex, v: Vertex) {
        let s = self.start_of[u as usize];
        let t = self.end_of[v as usize];
        self.out_used[u as usize] = true;
        self.in_used[v as usize] = true;
        self.end_of[s as usize] = t;
        self.start_of[t as usize] = s;
        self.size += 1;
    }

    fn release(&mut self, u: Vertex, v: Vertex) {
        let s = self.start_of[u as usize];
        let t = self.end_of[v as usize];
        self.out_used[u as usize] = false;
        self.in_used[v as usize] = false;
        self.end_of[s as usize] = u;
        self.start_of[t as usize] = v;
        self.size -= 1;
    }
}

struct DecomposeSearch<'a> {
    d: &'a Digraph,
    k: usize,
    classes: Vec<ClassState>,
    opened: usize,
    assignment: Vec<u32>,
    // per-vertex pruning state
    remaining_out: Vec<u32>,
    remaining_in: Vec<u32>,
    out_used_count: Vec<u32>,
    in_used_count: Vec<u32>,
    nodes: u64,
    deadline: Instant,
    node_limit: u64,
    exhausted: bool,
}

enum SearchResult {
    Found,
    Refuted,
    Budget,
}

impl<'a> DecomposeSearch<'a> {
    fn new(d: &'a Digraph, k: usize, budget: &SearchBudget) -> Self {
        let n = d.n() as usize;
        let mut remaining_out = vec![0u32; n];
        let mut remaining_in = vec![0u32; n];
        for &(u, v) in d.arcs() {
            remaining_out[u as usize] += 1;
            remaining_in[v as usize] += 1;
        }
        DecomposeSearch {
            d,
            k,
            classes: (0..k).map(|_| ClassState::new(n)).collect(),
            opened: 0,
            assignment: vec![u32::MAX; d.num_arcs()],
            remaining_out,
            remaining_in,
            out_used_count: vec![0; n],
            in_used_count: vec![0; n],
            nodes: 0,
            deadline: Instant::now() + budget.time_limit,
            node_limit: budget.node_limit,
            exhausted: false,
        }
    }

    fn solve(&mut self, arc_order: &[ArcId]) -> SearchResult {
        match self.go(arc_order, 0) {
            Some(true) => SearchResult::Found,
            Some(false) => SearchResult::Refuted,
            None => SearchResult::Budget,
        }
    }

    fn go(&mut self, order: &[ArcId], depth: usize) -> Option<bool> {
        if depth == order.len() {
            return Some(true);
        }
        let a = order[depth];
        let (u, v) = self.d.arc(a);
        let limit = (self.opened + 1).min(self.k);
        for j in 0..limit {
            self.nodes += 1;
            if self.nodes > self.node_limit {
                self.exhausted = true;
                return None;
            }
            if self.nodes % 8192 == 0 && Instant::now() > self.deadline {
                self.exhausted = true;
                return None;
            }
            if !self.classes[j].can_take(u, v) {
                continue;
            }
            let opens = j == self.opened;
            self.classes[j].take(u, v);
            self.assignment[a] = j as u32;
            if opens {
                self.opened += 1;
            }
            self.out_used_count[u as usize] += 1;
            self.in_used_count[v as usize] += 1;
            self.remaining_out[u as usize] -= 1;
            self.remaining_in[v as usize] -= 1;
            let feasible = self.prune_ok(u, v);
            let res = if feasible { self.go(order, depth + 1) } else { Some(false) };
            match res {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            self.remaining_out[u as usize] += 1;
            self.remaining_in[v as usize] += 1;
            self.out_used_count[u as usize] -= 1;
            self.in_used_count[v as usize] -= 1;
            if opens {
                self.opened -= 1;
            }
            self.assignment[a] = u32::MAX;
            self.classes[j].release(u, v);
        }
        Some(false)
    }

    /// A vertex with r unassigned out-arcs needs r classes with a free
    /// out-slot; same on the in side.
    fn prune_ok(&self, u: Vertex, v: Vertex) -> bool {
        let k = self.k as u32;
        self.remaining_out[u as usize] <= k - self.out_used_count[u as usize]
            && self.remaining_in[v as usize] <= k - self.in_used_count[v as usize]
    }
}

/// Order arcs so consecutive arcs share vertices: all out-arcs of vertex 0,
/// then vertex 1, and so on. Keeps the degree pruning busy.
fn default_arc_order(d: &Digraph) -> Vec<ArcId> {
    let mut order = Vec::with_capacity(d.num_arcs());
    for v in d.vertices() {
        order.extend(d.out_arcs(v).iter().copied());
    }
    order
}

/// Can the arc set be partitioned into k directed linear forests?
pub fn decompose_into(d: &Digraph, k: u32, budget: &SearchBudget) -> (Option<Vec<Color>>, bool) {
    if d.num_arcs() == 0 {
        return (Some(Vec::new()), false);
    }
    if k == 0 {
        return (None, false);
    }
    let mut search = DecomposeSearch::new(d, k as usize, budget);
    let order = default_arc_order(d);
    match search.solve(&order) {
        SearchResult::Found => (Some(search.assignment.clone()), false),
        SearchResult::Refuted => (None, false),
        SearchResult::Budget => (None, true),
    }
}

/// Greedy first-fit decomposition; an upper bound and witness that always
/// exists (a fresh class accepts any arc).
pub fn greedy_decomposition(d: &Digraph) -> Vec<Color> {
    let n = d.n() as usize;
    let mut classes: Vec<ClassState> = Vec::new();
    let mut colors = vec![0u32; d.num_arcs()];
    for a in default_arc_order(d) {
        let (u, v) = d.arc(a);
        let j = match classes.iter().position(|cl| cl.can_take(u, v)) {
            Some(j) => j,
            None => {
                classes.push(ClassState::new(n));
                classes.len() - 1
            }
        };
        classes[j].take(u, v);
        colors[a] = j as u32;
    }
    colors
}

/// Exact minimum number of directed linear forests partitioning the arcs,
/// by iterative deepening from the lower bound. Budget exhaustion returns
/// bounds plus the best witness found.
pub fn exact_la(d: &Digraph, budget: &SearchBudget) -> LaOutcome {
    if d.num_arcs() == 0 {
        return LaOutcome::Exact { value: 0, witness: Vec::new() };
    }
    let greedy = greedy_decomposition(d);
    let upper = greedy.iter().max().map(|&c| c + 1).unwrap();
    let lower = la_lower_bound(d);
    let mut witness = greedy;
    let mut best_upper = upper;
    for k in lower..best_upper {
        let (found, exhausted) = decompose_into(d, k, budget);
        match found {
            Some(w) => {
                witness = w;
                best_upper = k;
                break;
            }
            None if exhausted => {
                return LaOutcome::Bounds { lower: k, upper: best_upper, witness };
            }
            None => {}
        }
    }
    LaOutcome::Exact { value: best_upper, witness }
}

/// Outcome of the fixed-list feasibility search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ListColoringOutcome {
    Found(Vec<Color>),
    Absent,
    BudgetExhausted,
}

/// Search for a linear L-coloring: every arc colored from its list, every
/// color class a directed linear forest.
pub fn exists_linear_list_coloring(
    d: &Digraph,
    lists: &ListAssignment,
    budget: &SearchBudget,
) -> ListColoringOutcome {
    if d.num_arcs() == 0 {
        return ListColoringOutcome::Found(Vec::new());
    }
    if (0..d.num_arcs()).any(|a| lists.get(a).is_empty()) {
        return ListColoringOutcome::Absent;
    }
    // Most-constrained-first: shortest lists early.
    let mut order = default_arc_order(d);
    order.sort_by_key(|&a| lists.len(a));
    let n = d.n() as usize;
    struct S<'a> {
        d: &'a Digraph,
        lists: &'a ListAssignment,
        classes: HashMap<Color, ClassState>,
        colors: Vec<Option<Color>>,
        nodes: u64,
        node_limit: u64,
        deadline: Instant,
        exhausted: bool,
        n: usize,
    }
    impl<'a> S<'a> {
        fn go(&mut self, order: &[ArcId], depth: usize) -> Option<bool> {
            if depth == order.len() {
                return Some(true);
            }
            let a = order[depth];
            let (u, v) = self.d.arc(a);
            for ci in 0..self.lists.len(a) {
                let c = self.lists.get(a)[ci];
                self.nodes += 1;
                if self.nodes > self.node_limit {
                    self.exhausted = true;
                    return None;
                }
                if self.nodes % 8192 == 0 && Instant::now() > self.deadline {
                    self.exhausted = true;
                    return None;
                }
                let n = self.n;
                let class = self.classes.entry(c).or_insert_with(|| ClassState::new(n));
                if !class.can_take(u, v) {
                    continue;
                }
                class.take(u, v);
                self.colors[a] = Some(c);
                match self.go(order, depth + 1) {
                    Some(true) => return Some(true),
                    None => return None,
                    Some(false) => {}
                }
                self.colors[a] = None;
                self.classes.get_mut(&c).unwrap().release(u, v);
            }
            Some(false)
        }
    }
    let mut s = S {
        d,
        lists,
        classes: HashMap::new(),
        colors: vec![None; d.num_arcs()],
        nodes: 0,
        node_limit: budget.node_limit,
        deadline: Instant::now() + budget.time_limit,
        exhausted: false,
        n,
    };
    match s.go(&order, 0) {
        Some(true) => {
            ListColoringOutcome::Found(s.colors.into_iter().map(Option::unwrap).collect())
        }
        Some(false) => ListColoringOutcome::Absent,
        None => ListColoringOutcome::BudgetExhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{directed_cycle, directed_path, symmetric_complete};

    #[test]
    fn lower_bounds() {
        assert_eq!(la_lower_bound(&Digraph::empty(4)), 0);
        assert_eq!(la_lower_bound(&symmetric_complete(3)), 3);
        assert_eq!(la_lower_bound(&symmetric_complete(5)), 5);
        assert_eq!(la_lower_bound(&directed_path(4)), 1);
        assert_eq!(la_lower_bound(&directed_cycle(6)), 2);
    }

    #[test]
    fn exact_la_trivial_families() {
        let path = directed_path(5);
        assert_eq!(exact_la(&path, &SearchBudget::default()).value(), Some(1));
        let cycle = directed_cycle(7);
        assert_eq!(exact_la(&cycle, &SearchBudget::default()).value(), Some(2));
        let empty = Digraph::empty(3);
        assert_eq!(exact_la(&empty, &SearchBudget::default()).value(), Some(0));
    }

    #[test]
    fn exact_la_k3_star() {
        let k3 = symmetric_complete(3);
        let out = exact_la(&k3, &SearchBudget::default());
        match out {
            LaOutcome::Exact { value, witness } => {
                assert_eq!(value, 4);
                assert!(verify_decomposition(&k3, &witness).unwrap());
                assert!(witness.iter().max().unwrap() < &4);
            }
            _ => panic!("budget must not be exhausted on K3*"),
        }
    }

    #[test]
    fn decompose_witnesses_are_valid() {
        let c = directed_cycle(5);
        let (w, _) = decompose_into(&c, 2, &SearchBudget::default());
        let w = w.unwrap();
        assert!(verify_decomposition(&c, &w).unwrap());
        let (none, exhausted) = decompose_into(&c, 1, &SearchBudget::default());
        assert!(none.is_none() && !exhausted);
    }

    #[test]
    fn budget_exhaustion_yields_bounds() {
        let k5 = symmetric_complete(5);
        let out = exact_la(&k5, &SearchBudget::nodes(50));
        match out {
            LaOutcome::Bounds { lower, upper, witness } => {
                assert!(lower >= 5);
                assert!(upper >= lower);
                assert!(verify_decomposition(&k5, &witness).unwrap());
            }
            LaOutcome::Exact { .. } => panic!("50 nodes cannot settle K5*"),
        }
    }

    #[test]
    fn verify_decomposition_rejects() {
        let d = Digraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        assert!(!verify_decomposition(&d, &[1, 1]).unwrap());
        assert!(verify_decomposition(&d, &[1, 2]).unwrap());
        assert!(verify_decomposition(&d, &[1]).is_err());
    }

    #[test]
    fn list_coloring_simple_cases() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(0, vec![7]);
        assert_eq!(
            exists_linear_list_coloring(&d, &lists, &SearchBudget::default()),
            ListColoringOutcome::Found(vec![7])
        );

        let two = Digraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let ones = ListAssignment::uniform(&two, 1);
        assert_eq!(
            exists_linear_list_coloring(&two, &ones, &SearchBudget::default()),
            ListColoringOutcome::Absent
        );
    }

    #[test]
    fn list_coloring_matches_exact_la() {
        for d in [symmetric_complete(3), directed_cycle(4), directed_path(4)] {
            let la = exact_la(&d, &SearchBudget::default()).value().unwrap();
            for k in 1..=(la + 1) {
                let lists = ListAssignment::uniform(&d, k);
                let out = exists_linear_list_coloring(&d, &lists, &SearchBudget::default());
                if k >= la {
                    match out {
                        ListColoringOutcome::Found(w) => {
                            assert!(verify_decomposition(&d, &w).unwrap())
                        }
                        _ => panic!("uniform {k} lists must color (la = {la})"),
                    }
                } else {
                    assert_eq!(out, ListColoringOutcome::Absent, "k={k} la={la}");
                }
            }
        }
    }

    #[test]
    fn greedy_upper_bound_valid() {
        let k5 = symmetric_complete(5);
        let w = greedy_decomposition(&k5);
        assert!(verify_decomposition(&k5, &w).unwrap());
    }
}
