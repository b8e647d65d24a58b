//! Partial arc colorings, list assignments, and the validity predicates a
//! decomposition into directed linear forests induces.
//!
//! A partial (s,t)-edge-coloring assigns each colored arc a color from its
//! list so that every vertex sees at most `s` incoming and `t` outgoing arcs
//! of any one color. With s = t = 1 and no monochromatic directed cycle,
//! the color classes are exactly directed linear forests.

use crate::digraph::{ArcId, Digraph, Vertex};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

pub type Color = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColoringError {
    #[error("arc {0} not in digraph")]
    UnknownArc(ArcId),
    #[error("arc {0} is not colored")]
    UncoloredArc(ArcId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// Map arc -> color set. Every arc of the digraph has an entry; sets are
/// kept sorted so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListAssignment {
    lists: Vec<Vec<Color>>,
}

impl ListAssignment {
    pub fn empty(d: &Digraph) -> Self {
        ListAssignment { lists: vec![Vec::new(); d.num_arcs()] }
    }

    /// Every arc gets `{0, .., k-1}`.
    pub fn uniform(d: &Digraph, k: u32) -> Self {
        ListAssignment { lists: vec![(0..k).collect(); d.num_arcs()] }
    }

    pub fn from_lists(lists: Vec<Vec<Color>>) -> Self {
        let mut lists = lists;
        for l in &mut lists {
            l.sort_unstable();
            l.dedup();
        }
        ListAssignment { lists }
    }

    pub fn num_arcs(&self) -> usize {
        self.lists.len()
    }

    pub fn get(&self, arc: ArcId) -> &[Color] {
        &self.lists[arc]
    }

    pub fn set(&mut self, arc: ArcId, mut colors: Vec<Color>) {
        colors.sort_unstable();
        colors.dedup();
        self.lists[arc] = colors;
    }

    pub fn contains(&self, arc: ArcId, c: Color) -> bool {
        self.lists[arc].binary_search(&c).is_ok()
    }

    pub fn remove_color(&mut self, arc: ArcId, c: Color) -> bool {
        match self.lists[arc].binary_search(&c) {
            Ok(i) => {
                self.lists[arc].remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn clear(&mut self, arc: ArcId) {
        self.lists[arc].clear();
    }

    /// Keep only the `k` smallest colors of every listed arc.
    pub fn truncate_to(&mut self, arc: ArcId, k: usize) {
        self.lists[arc].truncate(k);
    }

    pub fn len(&self, arc: ArcId) -> usize {
        self.lists[arc].len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.iter().all(Vec::is_empty)
    }

    /// All colors present in some list.
    pub fn color_universe(&self) -> BTreeSet<Color> {
        self.lists.iter().flatten().copied().collect()
    }
}

/// Partial coloring with a per-(vertex, color, direction) occupancy index
/// maintained incrementally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialColoring {
    color_of: Vec<Option<Color>>,
    occ_in: HashMap<(Vertex, Color), u32>,
    occ_out: HashMap<(Vertex, Color), u32>,
    classes: BTreeMap<Color, BTreeSet<ArcId>>,
    colored: usize,
}

impl PartialColoring {
    pub fn new(d: &Digraph) -> Self {
        PartialColoring {
            color_of: vec![None; d.num_arcs()],
            occ_in: HashMap::new(),
            occ_out: HashMap::new(),
            classes: BTreeMap::new(),
            colored: 0,
        }
    }

    pub fn color(&self, arc: ArcId) -> Option<Color> {
        self.color_of[arc]
    }

    pub fn is_colored(&self, arc: ArcId) -> bool {
        self.color_of[arc].is_some()
    }

    pub fn colored_count(&self) -> usize {
        self.colored
    }

    pub fn num_arcs(&self) -> usize {
        self.color_of.len()
    }

    pub fn is_total(&self) -> bool {
        self.colored == self.color_of.len()
    }

    /// Arcs of one color class, ascending.
    pub fn class(&self, c: Color) -> impl Iterator<Item = ArcId> + '_ {
        self.classes.get(&c).into_iter().flatten().copied()
    }

    pub fn used_colors(&self) -> impl Iterator<Item = Color> + '_ {
        self.classes.iter().filter(|(_, s)| !s.is_empty()).map(|(&c, _)| c)
    }

    pub fn occupancy(&self, v: Vertex, c: Color, dir: Direction) -> u32 {
        let map = match dir {
            Direction::In => &self.occ_in,
            Direction::Out => &self.occ_out,
        };
        map.get(&(v, c)).copied().unwrap_or(0)
    }

    pub fn assign(&mut self, d: &Digraph, arc: ArcId, c: Color) {
        if let Some(old) = self.color_of[arc] {
            if old == c {
                return;
            }
            self.unassign(d, arc);
        }
        let (u, v) = d.arc(arc);
        self.color_of[arc] = Some(c);
        *self.occ_out.entry((u, c)).or_insert(0) += 1;
        *self.occ_in.entry((v, c)).or_insert(0) += 1;
        self.classes.entry(c).or_default().insert(arc);
        self.colored += 1;
    }

    pub fn unassign(&mut self, d: &Digraph, arc: ArcId) {
        if let Some(c) = self.color_of[arc].take() {
            let (u, v) = d.arc(arc);
            decrement(&mut self.occ_out, (u, c));
            decrement(&mut self.occ_in, (v, c));
            if let Some(set) = self.classes.get_mut(&c) {
                set.remove(&arc);
                if set.is_empty() {
                    self.classes.remove(&c);
                }
            }
            self.colored -= 1;
        }
    }

    /// Recompute the occupancy index from scratch and compare.
    pub fn occupancy_consistent(&self, d: &Digraph) -> bool {
        let mut occ_in: HashMap<(Vertex, Color), u32> = HashMap::new();
        let mut occ_out: HashMap<(Vertex, Color), u32> = HashMap::new();
        for (arc, col) in self.color_of.iter().enumerate() {
            if let Some(c) = col {
                let (u, v) = d.arc(arc);
                *occ_out.entry((u, *c)).or_insert(0) += 1;
                *occ_in.entry((v, *c)).or_insert(0) += 1;
            }
        }
        let norm = |m: &HashMap<(Vertex, Color), u32>| -> BTreeMap<(Vertex, Color), u32> {
            m.iter().filter(|(_, &n)| n > 0).map(|(&k, &n)| (k, n)).collect()
        };
        norm(&occ_in) == norm(&self.occ_in) && norm(&occ_out) == norm(&self.occ_out)
    }
}

fn decrement(map: &mut HashMap<(Vertex, Color), u32>, key: (Vertex, Color)) {
    if let Some(n) = map.get_mut(&key) {
        *n -= 1;
        if *n == 0 {
            map.remove(&key);
        }
    }
}

/// One violation found by a validator; `witness` pins down where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// More than `s` in-arcs of one color at a vertex.
    DegreeIn { v: Vertex, color: Color, count: u32 },
    /// More than `t` out-arcs of one color at a vertex.
    DegreeOut { v: Vertex, color: Color, count: u32 },
    /// A directed cycle all of whose arcs carry `color`.
    MonochromaticDicycle { color: Color, cycle: Vec<Vertex> },
    /// A colored arc whose color is not on its list.
    OffList { arc: ArcId, color: Color },
    /// `colored_arc` holds `color`, yet an incident arc still lists it.
    RetainedColorListed { colored_arc: ArcId, other_arc: ArcId, color: Color },
    /// Arc uv is uncolored, lists `color`, and a monochromatic directed
    /// path from v to u already exists.
    ReturnPathListed { arc: ArcId, color: Color, path: Vec<Vertex> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColoringReport {
    pub violations: Vec<Violation>,
}

impl ColoringReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// True iff in `(V, arc_set)` every in/out-degree is at most one and no
/// directed cycle exists.
pub fn is_directed_linear_forest(d: &Digraph, arc_set: &[ArcId]) -> Result<bool, ColoringError> {
    let n = d.n() as usize;
    let mut succ: Vec<Option<Vertex>> = vec![None; n];
    let mut indeg = vec![0u8; n];
    for &a in arc_set {
        if a >= d.num_arcs() {
            return Err(ColoringError::UnknownArc(a));
        }
        let (u, v) = d.arc(a);
        if succ[u as usize].is_some() {
            return Ok(false);
        }
        succ[u as usize] = Some(v);
        indeg[v as usize] += 1;
        if indeg[v as usize] > 1 {
            return Ok(false);
        }
    }
    // Out- and in-degrees <= 1, so components are paths or cycles; a cycle
    // is a walk that returns to its start.
    let mut on_path = vec![false; n];
    for &a in arc_set {
        let (start, _) = d.arc(a);
        if on_path[start as usize] || indeg[start as usize] > 0 {
            continue;
        }
        let mut w = start;
        while let Some(next) = succ[w as usize] {
            on_path[w as usize] = true;
            w = next;
        }
        on_path[w as usize] = true;
    }
    for &a in arc_set {
        let (u, _) = d.arc(a);
        if !on_path[u as usize] {
            return Ok(false); // unreachable from any path start: lies on a cycle
        }
    }
    Ok(true)
}

/// Check a partial coloring against the (s,t) degree bounds, optional
/// acyclicity per color class, and optional list membership. All problems
/// are collected, none thrown.
pub fn validate_coloring(
    d: &Digraph,
    gamma: &PartialColoring,
    s: u32,
    t: u32,
    acyclic: bool,
    lists: Option<&ListAssignment>,
) -> ColoringReport {
    let mut violations = Vec::new();
    let colors: Vec<Color> = gamma.used_colors().collect();
    for &c in &colors {
        let class: Vec<ArcId> = gamma.class(c).collect();
        let mut in_count: BTreeMap<Vertex, u32> = BTreeMap::new();
        let mut out_count: BTreeMap<Vertex, u32> = BTreeMap::new();
        for &a in &class {
            let (u, v) = d.arc(a);
            *out_count.entry(u).or_insert(0) += 1;
            *in_count.entry(v).or_insert(0) += 1;
        }
        for (&v, &count) in &in_count {
            if count > s {
                violations.push(Violation::DegreeIn { v, color: c, count });
            }
        }
        for (&v, &count) in &out_count {
            if count > t {
                violations.push(Violation::DegreeOut { v, color: c, count });
            }
        }
        if acyclic {
            for cycle in monochromatic_cycles(d, &class) {
                violations.push(Violation::MonochromaticDicycle { color: c, cycle });
            }
        }
    }
    if let Some(lists) = lists {
        for a in 0..d.num_arcs() {
            if let Some(c) = gamma.color(a) {
                if !lists.contains(a, c) {
                    violations.push(Violation::OffList { arc: a, color: c });
                }
            }
        }
    }
    ColoringReport { violations }
}

/// Directed cycles in the subgraph spanned by `class` (each cycle reported
/// once, by its vertex sequence starting at its smallest vertex). Works for
/// arbitrary arc sets, not just (1,1) classes.
fn monochromatic_cycles(d: &Digraph, class: &[ArcId]) -> Vec<Vec<Vertex>> {
    let mut adj: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for &a in class {
        let (u, v) = d.arc(a);
        adj.entry(u).or_default().push(v);
    }
    // Iterative DFS with colors: 0 unseen, 1 on stack, 2 done.
    let mut state: HashMap<Vertex, u8> = HashMap::new();
    let mut cycles = Vec::new();
    let starts: Vec<Vertex> = adj.keys().copied().collect();
    for s in starts {
        if state.get(&s).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(Vertex, usize)> = vec![(s, 0)];
        let mut path: Vec<Vertex> = Vec::new();
        state.insert(s, 1);
        path.push(s);
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            let next = adj.get(&v).and_then(|ns| ns.get(*i)).copied();
            match next {
                Some(w) => {
                    *i += 1;
                    match state.get(&w).copied().unwrap_or(0) {
                        0 => {
                            state.insert(w, 1);
                            path.push(w);
                            stack.push((w, 0));
                        }
                        1 => {
                            let pos = path.iter().position(|&x| x == w).unwrap();
                            let mut cyc = path[pos..].to_vec();
                            let min_pos = cyc
                                .iter()
                                .enumerate()
                                .min_by_key(|(_, &x)| x)
                                .map(|(i, _)| i)
                                .unwrap();
                            cyc.rotate_left(min_pos);
                            cycles.push(cyc);
                        }
                        _ => {}
                    }
                }
                None => {
                    state.insert(v, 2);
                    path.pop();
                    stack.pop();
                }
            }
        }
    }
    cycles.sort();
    cycles.dedup();
    cycles
}

/// Is there a directed path from `from` to `to` every arc of which is
/// colored `c`?
pub fn has_monochromatic_dipath(
    d: &Digraph,
    gamma: &PartialColoring,
    from: Vertex,
    to: Vertex,
    c: Color,
) -> bool {
    if from == to {
        return false;
    }
    let mut succ: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
    for a in gamma.class(c) {
        let (u, v) = d.arc(a);
        succ.entry(u).or_default().push(v);
    }
    let mut seen = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([from]);
    seen.insert(from);
    while let Some(v) = queue.pop_front() {
        for &w in succ.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if w == to {
                return true;
            }
            if seen.insert(w) {
                queue.push_back(w);
            }
        }
    }
    false
}

/// N^-(v,c) / N^+(v,c): uncolored arcs at `v` in the given direction whose
/// list contains `c`.
pub fn color_neighbors(
    d: &Digraph,
    lists: &ListAssignment,
    gamma: &PartialColoring,
    v: Vertex,
    c: Color,
    dir: Direction,
) -> Vec<ArcId> {
    let arcs = match dir {
        Direction::In => d.in_arcs(v),
        Direction::Out => d.out_arcs(v),
    };
    arcs.iter()
        .copied()
        .filter(|&a| !gamma.is_colored(a) && lists.contains(a, c))
        .collect()
}

/// R^+(v,c) / R^-(v,c): uncolored arcs leaving (entering) `v` whose far
/// endpoint has reserved `c`.
pub fn reserve_neighbors(
    d: &Digraph,
    gamma: &PartialColoring,
    reserve: &[Vec<Color>],
    v: Vertex,
    c: Color,
    dir: Direction,
) -> Vec<ArcId> {
    let arcs = match dir {
        Direction::In => d.in_arcs(v),
        Direction::Out => d.out_arcs(v),
    };
    arcs.iter()
        .copied()
        .filter(|&a| {
            if gamma.is_colored(a) {
                return false;
            }
            let (u, w) = d.arc(a);
            let far = if w == v { u } else { w };
            reserve[far as usize].binary_search(&c).is_ok()
        })
        .collect()
}

/// Per-color index of the (1,1)-acyclic classes: each class is a disjoint
/// union of directed paths, so a vertex gets (path id, position). A
/// monochromatic v -> u path exists iff both sit on one path in order.
/// Degenerate classes (degree or cycle violations) fall back to BFS.
pub struct MonoPathIndex {
    per_color: BTreeMap<Color, ColorPaths>,
}

enum ColorPaths {
    Paths(HashMap<Vertex, (u32, u32)>),
    Degenerate,
}

impl MonoPathIndex {
    pub fn build(d: &Digraph, gamma: &PartialColoring) -> Self {
        let mut per_color = BTreeMap::new();
        let colors: Vec<Color> = gamma.used_colors().collect();
        for c in colors {
            let class: Vec<ArcId> = gamma.class(c).collect();
            per_color.insert(c, index_class(d, &class));
        }
        MonoPathIndex { per_color }
    }

    pub fn has_path(
        &self,
        d: &Digraph,
        gamma: &PartialColoring,
        from: Vertex,
        to: Vertex,
        c: Color,
    ) -> bool {
        if from == to {
            return false;
        }
        match self.per_color.get(&c) {
            None => false,
            Some(ColorPaths::Paths(pos)) => match (pos.get(&from), pos.get(&to)) {
                (Some(&(p1, i1)), Some(&(p2, i2))) => p1 == p2 && i1 < i2,
                _ => false,
            },
            Some(ColorPaths::Degenerate) => has_monochromatic_dipath(d, gamma, from, to, c),
        }
    }
}

fn index_class(d: &Digraph, class: &[ArcId]) -> ColorPaths {
    let mut succ: HashMap<Vertex, Vertex> = HashMap::new();
    let mut indeg: HashMap<Vertex, u32> = HashMap::new();
    let mut verts: BTreeSet<Vertex> = BTreeSet::new();
    for &a in class {
        let (u, v) = d.arc(a);
        verts.insert(u);
        verts.insert(v);
        if succ.insert(u, v).is_some() {
            return ColorPaths::Degenerate;
        }
        let e = indeg.entry(v).or_insert(0);
        *e += 1;
        if *e > 1 {
            return ColorPaths::Degenerate;
        }
    }
    let mut pos: HashMap<Vertex, (u32, u32)> = HashMap::new();
    let mut path_id = 0u32;
    for &s in &verts {
        if indeg.get(&s).copied().unwrap_or(0) > 0 {
            continue;
        }
        let mut w = s;
        let mut i = 0u32;
        loop {
            pos.insert(w, (path_id, i));
            match succ.get(&w) {
                Some(&next) => {
                    w = next;
                    i += 1;
                    if i as usize > verts.len() {
                        return ColorPaths::Degenerate; // cycle
                    }
                }
                None => break,
            }
        }
        path_id += 1;
    }
    if pos.len() != verts.len() {
        return ColorPaths::Degenerate; // some vertices only on cycles
    }
    ColorPaths::Paths(pos)
}

/// Both compatibility conditions between lists and a partial coloring:
/// a retained color is absent from the lists of incident arcs on the
/// conflicting side, and no uncolored arc lists a color that already has a
/// monochromatic return path.
pub fn is_compatible(d: &Digraph, lists: &ListAssignment, gamma: &PartialColoring) -> ColoringReport {
    let mut violations = Vec::new();
    for a in 0..d.num_arcs() {
        if let Some(c) = gamma.color(a) {
            let (u, v) = d.arc(a);
            for &f in d.out_arcs(u).iter().chain(d.in_arcs(v)) {
                if f != a && lists.contains(f, c) {
                    violations.push(Violation::RetainedColorListed {
                        colored_arc: a,
                        other_arc: f,
                        color: c,
                    });
                }
            }
        }
    }
    let index = MonoPathIndex::build(d, gamma);
    for a in 0..d.num_arcs() {
        if gamma.is_colored(a) {
            continue;
        }
        let (u, v) = d.arc(a);
        for &c in lists.get(a) {
            if index.has_path(d, gamma, v, u, c) {
                violations.push(Violation::ReturnPathListed {
                    arc: a,
                    color: c,
                    path: mono_path_witness(d, gamma, v, u, c),
                });
            }
        }
    }
    ColoringReport { violations }
}

fn mono_path_witness(
    d: &Digraph,
    gamma: &PartialColoring,
    from: Vertex,
    to: Vertex,
    c: Color,
) -> Vec<Vertex> {
    let mut succ: HashMap<Vertex, Vec<Vertex>> = HashMap::new();
    for a in gamma.class(c) {
        let (u, v) = d.arc(a);
        succ.entry(u).or_default().push(v);
    }
    let mut prev: HashMap<Vertex, Vertex> = HashMap::new();
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut w = to;
            while let Some(&p) = prev.get(&w) {
                path.push(p);
                w = p;
            }
            path.reverse();
            return path;
        }
        for &w in succ.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            if w != from && !prev.contains_key(&w) {
                prev.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    Vec::new()
}
