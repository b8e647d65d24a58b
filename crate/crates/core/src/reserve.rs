//! Per-vertex reserve color sets and the split of the big lists into
//! working lists and reserve lists.
//!
//! Each vertex independently reserves every color of its incident lists
//! with probability `p_res`. A plan is acceptable when, for every arc
//! e = uv, the reserved colors are sparse on e's list (a), yet the common
//! reserve on e is large enough to finish from (b), and no color is
//! reserved too often across a neighborhood (c)/(d). Rejection sampling
//! stands in for the existence argument: draw, verify, redraw.

use crate::coloring::{Color, ListAssignment};
use crate::digraph::{ArcId, Digraph, Vertex};
use crate::params::LogBase;
use crate::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ReserveError {
    #[error("no valid reserve plan within {0} draws")]
    RetriesExhausted(u32),
    #[error("p_res must lie in [0, 1), got {0}")]
    BadProbability(f64),
}

/// Thresholds for the four plan conditions. Paper thresholds are absolute
/// functions of Delta; the desk profile scales with the actual list sizes
/// so the conditions stay meaningful at small Delta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReserveBounds {
    Paper { log_base: LogBase },
    Desk { a_frac: f64, b_frac: f64, c_frac: f64 },
}

impl ReserveBounds {
    pub fn desk_default() -> Self {
        ReserveBounds::Desk { a_frac: 0.5, b_frac: 0.1, c_frac: 0.5 }
    }

    /// Max allowed |L(e) ∩ (Reserve(u) ∪ Reserve(v))|.
    pub fn union_limit(&self, list_len: usize, delta: f64) -> f64 {
        match self {
            ReserveBounds::Paper { log_base } => {
                let lg = log_base.log_f64(delta);
                3.0 * delta.sqrt() * lg.powi(4)
            }
            ReserveBounds::Desk { a_frac, .. } => a_frac * list_len as f64,
        }
    }

    /// Min required |L(e) ∩ Reserve(u) ∩ Reserve(v)|.
    pub fn intersection_limit(&self, list_len: usize, delta: f64) -> f64 {
        match self {
            ReserveBounds::Paper { log_base } => {
                let lg = log_base.log_f64(delta);
                lg.powi(8) / 2.0
            }
            ReserveBounds::Desk { b_frac, .. } => b_frac * list_len as f64,
        }
    }

    /// Max allowed reserved-color incidence over a neighborhood.
    pub fn incidence_limit(&self, delta: f64) -> f64 {
        match self {
            ReserveBounds::Paper { log_base } => {
                let lg = log_base.log_f64(delta);
                2.0 * delta.sqrt() * lg.powi(4)
            }
            ReserveBounds::Desk { c_frac, .. } => c_frac * delta,
        }
    }
}

/// Which colors the incidence conditions (c)/(d) quantify over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncidenceColors {
    /// Only colors actually reserved at the anchor vertex, as written.
    Reserved,
    /// Every color of the incident lists.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservePlan {
    /// Sorted reserved colors per vertex.
    pub reserve_of: Vec<Vec<Color>>,
    pub bounds: ReserveBounds,
    pub p_res: f64,
    pub seed: u64,
    /// Which draw of `retry_until_valid` produced this plan (0 for a
    /// direct draw).
    pub attempt: u32,
}

impl ReservePlan {
    pub fn reserved(&self, v: Vertex, c: Color) -> bool {
        self.reserve_of[v as usize].binary_search(&c).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReserveViolation {
    UnionTooLarge { arc: ArcId, size: usize, limit: usize },
    IntersectionTooSmall { arc: ArcId, size: usize, limit: usize },
    OutIncidence { u: Vertex, color: Color, count: usize, limit: usize },
    InIncidence { v: Vertex, color: Color, count: usize, limit: usize },
}

#[derive(Debug, Clone, Default)]
pub struct ReserveReport {
    pub violations: Vec<ReserveViolation>,
}

impl ReserveReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Union of the lists of arcs incident to `v`, sorted.
pub fn vertex_palette(d: &Digraph, lists: &ListAssignment, v: Vertex) -> Vec<Color> {
    let mut set = BTreeSet::new();
    for &a in d.out_arcs(v).iter().chain(d.in_arcs(v)) {
        set.extend(lists.get(a).iter().copied());
    }
    set.into_iter().collect()
}

/// Independently reserve each color of each vertex palette with
/// probability `p_res`.
pub fn draw_reserve(
    d: &Digraph,
    lbig: &ListAssignment,
    p_res: f64,
    bounds: ReserveBounds,
    seed: u64,
) -> Result<ReservePlan, ReserveError> {
    if !(0.0..1.0).contains(&p_res) {
        return Err(ReserveError::BadProbability(p_res));
    }
    let mut rng = rng::stream(seed, "reserve-draw");
    Ok(draw_reserve_with(d, lbig, p_res, bounds, seed, 0, &mut rng))
}

fn draw_reserve_with(
    d: &Digraph,
    lbig: &ListAssignment,
    p_res: f64,
    bounds: ReserveBounds,
    seed: u64,
    attempt: u32,
    rng: &mut impl Rng,
) -> ReservePlan {
    let mut reserve_of = Vec::with_capacity(d.n() as usize);
    for v in d.vertices() {
        let palette = vertex_palette(d, lbig, v);
        let picked = palette
            .into_iter()
            .filter(|_| rng.random::<f64>() < p_res)
            .collect();
        reserve_of.push(picked);
    }
    ReservePlan { reserve_of, bounds, p_res, seed, attempt }
}

/// Check all four plan conditions; every failure is reported.
pub fn verify_reserve(
    d: &Digraph,
    lbig: &ListAssignment,
    plan: &ReservePlan,
    mode: IncidenceColors,
) -> ReserveReport {
    let delta = d.max_degree() as f64;
    let mut violations = Vec::new();
    for (a, &(u, v)) in d.arcs().iter().enumerate() {
        let list = lbig.get(a);
        let mut union = 0usize;
        let mut inter = 0usize;
        for &c in list {
            let ru = plan.reserved(u, c);
            let rv = plan.reserved(v, c);
            if ru || rv {
                union += 1;
            }
            if ru && rv {
                inter += 1;
            }
        }
        let a_lim = plan.bounds.union_limit(list.len(), delta).floor() as usize;
        let b_lim = plan.bounds.intersection_limit(list.len(), delta).ceil() as usize;
        if union > a_lim {
            violations.push(ReserveViolation::UnionTooLarge { arc: a, size: union, limit: a_lim });
        }
        if inter < b_lim {
            violations.push(ReserveViolation::IntersectionTooSmall { arc: a, size: inter, limit: b_lim });
        }
    }
    let c_lim = plan.bounds.incidence_limit(delta).floor() as usize;
    for u in d.vertices() {
        let colors: Vec<Color> = match mode {
            IncidenceColors::Reserved => plan.reserve_of[u as usize].clone(),
            IncidenceColors::All => vertex_palette(d, lbig, u),
        };
        for c in colors {
            let out_count = d
                .out_arcs(u)
                .iter()
                .filter(|&&a| {
                    let w = d.arc(a).1;
                    plan.reserved(w, c) && lbig.contains(a, c)
                })
                .count();
            if out_count > c_lim {
                violations.push(ReserveViolation::OutIncidence { u, color: c, count: out_count, limit: c_lim });
            }
            let in_count = d
                .in_arcs(u)
                .iter()
                .filter(|&&a| {
                    let w = d.arc(a).0;
                    plan.reserved(w, c) && lbig.contains(a, c)
                })
                .count();
            if in_count > c_lim {
                violations.push(ReserveViolation::InIncidence { v: u, color: c, count: in_count, limit: c_lim });
            }
        }
    }
    ReserveReport { violations }
}

/// Draw and verify until a plan passes, up to `max_tries` draws.
pub fn retry_until_valid(
    d: &Digraph,
    lbig: &ListAssignment,
    p_res: f64,
    bounds: ReserveBounds,
    seed: u64,
    max_tries: u32,
    mode: IncidenceColors,
) -> Result<ReservePlan, ReserveError> {
    if !(0.0..1.0).contains(&p_res) {
        return Err(ReserveError::BadProbability(p_res));
    }
    for attempt in 0..max_tries {
        let mut rng = rng::stream(seed, &format!("reserve-draw-{attempt}"));
        let plan = draw_reserve_with(d, lbig, p_res, bounds, seed, attempt, &mut rng);
        if verify_reserve(d, lbig, &plan, mode).valid() {
            return Ok(plan);
        }
    }
    Err(ReserveError::RetriesExhausted(max_tries))
}

/// Split the big lists: the working list drops every color reserved at
/// either endpoint, the reserve list keeps exactly the colors reserved at
/// both.
pub fn split_lists(
    d: &Digraph,
    lbig: &ListAssignment,
    plan: &ReservePlan,
) -> (ListAssignment, ListAssignment) {
    let mut working = ListAssignment::empty(d);
    let mut reserve = ListAssignment::empty(d);
    for (a, &(u, v)) in d.arcs().iter().enumerate() {
        let mut w = Vec::new();
        let mut r = Vec::new();
        for &c in lbig.get(a) {
            let ru = plan.reserved(u, c);
            let rv = plan.reserved(v, c);
            if !ru && !rv {
                w.push(c);
            } else if ru && rv {
                r.push(c);
            }
        }
        working.set(a, w);
        reserve.set(a, r);
    }
    (working, reserve)
}
