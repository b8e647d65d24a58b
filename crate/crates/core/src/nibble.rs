//! The iterative random coloring procedure.
//!
//! One iteration runs five simultaneous rounds over the uncolored arcs:
//!
//! I.   Activate each uncolored arc with probability p.
//! II.  Assign each activated arc a uniform color from its list.
//! III. Uncolor assignments that conflict in a color neighborhood; survivors
//!      are uncolored anyway with probability Eq(e,c), equalizing every
//!      retention probability.
//! IV.  Where a color was retained, delete it from the other lists of that
//!      neighborhood; where it was not, delete it from all of them with
//!      probability Vq(v,c), equalizing list-survival probabilities.
//! V.   Delete color c from an uncolored arc uv (and uncolor uv if it was
//!      assigned c) whenever a watched path from v to u went monochromatic
//!      under the raw step-II assignment.
//!
//! Steps I-IV read only the iteration-start snapshot, so the rounds commute
//! with the data structures used here. Step V is evaluated against the
//! post-step-II assignment exactly, via per-color reachability over the
//! subgraph of arcs colored c plus arcs just assigned c: a watched path
//! went monochromatic iff such a path exists with between 1 and ell-1
//! assigned arcs, or a suffix ending at the arc's tail spends exactly ell.
//!
//! Profiles: `Paper` takes every probability from the parameter trajectory
//! and refuses to run when a formula leaves [0,1]; `Desk` recomputes the
//! trajectory quantities from the realized state each round (minimum list
//! size, maximum neighborhood) which keeps every coin well-formed at small
//! scale, and clamps with an event counter if floating point still strays.

use crate::coloring::{
    self, Color, Direction, ListAssignment, MonoPathIndex, PartialColoring,
};
use crate::digraph::{ArcId, Digraph, Vertex};
use crate::params::{LogBase, ParameterTrajectory};
use crate::rng;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NibbleError {
    #[error("coin probability {value} for {what} lies outside [0,1]; outside the asymptotic regime")]
    CoinOutOfRange { what: &'static str, value: f64 },
    #[error("trajectory exhausted at iteration {0} before the stop rule was met")]
    TrajectoryExhausted(usize),
    #[error("list of arc {arc} has {have} colors, below the required {need}")]
    ListTooSmall { arc: ArcId, have: usize, need: usize },
    #[error("claim invariant {what} failed at iteration {iteration}: {detail}")]
    ClaimViolation { what: &'static str, iteration: usize, detail: String },
    #[error("iteration validators failed {0} times in a row; retry budget exhausted")]
    RetriesExhausted(u32),
    #[error("step V overflow: {0}")]
    Suspicious(#[from] crate::suspicious::SuspiciousError),
    #[error("paper profile requires a parameter trajectory")]
    MissingTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    Paper,
    Desk,
}

#[derive(Debug, Clone)]
pub struct NibbleConfig {
    pub profile: Profile,
    pub p: f64,
    pub log_base: LogBase,
    /// Override for the watched-path horizon; default ceil(2 log Delta),
    /// at least 2.
    pub ell_int: Option<usize>,
    /// Run the four state validators after every iteration.
    pub validate_each_iteration: bool,
    /// Desk profile: re-draw an iteration whose validators fail.
    pub retry_budget: u32,
    pub max_iterations: usize,
    /// Cap for exact suspicious-path confirmation in step V.
    pub path_cap: usize,
}

impl Default for NibbleConfig {
    fn default() -> Self {
        NibbleConfig {
            profile: Profile::Desk,
            p: 0.25,
            log_base: LogBase::Natural,
            ell_int: None,
            validate_each_iteration: true,
            retry_budget: 10,
            max_iterations: 300,
            path_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop when the trajectory index i0 is reached.
    ReachI0,
    /// Stop once the uncolored fraction drops to the threshold.
    UncoloredFraction(f64),
    /// Stop once every uncolored arc's list is at most this size.
    ListSize(usize),
}

/// Why a run returned.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    ReachedI0,
    UncoloredFractionMet,
    ListSizeMet,
    NoUncoloredArcs,
    NoListedColors,
    MaxIterations,
}

/// Trajectory quantities in force for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationParams {
    pub l: f64,
    pub n: f64,
    pub retain: f64,
    pub keep: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct VertexColorCount {
    pub v: Vertex,
    pub color: Color,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArcColorCount {
    pub u: Vertex,
    pub v: Vertex,
    pub count: u32,
}

/// Everything observed in one iteration. The per-arc and per-vertex maps
/// hold only nonzero entries, sorted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub uncolored_before: usize,
    pub uncolored_after: usize,
    pub activations: usize,
    pub assignments: usize,
    pub conflict_uncolorings: usize,
    pub eq_uncolorings: usize,
    pub stepv_uncolorings: usize,
    pub retained: usize,
    pub removals_step_iv: usize,
    pub removals_step_v: usize,
    pub clamp_events: usize,
    /// Minimum list size over arcs still uncolored after the iteration.
    pub min_list_size: Option<usize>,
    pub max_color_out: usize,
    pub max_color_in: usize,
    pub max_reserve_out: usize,
    pub max_reserve_in: usize,
    /// |X(e)| per arc: colors step V removed.
    pub x_counts: Vec<ArcColorCount>,
    /// |Y+-(v,c)|: color-neighborhood arcs hit by step V.
    pub y_out: Vec<VertexColorCount>,
    pub y_in: Vec<VertexColorCount>,
    /// |Z+-(v,c)|: reserve-neighborhood arcs whose watched families fired.
    pub z_out: Vec<VertexColorCount>,
    pub z_in: Vec<VertexColorCount>,
}

/// State advanced by `iterate`: digraph, current lists, current coloring,
/// reserve sets (for the R statistics), iteration counter and the RNG.
#[derive(Debug, Clone)]
pub struct NibbleState {
    pub d: Arc<Digraph>,
    pub lists: ListAssignment,
    pub gamma: PartialColoring,
    pub reserve: Arc<Vec<Vec<Color>>>,
    pub iter: usize,
    pub cfg: NibbleConfig,
    pub traj: Option<Arc<ParameterTrajectory>>,
    pub ell_int: usize,
    rng: ChaCha12Rng,
    /// color -> arcs whose head (tail) has the color reserved.
    reserve_head_arcs: Arc<BTreeMap<Color, Vec<ArcId>>>,
    reserve_tail_arcs: Arc<BTreeMap<Color, Vec<ArcId>>>,
}

impl NibbleState {
    pub fn new(
        d: Arc<Digraph>,
        lists: ListAssignment,
        reserve: Vec<Vec<Color>>,
        traj: Option<Arc<ParameterTrajectory>>,
        cfg: NibbleConfig,
        seed: u64,
    ) -> Result<Self, NibbleError> {
        if cfg.profile == Profile::Paper && traj.is_none() {
            return Err(NibbleError::MissingTrajectory);
        }
        let delta = d.max_degree().max(2) as f64;
        let ell = match &traj {
            Some(t) => t.ell,
            None => 2.0 * cfg.log_base.log_f64(delta),
        };
        let ell_int = cfg.ell_int.unwrap_or_else(|| (ell.ceil() as usize).max(2));
        let mut head_map: BTreeMap<Color, Vec<ArcId>> = BTreeMap::new();
        let mut tail_map: BTreeMap<Color, Vec<ArcId>> = BTreeMap::new();
        for (a, &(u, v)) in d.arcs().iter().enumerate() {
            for &c in &reserve[v as usize] {
                head_map.entry(c).or_default().push(a);
            }
            for &c in &reserve[u as usize] {
                tail_map.entry(c).or_default().push(a);
            }
        }
        let gamma = PartialColoring::new(&d);
        Ok(NibbleState {
            rng: rng::stream(seed, "nibble"),
            d,
            lists,
            gamma,
            reserve: Arc::new(reserve),
            iter: 0,
            cfg,
            traj,
            ell_int,
            reserve_head_arcs: Arc::new(head_map),
            reserve_tail_arcs: Arc::new(tail_map),
        })
    }

    pub fn uncolored_arcs(&self) -> Vec<ArcId> {
        (0..self.d.num_arcs()).filter(|&a| !self.gamma.is_colored(a)).collect()
    }

    /// Quantities in force for the current iteration.
    pub fn iteration_params(&self) -> Result<IterationParams, NibbleError> {
        match self.cfg.profile {
            Profile::Paper => {
                let traj = self.traj.as_ref().ok_or(NibbleError::MissingTrajectory)?;
                if self.iter >= traj.rows.len() {
                    return Err(NibbleError::TrajectoryExhausted(self.iter));
                }
                let row = traj.row(self.iter);
                Ok(IterationParams { l: row.l, n: row.n, retain: row.retain, keep: row.keep })
            }
            Profile::Desk => Ok(self.desk_params()),
        }
    }

    /// Desk profile: take L as the smallest nonempty list, N as the largest
    /// color neighborhood, and push both through the trajectory formulas.
    /// With that choice Retain^2 lower-bounds every conflict-avoidance
    /// probability, so the coins stay in [0,1] by construction.
    fn desk_params(&self) -> IterationParams {
        let p = self.cfg.p;
        let mut l_min = usize::MAX;
        let mut counts: HashMap<(Vertex, Color, bool), u32> = HashMap::new();
        for a in 0..self.d.num_arcs() {
            if self.gamma.is_colored(a) {
                continue;
            }
            let list = self.lists.get(a);
            if list.is_empty() {
                continue;
            }
            l_min = l_min.min(list.len());
            let (u, v) = self.d.arc(a);
            for &c in list {
                *counts.entry((u, c, true)).or_insert(0) += 1;
                *counts.entry((v, c, false)).or_insert(0) += 1;
            }
        }
        if l_min == usize::MAX {
            return IterationParams { l: 1.0, n: 1.0, retain: 1.0, keep: 1.0 };
        }
        let n_max = counts.values().copied().max().unwrap_or(0) as f64;
        let l = l_min as f64;
        let retain = ((n_max - 1.0).max(0.0) * (-p / l).ln_1p()).exp();
        let keep = 1.0 - p * (n_max / l) * retain * retain;
        IterationParams { l, n: n_max, retain, keep }
    }

    /// P(e,c): the probability no arc of the color neighborhoods of e gets
    /// assigned c, conditional on e receiving c.
    pub fn retention_probability(&self, arc: ArcId, c: Color) -> Result<f64, NibbleError> {
        let params = self.iteration_params()?;
        Ok(self.retention_probability_with(&params, arc, c))
    }

    fn retention_probability_with(&self, params: &IterationParams, arc: ArcId, c: Color) -> f64 {
        let (u, v) = self.d.arc(arc);
        let p = self.cfg.p;
        match self.cfg.profile {
            Profile::Paper => {
                let n_out = coloring::color_neighbors(&self.d, &self.lists, &self.gamma, u, c, Direction::Out)
                    .iter()
                    .filter(|&&f| f != arc)
                    .count();
                let n_in = coloring::color_neighbors(&self.d, &self.lists, &self.gamma, v, c, Direction::In)
                    .iter()
                    .filter(|&&f| f != arc)
                    .count();
                (1.0 - p / params.l).powi((n_out + n_in) as i32)
            }
            Profile::Desk => {
                // Exact product over the actual list sizes; with uniform
                // lists this equals the closed form.
                let mut prob = 1.0;
                for &f in coloring::color_neighbors(&self.d, &self.lists, &self.gamma, u, c, Direction::Out)
                    .iter()
                    .chain(
                        coloring::color_neighbors(&self.d, &self.lists, &self.gamma, v, c, Direction::In)
                            .iter(),
                    )
                {
                    if f != arc {
                        prob *= 1.0 - p / self.lists.len(f) as f64;
                    }
                }
                prob
            }
        }
    }

    /// Eq(e,c) = 1 - Retain^2 / P(e,c).
    pub fn eq_coin(&self, arc: ArcId, c: Color) -> Result<f64, NibbleError> {
        let params = self.iteration_params()?;
        let mut clamps = 0;
        self.eq_coin_with(&params, arc, c, &mut clamps)
    }

    fn eq_coin_with(
        &self,
        params: &IterationParams,
        arc: ArcId,
        c: Color,
        clamps: &mut usize,
    ) -> Result<f64, NibbleError> {
        let p_ec = self.retention_probability_with(params, arc, c);
        let raw = 1.0 - params.retain * params.retain / p_ec;
        self.admit("Eq", raw, clamps)
    }

    /// Vq(v,c) = 1 - Keep / (1 - (p/L) |N(v,c)| Retain^2).
    pub fn vq_coin(&self, v: Vertex, c: Color, dir: Direction) -> Result<f64, NibbleError> {
        let params = self.iteration_params()?;
        let size = coloring::color_neighbors(&self.d, &self.lists, &self.gamma, v, c, dir).len();
        let mut clamps = 0;
        self.vq_coin_with(&params, size, &mut clamps)
    }

    fn vq_coin_with(
        &self,
        params: &IterationParams,
        neighborhood: usize,
        clamps: &mut usize,
    ) -> Result<f64, NibbleError> {
        let denom =
            1.0 - (self.cfg.p / params.l) * neighborhood as f64 * params.retain * params.retain;
        let raw = 1.0 - params.keep / denom;
        self.admit("Vq", raw, clamps)
    }

    fn admit(&self, what: &'static str, raw: f64, clamps: &mut usize) -> Result<f64, NibbleError> {
        if (0.0..=1.0).contains(&raw) {
            return Ok(raw);
        }
        match self.cfg.profile {
            Profile::Paper => Err(NibbleError::CoinOutOfRange { what, value: raw }),
            Profile::Desk => {
                *clamps += 1;
                Ok(raw.clamp(0.0, 1.0))
            }
        }
    }

    /// One full iteration. Mutates the state and reports the statistics.
    pub fn iterate(&mut self) -> Result<IterationStats, NibbleError> {
        let params = self.iteration_params()?;
        let mut stats = IterationStats { iteration: self.iter, ..Default::default() };
        let uncolored = self.uncolored_arcs();
        stats.uncolored_before = uncolored.len();
        if uncolored.is_empty() {
            stats.min_list_size = None;
            self.iter += 1;
            return Ok(stats);
        }

        // Iteration-start snapshot indices.
        let mut by_color: BTreeMap<Color, Vec<ArcId>> = BTreeMap::new();
        for &a in &uncolored {
            for &c in self.lists.get(a) {
                by_color.entry(c).or_default().push(a);
            }
        }

        let draw = self.draw_round(&params, &uncolored, &mut stats)?;

        // Step IV: list updates per (vertex, color, direction).
        let mut removals: BTreeSet<(ArcId, Color)> = BTreeSet::new();
        for (&c, arcs) in &by_color {
            let mut members_out: BTreeMap<Vertex, Vec<ArcId>> = BTreeMap::new();
            let mut members_in: BTreeMap<Vertex, Vec<ArcId>> = BTreeMap::new();
            for &a in arcs {
                let (u, v) = self.d.arc(a);
                members_out.entry(u).or_default().push(a);
                members_in.entry(v).or_default().push(a);
            }
            for (members, _dir) in [(&members_out, Direction::Out), (&members_in, Direction::In)] {
                for (_v, group) in members.iter() {
                    let retained_here: Vec<ArcId> = group
                        .iter()
                        .copied()
                        .filter(|&a| draw.retained[a] && draw.sigma[a] == Some(c))
                        .collect();
                    debug_assert!(retained_here.len() <= 1, "two conflicting retentions survived");
                    if let Some(&r) = retained_here.first() {
                        for &a in group {
                            if a != r && removals.insert((a, c)) {
                                stats.removals_step_iv += 1;
                            }
                        }
                    } else {
                        let vq = self.vq_coin_with(&params, group.len(), &mut stats.clamp_events)?;
                        if self.rng.random::<f64>() < vq {
                            for &a in group {
                                if removals.insert((a, c)) {
                                    stats.removals_step_iv += 1;
                                }
                            }
                        }
                    }
                }
            }
        }

        // Step V against the post-step-II snapshot.
        let mut retained = draw.retained;
        let stepv = self.step_v(&by_color, &draw.sigma, &mut stats)?;
        for &(a, c) in &stepv {
            if removals.insert((a, c)) {
                stats.removals_step_v += 1;
            }
            if draw.sigma[a] == Some(c) && retained[a] {
                retained[a] = false;
                stats.stepv_uncolorings += 1;
            }
        }

        // Commit: color retained arcs, apply list removals, clear lists of
        // freshly colored arcs.
        let d = self.d.clone();
        for &a in &uncolored {
            if retained[a] {
                self.gamma.assign(&d, a, draw.sigma[a].expect("retained arcs were assigned"));
                stats.retained += 1;
            }
        }
        for &(a, c) in &removals {
            self.lists.remove_color(a, c);
        }
        for &a in &uncolored {
            if retained[a] {
                self.lists.clear(a);
            }
        }

        self.finish_stats(&mut stats);
        self.iter += 1;
        Ok(stats)
    }

    /// Steps I-III: activation coins, uniform assignments, conflict
    /// resolution and the equalizing coin. Pure with respect to the state;
    /// only the RNG advances.
    fn draw_round(
        &mut self,
        params: &IterationParams,
        uncolored: &[ArcId],
        stats: &mut IterationStats,
    ) -> Result<RoundDraw, NibbleError> {
        let m = self.d.num_arcs();
        let mut activated = vec![false; m];
        let mut sigma: Vec<Option<Color>> = vec![None; m];
        for &a in uncolored {
            if self.rng.random::<f64>() < self.cfg.p {
                activated[a] = true;
                stats.activations += 1;
            }
        }
        for &a in uncolored {
            if activated[a] {
                let list = self.lists.get(a);
                if !list.is_empty() {
                    sigma[a] = Some(list[self.rng.random_range(0..list.len())]);
                    stats.assignments += 1;
                }
            }
        }
        let mut sc_out: HashMap<(Vertex, Color), u32> = HashMap::new();
        let mut sc_in: HashMap<(Vertex, Color), u32> = HashMap::new();
        for &a in uncolored {
            if let Some(c) = sigma[a] {
                let (u, v) = self.d.arc(a);
                *sc_out.entry((u, c)).or_insert(0) += 1;
                *sc_in.entry((v, c)).or_insert(0) += 1;
            }
        }
        let mut retained = vec![false; m];
        for &a in uncolored {
            if let Some(c) = sigma[a] {
                let (u, v) = self.d.arc(a);
                let others = sc_out[&(u, c)] - 1 + sc_in[&(v, c)] - 1;
                if others > 0 {
                    stats.conflict_uncolorings += 1;
                } else {
                    let eq = self.eq_coin_with(params, a, c, &mut stats.clamp_events)?;
                    if self.rng.random::<f64>() < eq {
                        stats.eq_uncolorings += 1;
                    } else {
                        retained[a] = true;
                    }
                }
            }
        }
        Ok(RoundDraw { activated, sigma, retained })
    }

    /// Step V: for every uncolored arc and listed color, decide whether a
    /// watched path became monochromatic after step II, and collect the
    /// X/Y/Z statistics.
    fn step_v(
        &mut self,
        by_color: &BTreeMap<Color, Vec<ArcId>>,
        sigma: &[Option<Color>],
        stats: &mut IterationStats,
    ) -> Result<Vec<(ArcId, Color)>, NibbleError> {
        let mut assigned_by_color: BTreeMap<Color, Vec<ArcId>> = BTreeMap::new();
        for (a, s) in sigma.iter().enumerate() {
            if let Some(c) = s {
                assigned_by_color.entry(*c).or_default().push(a);
            }
        }
        let mut fires = Vec::new();
        let mut y_out: BTreeMap<(Vertex, Color), u32> = BTreeMap::new();
        let mut y_in: BTreeMap<(Vertex, Color), u32> = BTreeMap::new();
        let mut z_out: BTreeMap<(Vertex, Color), u32> = BTreeMap::new();
        let mut z_in: BTreeMap<(Vertex, Color), u32> = BTreeMap::new();
        let mut x_counts: BTreeMap<ArcId, u32> = BTreeMap::new();

        for (&c, newly) in &assigned_by_color {
            let reach = ColorReach::build(&self.d, &self.gamma, newly, c, self.ell_int);
            let tail_fires = reach.tail_fire_vertices(&self.d, &self.gamma, sigma, self.cfg.path_cap, c)?;

            if let Some(listed) = by_color.get(&c) {
                for &a in listed {
                    let (t, h) = self.d.arc(a);
                    if tail_fires.contains(&t) || reach.from_to(h, t) {
                        fires.push((a, c));
                        *x_counts.entry(a).or_insert(0) += 1;
                        *y_out.entry((t, c)).or_insert(0) += 1;
                        *y_in.entry((h, c)).or_insert(0) += 1;
                    }
                }
            }
            // Z statistics: reserve-neighborhood arcs whose watched family
            // for the reserved color fired.
            if let Some(arcs) = self.reserve_head_arcs.get(&c) {
                for &a in arcs {
                    if self.gamma.is_colored(a) {
                        continue;
                    }
                    let (v, w) = self.d.arc(a);
                    if tail_fires.contains(&v) || reach.from_to(w, v) {
                        *z_out.entry((v, c)).or_insert(0) += 1;
                    }
                }
            }
            if let Some(arcs) = self.reserve_tail_arcs.get(&c) {
                for &a in arcs {
                    if self.gamma.is_colored(a) {
                        continue;
                    }
                    let (w, v) = self.d.arc(a);
                    if tail_fires.contains(&w) || reach.from_to(v, w) {
                        *z_in.entry((v, c)).or_insert(0) += 1;
                    }
                }
            }
        }
        stats.x_counts = x_counts
            .into_iter()
            .map(|(a, count)| {
                let (u, v) = self.d.arc(a);
                ArcColorCount { u, v, count }
            })
            .collect();
        let flat = |m: BTreeMap<(Vertex, Color), u32>| {
            m.into_iter()
                .map(|((v, color), count)| VertexColorCount { v, color, count })
                .collect()
        };
        stats.y_out = flat(y_out);
        stats.y_in = flat(y_in);
        stats.z_out = flat(z_out);
        stats.z_in = flat(z_in);
        Ok(fires)
    }

    /// Post-iteration size scan: realized min list size and max
    /// neighborhood sizes.
    fn finish_stats(&self, stats: &mut IterationStats) {
        let mut min_list: Option<usize> = None;
        let mut cnt: HashMap<(Vertex, Color, bool), u32> = HashMap::new();
        let mut res_cnt: HashMap<(Vertex, Color, bool), u32> = HashMap::new();
        let mut uncolored_after = 0usize;
        for a in 0..self.d.num_arcs() {
            if self.gamma.is_colored(a) {
                continue;
            }
            uncolored_after += 1;
            let len = self.lists.len(a);
            min_list = Some(min_list.map_or(len, |m| m.min(len)));
            let (u, v) = self.d.arc(a);
            for &c in self.lists.get(a) {
                *cnt.entry((u, c, true)).or_insert(0) += 1;
                *cnt.entry((v, c, false)).or_insert(0) += 1;
            }
            for &c in &self.reserve[v as usize] {
                *res_cnt.entry((u, c, true)).or_insert(0) += 1;
            }
            for &c in &self.reserve[u as usize] {
                *res_cnt.entry((v, c, false)).or_insert(0) += 1;
            }
        }
        stats.uncolored_after = uncolored_after;
        stats.min_list_size = min_list;
        stats.max_color_out =
            cnt.iter().filter(|((_, _, out), _)| *out).map(|(_, &n)| n).max().unwrap_or(0) as usize;
        stats.max_color_in =
            cnt.iter().filter(|((_, _, out), _)| !*out).map(|(_, &n)| n).max().unwrap_or(0) as usize;
        stats.max_reserve_out =
            res_cnt.iter().filter(|((_, _, out), _)| *out).map(|(_, &n)| n).max().unwrap_or(0) as usize;
        stats.max_reserve_in =
            res_cnt.iter().filter(|((_, _, out), _)| !*out).map(|(_, &n)| n).max().unwrap_or(0) as usize;
    }

    /// The four state invariants: the coloring is (1,1) and acyclic, the
    /// lists are compatible with it, and no listed color has a
    /// monochromatic return path.
    pub fn validate(&self) -> Result<(), String> {
        let report = coloring::validate_coloring(&self.d, &self.gamma, 1, 1, true, None);
        if !report.valid() {
            return Err(format!("coloring invalid: {:?}", report.violations[0]));
        }
        let compat = coloring::is_compatible(&self.d, &self.lists, &self.gamma);
        if !compat.valid() {
            return Err(format!("lists incompatible: {:?}", compat.violations[0]));
        }
        let index = MonoPathIndex::build(&self.d, &self.gamma);
        for a in 0..self.d.num_arcs() {
            if self.gamma.is_colored(a) {
                continue;
            }
            let (u, v) = self.d.arc(a);
            for &c in self.lists.get(a) {
                if index.has_path(&self.d, &self.gamma, v, u, c) {
                    return Err(format!("monochromatic return path for arc {a} color {c}"));
                }
            }
        }
        Ok(())
    }
}

struct RoundDraw {
    #[allow(dead_code)]
    activated: Vec<bool>,
    sigma: Vec<Option<Color>>,
    retained: Vec<bool>,
}

/// Per-color reachability over S_c = (arcs colored c) + (arcs assigned c in
/// step II). Colored-c arcs form disjoint paths (the coloring is (1,1) and
/// acyclic), so reachability is: walk the unique colored chain, hop on a
/// newly assigned arc, repeat.
struct ColorReach {
    /// For every vertex that can start a monochromatic-after-II path with
    /// at least one assigned arc: the vertices it can reach that way using
    /// at most ell-1 assigned arcs.
    from_to_map: HashMap<Vertex, HashSet<Vertex>>,
    /// Newly assigned arcs and the colored-chain links between them, kept
    /// for the exact tail check.
    new_arcs: Vec<(Vertex, Vertex)>,
    links: Vec<Vec<usize>>,
    chain_fwd: Vec<Vec<Vertex>>,
    ell: usize,
}

impl ColorReach {
    fn build(
        d: &Digraph,
        gamma: &PartialColoring,
        newly_assigned: &[ArcId],
        c: Color,
        ell: usize,
    ) -> ColorReach {
        let mut succ: HashMap<Vertex, Vertex> = HashMap::new();
        let mut pred: HashMap<Vertex, Vertex> = HashMap::new();
        for a in gamma.class(c) {
            let (u, v) = d.arc(a);
            succ.insert(u, v);
            pred.insert(v, u);
        }
        let n = d.n() as usize;
        let walk = |start: Vertex, map: &HashMap<Vertex, Vertex>| -> Vec<Vertex> {
            let mut out = vec![start];
            let mut w = start;
            while let Some(&next) = map.get(&w) {
                out.push(next);
                w = next;
                if out.len() > n {
                    break; // degenerate state; stop defensively
                }
            }
            out
        };
        let new_arcs: Vec<(Vertex, Vertex)> = newly_assigned.iter().map(|&a| d.arc(a)).collect();
        let k = new_arcs.len();
        // chain_back[i]: vertices with a colored path into tail(i).
        // chain_fwd[i]: vertices reachable from head(i) along colored arcs.
        let chain_back: Vec<Vec<Vertex>> = new_arcs.iter().map(|&(t, _)| walk(t, &pred)).collect();
        let chain_fwd: Vec<Vec<Vertex>> = new_arcs.iter().map(|&(_, h)| walk(h, &succ)).collect();
        let mut tails_at: HashMap<Vertex, Vec<usize>> = HashMap::new();
        for (i, &(t, _)) in new_arcs.iter().enumerate() {
            tails_at.entry(t).or_default().push(i);
        }
        let links: Vec<Vec<usize>> = (0..k)
            .map(|i| {
                let mut out = Vec::new();
                for &v in &chain_fwd[i] {
                    if let Some(js) = tails_at.get(&v) {
                        out.extend(js.iter().copied());
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect();
        // Forward reach per starting arc with at most ell-1 assigned arcs.
        let mut from_to_map: HashMap<Vertex, HashSet<Vertex>> = HashMap::new();
        for i in 0..k {
            let mut seen = vec![false; k];
            let mut frontier = vec![i];
            seen[i] = true;
            let mut reach: HashSet<Vertex> = HashSet::new();
            reach.extend(chain_fwd[i].iter().copied());
            // arc i already spends one of the ell-1 allowed assigned arcs
            for _hop in 1..ell.saturating_sub(1) {
                let mut next = Vec::new();
                for &j in &frontier {
                    for &j2 in &links[j] {
                        if !seen[j2] {
                            seen[j2] = true;
                            reach.extend(chain_fwd[j2].iter().copied());
                            next.push(j2);
                        }
                    }
                }
                if next.is_empty() {
                    break;
                }
                frontier = next;
            }
            for &v in &chain_back[i] {
                from_to_map.entry(v).or_default().extend(reach.iter().copied());
            }
        }
        ColorReach { from_to_map, new_arcs, links, chain_fwd, ell }
    }

    /// Is there a path from `from` to `to` in S_c using 1..=ell-1 assigned
    /// arcs? (Walk-level reachability; equal to simple-path reachability
    /// whenever no fully colored from->to path exists, which the state
    /// invariants guarantee for watched pairs.)
    fn from_to(&self, from: Vertex, to: Vertex) -> bool {
        self.from_to_map.get(&from).is_some_and(|set| set.contains(&to))
    }

    /// Vertices `u` with a suspicious path ending at u, first arc assigned,
    /// exactly `ell` assigned arcs, all of them monochromatic after step
    /// II. A cheap chain-DP over-approximates; candidates are confirmed by
    /// exact simple-path search.
    fn tail_fire_vertices(
        &self,
        d: &Digraph,
        gamma: &PartialColoring,
        sigma: &[Option<Color>],
        cap: usize,
        c: Color,
    ) -> Result<BTreeSet<Vertex>, crate::suspicious::SuspiciousError> {
        let k = self.new_arcs.len();
        let ell = self.ell;
        if k < ell {
            return Ok(BTreeSet::new());
        }
        // can_end[j] at round r: a walk of r assigned arcs ends with arc j.
        let mut can_end = vec![true; k];
        for _ in 1..ell {
            let mut next = vec![false; k];
            for j in 0..k {
                if can_end[j] {
                    for &j2 in &self.links[j] {
                        next[j2] = true;
                    }
                }
            }
            can_end = next;
            if can_end.iter().all(|&b| !b) {
                return Ok(BTreeSet::new());
            }
        }
        let mut candidates: BTreeSet<Vertex> = BTreeSet::new();
        for j in 0..k {
            if can_end[j] {
                candidates.extend(self.chain_fwd[j].iter().copied());
            }
        }
        // Confirm each candidate with an exact simple-path enumeration over
        // S_c, which rules out walks that revisit vertices.
        let mut confirmed = BTreeSet::new();
        for &u in &candidates {
            if self.tail_exact(d, gamma, sigma, u, c, cap)? {
                confirmed.insert(u);
            }
        }
        Ok(confirmed)
    }

    fn tail_exact(
        &self,
        d: &Digraph,
        gamma: &PartialColoring,
        sigma: &[Option<Color>],
        u: Vertex,
        c: Color,
        cap: usize,
    ) -> Result<bool, crate::suspicious::SuspiciousError> {
        // Backward DFS from u over S_c counting assigned arcs; accept on
        // exactly ell with the front arc assigned.
        let ell = self.ell;
        let mut on_path = vec![false; d.n() as usize];
        on_path[u as usize] = true;
        let mut visits = 0usize;
        fn go(
            d: &Digraph,
            gamma: &PartialColoring,
            sigma: &[Option<Color>],
            c: Color,
            front: Vertex,
            budget: usize,
            on_path: &mut Vec<bool>,
            visits: &mut usize,
            cap: usize,
        ) -> Result<bool, crate::suspicious::SuspiciousError> {
            *visits += 1;
            if *visits > cap {
                return Err(crate::suspicious::SuspiciousError::Overflow { cap });
            }
            for &a in d.in_arcs(front) {
                let (x, _) = d.arc(a);
                if on_path[x as usize] {
                    continue;
                }
                let assigned = match gamma.color(a) {
                    Some(col) if col == c => false,
                    Some(_) => continue,
                    None => {
                        if sigma[a] == Some(c) {
                            true
                        } else {
                            continue;
                        }
                    }
                };
                let cost = usize::from(assigned);
                if cost > budget {
                    continue;
                }
                let left = budget - cost;
                if left == 0 && assigned {
                    return Ok(true);
                }
                on_path[x as usize] = true;
                let hit = go(d, gamma, sigma, c, x, left, on_path, visits, cap)?;
                on_path[x as usize] = false;
                if hit {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        go(d, gamma, sigma, c, u, ell, &mut on_path, &mut visits, cap)
    }
}

/// How a finished run looks.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: NibbleState,
    pub stats: Vec<IterationStats>,
    pub stop: StopReason,
    pub desk_retries: u32,
}

fn stop_now(state: &NibbleState, stop: &StopRule, total_arcs: usize) -> Option<StopReason> {
    let uncolored = state.uncolored_arcs();
    if uncolored.is_empty() {
        return Some(StopReason::NoUncoloredArcs);
    }
    match stop {
        StopRule::ReachI0 => {
            let i0 = state.traj.as_ref().map(|t| t.i0).unwrap_or(usize::MAX);
            (state.iter >= i0).then_some(StopReason::ReachedI0)
        }
        StopRule::UncoloredFraction(theta) => {
            let frac = uncolored.len() as f64 / total_arcs.max(1) as f64;
            (frac <= *theta).then_some(StopReason::UncoloredFractionMet)
        }
        StopRule::ListSize(sigma) => uncolored
            .iter()
            .all(|&a| state.lists.len(a) <= *sigma)
            .then_some(StopReason::ListSizeMet),
    }
}

/// Drive the procedure from an empty coloring until the stop rule is met.
///
/// Paper profile: after each iteration every uncolored list is truncated to
/// exactly floor(L_{i+1}) colors (largest tokens first) and the claimed
/// size conditions are asserted. Desk profile: realized sizes are recorded
/// as they come; if a validator fails the iteration is re-drawn with fresh
/// randomness, up to the retry budget.
pub fn run(
    d: Arc<Digraph>,
    l0: ListAssignment,
    reserve: Vec<Vec<Color>>,
    traj: Option<Arc<ParameterTrajectory>>,
    cfg: NibbleConfig,
    seed: u64,
    stop: StopRule,
) -> Result<RunOutcome, NibbleError> {
    let mut state = NibbleState::new(d, l0, reserve, traj, cfg, seed)?;
    let total_arcs = state.d.num_arcs();

    if state.cfg.profile == Profile::Paper {
        let traj = state.traj.as_ref().ok_or(NibbleError::MissingTrajectory)?;
        let target = traj.row(0).l.floor() as usize;
        for a in 0..state.d.num_arcs() {
            let have = state.lists.len(a);
            if have < target {
                return Err(NibbleError::ListTooSmall { arc: a, have, need: target });
            }
            state.lists.truncate_to(a, target);
        }
    }

    let mut stats = Vec::new();
    let mut desk_retries = 0u32;
    loop {
        if let Some(reason) = stop_now(&state, &stop, total_arcs) {
            return Ok(RunOutcome { state, stats, stop: reason, desk_retries });
        }
        if state.stats_len_guard(&stats) {
            return Ok(RunOutcome { state, stats, stop: StopReason::MaxIterations, desk_retries });
        }
        if state.cfg.profile == Profile::Desk
            && state.uncolored_arcs().iter().all(|&a| state.lists.len(a) == 0)
        {
            return Ok(RunOutcome { state, stats, stop: StopReason::NoListedColors, desk_retries });
        }

        match state.cfg.profile {
            Profile::Paper => {
                let st = state.iterate()?;
                paper_post_iteration(&mut state, &st)?;
                if state.cfg.validate_each_iteration {
                    if let Err(detail) = state.validate() {
                        return Err(NibbleError::ClaimViolation {
                            what: "state validators",
                            iteration: state.iter - 1,
                            detail,
                        });
                    }
                }
                stats.push(st);
            }
            Profile::Desk => {
                let mut attempt = 0u32;
                loop {
                    let snapshot = (state.lists.clone(), state.gamma.clone(), state.iter);
                    let st = state.iterate()?;
                    let ok = !state.cfg.validate_each_iteration || state.validate().is_ok();
                    if ok {
                        stats.push(st);
                        break;
                    }
                    attempt += 1;
                    desk_retries += 1;
                    if attempt > state.cfg.retry_budget {
                        return Err(NibbleError::RetriesExhausted(attempt));
                    }
                    state.lists = snapshot.0;
                    state.gamma = snapshot.1;
                    state.iter = snapshot.2;
                }
            }
        }
    }
}

impl NibbleState {
    fn stats_len_guard(&self, stats: &[IterationStats]) -> bool {
        stats.len() >= self.cfg.max_iterations
    }
}

/// Paper profile bookkeeping after an iteration: truncate every uncolored
/// list to exactly floor(L_{i+1}) and assert the size conditions.
fn paper_post_iteration(state: &mut NibbleState, st: &IterationStats) -> Result<(), NibbleError> {
    let traj = state.traj.as_ref().ok_or(NibbleError::MissingTrajectory)?.clone();
    let i = state.iter; // already advanced: this is i+1
    if i >= traj.rows.len() {
        return Ok(());
    }
    let row = traj.row(i);
    let target = row.l.floor() as usize;
    let uncolored = state.uncolored_arcs();
    for &a in &uncolored {
        let have = state.lists.len(a);
        if have < target {
            return Err(NibbleError::ClaimViolation {
                what: "list size",
                iteration: i - 1,
                detail: format!("arc {a} kept {have} colors, need {target}"),
            });
        }
        state.lists.truncate_to(a, target);
    }
    let eps = 1e-9;
    if st.max_color_out as f64 > row.n + eps || st.max_color_in as f64 > row.n + eps {
        return Err(NibbleError::ClaimViolation {
            what: "color neighborhood",
            iteration: i - 1,
            detail: format!(
                "max |N'| = {} exceeds N_{} = {}",
                st.max_color_out.max(st.max_color_in),
                i,
                row.n
            ),
        });
    }
    if st.max_reserve_out as f64 > row.r + eps || st.max_reserve_in as f64 > row.r + eps {
        return Err(NibbleError::ClaimViolation {
            what: "reserve neighborhood",
            iteration: i - 1,
            detail: format!(
                "max |R'| = {} exceeds R_{} = {}",
                st.max_reserve_out.max(st.max_reserve_in),
                i,
                row.r
            ),
        });
    }
    Ok(())
}

/// Per-arc Monte Carlo over steps I-IV from a fixed state.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RetentionEstimate {
    pub trials: u32,
    pub per_arc: Vec<ArcRetention>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArcRetention {
    pub arc: ArcId,
    /// Trials in which the arc was activated and assigned some color.
    pub assigned: u32,
    /// Trials in which that assignment survived step III.
    pub retained: u32,
    /// Mean list size after step IV over all trials.
    pub mean_list_after: f64,
}

/// Re-execute steps I-III (plus step IV for the list statistic) `trials`
/// times from the same state with independent substreams.
pub fn retention_statistics(
    state: &NibbleState,
    trials: u32,
    seed: u64,
) -> Result<RetentionEstimate, NibbleError> {
    let mut est = RetentionEstimate { trials, per_arc: Vec::new() };
    if trials == 0 {
        return Ok(est);
    }
    let m = state.d.num_arcs();
    let mut assigned = vec![0u32; m];
    let mut retained = vec![0u32; m];
    let mut list_sum = vec![0u64; m];
    let uncolored = state.uncolored_arcs();
    let params = state.iteration_params()?;
    for t in 0..trials {
        let mut trial = state.clone();
        trial.rng = rng::stream(seed, &format!("retention-{t}"));
        let mut stats = IterationStats::default();
        let draw = trial.draw_round(&params, &uncolored, &mut stats)?;
        // step IV removals only, against the snapshot
        let mut by_color: BTreeMap<Color, Vec<ArcId>> = BTreeMap::new();
        for &a in &uncolored {
            for &c in trial.lists.get(a) {
                by_color.entry(c).or_default().push(a);
            }
        }
        let mut removals: BTreeSet<(ArcId, Color)> = BTreeSet::new();
        for (&c, arcs) in &by_color {
            let mut members_out: BTreeMap<Vertex, Vec<ArcId>> = BTreeMap::new();
            let mut members_in: BTreeMap<Vertex, Vec<ArcId>> = BTreeMap::new();
            for &a in arcs {
                let (u, v) = trial.d.arc(a);
                members_out.entry(u).or_default().push(a);
                members_in.entry(v).or_default().push(a);
            }
            for members in [&members_out, &members_in] {
                for group in members.values() {
                    let has_retained = group
                        .iter()
                        .any(|&a| draw.retained[a] && draw.sigma[a] == Some(c));
                    if has_retained {
                        for &a in group {
                            if !(draw.retained[a] && draw.sigma[a] == Some(c)) {
                                removals.insert((a, c));
                            }
                        }
                    } else {
                        let vq = trial.vq_coin_with(&params, group.len(), &mut stats.clamp_events)?;
                        if trial.rng.random::<f64>() < vq {
                            for &a in group {
                                removals.insert((a, c));
                            }
                        }
                    }
                }
            }
        }
        for &a in &uncolored {
            if draw.sigma[a].is_some() {
                assigned[a] += 1;
                if draw.retained[a] {
                    retained[a] += 1;
                }
            }
            let removed_here = removals.range((a, 0)..=(a, Color::MAX)).count();
            list_sum[a] += (trial.lists.len(a) - removed_here) as u64;
        }
    }
    for &a in &uncolored {
        est.per_arc.push(ArcRetention {
            arc: a,
            assigned: assigned[a],
            retained: retained[a],
            mean_list_after: list_sum[a] as f64 / trials as f64,
        });
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::random_regular_digraph;

    fn desk_cfg() -> NibbleConfig {
        NibbleConfig::default()
    }

    fn mk_state(d: Digraph, k: u32, seed: u64, cfg: NibbleConfig) -> NibbleState {
        let lists = ListAssignment::uniform(&d, k);
        let n = d.n() as usize;
        NibbleState::new(Arc::new(d), lists, vec![Vec::new(); n], None, cfg, seed).unwrap()
    }

    #[test]
    fn no_uncolored_arcs_is_a_fixed_point() {
        let d = Digraph::empty(4);
        let mut s = mk_state(d, 4, 1, desk_cfg());
        let st = s.iterate().unwrap();
        assert_eq!(st.activations, 0);
        assert_eq!(st.uncolored_before, 0);
    }

    #[test]
    fn p_zero_only_flips_vq_coins() {
        let d = random_regular_digraph(12, 3, 5, 100).unwrap();
        let cfg = NibbleConfig { p: 0.0, ..desk_cfg() };
        let mut s = mk_state(d, 12, 2, cfg);
        let st = s.iterate().unwrap();
        assert_eq!(st.activations, 0);
        assert_eq!(st.assignments, 0);
        assert_eq!(st.retained, 0);
        assert_eq!(st.removals_step_v, 0);
        // With p = 0 the desk Vq coin is 1 - keep/1 where keep = 1: never fires.
        assert_eq!(st.removals_step_iv, 0);
    }

    #[test]
    fn iterate_keeps_invariants_and_extends() {
        let d = random_regular_digraph(40, 16, 3, 1000).unwrap();
        let mut s = mk_state(d, 64, 3, desk_cfg());
        for _ in 0..6 {
            let before_gamma = s.gamma.clone();
            let before_lists = s.lists.clone();
            let st = s.iterate().unwrap();
            s.validate().expect("invariants after iterate");
            // extension: previously colored arcs keep their colors
            for a in 0..s.d.num_arcs() {
                if let Some(c) = before_gamma.color(a) {
                    assert_eq!(s.gamma.color(a), Some(c));
                }
                for &c in s.lists.get(a) {
                    assert!(before_lists.contains(a, c), "list gained a color");
                }
            }
            // counting identity
            assert_eq!(
                st.assignments,
                st.conflict_uncolorings + st.eq_uncolorings + st.stepv_uncolorings + st.retained
            );
        }
        assert!(s.gamma.colored_count() > 0, "six rounds should color something");
    }

    #[test]
    fn iterate_is_deterministic() {
        let d = random_regular_digraph(20, 5, 9, 100).unwrap();
        let mut a = mk_state(d.clone(), 20, 7, desk_cfg());
        let mut b = mk_state(d, 20, 7, desk_cfg());
        for _ in 0..4 {
            let sa = a.iterate().unwrap();
            let sb = b.iterate().unwrap();
            assert_eq!(serde_json::to_string(&sa).unwrap(), serde_json::to_string(&sb).unwrap());
        }
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.lists, b.lists);
    }

    #[test]
    fn retention_probability_shapes() {
        // Isolated arc: no neighbors, P = 1.
        let d1 = Digraph::new(2, vec![(0, 1)]).unwrap();
        let s = mk_state(d1, 4, 1, desk_cfg());
        assert_eq!(s.retention_probability(0, 0).unwrap(), 1.0);

        // One other arc in N+(0,c), lists of size 4, p = 1/4: 15/16.
        let d2 = Digraph::new(3, vec![(0, 1), (0, 2)]).unwrap();
        let s = mk_state(d2, 4, 1, desk_cfg());
        let p = s.retention_probability(0, 0).unwrap();
        assert!((p - 15.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn eq_coin_limits() {
        // Isolated arc: P = 1, Eq = 1 - retain^2 in (0, 1).
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let s = mk_state(d, 4, 1, desk_cfg());
        let params = s.iteration_params().unwrap();
        let eq = s.eq_coin(0, 0).unwrap();
        assert!((eq - (1.0 - params.retain * params.retain)).abs() < 1e-12);
        assert!((0.0..1.0).contains(&eq));
    }

    #[test]
    fn vq_coin_limits() {
        let d = random_regular_digraph(10, 3, 4, 100).unwrap();
        let s = mk_state(d, 12, 1, desk_cfg());
        let params = s.iteration_params().unwrap();
        // The neighborhood achieving n_max gets Vq = 0.
        let mut clamps = 0;
        let at_max = s.vq_coin_with(&params, params.n as usize, &mut clamps).unwrap();
        assert!(at_max.abs() < 1e-9);
        // Size 0 gives 1 - keep.
        let at_zero = s.vq_coin_with(&params, 0, &mut clamps).unwrap();
        assert!((at_zero - (1.0 - params.keep)).abs() < 1e-12);
        assert_eq!(clamps, 0);
    }

    #[test]
    fn planted_path_fires_step_v() {
        // Path 1 -> 2 -> 3 with both arcs listing only color 0 and the
        // watched arc 3 -> 1 closing the cycle. Force activation with
        // p = 1: both arcs get assigned 0, the danger fires, color 0
        // leaves the list of 3 -> 1, and nothing monochromatic survives.
        let d = Digraph::new(4, vec![(1, 2), (2, 3), (3, 1)]).unwrap();
        let mut lists = ListAssignment::empty(&d);
        lists.set(0, vec![0]);
        lists.set(1, vec![0]);
        lists.set(2, vec![0]);
        let cfg = NibbleConfig { p: 1.0, ell_int: Some(3), ..desk_cfg() };
        let mut s = NibbleState::new(Arc::new(d), lists, vec![Vec::new(); 4], None, cfg, 11).unwrap();
        let st = s.iterate().unwrap();
        assert!(st.removals_step_v >= 1, "danger must fire: {st:?}");
        assert!(!s.lists.contains(2, 0), "color 0 must leave arc 3->1");
        s.validate().unwrap();
    }

    #[test]
    fn run_desk_until_fraction() {
        let d = random_regular_digraph(30, 8, 13, 1000).unwrap();
        let lists = ListAssignment::uniform(&d, 32);
        let out = run(
            Arc::new(d),
            lists,
            vec![Vec::new(); 30],
            None,
            desk_cfg(),
            5,
            StopRule::UncoloredFraction(0.3),
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::UncoloredFractionMet);
        assert_eq!(out.desk_retries, 0);
        out.state.validate().unwrap();
        let frac = out.state.uncolored_arcs().len() as f64 / out.state.d.num_arcs() as f64;
        assert!(frac <= 0.3);
    }

    #[test]
    fn run_trivial_stop_rules() {
        let d = Digraph::empty(3);
        let out = run(
            Arc::new(d),
            ListAssignment::uniform(&Digraph::empty(3), 2),
            vec![Vec::new(); 3],
            None,
            desk_cfg(),
            1,
            StopRule::UncoloredFraction(0.5),
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::NoUncoloredArcs);
        assert!(out.stats.is_empty());

        let d2 = random_regular_digraph(10, 2, 2, 100).unwrap();
        let lists = ListAssignment::uniform(&d2, 8);
        let out2 = run(
            Arc::new(d2),
            lists,
            vec![Vec::new(); 10],
            None,
            desk_cfg(),
            1,
            StopRule::UncoloredFraction(1.0),
        )
        .unwrap();
        assert_eq!(out2.stop, StopReason::UncoloredFractionMet);
        assert!(out2.stats.is_empty());
    }

    #[test]
    fn run_paper_profile_zero_iterations_at_small_delta() {
        // At delta = 4 the trajectory stops immediately (L0 below the
        // threshold), so a paper run reaches i0 without doing anything.
        let d = random_regular_digraph(10, 4, 21, 1000).unwrap();
        let traj = crate::params::compute_trajectory(4, LogBase::Natural).unwrap();
        assert_eq!(traj.i0, 0);
        let l0 = traj.row(0).l.floor() as u32;
        let lists = ListAssignment::uniform(&d, l0 + 5);
        let cfg = NibbleConfig { profile: Profile::Paper, ..desk_cfg() };
        let out = run(
            Arc::new(d),
            lists,
            vec![Vec::new(); 10],
            Some(Arc::new(traj)),
            cfg,
            3,
            StopRule::ReachI0,
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::ReachedI0);
        assert!(out.stats.is_empty());
    }

    #[test]
    fn paper_profile_needs_trajectory_and_big_lists() {
        let d = random_regular_digraph(10, 4, 21, 1000).unwrap();
        let cfg = NibbleConfig { profile: Profile::Paper, ..desk_cfg() };
        let lists = ListAssignment::uniform(&d, 4);
        assert!(matches!(
            NibbleState::new(Arc::new(d.clone()), lists.clone(), vec![Vec::new(); 10], None, cfg.clone(), 1),
            Err(NibbleError::MissingTrajectory)
        ));
        let traj = crate::params::compute_trajectory(4, LogBase::Natural).unwrap();
        assert!(matches!(
            run(
                Arc::new(d),
                lists,
                vec![Vec::new(); 10],
                Some(Arc::new(traj)),
                cfg,
                1,
                StopRule::ReachI0
            ),
            Err(NibbleError::ListTooSmall { .. })
        ));
    }

    #[test]
    fn retention_statistics_empty_and_sane() {
        let d = Digraph::new(2, vec![(0, 1)]).unwrap();
        let s = mk_state(d, 4, 1, desk_cfg());
        let est = retention_statistics(&s, 0, 9).unwrap();
        assert!(est.per_arc.is_empty());

        let est = retention_statistics(&s, 4000, 9).unwrap();
        let arc = &est.per_arc[0];
        // Isolated arc: retention frequency approximates retain^2.
        let params = s.iteration_params().unwrap();
        let want = params.retain * params.retain;
        let got = arc.retained as f64 / arc.assigned.max(1) as f64;
        let sigma = (want * (1.0 - want) / arc.assigned.max(1) as f64).sqrt();
        assert!((got - want).abs() < 4.0 * sigma + 1e-3, "got {got}, want {want}");
    }

    #[test]
    fn step_iv_discipline_after_iterate() {
        let d = random_regular_digraph(24, 6, 17, 1000).unwrap();
        let mut s = mk_state(d, 24, 23, desk_cfg());
        for _ in 0..4 {
            s.iterate().unwrap();
            // No color remains listed next to a same-color retained arc.
            for a in 0..s.d.num_arcs() {
                if let Some(c) = s.gamma.color(a) {
                    let (u, v) = s.d.arc(a);
                    for &f in s.d.out_arcs(u).iter().chain(s.d.in_arcs(v).iter()) {
                        if f != a {
                            assert!(
                                !s.lists.contains(f, c),
                                "arc {f} still lists {c} next to colored arc {a}"
                            );
                        }
                    }
                }
            }
        }
    }
}
