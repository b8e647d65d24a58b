//! The parameter recursion driving the iterative coloring procedure, and
//! the numeric audit of the size bounds it is supposed to satisfy.
//!
//! Starting from
//!   L0 = D + 3 sqrt(D) log^4 D,  N0 = D,  R0 = 2 sqrt(D) log^4 D
//! the recursion tracks list sizes (L), color-neighborhood bounds (N) and
//! reserve-neighborhood bounds (R) across iterations:
//!   Retain_i = (1 - p/L_i)^(N_i - 1)
//!   Keep_i   = 1 - p (N_i/L_i) Retain_i^2
//!   L_{i+1}  = L_i Keep_i^2                      - sqrt(L_i) log^2 D
//!   N_{i+1}  = N_i Keep_i (1 - p Retain_i^2)     + sqrt(N_i) log^2 D
//!   R_{i+1}  = R_i (1 - p Retain_i^2)            + sqrt(R_i) log^2 D
//! with p = 1/4, until i0 = min{ i : L_i < 3 log^7 D }.
//!
//! The log base is configurable (natural or base 2); every formula here is
//! uniform in that choice. The recursion runs in double-double arithmetic;
//! a pure f64 evaluation is provided to cross-check both precisions agree.

use crate::dd::Dd;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    Natural,
    Base2,
}

impl LogBase {
    pub fn log_dd(self, x: Dd) -> Dd {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base2 => x.ln() / crate::dd::LN2,
        }
    }

    pub fn log_f64(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Base2 => x.log2(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("delta must be at least 2, got {0}")]
    DeltaTooSmall(u64),
    #[error("list size became non-positive at iteration {i} (L = {l}); delta too small for this regime")]
    NonPositiveList { i: usize, l: f64 },
    #[error("no convergence within {0} iterations")]
    IterationCapExceeded(usize),
}

/// One iteration record, in double-double.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRowDd {
    pub l: Dd,
    pub n: Dd,
    pub r: Dd,
    pub retain: Dd,
    pub keep: Dd,
}

/// f64 view of a row, for serialization and the coloring procedure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub i: usize,
    pub l: f64,
    pub n: f64,
    pub r: f64,
    pub retain: f64,
    pub keep: f64,
}

#[derive(Debug, Clone)]
pub struct ParameterTrajectory {
    pub delta: u64,
    pub log_base: LogBase,
    pub p: f64,
    /// ell = 2 log Delta, kept real-valued; consumers round up as needed.
    pub ell: f64,
    pub i0: usize,
    pub rows: Vec<TrajectoryRowDd>,
}

impl ParameterTrajectory {
    pub fn row(&self, i: usize) -> TrajectoryRow {
        let r = &self.rows[i];
        TrajectoryRow {
            i,
            l: r.l.to_f64(),
            n: r.n.to_f64(),
            r: r.r.to_f64(),
            retain: r.retain.to_f64(),
            keep: r.keep.to_f64(),
        }
    }

    pub fn rows_f64(&self) -> Vec<TrajectoryRow> {
        (0..self.rows.len()).map(|i| self.row(i)).collect()
    }

    pub fn log_delta(&self) -> Dd {
        self.log_base.log_dd(Dd::from_u64(self.delta))
    }
}

fn retain_keep(p: Dd, l: Dd, n: Dd) -> (Dd, Dd) {
    // (1 - p/L)^(N-1) via exp((N-1) ln1p(-p/L)); the direct power cancels
    // catastrophically once N and L reach 2^30.
    let retain = ((n - Dd::ONE) * (-(p / l)).ln_1p()).exp();
    let keep = Dd::ONE - p * (n / l) * retain * retain;
    (retain, keep)
}

pub fn compute_trajectory(delta: u64, log_base: LogBase) -> Result<ParameterTrajectory, ParamsError> {
    compute_trajectory_with_cap(delta, log_base, DEFAULT_ITERATION_CAP)
}

pub fn compute_trajectory_with_cap(
    delta: u64,
    log_base: LogBase,
    cap: usize,
) -> Result<ParameterTrajectory, ParamsError> {
    if delta < 2 {
        return Err(ParamsError::DeltaTooSmall(delta));
    }
    let d = Dd::from_u64(delta);
    let lg = log_base.log_dd(d);
    let lg2 = lg * lg;
    let lg4 = lg2 * lg2;
    let p = Dd::from_f64(0.25);
    let threshold = Dd::from_f64(3.0) * lg4 * lg2 * lg; // 3 log^7

    let mut l = d + Dd::from_f64(3.0) * d.sqrt() * lg4;
    let mut n = d;
    let mut r = Dd::from_f64(2.0) * d.sqrt() * lg4;
    let mut rows = Vec::new();
    let mut i = 0usize;
    loop {
        if l.to_f64() <= 0.0 {
            return Err(ParamsError::NonPositiveList { i, l: l.to_f64() });
        }
        let (retain, keep) = retain_keep(p, l, n);
        rows.push(TrajectoryRowDd { l, n, r, retain, keep });
        if l < threshold {
            return Ok(ParameterTrajectory {
                delta,
                log_base,
                p: 0.25,
                ell: (Dd::from_f64(2.0) * lg).to_f64(),
                i0: i,
                rows,
            });
        }
        if i >= cap {
            return Err(ParamsError::IterationCapExceeded(cap));
        }
        let one_minus = Dd::ONE - p * retain * retain;
        let l2 = l * keep * keep - l.sqrt() * lg2;
        let n2 = n * keep * one_minus + n.sqrt() * lg2;
        let r2 = r * one_minus + r.sqrt() * lg2;
        l = l2;
        n = n2;
        r = r2;
        i += 1;
    }
}

/// Same recursion evaluated entirely in f64; used to check that the two
/// precisions agree.
pub fn compute_trajectory_f64(
    delta: u64,
    log_base: LogBase,
    cap: usize,
) -> Result<(usize, Vec<TrajectoryRow>), ParamsError> {
    if delta < 2 {
        return Err(ParamsError::DeltaTooSmall(delta));
    }
    let d = delta as f64;
    let lg = log_base.log_f64(d);
    let lg2 = lg * lg;
    let lg4 = lg2 * lg2;
    let p = 0.25f64;
    let threshold = 3.0 * lg4 * lg2 * lg;
    let mut l = d + 3.0 * d.sqrt() * lg4;
    let mut n = d;
    let mut r = 2.0 * d.sqrt() * lg4;
    let mut rows = Vec::new();
    let mut i = 0usize;
    loop {
        if l <= 0.0 {
            return Err(ParamsError::NonPositiveList { i, l });
        }
        let retain = ((n - 1.0) * (-p / l).ln_1p()).exp();
        let keep = 1.0 - p * (n / l) * retain * retain;
        rows.push(TrajectoryRow { i, l, n, r, retain, keep });
        if l < threshold {
            return Ok((i, rows));
        }
        if i >= cap {
            return Err(ParamsError::IterationCapExceeded(cap));
        }
        let one_minus = 1.0 - p * retain * retain;
        let l2 = l * keep * keep - l.sqrt() * lg2;
        let n2 = n * keep * one_minus + n.sqrt() * lg2;
        let r2 = r * one_minus + r.sqrt() * lg2;
        l = l2;
        n = n2;
        r = r2;
        i += 1;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Positive iff the inequality holds; relative slack to the bound.
    pub worst_margin: f64,
    /// Iteration achieving the worst margin, for the per-iteration checks.
    pub worst_i: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeBoundsReport {
    pub checks: Vec<SizeCheck>,
}

impl SizeBoundsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Audit the size-bound inequalities along a computed trajectory:
/// 1. L_{i0}, N_{i0}, R_{i0} > log^7 D
/// 2. R_{i0} <= 3 log^7.5 D
/// 3. R_i / L_i <= log D        for every i <= i0
/// 4. L_i > N_i                 for every i <= i0
/// 5. N_i > L_i / 2             for every i <= i0
pub fn check_size_bounds(traj: &ParameterTrajectory) -> SizeBoundsReport {
    let lg = traj.log_delta();
    let lg7 = lg.powi(7);
    let lg7_5 = lg.powi(7) * lg.sqrt();
    let last = &traj.rows[traj.i0];

    let rel = |x: Dd, bound: Dd| ((x - bound) / bound).to_f64();

    let final_margin = [last.l, last.n, last.r]
        .iter()
        .map(|&x| rel(x, lg7))
        .fold(f64::INFINITY, f64::min);
    let c1 = SizeCheck {
        name: "final sizes exceed log^7",
        pass: final_margin > 0.0,
        worst_margin: final_margin,
        worst_i: traj.i0,
    };

    let m2 = rel(Dd::from_f64(3.0) * lg7_5, last.r);
    let c2 = SizeCheck {
        name: "final R at most 3 log^7.5",
        pass: m2 >= 0.0,
        worst_margin: m2,
        worst_i: traj.i0,
    };

    let mut c3 = SizeCheck { name: "R/L at most log", pass: true, worst_margin: f64::INFINITY, worst_i: 0 };
    let mut c4 = SizeCheck { name: "L exceeds N", pass: true, worst_margin: f64::INFINITY, worst_i: 0 };
    let mut c5 = SizeCheck { name: "N exceeds L/2", pass: true, worst_margin: f64::INFINITY, worst_i: 0 };
    for (i, row) in traj.rows.iter().enumerate() {
        let m3 = rel(lg, row.r / row.l);
        if m3 < c3.worst_margin {
            c3.worst_margin = m3;
            c3.worst_i = i;
        }
        let m4 = rel(row.l, row.n);
        if m4 < c4.worst_margin {
            c4.worst_margin = m4;
            c4.worst_i = i;
        }
        let m5 = rel(row.n, row.l / Dd::from_f64(2.0));
        if m5 < c5.worst_margin {
            c5.worst_margin = m5;
            c5.worst_i = i;
        }
    }
    c3.pass = c3.worst_margin >= 0.0;
    c4.pass = c4.worst_margin > 0.0;
    c5.pass = c5.worst_margin > 0.0;

    SizeBoundsReport { checks: vec![c1, c2, c3, c4, c5] }
}
