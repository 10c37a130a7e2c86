//! Reference solver: try every interior/lower/upper split of the incident
//! weights and keep the first one whose multiplier is self-consistent.

use super::{LocalEntry, LocalSubproblem, NodeSolution, Side};
use crate::error::{Error, Result};

/// Largest neighborhood the enumeration accepts by default.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationOptions {
    pub limit: usize,
    /// Keep counting after the first valid partition.
    pub exhaustive: bool,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        Self {
            limit: DEFAULT_ENUMERATION_LIMIT,
            exhaustive: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationOutcome {
    /// Solution from the first valid partition in counter order.
    pub solution: NodeSolution,
    pub visited: u64,
    /// Number of valid partitions seen (1 unless exhaustive).
    pub valid: u64,
}

fn side_of(digit: u8) -> Side {
    match digit {
        0 => Side::Interior,
        1 => Side::Lower,
        _ => Side::Upper,
    }
}

/// Ternary counter with the first entry as least significant digit.
fn increment(digits: &mut [u8]) -> bool {
    for d in digits.iter_mut() {
        if *d < 2 {
            *d += 1;
            return true;
        }
        *d = 0;
    }
    false
}

struct Check {
    f_tol: f64,
    w_tol: f64,
}

impl Check {
    fn new(p: &LocalSubproblem) -> Self {
        let w_scale = p
            .entries
            .iter()
            .map(|e| e.w.abs().max(e.hi.abs()))
            .fold(1.0, f64::max);
        Self {
            f_tol: 1e-12 * p.scale(),
            w_tol: 1e-12 * w_scale,
        }
    }

    fn interior(&self, e: &LocalEntry, lambda: f64) -> bool {
        let v = e.w - lambda * e.rho;
        e.lo - self.w_tol <= v && v <= e.hi + self.w_tol
    }

    fn lower(&self, e: &LocalEntry, lambda: f64) -> bool {
        e.w - lambda * e.rho <= e.lo + self.w_tol
    }

    fn upper(&self, e: &LocalEntry, lambda: f64) -> bool {
        e.w - lambda * e.rho >= e.hi - self.w_tol
    }
}

/// Multiplier implied by a partition, or `None` if it is inconsistent.
fn candidate(p: &LocalSubproblem, sides: &[Side], check: &Check) -> Option<f64> {
    let mut fixed = 0.0;
    let mut interior_w = 0.0;
    let mut interior_rr = 0.0;
    for (e, side) in p.entries.iter().zip(sides) {
        match side {
            Side::Interior => {
                interior_w += e.w * e.rho;
                interior_rr += e.rho * e.rho;
            }
            Side::Lower => fixed += e.lo * e.rho,
            Side::Upper => fixed += e.hi * e.rho,
        }
    }
    if interior_rr > 0.0 {
        let lambda = (interior_w + fixed - p.target) / interior_rr;
        let ok = p.entries.iter().zip(sides).all(|(e, side)| match side {
            Side::Interior => check.interior(e, lambda),
            Side::Lower => check.lower(e, lambda),
            Side::Upper => check.upper(e, lambda),
        });
        return ok.then_some(lambda);
    }
    if (fixed - p.target).abs() > check.f_tol {
        return None;
    }
    // Every entry is pinned: any multiplier in [max over lower, min over
    // upper] of the breakpoints works.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (e, side) in p.entries.iter().zip(sides) {
        match side {
            Side::Lower => lo = lo.max(e.lower_breakpoint()),
            Side::Upper => hi = hi.min(e.upper_breakpoint()),
            Side::Interior => return None,
        }
    }
    let slack = check.w_tol;
    if lo > hi + slack {
        return None;
    }
    Some(pick_in_interval(lo, hi))
}

/// Midpoint of a possibly half-infinite interval.
pub(crate) fn pick_in_interval(lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) if lo <= hi => 0.5 * (lo + hi),
        (true, true) => lo,
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

pub fn solve_enumeration(p: &LocalSubproblem, opts: EnumerationOptions) -> Result<EnumerationOutcome> {
    let d = p.entries.len();
    if d > opts.limit {
        return Err(Error::NeighborhoodTooLarge {
            node: p.node,
            size: d,
            limit: opts.limit,
        });
    }
    let check = Check::new(p);
    let mut digits = vec![0u8; d];
    let mut sides = vec![Side::Interior; d];
    let mut first: Option<NodeSolution> = None;
    let mut visited = 0u64;
    let mut valid = 0u64;
    loop {
        visited += 1;
        for (s, &dig) in sides.iter_mut().zip(&digits) {
            *s = side_of(dig);
        }
        if let Some(lambda) = candidate(p, &sides, &check) {
            valid += 1;
            if first.is_none() {
                first = Some(p.solution_with(lambda, sides.clone()));
            }
            if !opts.exhaustive {
                break;
            }
        }
        if !increment(&mut digits) {
            break;
        }
    }
    match first {
        Some(solution) => Ok(EnumerationOutcome {
            solution,
            visited,
            valid,
        }),
        None => Err(Error::NoValidPartition { node: p.node }),
    }
}
