//! Sorted-breakpoint sweep over the piecewise-linear residual.

use super::enumeration::pick_in_interval;
use super::{LocalSubproblem, NodeSolution, Side};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Event {
    at: f64,
    entry: usize,
    side: Side,
}

/// Residual `A − Bλ` on the segment where the entries have the given sides.
fn linear_piece(p: &LocalSubproblem, sides: &[Side]) -> (f64, f64) {
    let mut a = -p.target;
    let mut b = 0.0;
    for (e, side) in p.entries.iter().zip(sides) {
        match side {
            Side::Interior => {
                a += e.w * e.rho;
                b += e.rho * e.rho;
            }
            Side::Lower => a += e.lo * e.rho,
            Side::Upper => a += e.hi * e.rho,
        }
    }
    (a, b)
}

/// Finds a zero of the residual in `O(d log d)`.
///
/// On a flat zero segment the midpoint is returned.
pub fn solve_breakpoints(p: &LocalSubproblem) -> Result<NodeSolution> {
    let d = p.entries.len();
    let tol = 1e-12 * p.scale();
    let mut events = Vec::with_capacity(2 * d);
    let mut sides = vec![Side::Upper; d];
    for (k, e) in p.entries.iter().enumerate() {
        if e.lo == e.hi {
            events.push(Event {
                at: e.lower_breakpoint(),
                entry: k,
                side: Side::Lower,
            });
        } else {
            events.push(Event {
                at: e.upper_breakpoint(),
                entry: k,
                side: Side::Interior,
            });
            events.push(Event {
                at: e.lower_breakpoint(),
                entry: k,
                side: Side::Lower,
            });
        }
    }
    events.sort_by(|x, y| x.at.total_cmp(&y.at));

    let mut a = p.upper_sum() - p.target;
    let mut b = 0.0;
    let mut left = f64::NEG_INFINITY;
    let mut k = 0;
    let mut zero_from: Option<f64> = None;
    loop {
        let right = events.get(k).map_or(f64::INFINITY, |ev| ev.at);
        let interior = sides.contains(&Side::Interior);
        if !interior {
            if a.abs() <= tol {
                zero_from.get_or_insert(left);
            } else if let Some(from) = zero_from {
                return Ok(finish(p, pick_in_interval(from, left)));
            } else if a < 0.0 {
                break;
            }
        } else {
            if let Some(from) = zero_from {
                return Ok(finish(p, pick_in_interval(from, left)));
            }
            let at_right = a - b * right;
            if at_right < -tol {
                let (a_exact, b_exact) = linear_piece(p, &sides);
                let lambda = (a_exact / b_exact).clamp(left, right);
                return Ok(finish(p, lambda));
            }
            if at_right <= tol {
                // The residual reaches zero at the breakpoint; a flat zero
                // stretch may follow.
                zero_from = Some(right);
            }
        }
        if k == events.len() {
            if let Some(from) = zero_from {
                return Ok(finish(p, pick_in_interval(from, f64::INFINITY)));
            }
            break;
        }
        while k < events.len() && events[k].at == right {
            let ev = events[k];
            let e = &p.entries[ev.entry];
            match (sides[ev.entry], ev.side) {
                (Side::Upper, Side::Interior) => {
                    a += (e.w - e.hi) * e.rho;
                    b += e.rho * e.rho;
                }
                (Side::Interior, Side::Lower) => {
                    a += (e.lo - e.w) * e.rho;
                    b -= e.rho * e.rho;
                }
                (Side::Upper, Side::Lower) => a += (e.lo - e.hi) * e.rho,
                _ => unreachable!("events are processed in breakpoint order"),
            }
            sides[ev.entry] = ev.side;
            k += 1;
        }
        if !sides.contains(&Side::Interior) {
            b = 0.0;
        }
        left = right;
    }
    Err(Error::NoValidPartition { node: p.node })
}

fn finish(p: &LocalSubproblem, lambda: f64) -> NodeSolution {
    p.solution_at(lambda)
}
