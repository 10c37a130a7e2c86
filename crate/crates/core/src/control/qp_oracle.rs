//! Independent reference: projected dual ascent on each node's quadratic
//! program. Slow but free of any breakpoint or partition logic.

use super::{assemble_solution, feasibility_check, ControlInstance, ControlSolution, LocalSubproblem, NodeSolution};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000_000;

/// Iterates `λ ← λ + f(λ) / Σ ρ_j²` from `λ = 0`. The step never overshoots
/// the root because `Σ ρ_j²` bounds the slope of `f`.
pub fn solve_dual_ascent(p: &LocalSubproblem, tol: f64) -> Result<NodeSolution> {
    let lipschitz: f64 = p.entries.iter().map(|e| e.rho * e.rho).sum();
    let mut lambda = 0.0;
    let mut f = p.residual(lambda);
    if lipschitz == 0.0 {
        return if f.abs() <= tol {
            Ok(p.solution_at(lambda))
        } else {
            Err(Error::NonConvergence { iterations: 0 })
        };
    }
    for _ in 0..MAX_ITERATIONS {
        if f.abs() <= tol {
            return Ok(p.solution_at(lambda));
        }
        let next = lambda + f / lipschitz;
        if next == lambda {
            break;
        }
        lambda = next;
        f = p.residual(lambda);
    }
    if f.abs() <= tol {
        Ok(p.solution_at(lambda))
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
        })
    }
}

/// Solves every node by dual ascent to a `1e-10` residual.
pub fn qp_oracle(inst: &ControlInstance) -> Result<ControlSolution> {
    let report = feasibility_check(inst);
    if !report.is_feasible() {
        return Err(Error::InfeasibleTarget(report));
    }
    let nodes = (0..inst.n())
        .map(|i| {
            let p = inst.local(i);
            let tol = 1e-10 * p.scale();
            solve_dual_ascent(&p, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_solution(inst, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::tests::single_neighbor;

    #[test]
    fn single_neighbor_hand_case() {
        let sol = solve_dual_ascent(&single_neighbor(), 1e-12).unwrap();
        assert!((sol.lambda - 0.5).abs() < 1e-12);
        assert!((sol.column[0].1 + 0.5).abs() < 1e-12);
    }
}
