//! Minimum-effort weight adjustment towards a target centrality.
//!
//! Given bounds `W̲ ≤ W + X ≤ W̄` on the supported entries, find the smallest
//! `X` (Frobenius norm) such that `(I − α(W + X)ᵀ) ρ* = z`. The problem splits
//! into one scalar root-finding problem per agent: with the multiplier `λ_i`,
//! column `i` of the optimum is `sat(w_ji − λ_i ρ*_j, w̲_ji, w̄_ji) − w_ji`, and
//! `λ_i` is a zero of the nonincreasing piecewise-linear
//!
//! ```text
//! f_i(λ) = Σ_j sat(w_ji − λ ρ*_j, w̲_ji, w̄_ji) ρ*_j − (ρ*_i − z_i) / α
//! ```
//!
//! Agent `i` only needs `w_ji`, `w̲_ji`, `w̄_ji` and `ρ*_j` from its neighbors,
//! which is exactly what a [`LocalSubproblem`] carries.

mod breakpoints;
mod enumeration;
mod qp_oracle;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::InfluenceGraph;

pub use breakpoints::solve_breakpoints;
pub use enumeration::{solve_enumeration, EnumerationOptions, EnumerationOutcome, DEFAULT_ENUMERATION_LIMIT};
pub use qp_oracle::{qp_oracle, solve_dual_ascent};

/// Residual above which assembly refuses a solution.
pub const ASSEMBLY_TOLERANCE: f64 = 1e-6;

/// Relative slack used by the feasibility test.
pub const FEASIBILITY_RTOL: f64 = 1e-10;

/// Weight bounds, target and seed over an influence graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInstance {
    g: InfluenceGraph,
    w_lower: DMatrix<f64>,
    w_upper: DMatrix<f64>,
    rho_star: Vec<f64>,
    z: Vec<f64>,
    alpha: f64,
}

impl ControlInstance {
    pub fn new(
        g: InfluenceGraph,
        w_lower: DMatrix<f64>,
        w_upper: DMatrix<f64>,
        rho_star: Vec<f64>,
        z: Vec<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let n = g.n();
        for m in [&w_lower, &w_upper] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows().max(m.ncols()),
                });
            }
        }
        for len in [rho_star.len(), z.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidAlpha(alpha));
        }
        let w = g.weights();
        for i in 0..n {
            for j in 0..n {
                let (lo, hi, cur) = (w_lower[(i, j)], w_upper[(i, j)], w[(i, j)]);
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidInstance(format!("non-finite bound at ({i}, {j})")));
                }
                if !g.supports(i, j) {
                    if lo != 0.0 || hi != 0.0 {
                        return Err(Error::InvalidInstance(format!(
                            "bound at ({i}, {j}) lies outside the edge set"
                        )));
                    }
                    continue;
                }
                if lo < 0.0 {
                    return Err(Error::InvalidInstance(format!("negative lower bound at ({i}, {j})")));
                }
                if !(lo <= cur && cur <= hi) {
                    return Err(Error::InvalidInstance(format!(
                        "weight {cur} at ({i}, {j}) outside its bounds [{lo}, {hi}]"
                    )));
                }
            }
        }
        for (i, (&r, &zi)) in rho_star.iter().zip(&z).enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInstance(format!("target entry {i} must be positive")));
            }
            if !(zi >= 0.0 && zi.is_finite()) {
                return Err(Error::InvalidInstance(format!("seed entry {i} must be nonnegative")));
            }
            if r < zi {
                return Err(Error::InvalidInstance(format!(
                    "target entry {i} ({r}) is below the seed ({zi})"
                )));
            }
        }
        Ok(Self {
            g,
            w_lower,
            w_upper,
            rho_star,
            z,
            alpha,
        })
    }

    /// Same instance with a different target vector.
    pub fn with_target(&self, rho_star: Vec<f64>) -> Result<Self> {
        Self::new(
            self.g.clone(),
            self.w_lower.clone(),
            self.w_upper.clone(),
            rho_star,
            self.z.clone(),
            self.alpha,
        )
    }

    pub fn graph(&self) -> &InfluenceGraph {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn w_lower(&self) -> &DMatrix<f64> {
        &self.w_lower
    }

    pub fn w_upper(&self) -> &DMatrix<f64> {
        &self.w_upper
    }

    pub fn rho_star(&self) -> &[f64] {
        &self.rho_star
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Data agent `i` gathers from its extended neighborhood.
    pub fn local(&self, i: usize) -> LocalSubproblem {
        let w = self.g.weights();
        let entries = self
            .g
            .extended_neighborhood(i)
            .into_iter()
            .map(|j| LocalEntry {
                source: j,
                w: w[(j, i)],
                lo: self.w_lower[(j, i)],
                hi: self.w_upper[(j, i)],
                rho: self.rho_star[j],
            })
            .collect();
        LocalSubproblem::new(i, entries, (self.rho_star[i] - self.z[i]) / self.alpha)
    }

    /// `‖(I − α(W + X)ᵀ) ρ* − z‖∞`.
    pub fn constraint_residual(&self, x: &DMatrix<f64>) -> f64 {
        let rho = DVector::from_column_slice(&self.rho_star);
        let adjusted = self.g.weights() + x;
        let lhs = &rho - adjusted.transpose() * &rho * self.alpha;
        lhs.iter()
            .zip(&self.z)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// One incident weight `w_ji` seen from agent `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEntry {
    /// The agent `j`.
    pub source: usize,
    pub w: f64,
    pub lo: f64,
    pub hi: f64,
    /// `ρ*_j`.
    pub rho: f64,
}

impl LocalEntry {
    /// `sat(w − λρ, lo, hi)`.
    pub fn saturate(&self, lambda: f64) -> f64 {
        (self.w - lambda * self.rho).clamp(self.lo, self.hi)
    }

    /// Multiplier at which the entry leaves its upper bound.
    pub fn upper_breakpoint(&self) -> f64 {
        (self.w - self.hi) / self.rho
    }

    /// Multiplier at which the entry reaches its lower bound.
    pub fn lower_breakpoint(&self) -> f64 {
        (self.w - self.lo) / self.rho
    }
}

/// Everything agent `i` needs to compute its multiplier and column of `X*`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSubproblem {
    pub node: usize,
    /// Entries in ascending order of `source`.
    pub entries: Vec<LocalEntry>,
    /// `(ρ*_i − z_i) / α`.
    pub target: f64,
}

impl LocalSubproblem {
    pub fn new(node: usize, mut entries: Vec<LocalEntry>, target: f64) -> Self {
        entries.sort_by_key(|e| e.source);
        Self { node, entries, target }
    }

    pub fn residual(&self, lambda: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| e.saturate(lambda) * e.rho)
            .sum::<f64>()
            - self.target
    }

    pub fn lower_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.lo * e.rho).sum()
    }

    pub fn upper_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.hi * e.rho).sum()
    }

    /// Magnitude used to scale absolute tolerances.
    pub(crate) fn scale(&self) -> f64 {
        self.target.abs().max(self.upper_sum()).max(1.0)
    }

    /// Classifies every entry at `lambda` and builds the resulting column.
    pub(crate) fn solution_at(&self, lambda: f64) -> NodeSolution {
        let sides = self.entries.iter().map(|e| classify(e, lambda)).collect();
        self.solution_with(lambda, sides)
    }

    /// Builds the column from a known partition. Saturated entries are pinned
    /// to their bound and interior ones are clamped into the box.
    pub(crate) fn solution_with(&self, lambda: f64, sides: Vec<Side>) -> NodeSolution {
        let mut partition = NodePartition::default();
        let mut column = Vec::with_capacity(self.entries.len());
        for (e, side) in self.entries.iter().zip(&sides) {
            let value = match side {
                Side::Interior => {
                    partition.interior.push(e.source);
                    e.saturate(lambda)
                }
                Side::Lower => {
                    partition.lower.push(e.source);
                    e.lo
                }
                Side::Upper => {
                    partition.upper.push(e.source);
                    e.hi
                }
            };
            column.push((e.source, value - e.w));
        }
        NodeSolution {
            node: self.node,
            lambda,
            partition,
            column,
        }
    }
}

fn classify(e: &LocalEntry, lambda: f64) -> Side {
    let v = e.w - lambda * e.rho;
    if v <= e.lo {
        Side::Lower
    } else if v >= e.hi {
        Side::Upper
    } else {
        Side::Interior
    }
}

/// `f_i(λ)` for agent `i` of an instance.
pub fn residual_f(inst: &ControlInstance, i: usize, lambda: f64) -> f64 {
    inst.local(i).residual(lambda)
}

/// Where an incident weight sits relative to its box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Interior,
    Lower,
    Upper,
}

/// Source agents of the incident weights of one node, split by [`Side`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodePartition {
    pub interior: Vec<usize>,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
}

/// Per-agent solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSolution {
    pub node: usize,
    pub lambda: f64,
    pub partition: NodePartition,
    /// `(j, x*_ji)` for the incident weights of the node.
    pub column: Vec<(usize, f64)>,
}

/// Per-row outcome of the feasibility test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCheck {
    pub node: usize,
    /// `Σ_j w̲_ji ρ*_j`.
    pub lower: f64,
    /// `Σ_j w̄_ji ρ*_j`.
    pub upper: f64,
    /// `(ρ*_i − z_i) / α`.
    pub target: f64,
}

impl RowCheck {
    /// Positive when the target lies outside `[lower, upper]`; the distance.
    pub fn violation(&self) -> f64 {
        (self.target - self.upper).max(self.lower - self.target).max(0.0)
    }

    fn tolerance(&self) -> f64 {
        FEASIBILITY_RTOL * self.target.abs().max(self.upper.abs()).max(1.0)
    }

    pub fn holds(&self) -> bool {
        self.violation() <= self.tolerance()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub rows: Vec<RowCheck>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.rows.iter().all(RowCheck::holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &RowCheck> {
        self.rows.iter().filter(|r| !r.holds())
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            return write!(f, "feasible");
        }
        write!(f, "infeasible at")?;
        for (k, r) in self.violations().enumerate() {
            let sep = if k == 0 { " " } else { "; " };
            if r.target > r.upper {
                write!(
                    f,
                    "{sep}agent {} (required {} exceeds reachable maximum {} by {})",
                    r.node,
                    r.target,
                    r.upper,
                    r.target - r.upper
                )?;
            } else {
                write!(
                    f,
                    "{sep}agent {} (required {} is below reachable minimum {} by {})",
                    r.node,
                    r.target,
                    r.lower,
                    r.lower - r.target
                )?;
            }
        }
        Ok(())
    }
}

/// A node is feasible iff `Σ w̲_ji ρ*_j ≤ (ρ*_i − z_i)/α ≤ Σ w̄_ji ρ*_j`.
pub fn feasibility_check(inst: &ControlInstance) -> FeasibilityReport {
    let rows = (0..inst.n())
        .map(|i| {
            let local = inst.local(i);
            RowCheck {
                node: i,
                lower: local.lower_sum(),
                upper: local.upper_sum(),
                target: local.target,
            }
        })
        .collect();
    FeasibilityReport { rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    pub x_star: DMatrix<f64>,
    pub lambda_star: Vec<f64>,
    pub objective: f64,
    pub partitions: Vec<NodePartition>,
    /// `‖(I − α(W + X*)ᵀ) ρ* − z‖∞`.
    pub residual: f64,
    /// Direct solve of the centrality of `W + X*`, when the system is regular.
    pub centrality: Option<Vec<f64>>,
}

impl ControlSolution {
    /// `W + X*`, clamped to the bounds to absorb the last-bit rounding of
    /// saturated entries.
    pub fn adjusted_weights(&self, inst: &ControlInstance) -> DMatrix<f64> {
        let mut w = inst.graph().weights() + &self.x_star;
        for i in 0..inst.n() {
            for j in inst.graph().extended_neighborhood(i) {
                w[(i, j)] = w[(i, j)].clamp(inst.w_lower[(i, j)], inst.w_upper[(i, j)]);
            }
        }
        w
    }
}

/// Combines per-node columns into `X*` and checks the result.
pub fn assemble_solution(inst: &ControlInstance, nodes: Vec<NodeSolution>) -> Result<ControlSolution> {
    let n = inst.n();
    if nodes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: nodes.len(),
        });
    }
    let mut x_star = DMatrix::zeros(n, n);
    let mut lambda_star = vec![0.0; n];
    let mut partitions = vec![NodePartition::default(); n];
    let w = inst.graph().weights();
    for sol in nodes {
        let i = sol.node;
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        for &(j, x) in &sol.column {
            if !inst.graph().supports(j, i) {
                return Err(Error::WeightOutsideEdgeSet { i: j, j: i });
            }
            let v = w[(j, i)] + x;
            let (lo, hi) = (inst.w_lower[(j, i)], inst.w_upper[(j, i)]);
            let slack = 4.0 * f64::EPSILON * hi.abs().max(w[(j, i)].abs());
            if !(lo - slack <= v && v <= hi + slack) {
                return Err(Error::InvalidInstance(format!(
                    "adjusted weight {v} at ({j}, {i}) leaves its bounds"
                )));
            }
            x_star[(j, i)] = x;
        }
        lambda_star[i] = sol.lambda;
        partitions[i] = sol.partition;
    }
    let residual = inst.constraint_residual(&x_star);
    if !(residual <= ASSEMBLY_TOLERANCE) {
        return Err(Error::ConstraintResidualTooLarge {
            residual,
            tolerance: ASSEMBLY_TOLERANCE,
        });
    }
    let objective = 0.5 * x_star.norm_squared();
    let centrality = adjusted_centrality(inst, &x_star);
    Ok(ControlSolution {
        x_star,
        lambda_star,
        objective,
        partitions,
        residual,
        centrality,
    })
}

fn adjusted_centrality(inst: &ControlInstance, x: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = inst.n();
    let adjusted = inst.graph().weights() + x;
    let system = DMatrix::identity(n, n) - adjusted.transpose() * inst.alpha;
    system
        .lu()
        .solve(&DVector::from_column_slice(&inst.z))
        .map(|v| v.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    Enumeration,
    #[default]
    Breakpoints,
}

/// Checks feasibility, then solves every node independently and assembles.
pub fn solve(inst: &ControlInstance, kind: SolverKind, parallel: bool) -> Result<ControlSolution> {
    let report = feasibility_check(inst);
    if !report.is_feasible() {
        return Err(Error::InfeasibleTarget(report));
    }
    let node = |i: usize| -> Result<NodeSolution> {
        let local = inst.local(i);
        match kind {
            SolverKind::Breakpoints => solve_breakpoints(&local),
            SolverKind::Enumeration => {
                solve_enumeration(&local, EnumerationOptions::default()).map(|o| o.solution)
            }
        }
    };
    let nodes: Result<Vec<_>> = if parallel {
        (0..inst.n()).into_par_iter().map(node).collect()
    } else {
        (0..inst.n()).map(node).collect()
    };
    assemble_solution(inst, nodes?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetMode {
    /// `ρ* = 1`.
    Ones,
    /// `ρ* = r 1`.
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackProtection {
    pub instance: ControlInstance,
    pub solution: ControlSolution,
    /// `max − min` of the centrality of `W`, when it is defined.
    pub spread_before: Option<f64>,
    /// `max − min` of the centrality of `W + X*`.
    pub spread_after: f64,
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Equalizes centrality across the network so that no agent stands out as a
/// target.
pub fn attack_protection(base: &ControlInstance, mode: TargetMode, kind: SolverKind) -> Result<AttackProtection> {
    let level = match mode {
        TargetMode::Ones => 1.0,
        TargetMode::Uniform(r) => r,
    };
    let instance = base.with_target(vec![level; base.n()])?;
    let solution = solve(&instance, kind, false)?;
    let before = adjusted_centrality(&instance, &DMatrix::zeros(base.n(), base.n()));
    let after = solution.centrality.clone().ok_or(Error::SingularSystem)?;
    Ok(AttackProtection {
        spread_before: before.as_deref().map(spread),
        spread_after: spread(&after),
        instance,
        solution,
    })
}
