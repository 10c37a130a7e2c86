//! Influence-weighted consensus running alongside centrality estimation.
//!
//! Plain averaging with a doubly stochastic `Q` preserves `1ᵀx`. To land on
//! the centrality-weighted average `x* = ρᵀx(0) / ρᵀ1` instead, every agent
//! injects the correction `γ_i = (ρ_i/ρ̄ − 1) x_i(0)` in increments, using its
//! running estimates of `ρ_i` (`c_i`) and of the mean `ρ̄` (`c̄_i`). Per round:
//!
//! ```text
//! c(t+1)  = α Wᵀ c(t) + z
//! Δc(t+1) = c(t+1) − c(t)
//! c̄(t+1)  = Q c̄(t) + Δc(t+1)
//! y(t+1)  = (c(t+1) / c̄(t+1) − 1) x(0)     (held at y(t) where c̄ = 0)
//! Δy(t+1) = y(t+1) − y(t)
//! x(t+1)  = Q x(t) + Δy(t+1)
//! ```

use crate::error::{Error, Result};
use crate::estimation::{agent_update, max_abs_diff, CentralityConfig, StopRule};
use crate::graph::{InfluenceGraph, PerronMatrix};
use crate::trace::RoundTrace;

/// Observables recorded per round, in trace column order.
pub const OBSERVABLES: [&str; 6] = ["c", "dc", "cbar", "y", "dy", "x"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub c: Vec<f64>,
    pub dc: Vec<f64>,
    pub cbar: Vec<f64>,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    pub x: Vec<f64>,
    pub x0: Vec<f64>,
    pub t: usize,
}

impl ConsensusState {
    /// `c = c̄ = z`, `y = Δy = Δc = 0`, `x = x0`.
    pub fn initial(cfg: &CentralityConfig, x0: &[f64]) -> Result<Self> {
        let n = cfg.z().len();
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x0.len(),
            });
        }
        Ok(Self {
            c: cfg.z().to_vec(),
            dc: vec![0.0; n],
            cbar: cfg.z().to_vec(),
            y: vec![0.0; n],
            dy: vec![0.0; n],
            x: x0.to_vec(),
            x0: x0.to_vec(),
            t: 0,
        })
    }

    fn snapshot(&self) -> Vec<Vec<f64>> {
        vec![
            self.c.clone(),
            self.dc.clone(),
            self.cbar.clone(),
            self.y.clone(),
            self.dy.clone(),
            self.x.clone(),
        ]
    }
}

/// Result of one agent's cascade update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentCascade {
    pub c: f64,
    pub dc: f64,
    pub cbar: f64,
    pub y: f64,
    pub dy: f64,
    pub x: f64,
    /// The division guard fired and `y` was held.
    pub held: bool,
}

/// Previous-round local variables of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPrev {
    pub c: f64,
    pub y: f64,
    pub x0: f64,
}

/// Applies the six cascade rules for one agent.
///
/// `centrality_terms` yields `(w_ji, c_j(t))` and `mixing_terms` yields
/// `(q_ij, c̄_j(t), x_j(t))`, both over ascending `j`.
pub fn agent_cascade<C, M>(
    alpha: f64,
    z_i: f64,
    prev: AgentPrev,
    correction: bool,
    centrality_terms: C,
    mixing_terms: M,
) -> AgentCascade
where
    C: IntoIterator<Item = (f64, f64)>,
    M: IntoIterator<Item = (f64, f64, f64)>,
{
    let c = agent_update(alpha, z_i, centrality_terms);
    let dc = c - prev.c;
    let mut mix_cbar = 0.0;
    let mut mix_x = 0.0;
    for (q, cbar_j, x_j) in mixing_terms {
        mix_cbar += q * cbar_j;
        mix_x += q * x_j;
    }
    let cbar = mix_cbar + dc;
    let (y, held) = if !correction {
        (0.0, false)
    } else if cbar == 0.0 {
        (prev.y, true)
    } else {
        ((c / cbar - 1.0) * prev.x0, false)
    };
    let dy = y - prev.y;
    let x = mix_x + dy;
    AgentCascade {
        c,
        dc,
        cbar,
        y,
        dy,
        x,
        held,
    }
}

/// Weighted-consensus protocol bound to one graph and Perron matrix.
#[derive(Debug, Clone)]
pub struct Consensus<'a> {
    g: &'a InfluenceGraph,
    cfg: &'a CentralityConfig,
    q: &'a PerronMatrix,
    correction: bool,
}

#[derive(Debug, Clone)]
pub struct ConsensusRun {
    pub state: ConsensusState,
    pub trace: RoundTrace,
    pub converged: bool,
    /// `‖x(t+1) − x(t)‖∞ + ‖Δc(t+1)‖∞` at the last round.
    pub residual: f64,
    /// `(round, agent)` pairs where the division guard held `y`.
    pub held: Vec<(usize, usize)>,
}

impl ConsensusRun {
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::MaxRoundsExceeded {
                rounds: self.state.t,
                residual: self.residual,
            })
        }
    }
}

impl<'a> Consensus<'a> {
    pub fn new(g: &'a InfluenceGraph, cfg: &'a CentralityConfig, q: &'a PerronMatrix) -> Result<Self> {
        let n = g.n();
        for found in [cfg.z().len(), q.matrix().nrows()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        Ok(Self {
            g,
            cfg,
            q,
            correction: true,
        })
    }

    /// Disables the correction input, leaving plain average consensus on `x`.
    pub fn without_correction(mut self) -> Self {
        self.correction = false;
        self
    }

    pub fn step(&self, s: &ConsensusState) -> Result<ConsensusState> {
        let n = self.g.n();
        for v in [&s.c, &s.cbar, &s.y, &s.x, &s.x0] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(self.step_inner(s).0)
    }

    fn step_inner(&self, s: &ConsensusState) -> (ConsensusState, Vec<usize>) {
        let (g, cfg, q) = (self.g, self.cfg, self.q);
        let n = g.n();
        let mut next = ConsensusState {
            c: vec![0.0; n],
            dc: vec![0.0; n],
            cbar: vec![0.0; n],
            y: vec![0.0; n],
            dy: vec![0.0; n],
            x: vec![0.0; n],
            x0: s.x0.clone(),
            t: s.t + 1,
        };
        let mut held = Vec::new();
        for i in 0..n {
            let centrality_terms = g
                .extended_neighborhood(i)
                .into_iter()
                .map(|j| (g.weight(j, i), s.c[j]));
            let mixing_terms = closed_neighborhood(g, i)
                .into_iter()
                .map(|j| (q.get(i, j), s.cbar[j], s.x[j]));
            let prev = AgentPrev {
                c: s.c[i],
                y: s.y[i],
                x0: s.x0[i],
            };
            let a = agent_cascade(
                cfg.alpha(),
                cfg.z()[i],
                prev,
                self.correction,
                centrality_terms,
                mixing_terms,
            );
            next.c[i] = a.c;
            next.dc[i] = a.dc;
            next.cbar[i] = a.cbar;
            next.y[i] = a.y;
            next.dy[i] = a.dy;
            next.x[i] = a.x;
            if a.held {
                held.push(i);
            }
        }
        (next, held)
    }

    /// Iterates until `‖x(t+1) − x(t)‖∞ + ‖Δc(t+1)‖∞ < tol` or the round cap.
    pub fn run(&self, x0: &[f64], stop: StopRule) -> Result<ConsensusRun> {
        let mut state = ConsensusState::initial(self.cfg, x0)?;
        if x0.len() != self.g.n() {
            return Err(Error::DimensionMismatch {
                expected: self.g.n(),
                found: x0.len(),
            });
        }
        let mut trace = RoundTrace::new("consensus", &OBSERVABLES)
            .with_param("alpha", self.cfg.alpha())
            .with_param("epsilon", self.q.epsilon())
            .with_param("correction", self.correction)
            .with_param("tol", stop.tol)
            .with_param("max_rounds", stop.max_rounds);
        trace.record(state.snapshot());
        let mut held_log = Vec::new();
        let mut residual = f64::INFINITY;
        let mut converged = false;
        while state.t < stop.max_rounds {
            let (next, held) = self.step_inner(&state);
            residual = max_abs_diff(&next.x, &state.x) + next.dc.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            held_log.extend(held.into_iter().map(|i| (next.t, i)));
            state = next;
            trace.record(state.snapshot());
            if residual < stop.tol {
                converged = true;
                break;
            }
        }
        Ok(ConsensusRun {
            state,
            trace,
            converged,
            residual,
            held: held_log,
        })
    }
}

/// `{i} ∪ N_i` in ascending order: the support of row `i` of `Q`.
pub(crate) fn closed_neighborhood(g: &InfluenceGraph, i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = g.neighbors(i).to_vec();
    let pos = out.partition_point(|&j| j < i);
    out.insert(pos, i);
    out
}

pub fn consensus_step(
    g: &InfluenceGraph,
    cfg: &CentralityConfig,
    q: &PerronMatrix,
    s: &ConsensusState,
) -> Result<ConsensusState> {
    Consensus::new(g, cfg, q)?.step(s)
}

pub fn run_consensus(
    g: &InfluenceGraph,
    cfg: &CentralityConfig,
    q: &PerronMatrix,
    x0: &[f64],
    stop: StopRule,
) -> Result<ConsensusRun> {
    Consensus::new(g, cfg, q)?.run(x0, stop)
}

fn check_centrality(rho: &[f64], x0: &[f64]) -> Result<f64> {
    if rho.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: rho.len(),
            found: x0.len(),
        });
    }
    if rho.iter().any(|&r| !(r >= 0.0)) {
        return Err(Error::ZeroCentralityVector);
    }
    let total: f64 = rho.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroCentralityVector);
    }
    Ok(total)
}

/// `x* = ρᵀx(0) / ρᵀ1`.
pub fn weighted_average_oracle(rho: &[f64], x0: &[f64]) -> Result<f64> {
    let total = check_centrality(rho, x0)?;
    let dot: f64 = rho.iter().zip(x0).map(|(r, x)| r * x).sum();
    Ok(dot / total)
}

/// `γ_i = (ρ_i / ρ̄ − 1) x_i(0)`, the input that turns the plain average into
/// the weighted one.
pub fn correction_input_oracle(rho: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
    let total = check_centrality(rho, x0)?;
    let mean = total / rho.len() as f64;
    Ok(rho
        .iter()
        .zip(x0)
        .map(|(r, x)| (r / mean - 1.0) * x)
        .collect())
}
