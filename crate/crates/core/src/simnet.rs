//! Synchronous message-passing simulator.
//!
//! Each round every agent emits one message computed from its own state,
//! then every agent computes its next state from its own state and the
//! messages of its neighbors. All agents commit together. Agents only see an
//! [`AgentView`] of the network, and every message read goes through an
//! [`Inbox`] that can log the sender for a locality audit.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::consensus::{self, agent_cascade, AgentPrev};
use crate::control::{assemble_solution, solve_breakpoints, ControlInstance, ControlSolution, LocalEntry, LocalSubproblem, NodeSolution};
use crate::error::{Error, Result};
use crate::estimation::{agent_update, CentralityConfig, StopRule};
use crate::graph::{alpha_from_norms, InfluenceGraph};
use crate::trace::{RoundAccess, RoundTrace};

/// What a single agent knows about the network.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView {
    pub id: usize,
    /// Communication neighbors, ascending.
    pub neighbors: Vec<usize>,
    /// `(j, w_ij)` over the extended neighborhood, ascending.
    pub w_in: Vec<(usize, f64)>,
    /// `(j, w_ji)` over the extended neighborhood, ascending.
    pub w_out: Vec<(usize, f64)>,
}

impl AgentView {
    pub fn from_graph(g: &InfluenceGraph, i: usize) -> Self {
        let ext = g.extended_neighborhood(i);
        Self {
            id: i,
            neighbors: g.neighbors(i).to_vec(),
            w_in: ext.iter().map(|&j| (j, g.weight(i, j))).collect(),
            w_out: ext.iter().map(|&j| (j, g.weight(j, i))).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    /// Own id merged into the neighbor list, ascending.
    pub fn closed_neighborhood(&self) -> Vec<usize> {
        let mut out = self.neighbors.clone();
        let pos = out.partition_point(|&j| j < self.id);
        out.insert(pos, self.id);
        out
    }
}

/// Round-`t` messages as seen by one agent.
pub struct Inbox<'a, M> {
    me: usize,
    messages: &'a [M],
    log: Option<Vec<usize>>,
}

impl<'a, M> Inbox<'a, M> {
    /// Message of agent `j`. Reads of foreign messages are logged when
    /// auditing, whether or not `j` is a neighbor.
    pub fn read(&mut self, j: usize) -> &'a M {
        if j != self.me {
            if let Some(log) = self.log.as_mut() {
                log.push(j);
            }
        }
        &self.messages[j]
    }
}

/// A synchronous protocol.
pub trait Protocol: Sync {
    type State: Clone + Send + Sync;
    type Message: Clone + Send + Sync;

    fn name(&self) -> &str;

    fn observables(&self) -> &[&'static str];

    /// One value per observable.
    fn observe(&self, state: &Self::State) -> Vec<f64>;

    fn emit(&self, view: &AgentView, state: &Self::State) -> Self::Message;

    fn update(
        &self,
        view: &AgentView,
        state: &Self::State,
        inbox: &mut Inbox<'_, Self::Message>,
    ) -> Result<Self::State>;

    /// Global stopping statistic, evaluated by the simulator after each
    /// round and never visible to agents.
    fn residual(&self, prev: &[Self::State], next: &[Self::State]) -> f64;
}

#[derive(Debug, Clone)]
pub struct SimRun<S> {
    pub states: Vec<S>,
    pub trace: RoundTrace,
    pub converged: bool,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Engine {
    views: Vec<AgentView>,
    audit: bool,
    parallel: bool,
}

impl Engine {
    pub fn new(g: &InfluenceGraph) -> Self {
        Self {
            views: (0..g.n()).map(|i| AgentView::from_graph(g, i)).collect(),
            audit: false,
            parallel: false,
        }
    }

    /// Record every message read for [`locality_audit`].
    pub fn with_audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    /// Evaluate agents of a round on the thread pool. Results are identical
    /// to sequential evaluation because each agent's arithmetic is unchanged.
    pub fn with_parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn views(&self) -> &[AgentView] {
        &self.views
    }

    pub fn run<P: Protocol>(&self, protocol: &P, init: Vec<P::State>, stop: StopRule) -> Result<SimRun<P::State>> {
        let n = self.views.len();
        if init.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: init.len(),
            });
        }
        let started = Instant::now();
        let mut trace = RoundTrace::new(protocol.name(), protocol.observables())
            .with_param("tol", stop.tol)
            .with_param("max_rounds", stop.max_rounds);
        let mut accesses: Vec<RoundAccess> = Vec::new();
        let mut states = init;
        trace.record(self.snapshot(protocol, &states));
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut t = 0;
        while t < stop.max_rounds {
            let messages: Vec<P::Message> = self
                .views
                .iter()
                .zip(&states)
                .map(|(v, s)| protocol.emit(v, s))
                .collect();
            let step = |(view, state): (&AgentView, &P::State)| -> Result<(P::State, Vec<usize>)> {
                let mut inbox = Inbox {
                    me: view.id,
                    messages: &messages,
                    log: self.audit.then(Vec::new),
                };
                let next = protocol.update(view, state, &mut inbox)?;
                Ok((next, inbox.log.unwrap_or_default()))
            };
            let results: Result<Vec<_>> = if self.parallel {
                self.views.par_iter().zip(states.par_iter()).map(step).collect()
            } else {
                self.views.iter().zip(&states).map(step).collect()
            };
            let results = results.map_err(|e| Error::Simulation {
                round: t,
                source: Box::new(e),
            })?;
            let (next, reads): (Vec<_>, Vec<_>) = results.into_iter().unzip();
            if self.audit {
                accesses.push(reads);
            }
            residual = protocol.residual(&states, &next);
            states = next;
            t += 1;
            trace.record(self.snapshot(protocol, &states));
            if residual < stop.tol {
                converged = true;
                break;
            }
        }
        if self.audit {
            trace.set_accesses(accesses);
        }
        trace.set_wall_clock(started.elapsed());
        Ok(SimRun {
            states,
            trace,
            converged,
            residual,
        })
    }

    fn snapshot<P: Protocol>(&self, protocol: &P, states: &[P::State]) -> Vec<Vec<f64>> {
        let k = protocol.observables().len();
        let mut values = vec![Vec::with_capacity(states.len()); k];
        for s in states {
            for (slot, v) in values.iter_mut().zip(protocol.observe(s)) {
                slot.push(v);
            }
        }
        values
    }
}

/// A message read from a non-neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    /// Round whose messages were read.
    pub round: usize,
    pub agent: usize,
    pub source: usize,
}

impl fmt::Display for Violation {
    /// `violation <round> <agent> <source>` with 1-based agent ids.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "violation {} {} {}", self.round, self.agent + 1, self.source + 1)
    }
}

/// Lists every read of a message outside the reader's neighborhood. Traces
/// without access logs yield an empty report.
pub fn locality_audit(trace: &RoundTrace, g: &InfluenceGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    for (round, per_agent) in trace.accesses().unwrap_or_default().iter().enumerate() {
        for (agent, reads) in per_agent.iter().enumerate() {
            for &source in reads {
                if source != agent && g.neighbors(agent).binary_search(&source).is_err() {
                    out.push(Violation { round, agent, source });
                }
            }
        }
    }
    out
}

fn max_abs<'a>(values: impl Iterator<Item = (&'a f64, &'a f64)>) -> f64 {
    values.fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Centrality estimation: agents exchange `c_j`.
#[derive(Debug, Clone)]
pub struct EstimateProtocol {
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateAgent {
    pub z: f64,
    pub c: f64,
}

impl Protocol for EstimateProtocol {
    type State = EstimateAgent;
    type Message = f64;

    fn name(&self) -> &str {
        "estimate"
    }

    fn observables(&self) -> &[&'static str] {
        &["c"]
    }

    fn observe(&self, s: &EstimateAgent) -> Vec<f64> {
        vec![s.c]
    }

    fn emit(&self, _: &AgentView, s: &EstimateAgent) -> f64 {
        s.c
    }

    fn update(&self, view: &AgentView, s: &EstimateAgent, inbox: &mut Inbox<'_, f64>) -> Result<EstimateAgent> {
        let terms = view.w_out.iter().map(|&(j, w)| {
            let c_j = if j == view.id { s.c } else { *inbox.read(j) };
            (w, c_j)
        });
        Ok(EstimateAgent {
            z: s.z,
            c: agent_update(self.alpha, s.z, terms),
        })
    }

    fn residual(&self, prev: &[EstimateAgent], next: &[EstimateAgent]) -> f64 {
        max_abs(next.iter().map(|s| &s.c).zip(prev.iter().map(|s| &s.c)))
    }
}

pub fn simulate_estimation(
    engine: &Engine,
    cfg: &CentralityConfig,
    c0: &[f64],
    stop: StopRule,
) -> Result<SimRun<EstimateAgent>> {
    let n = engine.views.len();
    if c0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c0.len() });
    }
    let init = cfg.z().iter().zip(c0).map(|(&z, &c)| EstimateAgent { z, c }).collect();
    engine.run(&EstimateProtocol { alpha: cfg.alpha() }, init, stop)
}

/// Weighted consensus: agents exchange `(c_j, c̄_j, x_j)`.
#[derive(Debug, Clone)]
pub struct ConsensusProtocol {
    pub alpha: f64,
    pub epsilon: f64,
    pub correction: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusAgent {
    pub z: f64,
    pub x0: f64,
    pub c: f64,
    pub dc: f64,
    pub cbar: f64,
    pub y: f64,
    pub dy: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusMessage {
    pub c: f64,
    pub cbar: f64,
    pub x: f64,
}

impl Protocol for ConsensusProtocol {
    type State = ConsensusAgent;
    type Message = ConsensusMessage;

    fn name(&self) -> &str {
        "consensus"
    }

    fn observables(&self) -> &[&'static str] {
        &consensus::OBSERVABLES
    }

    fn observe(&self, s: &ConsensusAgent) -> Vec<f64> {
        vec![s.c, s.dc, s.cbar, s.y, s.dy, s.x]
    }

    fn emit(&self, _: &AgentView, s: &ConsensusAgent) -> ConsensusMessage {
        ConsensusMessage {
            c: s.c,
            cbar: s.cbar,
            x: s.x,
        }
    }

    fn update(
        &self,
        view: &AgentView,
        s: &ConsensusAgent,
        inbox: &mut Inbox<'_, ConsensusMessage>,
    ) -> Result<ConsensusAgent> {
        let own = self.emit(view, s);
        let mut fetch = |j: usize| if j == view.id { own } else { *inbox.read(j) };
        let centrality: Vec<(f64, f64)> = view.w_out.iter().map(|&(j, w)| (w, fetch(j).c)).collect();
        let q_self = 1.0 - self.epsilon * view.degree() as f64;
        let mixing: Vec<(f64, f64, f64)> = view
            .closed_neighborhood()
            .into_iter()
            .map(|j| {
                let m = fetch(j);
                let q = if j == view.id { q_self } else { self.epsilon };
                (q, m.cbar, m.x)
            })
            .collect();
        let prev = AgentPrev {
            c: s.c,
            y: s.y,
            x0: s.x0,
        };
        let a = agent_cascade(self.alpha, s.z, prev, self.correction, centrality, mixing);
        Ok(ConsensusAgent {
            z: s.z,
            x0: s.x0,
            c: a.c,
            dc: a.dc,
            cbar: a.cbar,
            y: a.y,
            dy: a.dy,
            x: a.x,
        })
    }

    fn residual(&self, prev: &[ConsensusAgent], next: &[ConsensusAgent]) -> f64 {
        let dx = max_abs(next.iter().map(|s| &s.x).zip(prev.iter().map(|s| &s.x)));
        let dc = next.iter().fold(0.0, |m: f64, s| m.max(s.dc.abs()));
        dx + dc
    }
}

pub fn simulate_consensus(
    engine: &Engine,
    cfg: &CentralityConfig,
    epsilon: f64,
    x0: &[f64],
    correction: bool,
    stop: StopRule,
) -> Result<SimRun<ConsensusAgent>> {
    let n = engine.views.len();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let init = cfg
        .z()
        .iter()
        .zip(x0)
        .map(|(&z, &x)| ConsensusAgent {
            z,
            x0: x,
            c: z,
            dc: 0.0,
            cbar: z,
            y: 0.0,
            dy: 0.0,
            x,
        })
        .collect();
    let protocol = ConsensusProtocol {
        alpha: cfg.alpha(),
        epsilon,
        correction,
    };
    engine.run(&protocol, init, stop)
}

/// Max-consensus on the local column and row sums of `W`.
#[derive(Debug, Clone)]
pub struct MaxConsensusProtocol;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxKeys {
    pub col: f64,
    pub row: f64,
}

impl Protocol for MaxConsensusProtocol {
    type State = MaxKeys;
    type Message = MaxKeys;

    fn name(&self) -> &str {
        "max-consensus"
    }

    fn observables(&self) -> &[&'static str] {
        &["col", "row"]
    }

    fn observe(&self, s: &MaxKeys) -> Vec<f64> {
        vec![s.col, s.row]
    }

    fn emit(&self, _: &AgentView, s: &MaxKeys) -> MaxKeys {
        *s
    }

    fn update(&self, view: &AgentView, s: &MaxKeys, inbox: &mut Inbox<'_, MaxKeys>) -> Result<MaxKeys> {
        let mut out = *s;
        for &j in &view.neighbors {
            let m = inbox.read(j);
            out.col = out.col.max(m.col);
            out.row = out.row.max(m.row);
        }
        Ok(out)
    }

    /// Number of agents whose keys changed.
    fn residual(&self, prev: &[MaxKeys], next: &[MaxKeys]) -> f64 {
        prev.iter().zip(next).filter(|(a, b)| a != b).count() as f64
    }
}

#[derive(Debug, Clone)]
pub struct AlphaAgreement {
    /// Attenuation computed by every agent.
    pub alphas: Vec<f64>,
    /// Last round in which any agent's keys changed.
    pub rounds: usize,
    pub trace: RoundTrace,
}

/// Agents agree on `margin / sqrt(‖W‖₁‖W‖∞)` by flooding the largest local
/// column and row sums.
pub fn distributed_alpha_agreement(engine: &Engine, margin: f64) -> Result<AlphaAgreement> {
    let init: Vec<MaxKeys> = engine
        .views
        .iter()
        .map(|v| MaxKeys {
            col: local_sum(&v.w_out),
            row: local_sum(&v.w_in),
        })
        .collect();
    let n = init.len();
    let run = engine.run(&MaxConsensusProtocol, init, StopRule::new(n + 1, 0.5))?;
    let rounds = run.trace.len().saturating_sub(2);
    let alphas = run
        .states
        .iter()
        .map(|k| alpha_from_norms(margin, k.col, k.row))
        .collect();
    Ok(AlphaAgreement {
        alphas,
        rounds,
        trace: run.trace,
    })
}

/// Sum in ascending neighbor order, matching the centralized norms.
fn local_sum(entries: &[(usize, f64)]) -> f64 {
    let mut acc = 0.0;
    for &(_, w) in entries {
        acc += w;
    }
    acc
}

/// One round in which every agent `j` sends `ρ*_j` and, per neighbor `i`,
/// the triple `(w_ji, w̲_ji, w̄_ji)`, followed by local solves.
#[derive(Debug, Clone)]
pub struct ControlExchangeProtocol;

/// Local data of agent `j`: its row of `W` and of the bounds, plus its own
/// target and required column sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlAgent {
    pub rho_star: f64,
    pub target: f64,
    /// `(i, w_ji, w̲_ji, w̄_ji)` over the extended neighborhood.
    pub row: Vec<(usize, f64, f64, f64)>,
    pub received: Vec<LocalEntry>,
    pub solution: Option<NodeSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOffer {
    pub rho_star: f64,
    pub row: Vec<(usize, f64, f64, f64)>,
}

impl Protocol for ControlExchangeProtocol {
    type State = ControlAgent;
    type Message = ControlOffer;

    fn name(&self) -> &str {
        "control-exchange"
    }

    fn observables(&self) -> &[&'static str] {
        &["lambda"]
    }

    fn observe(&self, s: &ControlAgent) -> Vec<f64> {
        vec![s.solution.as_ref().map_or(f64::NAN, |x| x.lambda)]
    }

    fn emit(&self, _: &AgentView, s: &ControlAgent) -> ControlOffer {
        ControlOffer {
            rho_star: s.rho_star,
            row: s.row.clone(),
        }
    }

    fn update(&self, view: &AgentView, s: &ControlAgent, inbox: &mut Inbox<'_, ControlOffer>) -> Result<ControlAgent> {
        let mut received = Vec::with_capacity(view.w_out.len());
        for &(j, _) in &view.w_out {
            let (rho, row) = if j == view.id {
                (s.rho_star, &s.row)
            } else {
                let offer = inbox.read(j);
                (offer.rho_star, &offer.row)
            };
            let &(_, w, lo, hi) = row
                .iter()
                .find(|e| e.0 == view.id)
                .ok_or(Error::InvalidInstance(format!("agent {j} sent no entry for agent {}", view.id)))?;
            received.push(LocalEntry { source: j, w, lo, hi, rho });
        }
        let local = LocalSubproblem::new(view.id, received.clone(), s.target);
        let solution = solve_breakpoints(&local)?;
        Ok(ControlAgent {
            received,
            solution: Some(solution),
            ..s.clone()
        })
    }

    fn residual(&self, _: &[ControlAgent], _: &[ControlAgent]) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct ControlExchange {
    pub agents: Vec<ControlAgent>,
    pub solution: ControlSolution,
    pub trace: RoundTrace,
}

/// Runs the single exchange round, solves every agent locally and
/// assembles `X*`.
pub fn simulate_control_exchange(engine: &Engine, inst: &ControlInstance) -> Result<ControlExchange> {
    let n = inst.n();
    let w = inst.graph().weights();
    let init = (0..n)
        .map(|j| ControlAgent {
            rho_star: inst.rho_star()[j],
            target: (inst.rho_star()[j] - inst.z()[j]) / inst.alpha(),
            row: inst
                .graph()
                .extended_neighborhood(j)
                .into_iter()
                .map(|i| (i, w[(j, i)], inst.w_lower()[(j, i)], inst.w_upper()[(j, i)]))
                .collect(),
            received: Vec::new(),
            solution: None,
        })
        .collect();
    let run = engine.run(&ControlExchangeProtocol, init, StopRule::new(1, 0.0))?;
    let nodes = run
        .states
        .iter()
        .map(|s| s.solution.clone().expect("every agent solved in the exchange round"))
        .collect();
    let solution = assemble_solution(inst, nodes)?;
    Ok(ControlExchange {
        agents: run.states,
        solution,
        trace: run.trace,
    })
}
