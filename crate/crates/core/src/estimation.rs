//! Distributed α-centrality estimation and its centralized reference.
//!
//! Each agent iterates `c_i(t+1) = α Σ_j w_ji c_j(t) + z_i` over its extended
//! neighborhood. The transpose orientation (`w_ji`, not `w_ij`) makes the fixed
//! point `ρ_α = (I − αWᵀ)⁻¹ z` measure how strongly an agent influences the
//! network rather than how strongly it is influenced.
//!
//! The iteration is a contraction in any vector norm whose induced operator
//! norm of `αWᵀ` is below one, which yields the a-priori error bound
//! `γ (2 − κ) κᵗ / (1 − κ) · max(‖c(0)‖, ‖z‖)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{spectral_radius, InfluenceGraph};
use crate::trace::RoundTrace;

/// Attenuation and seed vector for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityConfig {
    alpha: f64,
    z: Vec<f64>,
}

impl CentralityConfig {
    /// Validates `α > 0`, `z ≥ 0`, `z ≠ 0` and `α ρ(W) < 1`.
    pub fn new(g: &InfluenceGraph, alpha: f64, z: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidAlpha(alpha));
        }
        if z.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                found: z.len(),
            });
        }
        if z.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || z.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidSeed);
        }
        let product = alpha * spectral_radius(g.weights())?;
        if product >= 1.0 {
            return Err(Error::AssumptionViolated { product });
        }
        Ok(Self { alpha, z })
    }

    /// Uniform seed `z = 1`.
    pub fn with_unit_seed(g: &InfluenceGraph, alpha: f64) -> Result<Self> {
        Self::new(g, alpha, vec![1.0; g.n()])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }
}

/// Local update of one agent from `(w_ji, c_j)` pairs in ascending `j`.
///
/// The simulator and the vector iteration both go through this function so
/// their results agree bit for bit.
pub fn agent_update<I>(alpha: f64, z_i: f64, terms: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut acc = 0.0;
    for (w, c) in terms {
        acc += w * c;
    }
    alpha * acc + z_i
}

/// One synchronous round: `c(t+1) = α Wᵀ c(t) + z`.
pub fn estimation_step(g: &InfluenceGraph, cfg: &CentralityConfig, c: &[f64]) -> Result<Vec<f64>> {
    if c.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: c.len(),
        });
    }
    Ok(step_unchecked(g, cfg, c))
}

pub(crate) fn step_unchecked(g: &InfluenceGraph, cfg: &CentralityConfig, c: &[f64]) -> Vec<f64> {
    (0..g.n())
        .map(|i| {
            let terms = g
                .extended_neighborhood(i)
                .into_iter()
                .map(|j| (g.weight(j, i), c[j]));
            agent_update(cfg.alpha, cfg.z[i], terms)
        })
        .collect()
}

/// Termination rule for iterative protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_rounds: usize,
    pub tol: f64,
}

impl StopRule {
    pub const DEFAULT_TOL: f64 = 1e-10;

    pub fn new(max_rounds: usize, tol: f64) -> Self {
        Self { max_rounds, tol }
    }

    /// `10 ⌈log(tol) / log(κ)⌉` rounds when a contraction factor is known,
    /// 10 000 otherwise.
    pub fn for_estimation(bound: Option<&ErrorBoundParams>, tol: f64) -> Self {
        let max_rounds = match bound {
            Some(p) if p.kappa > 0.0 && tol > 0.0 && tol < 1.0 => {
                let r = (tol.ln() / p.kappa.ln()).ceil();
                (10.0 * r).clamp(10.0, 1e7) as usize
            }
            Some(_) => 10,
            None => 10_000,
        };
        Self { max_rounds, tol }
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self::new(10_000, Self::DEFAULT_TOL)
    }
}

/// Current estimates and round counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationState {
    pub c: Vec<f64>,
    pub t: usize,
}

#[derive(Debug, Clone)]
pub struct EstimationRun {
    pub state: EstimationState,
    pub trace: RoundTrace,
    pub converged: bool,
}

/// Iterates until `‖c(t+1) − c(t)‖∞ < tol` or `max_rounds` rounds.
pub fn run_estimation(
    g: &InfluenceGraph,
    cfg: &CentralityConfig,
    c0: &[f64],
    stop: StopRule,
) -> Result<EstimationRun> {
    if c0.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: c0.len(),
        });
    }
    let mut trace = RoundTrace::new("estimate", &["c"])
        .with_param("alpha", cfg.alpha)
        .with_param("tol", stop.tol)
        .with_param("max_rounds", stop.max_rounds);
    let mut c = c0.to_vec();
    trace.record(vec![c.clone()]);
    let mut converged = false;
    let mut t = 0;
    while t < stop.max_rounds {
        let next = step_unchecked(g, cfg, &c);
        let delta = max_abs_diff(&next, &c);
        c = next;
        t += 1;
        trace.record(vec![c.clone()]);
        if delta < stop.tol {
            converged = true;
            break;
        }
    }
    Ok(EstimationRun {
        state: EstimationState { c, t },
        trace,
        converged,
    })
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn system_matrix(g: &InfluenceGraph, alpha: f64) -> DMatrix<f64> {
    let n = g.n();
    DMatrix::identity(n, n) - g.weights().transpose() * alpha
}

/// Solves `(I − αWᵀ) ρ = z` directly.
pub fn oracle_alpha_centrality(g: &InfluenceGraph, cfg: &CentralityConfig) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(&cfg.z);
    let sol = system_matrix(g, cfg.alpha)
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem)?;
    Ok(sol.iter().copied().collect())
}

/// Katz centrality `((I − αWᵀ)⁻¹ − I) 1`, computed from the explicit inverse.
pub fn oracle_katz_centrality(g: &InfluenceGraph, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let product = alpha * spectral_radius(g.weights())?;
    if product >= 1.0 {
        return Err(Error::AssumptionViolated { product });
    }
    let n = g.n();
    let inv = system_matrix(g, alpha)
        .try_inverse()
        .ok_or(Error::SingularSystem)?;
    let shifted = inv - DMatrix::<f64>::identity(n, n);
    Ok((0..n).map(|i| shifted.row(i).sum()).collect())
}

/// Least-squares attenuation for an observed centrality vector:
/// `argmin_α ‖(I − αWᵀ) ρ − z‖₂`.
pub fn fit_alpha_least_squares(g: &InfluenceGraph, rho: &[f64], z: &[f64]) -> Result<f64> {
    let n = g.n();
    for len in [rho.len(), z.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    let rho_v = DVector::from_column_slice(rho);
    let w_rho = g.weights().transpose() * &rho_v;
    let target = rho_v - DVector::from_column_slice(z);
    let denom = w_rho.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(w_rho.dot(&target) / denom)
}

/// Vector norm in which the contraction factor is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorNorm {
    L1,
    L2,
    LInf,
}

impl VectorNorm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            VectorNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            VectorNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            VectorNorm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Constants of the a-priori error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBoundParams {
    /// Contraction factor `α ‖Wᵀ‖` in [`Self::norm`].
    pub kappa: f64,
    /// Equivalence constant with `‖v‖₂ ≤ γ ‖v‖`.
    pub gamma: f64,
    /// `max(‖c(0)‖, ‖z‖)`.
    pub m0: f64,
    pub norm: VectorNorm,
}

impl ErrorBoundParams {
    pub fn new(kappa: f64, gamma: f64, m0: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&kappa) {
            return Err(Error::KappaNotLessThanOne(kappa));
        }
        Ok(Self {
            kappa,
            gamma,
            m0,
            norm: VectorNorm::L2,
        })
    }

    /// Symmetric `W` uses the spectral norm with `γ = 1`. Otherwise picks
    /// the norm among ℓ₂, ℓ₁ and ℓ∞ with the smallest contraction factor,
    /// preferring ℓ₂ on ties. Returns `None` when no candidate contracts.
    pub fn for_run(g: &InfluenceGraph, cfg: &CentralityConfig, c0: &[f64]) -> Option<Self> {
        let alpha = cfg.alpha;
        // Operator norms of Wᵀ: ℓ₁ → max column sum of Wᵀ = ‖W‖∞, ℓ∞ → ‖W‖₁.
        let candidates = [
            (VectorNorm::L2, alpha * g.norm_two(), 1.0),
            (VectorNorm::L1, alpha * g.norm_inf(), 1.0),
            (VectorNorm::LInf, alpha * g.norm_one(), (g.n() as f64).sqrt()),
        ];
        let symmetric = g.is_symmetric();
        let (norm, kappa, gamma) = candidates
            .into_iter()
            .filter(|c| !symmetric || c.0 == VectorNorm::L2)
            .fold(None, |best: Option<(VectorNorm, f64, f64)>, cand| match best {
                Some(b) if b.1 <= cand.1 => Some(b),
                _ => Some(cand),
            })?;
        if kappa >= 1.0 {
            return None;
        }
        let m0 = norm.of(c0).max(norm.of(&cfg.z));
        Some(Self {
            kappa,
            gamma,
            m0,
            norm,
        })
    }
}

/// `γ (2 − κ) κᵗ / (1 − κ) · m0`.
pub fn error_bound(params: &ErrorBoundParams, t: usize) -> Result<f64> {
    let kappa = params.kappa;
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::KappaNotLessThanOne(kappa));
    }
    let kt = if t == 0 { 1.0 } else { kappa.powi(t.min(i32::MAX as usize) as i32) };
    Ok(params.gamma * (2.0 - kappa) * kt / (1.0 - kappa) * params.m0)
}
