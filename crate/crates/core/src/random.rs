//! Seeded generators for random networks and control instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlInstance;
use crate::error::Result;
use crate::graph::InfluenceGraph;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    /// Probability of each non-tree edge.
    pub extra_edge_prob: f64,
    /// Probability that an agent has a self-loop.
    pub self_loop_prob: f64,
    /// Weights are drawn uniformly from `[w_min, w_max)`.
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            extra_edge_prob: 0.2,
            self_loop_prob: 0.0,
            w_min: 0.0,
            w_max: 2.0,
        }
    }
}

/// Random spanning tree plus independent extra edges, with independently
/// drawn `w_ij` and `w_ji`.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, params: GraphParams) -> InfluenceGraph {
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((rng.random_range(0..k), k));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && !edges.contains(&(j, i)) && rng.random_bool(params.extra_edge_prob) {
                edges.push((i, j));
            }
        }
    }
    let loops: Vec<usize> = (0..n).filter(|_| rng.random_bool(params.self_loop_prob)).collect();
    let mut w = DMatrix::zeros(n, n);
    let draw = |rng: &mut R| params.w_min + (params.w_max - params.w_min) * rng.random::<f64>();
    for &(i, j) in &edges {
        w[(i, j)] = draw(rng);
        w[(j, i)] = draw(rng);
    }
    for &i in &loops {
        w[(i, i)] = draw(rng);
    }
    InfluenceGraph::new(n, &edges, &loops, w).expect("a spanning tree keeps the graph connected")
}

/// How a random control instance places its target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetShape {
    /// Positive target reachable by some weight matrix in the box.
    Reachable,
    /// Unit target reachable by some weight matrix in the box.
    Unit,
}

/// A feasible control instance: a witness matrix in the box realizes the
/// target, and the current weights are an independent point of the box.
pub fn random_control_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, shape: TargetShape) -> Result<ControlInstance> {
    let g = random_graph(
        rng,
        n,
        GraphParams {
            extra_edge_prob: 0.25,
            self_loop_prob: 0.5,
            w_min: 0.0,
            w_max: 1.0,
        },
    );
    let mut lo = DMatrix::zeros(n, n);
    let mut hi = DMatrix::zeros(n, n);
    let mut current = DMatrix::zeros(n, n);
    let mut witness = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in g.extended_neighborhood(i) {
            let l = rng.random_range(0.0..1.0);
            let h = if rng.random_bool(0.05) {
                l
            } else {
                l + rng.random_range(0.2..2.0)
            };
            lo[(i, j)] = l;
            hi[(i, j)] = h;
            current[(i, j)] = rng.random_range(l..=h);
            witness[(i, j)] = match rng.random_range(0..5) {
                0 => l,
                1 => h,
                _ => rng.random_range(l..=h),
            };
        }
    }
    let rho: Vec<f64> = match shape {
        TargetShape::Reachable => (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        TargetShape::Unit => vec![1.0; n],
    };
    let rho_v = DVector::from_column_slice(&rho);
    let inflow = witness.transpose() * &rho_v;
    // Largest α keeping z = ρ − α Wᵀρ nonnegative.
    let alpha_max = rho
        .iter()
        .zip(inflow.iter())
        .filter(|(_, &f)| f > 0.0)
        .map(|(r, f)| r / f)
        .fold(f64::INFINITY, f64::min);
    let alpha = if alpha_max.is_finite() {
        alpha_max * rng.random_range(0.3..0.9)
    } else {
        rng.random_range(0.1..1.0)
    };
    let z: Vec<f64> = rho
        .iter()
        .zip(inflow.iter())
        .map(|(r, f)| (r - alpha * f).max(0.0))
        .collect();
    let g = g.with_weights(current)?;
    ControlInstance::new(g, lo, hi, rho, z, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::feasibility_check;

    #[test]
    fn generated_instances_are_feasible() {
        let mut rng = seeded(7);
        for k in 0..50 {
            let shape = if k % 2 == 0 { TargetShape::Reachable } else { TargetShape::Unit };
            let inst = random_control_instance(&mut rng, 3 + k % 8, shape).unwrap();
            assert!(feasibility_check(&inst).is_feasible(), "instance {k}");
        }
    }

    #[test]
    fn same_seed_same_graph() {
        let a = random_graph(&mut seeded(3), 10, GraphParams::default());
        let b = random_graph(&mut seeded(3), 10, GraphParams::default());
        assert_eq!(a, b);
    }
}
