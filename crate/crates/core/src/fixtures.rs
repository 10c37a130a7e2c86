//! Reference networks used by the shipped scenarios and the test suites.
//! Agent indices here are 0-based.

use nalgebra::DMatrix;

use crate::control::ControlInstance;
use crate::error::Result;
use crate::graph::InfluenceGraph;

/// 15-agent topology, two clusters joined through agents 4 and 10.
pub const CLUSTER_EDGES: [(usize, usize); 28] = [
    (0, 1),
    (0, 2),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 4),
    (3, 5),
    (4, 5),
    (4, 6),
    (4, 8),
    (4, 10),
    (5, 6),
    (5, 7),
    (6, 7),
    (6, 8),
    (7, 8),
    (7, 9),
    (8, 9),
    (10, 11),
    (10, 12),
    (10, 13),
    (10, 14),
    (11, 12),
    (12, 13),
    (12, 14),
    (13, 14),
];

/// Initial opinions for the weighted consensus example.
pub const CLUSTER_X0: [f64; 15] = [
    12.5107, 21.6097, 0.0034, 9.0700, 4.4027, 2.7702, 5.5878, 10.3668, 11.9030, 16.1645, 12.5758,
    20.5566, 6.1336, 26.3435, 0.8216,
];

/// The agent with the largest centrality on the 15-agent network.
pub const CLUSTER_HUB: usize = 4;

/// 15-agent network with unit (adjacency) weights.
pub fn cluster_graph() -> InfluenceGraph {
    InfluenceGraph::with_unit_weights(15, &CLUSTER_EDGES).expect("fixture graph is valid")
}

/// Unit seed except for a zero at the hub.
pub fn cluster_seed_without_hub() -> Vec<f64> {
    let mut z = vec![1.0; 15];
    z[CLUSTER_HUB] = 0.0;
    z
}

/// Six agents on a path with a chord between agents 2 and 5, all with
/// self-loops.
pub const SIX_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 5)];

pub const SIX_LOWER: f64 = 1.5;
pub const SIX_UPPER: f64 = 5.0;

/// Centrality of the unadjusted six-agent network under a unit seed.
pub const SIX_RHO_BEFORE: [f64; 6] = [8.0, 7.0, 6.0, 5.0, 4.0, 3.0];

/// Unadjusted weights as `(i, j, w_ij)`.
pub const SIX_WEIGHTS_BEFORE: [(usize, usize, f64); 18] = [
    (0, 0, 5.0),
    (1, 1, 1.5),
    (2, 2, 1.7369),
    (3, 3, 3.2371),
    (4, 4, 3.2540),
    (5, 5, 1.5),
    (0, 1, 3.5196),
    (1, 0, 4.2857),
    (1, 2, 2.4847),
    (2, 1, 3.5572),
    (2, 3, 2.3786),
    (3, 2, 3.1991),
    (3, 4, 1.7450),
    (4, 3, 2.3857),
    (4, 5, 1.5),
    (5, 4, 2.7530),
    (2, 5, 1.5833),
    (5, 2, 2.0634),
];

/// Weights after equalizing centrality, as `(i, j, w_ij)`.
pub const SIX_WEIGHTS_AFTER: [(usize, usize, f64); 18] = [
    (0, 0, 4.1450),
    (1, 1, 1.5),
    (2, 2, 1.5),
    (3, 3, 3.3983),
    (4, 4, 3.5993),
    (5, 5, 3.0025),
    (0, 1, 3.1706),
    (1, 0, 3.4307),
    (1, 2, 2.1296),
    (2, 1, 3.2082),
    (2, 3, 2.5397),
    (3, 2, 2.8439),
    (3, 4, 2.0903),
    (4, 3, 2.5469),
    (4, 5, 3.0025),
    (5, 4, 3.0983),
    (2, 5, 3.0859),
    (5, 2, 1.7083),
];

/// Entries of the adjusted network that sit on their lower bound.
pub const SIX_LOWER_SATURATED: [(usize, usize); 2] = [(1, 1), (2, 2)];

/// Reported optimal adjustment effort `½‖X*‖²_F`.
pub const SIX_OBJECTIVE: f64 = 4.6742;

/// Seed scaling used in the control example: `z = ρ / 33`.
pub const SIX_SEED_DIVISOR: f64 = 33.0;

pub fn six_graph() -> InfluenceGraph {
    InfluenceGraph::from_assignments(6, &SIX_EDGES, &[0, 1, 2, 3, 4, 5], &SIX_WEIGHTS_BEFORE)
        .expect("fixture graph is valid")
}

pub fn six_adjusted_weights() -> DMatrix<f64> {
    let mut w = DMatrix::zeros(6, 6);
    for &(i, j, v) in &SIX_WEIGHTS_AFTER {
        w[(i, j)] = v;
    }
    w
}

pub fn six_seed() -> Vec<f64> {
    SIX_RHO_BEFORE.iter().map(|r| r / SIX_SEED_DIVISOR).collect()
}

/// `[lower, upper]` on every supported entry of a graph, zero elsewhere.
pub fn uniform_bounds(g: &InfluenceGraph, lower: f64, upper: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = g.n();
    let mut lo = DMatrix::zeros(n, n);
    let mut hi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in g.extended_neighborhood(i) {
            lo[(i, j)] = lower;
            hi[(i, j)] = upper;
        }
    }
    (lo, hi)
}

/// The equalization example: unit target, `z = ρ/33`, bounds `[1.5, 5]`.
pub fn six_equalization_instance(alpha: f64) -> Result<ControlInstance> {
    let g = six_graph();
    let (lo, hi) = uniform_bounds(&g, SIX_LOWER, SIX_UPPER);
    ControlInstance::new(g, lo, hi, vec![1.0; 6], six_seed(), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster_shape() {
        let g = cluster_graph();
        assert_eq!(g.edges().len(), 28);
        assert_eq!(g.degree(CLUSTER_HUB), 7);
        assert_eq!(g.max_degree(), 7);
        assert_eq!(g.diameter(), 4);
    }

    #[test]
    fn six_before_and_after_are_in_the_box() {
        let g = six_graph();
        let after = six_adjusted_weights();
        for &(i, j, _) in &SIX_WEIGHTS_BEFORE {
            assert!(g.supports(i, j));
            assert!((SIX_LOWER..=SIX_UPPER).contains(&after[(i, j)]));
        }
        assert!(g.with_weights(after).is_ok());
    }
}
