//! Communication topology, influence weights and derived matrices.
//!
//! An [`InfluenceGraph`] couples an undirected, connected communication graph
//! with a nonnegative and possibly asymmetric weight matrix `W`, where `w_ij`
//! is the influence that agent `j`'s information has on agent `i`. Weights are
//! only allowed on edges and on declared self-loops.
//!
//! Indices are 0-based throughout the library; file formats use 1-based ids.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Undirected topology plus an asymmetric nonnegative influence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceGraph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    self_loops: Vec<bool>,
    weights: DMatrix<f64>,
}

impl InfluenceGraph {
    /// Builds and validates a graph from an explicit dense weight matrix.
    pub fn new(
        n: usize,
        edges: &[(usize, usize)],
        self_loops: &[usize],
        weights: DMatrix<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: weights.nrows().max(weights.ncols()),
            });
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            check_index(i, n)?;
            check_index(j, n)?;
            if i == j {
                return Err(Error::LoopEdge(i));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let mut loops = vec![false; n];
        for &i in self_loops {
            check_index(i, n)?;
            loops[i] = true;
        }

        let graph = Self {
            n,
            neighbors,
            self_loops: loops,
            weights,
        };
        graph.validate_weights(&graph.weights)?;

        let reached = graph.reachable_from(0);
        if reached < n {
            return Err(Error::DisconnectedGraph { reached, n });
        }
        Ok(graph)
    }

    /// Builds a graph from sparse weight assignments `(i, j, w_ij)`; unassigned
    /// entries are zero.
    pub fn from_assignments(
        n: usize,
        edges: &[(usize, usize)],
        self_loops: &[usize],
        assignments: &[(usize, usize, f64)],
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, value) in assignments {
            check_index(i, n)?;
            check_index(j, n)?;
            w[(i, j)] = value;
        }
        Self::new(n, edges, self_loops, w)
    }

    /// Unit weights in both directions on every edge (the adjacency matrix).
    pub fn with_unit_weights(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut w = DMatrix::zeros(n, n);
        for &(i, j) in edges {
            check_index(i, n)?;
            check_index(j, n)?;
            w[(i, j)] = 1.0;
            w[(j, i)] = 1.0;
        }
        Self::new(n, edges, &[], w)
    }

    /// Same topology, different weights.
    pub fn with_weights(&self, weights: DMatrix<f64>) -> Result<Self> {
        if weights.nrows() != self.n || weights.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: weights.nrows().max(weights.ncols()),
            });
        }
        self.validate_weights(&weights)?;
        Ok(Self {
            weights,
            ..self.clone()
        })
    }

    fn validate_weights(&self, w: &DMatrix<f64>) -> Result<()> {
        for i in 0..self.n {
            for j in 0..self.n {
                let value = w[(i, j)];
                if !value.is_finite() {
                    return Err(Error::NonFiniteWeight { i, j });
                }
                if value < 0.0 {
                    return Err(Error::NegativeWeight { i, j, value });
                }
                if value != 0.0 && !self.supports(i, j) {
                    return Err(Error::WeightOutsideEdgeSet { i, j });
                }
            }
        }
        Ok(())
    }

    fn reachable_from(&self, start: usize) -> usize {
        self.bfs_distances(start).iter().filter(|d| d.is_some()).count()
    }

    fn bfs_distances(&self, start: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Communication neighbors of `i`, ascending, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_self_loop(&self, i: usize) -> bool {
        self.self_loops[i]
    }

    pub fn self_loops(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.self_loops[i]).collect()
    }

    /// Extended neighborhood `N_i ∪ {i}` (the latter only with a self-loop),
    /// in ascending order. This is the set of `j` for which `w_ji` and `w_ij`
    /// may be nonzero.
    pub fn extended_neighborhood(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.neighbors[i].len() + 1);
        let mut pushed_self = !self.self_loops[i];
        for &j in &self.neighbors[i] {
            if !pushed_self && j > i {
                out.push(i);
                pushed_self = true;
            }
            out.push(j);
        }
        if !pushed_self {
            out.push(i);
        }
        out
    }

    /// Whether entry `(i, j)` belongs to the compatible support.
    pub fn supports(&self, i: usize, j: usize) -> bool {
        if i == j {
            self.self_loops[i]
        } else {
            self.neighbors[i].binary_search(&j).is_ok()
        }
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights == self.weights.transpose()
    }

    /// Longest shortest-path length in hops.
    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|s| {
                self.bfs_distances(s)
                    .into_iter()
                    .flatten()
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// `‖W‖₁`, the maximum column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n).map(|j| column_sum(&self.weights, j)).fold(0.0, f64::max)
    }

    /// `‖W‖∞`, the maximum row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| row_sum(&self.weights, i)).fold(0.0, f64::max)
    }

    /// `‖W‖₂`, the largest singular value.
    pub fn norm_two(&self) -> f64 {
        spectral_norm(&self.weights)
    }
}

fn check_index(index: usize, n: usize) -> Result<()> {
    if index >= n {
        Err(Error::IndexOutOfRange { index, n })
    } else {
        Ok(())
    }
}

/// Column sum accumulated in ascending row order.
pub(crate) fn column_sum(w: &DMatrix<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..w.nrows() {
        acc += w[(i, j)];
    }
    acc
}

/// Row sum accumulated in ascending column order.
pub(crate) fn row_sum(w: &DMatrix<f64>, i: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..w.ncols() {
        acc += w[(i, j)];
    }
    acc
}

/// `margin / sqrt(‖W‖₁ ‖W‖∞)`. Shared by the centralized bound and the
/// max-consensus agreement so both produce the same bits.
pub fn alpha_from_norms(margin: f64, norm_one: f64, norm_inf: f64) -> f64 {
    margin / (norm_one * norm_inf).sqrt()
}

/// Upper bound on admissible attenuation: any `α` strictly below
/// `1/sqrt(‖W‖₁ ‖W‖∞)` satisfies `α ρ(W) < 1`.
pub fn alpha_bound(g: &InfluenceGraph) -> Result<f64> {
    let (n1, ninf) = (g.norm_one(), g.norm_inf());
    if n1 == 0.0 || ninf == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(alpha_from_norms(1.0, n1, ninf))
}

/// Largest singular value.
pub fn spectral_norm(w: &DMatrix<f64>) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    w.clone().singular_values().max()
}

/// Spectral radius by a full eigensolve: symmetric eigendecomposition for
/// symmetric input, real Schur form otherwise. Nonnegative matrices on which
/// the Schur iteration stalls fall back to [`perron_root_upper`].
pub fn spectral_radius(w: &DMatrix<f64>) -> Result<f64> {
    if !w.is_square() {
        return Err(Error::DimensionMismatch {
            expected: w.nrows(),
            found: w.ncols(),
        });
    }
    if w.is_empty() || w.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    if *w == w.transpose() {
        let eig = w.clone().symmetric_eigen();
        return Ok(eig.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    const MAX_ITER: usize = 10_000;
    let radius = |m: DMatrix<f64>| {
        m.try_schur(f64::EPSILON, MAX_ITER)
            .map(|s| s.complex_eigenvalues().iter().fold(0.0_f64, |acc, v| acc.max(v.norm())))
    };
    if let Some(r) = radius(w.clone()) {
        return Ok(r);
    }
    if w.iter().all(|&x| x >= 0.0) {
        return Ok(perron_root_upper(w, 1e-13, 1_000_000));
    }
    Err(Error::NonConvergence { iterations: MAX_ITER })
}

/// Collatz–Wielandt upper bound on the Perron root of a nonnegative matrix.
///
/// Power iteration on `B = W + I` keeps `v > 0`, and every step brackets
/// `min (Bv)_i / v_i ≤ ρ(B) ≤ max (Bv)_i / v_i`. Stops once the bracket is
/// relatively narrower than `rtol` and returns the upper end minus one.
pub fn perron_root_upper(w: &DMatrix<f64>, rtol: f64, max_iter: usize) -> f64 {
    let n = w.nrows();
    let b = w + DMatrix::identity(n, n);
    let mut v = nalgebra::DVector::from_element(n, 1.0);
    let mut upper = f64::INFINITY;
    for _ in 0..max_iter {
        let next = &b * &v;
        let (lo, hi) = next
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a / b)
            .fold((f64::INFINITY, 0.0_f64), |(l, h), r| (l.min(r), h.max(r)));
        upper = upper.min(hi);
        if hi - lo <= rtol * hi {
            break;
        }
        // Any positive v gives a valid bracket; the floor avoids underflow.
        v = (next / hi).map(|x| x.max(1e-280));
    }
    upper - 1.0
}

/// Step-size policy for the Perron matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Epsilon {
    /// `1 / (d_max + 1)`.
    #[default]
    Auto,
    Fixed(f64),
}

/// `Q = I − εL` for the unweighted Laplacian of the communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronMatrix {
    q: DMatrix<f64>,
    epsilon: f64,
    lambda2: f64,
}

impl PerronMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Modulus of the second-largest-magnitude eigenvalue.
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }
}

/// Builds the Perron matrix. Requires `ε ≤ 1/d_max` (nonnegative entries) and
/// a second eigenvalue modulus strictly below one.
pub fn perron_matrix(g: &InfluenceGraph, epsilon: Epsilon) -> Result<PerronMatrix> {
    let n = g.n();
    let d_max = g.max_degree();
    let eps = match epsilon {
        Epsilon::Auto => 1.0 / (d_max as f64 + 1.0),
        Epsilon::Fixed(e) => e,
    };
    let too_large = |lambda2| Error::EpsilonTooLarge {
        epsilon: eps,
        max_degree: d_max,
        lambda2,
    };
    if !(eps > 0.0 && eps.is_finite()) || eps * d_max as f64 > 1.0 {
        return Err(too_large(f64::NAN));
    }

    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] = 1.0 - eps * g.degree(i) as f64;
        for &j in g.neighbors(i) {
            q[(i, j)] = eps;
        }
    }

    // Removing the consensus direction leaves the remaining spectrum intact.
    let centred = &q - DMatrix::from_element(n, n, 1.0 / n as f64);
    let lambda2 = centred
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    if lambda2 >= 1.0 - 1e-12 {
        return Err(too_large(lambda2));
    }
    Ok(PerronMatrix {
        q,
        epsilon: eps,
        lambda2,
    })
}
