//! Edge-reinforced random walk: forward simulation, local times, the exact
//! trajectory likelihood and cover-time statistics.
//!
//! From vertex `x` at time `t` the walk moves to neighbor `i` with
//! probability proportional to the current local time `L_t^{x,i}` of the
//! connecting edge; every traversal adds 1 to that edge.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ErrwError {
    #[error("step {index}: {from} -> {to} is not an edge")]
    NonAdjacentStep { index: usize, from: usize, to: usize },
    #[error("trajectory starts at {got}, expected {expected}")]
    MismatchedStart { expected: usize, got: usize },
    #[error("trajectory has no vertices")]
    EmptyTrajectory,
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Vertex sequence `X_0, ..., X_T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    steps: Vec<usize>,
}

impl Trajectory {
    pub fn new(steps: Vec<usize>) -> Result<Self, ErrwError> {
        if steps.is_empty() {
            return Err(ErrwError::EmptyTrajectory);
        }
        Ok(Self { steps })
    }

    pub fn v0(&self) -> usize {
        self.steps[0]
    }

    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.steps.len() == 1
    }

    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<usize> {
        self.steps
    }

    /// Edge index of every transition, checking adjacency on the way.
    pub fn edge_sequence(&self, g: &Graph) -> Result<Vec<usize>, ErrwError> {
        if let Some(&v) = self.steps.iter().find(|&&v| v >= g.n()) {
            return Err(ErrwError::VertexOutOfRange { vertex: v, n: g.n() });
        }
        self.steps
            .windows(2)
            .enumerate()
            .map(|(index, w)| {
                g.edge_index(w[0], w[1])
                    .ok_or(ErrwError::NonAdjacentStep { index, from: w[0], to: w[1] })
            })
            .collect()
    }
}

/// Edge local times `L_T^e = a_e + (undirected crossings of e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLocalTimes {
    pub values: Vec<f64>,
    /// Undirected crossings `M_e = L_T^e - a_e`.
    pub crossings: Vec<u64>,
}

/// Directed transition counts of one trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransitionCounts {
    /// `N_i`: outgoing transitions from each vertex.
    pub departures: Vec<u64>,
    /// Crossings of edge `(i, j)`, `i < j`, in direction `i -> j`.
    pub forward: Vec<u64>,
    /// Crossings in direction `j -> i`.
    pub backward: Vec<u64>,
}

impl TransitionCounts {
    /// `N_ij` for an ordered pair; zero for non-adjacent pairs.
    pub fn directed(&self, g: &Graph, i: usize, j: usize) -> u64 {
        match g.edge_index(i, j) {
            Some(e) if i < j => self.forward[e],
            Some(e) => self.backward[e],
            None => 0,
        }
    }

    pub fn undirected(&self, e: usize) -> u64 {
        self.forward[e] + self.backward[e]
    }
}

pub fn transition_counts(g: &Graph, traj: &Trajectory) -> Result<TransitionCounts, ErrwError> {
    let edges = traj.edge_sequence(g)?;
    let mut c = TransitionCounts {
        departures: vec![0; g.n()],
        forward: vec![0; g.num_edges()],
        backward: vec![0; g.num_edges()],
    };
    for (w, &e) in traj.steps.windows(2).zip(&edges) {
        c.departures[w[0]] += 1;
        if w[0] < w[1] {
            c.forward[e] += 1;
        } else {
            c.backward[e] += 1;
        }
    }
    Ok(c)
}

pub fn local_times(g: &Graph, a: &[f64], traj: &Trajectory) -> Result<EdgeLocalTimes, ErrwError> {
    check_weights(g, a)?;
    let mut crossings = vec![0u64; g.num_edges()];
    for e in traj.edge_sequence(g)? {
        crossings[e] += 1;
    }
    let values = a.iter().zip(&crossings).map(|(&x, &m)| x + m as f64).collect();
    Ok(EdgeLocalTimes { values, crossings })
}

fn check_weights(g: &Graph, a: &[f64]) -> Result<(), GraphError> {
    if a.len() != g.num_edges() {
        return Err(GraphError::DimensionMismatch { expected: g.num_edges(), got: a.len() });
    }
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x > 0.0)) {
        return Err(GraphError::NonPositiveWeight { index, value });
    }
    Ok(())
}

/// Draws one ERRW trajectory of `t` transitions from `v0`.
///
/// Each step inverts the cumulative local-time sum over the neighbors of the
/// current vertex in canonical order.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    g: &Graph,
    a: &[f64],
    v0: usize,
    t: usize,
    rng: &mut R,
) -> Result<Trajectory, ErrwError> {
    check_weights(g, a)?;
    if v0 >= g.n() {
        return Err(ErrwError::VertexOutOfRange { vertex: v0, n: g.n() });
    }
    let mut weights = a.to_vec();
    let mut steps = Vec::with_capacity(t + 1);
    steps.push(v0);
    let mut x = v0;
    for _ in 0..t {
        let nbrs = g.neighbors(x);
        let total: f64 = nbrs.iter().map(|nb| weights[nb.edge]).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = nbrs[nbrs.len() - 1];
        for nb in nbrs {
            acc += weights[nb.edge];
            if u < acc {
                pick = *nb;
                break;
            }
        }
        weights[pick.edge] += 1.0;
        x = pick.vertex;
        steps.push(x);
    }
    Ok(Trajectory { steps })
}

/// `k` independent trajectories; trajectory `i` uses stream `(seed, i)` only.
pub fn simulate_batch(
    g: &Graph,
    a: &[f64],
    v0: usize,
    t: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<Trajectory>, ErrwError> {
    check_weights(g, a)?;
    if v0 >= g.n() {
        return Err(ErrwError::VertexOutOfRange { vertex: v0, n: g.n() });
    }
    (0..k)
        .into_par_iter()
        .map(|i| simulate_trajectory(g, a, v0, t, &mut rng::stream(seed, i as u64)))
        .collect()
}

fn rising_log(base: f64, step: f64, count: u64) -> f64 {
    (0..count).map(|i| (base + step * i as f64).ln()).sum()
}

/// Log-probability of one trajectory from its sufficient statistics:
/// undirected crossings `M_e` and departures `N_v`.
fn log_likelihood_counts(g: &Graph, a: &[f64], v0: usize, counts: &TransitionCounts) -> f64 {
    let a_v = g.vertex_sums(a);
    let mut ll = 0.0;
    for (e, &ae) in a.iter().enumerate() {
        ll += rising_log(ae, 1.0, counts.undirected(e));
    }
    for (v, &nv) in counts.departures.iter().enumerate() {
        let offset = if v == v0 { 0.0 } else { 1.0 };
        ll -= (0..nv).map(|i| (a_v[v] + 2.0 * i as f64 + offset).ln()).sum::<f64>();
    }
    ll
}

/// Exact joint log-likelihood of independent trajectories, all started at
/// `v0`, under initial weights `a`.
pub fn log_likelihood(g: &Graph, a: &[f64], v0: usize, trajectories: &[Trajectory]) -> Result<f64, ErrwError> {
    check_weights(g, a)?;
    let mut total = 0.0;
    for traj in trajectories {
        if traj.v0() != v0 {
            return Err(ErrwError::MismatchedStart { expected: v0, got: traj.v0() });
        }
        let counts = transition_counts(g, traj)?;
        total += log_likelihood_counts(g, a, v0, &counts);
    }
    Ok(total)
}

/// Every walk of exactly `t` transitions from `v0`, in lexicographic order.
pub fn enumerate_walks(g: &Graph, v0: usize, t: usize) -> Vec<Trajectory> {
    let mut out = Vec::new();
    let mut path = vec![v0];
    fn rec(g: &Graph, t: usize, path: &mut Vec<usize>, out: &mut Vec<Trajectory>) {
        if path.len() == t + 1 {
            out.push(Trajectory { steps: path.clone() });
            return;
        }
        let x = *path.last().unwrap();
        for nb in g.neighbors(x) {
            path.push(nb.vertex);
            rec(g, t, path, out);
            path.pop();
        }
    }
    rec(g, t, &mut path, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverStatistics {
    /// First time every vertex has been visited (`X_0` counts).
    pub tau_cov: Option<usize>,
    /// First time every vertex has at least `m` visits (`X_0` counts once).
    pub tau_cov_m: Option<usize>,
    pub visits: Vec<u64>,
}

pub fn cover_statistics(n: usize, traj: &Trajectory, m: u64) -> CoverStatistics {
    let m = m.max(1);
    let mut visits = vec![0u64; n];
    let mut unseen = n;
    let mut below_m = n;
    let mut tau_cov = None;
    let mut tau_cov_m = None;
    for (t, &x) in traj.steps.iter().enumerate() {
        visits[x] += 1;
        if visits[x] == 1 {
            unseen -= 1;
        }
        if visits[x] == m {
            below_m -= 1;
        }
        if unseen == 0 && tau_cov.is_none() {
            tau_cov = Some(t);
        }
        if below_m == 0 && tau_cov_m.is_none() {
            tau_cov_m = Some(t);
        }
    }
    CoverStatistics { tau_cov, tau_cov_m, visits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::{path, triangle};

    fn traj(steps: &[usize]) -> Trajectory {
        Trajectory::new(steps.to_vec()).unwrap()
    }

    #[test]
    fn local_times_and_counts() {
        let g = triangle();
        let lt = local_times(&g, &[1.0; 3], &traj(&[0, 1, 0])).unwrap();
        assert_eq!(lt.values, vec![3.0, 1.0, 1.0]);

        let c = transition_counts(&g, &traj(&[0, 1, 2])).unwrap();
        assert_eq!(c.departures, vec![1, 1, 0]);
        assert_eq!(c.directed(&g, 0, 1), 1);
        assert_eq!(c.directed(&g, 1, 2), 1);
        assert_eq!(c.directed(&g, 2, 1), 0);

        let c = transition_counts(&g, &traj(&[0])).unwrap();
        assert!(c.departures.iter().all(|&x| x == 0));
        assert_eq!(local_times(&g, &[0.5, 1.0, 2.0], &traj(&[0])).unwrap().values, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn non_adjacent_step_is_rejected() {
        let g = path(3);
        assert_eq!(
            transition_counts(&g, &traj(&[0, 2])),
            Err(ErrwError::NonAdjacentStep { index: 0, from: 0, to: 2 })
        );
    }

    #[test]
    fn likelihood_examples() {
        let g = triangle();
        let ll = log_likelihood(&g, &[1.0; 3], 0, &[traj(&[0, 1])]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        let ll = log_likelihood(&g, &[1.0; 3], 0, &[traj(&[0, 1, 0])]).unwrap();
        assert!((ll - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        let p = path(3);
        let ll = log_likelihood(&p, &[1.0; 2], 1, &[traj(&[1, 0])]).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(
            log_likelihood(&g, &[1.0; 3], 1, &[traj(&[0, 1])]),
            Err(ErrwError::MismatchedStart { expected: 1, got: 0 })
        );
    }

    #[test]
    fn zero_length_simulation() {
        let g = triangle();
        let mut r = rng::stream(1, 0);
        assert_eq!(simulate_trajectory(&g, &[1.0; 3], 2, 0, &mut r).unwrap().steps(), &[2]);
    }

    #[test]
    fn batches_are_deterministic() {
        let g = triangle();
        let a = simulate_batch(&g, &[1.0; 3], 0, 50, 2, 7).unwrap();
        let b = simulate_batch(&g, &[1.0; 3], 0, 50, 2, 7).unwrap();
        let c = simulate_batch(&g, &[1.0; 3], 0, 50, 2, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn first_step_frequency() {
        let g = triangle();
        let k = 10_000;
        let batch = simulate_batch(&g, &[1.0; 3], 0, 10, k, 2024).unwrap();
        let hits = batch.iter().filter(|t| t.steps()[1] == 1).count() as f64 / k as f64;
        assert!((hits - 0.5).abs() <= 3.0 * (0.25 / k as f64).sqrt());
    }

    #[test]
    fn cover_examples() {
        let s = cover_statistics(3, &traj(&[0, 1, 2]), 1);
        assert_eq!(s.tau_cov, Some(2));
        let s = cover_statistics(3, &traj(&[0, 1, 0, 1]), 1);
        assert_eq!(s.tau_cov, None);
        let s = cover_statistics(2, &traj(&[0, 1, 0, 1]), 2);
        assert_eq!(s.tau_cov, Some(1));
        assert_eq!(s.tau_cov_m, Some(3));
        assert_eq!(s.visits, vec![2, 2]);
    }

    #[test]
    fn walk_enumeration_counts() {
        let g = triangle();
        assert_eq!(enumerate_walks(&g, 0, 0).len(), 1);
        assert_eq!(enumerate_walks(&g, 0, 3).len(), 8);
    }
}
