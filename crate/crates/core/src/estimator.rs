//! Generalized method of moments for the initial weights.
//!
//! Trajectories are turned into truncated empirical transition matrices,
//! whose `U_e = P̂_ij P̂_ji` statistics estimate `E U_e` and `E U_e U_e'`.
//! Adjacent-pair covariances pin down `o_v`, and each `a_e` is the positive
//! root of `x(x+1) = o_i o_j E U_e`.
//!
//! Also here: the ratio divergence `d`, the cover-time bound calculator and
//! the sample-size planner.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::TransitionMatrix;
use crate::errw::{ErrwError, Trajectory};
use crate::graph::{Graph, GraphError};
use crate::moments::{MomentError, MomentOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("no trajectories supplied")]
    NoTrajectories,
    #[error("trajectory {index} starts at {got}, expected {expected}")]
    MixedStarts { index: usize, expected: usize, got: usize },
    #[error("truncation m must be >= 1")]
    InvalidTruncation,
    #[error("start vertex {v0} has degree {degree}; at least 2 is required")]
    DegenerateStart { v0: usize, degree: usize },
    #[error("trajectory {index} has no transitions to drop when re-anchoring")]
    TrajectoryTooShort { index: usize },
    #[error("{field} out of domain: {value}")]
    Domain { field: &'static str, value: f64 },
    #[error("vectors have lengths {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Errw(#[from] ErrwError),
    #[error(transparent)]
    Moment(#[from] MomentError),
}

type Result<T> = std::result::Result<T, EstimatorError>;

/// `P̂_ij = H_ij / m` where `H_ij` counts moves to `j` among the first `m`
/// departures from `i`; rows with fewer than `m` departures are uniform.
pub fn empirical_transition(g: &Graph, traj: &Trajectory, m: usize) -> Result<TransitionMatrix> {
    if m == 0 {
        return Err(EstimatorError::InvalidTruncation);
    }
    traj.edge_sequence(g)?;
    let n = g.n();
    let mut departed = vec![0usize; n];
    let mut hits = vec![0usize; n * n];
    for w in traj.steps().windows(2) {
        let i = w[0];
        if departed[i] < m {
            hits[i * n + w[1]] += 1;
        }
        departed[i] += 1;
    }
    let mut p = TransitionMatrix::simple(g);
    for i in 0..n {
        if departed[i] >= m {
            for nb in g.neighbors(i) {
                p.p[i * n + nb.vertex] = hits[i * n + nb.vertex] as f64 / m as f64;
            }
        }
    }
    Ok(p)
}

/// Two distinct edges meeting at `vertex`, with `e < f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgePair {
    pub e: usize,
    pub f: usize,
    pub vertex: usize,
}

/// All adjacent edge pairs, sorted by `(e, f)`.
pub fn adjacent_pairs(g: &Graph) -> Vec<EdgePair> {
    let mut pairs = Vec::new();
    for v in 0..g.n() {
        let inc = g.incident_edges(v);
        for (x, &e) in inc.iter().enumerate() {
            for &f in &inc[x + 1..] {
                pairs.push(EdgePair { e, f, vertex: v });
            }
        }
    }
    pairs.sort_by_key(|p| (p.e, p.f));
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub m: usize,
    pub k: usize,
    pub u_hat: Vec<f64>,
    pub pairs: Vec<EdgePair>,
    /// `V̂` aligned with `pairs`.
    pub v_hat: Vec<f64>,
    /// `Δ̂` aligned with `pairs`; 1 where the placeholder fired.
    pub delta_hat: Vec<f64>,
    /// Indices into `pairs` where `Û_e Û_f ≤ V̂`.
    pub error_flags: Vec<usize>,
}

impl MomentEstimates {
    /// Builds estimates from raw `Û` and `V̂`, applying the `Δ̂` placeholder.
    pub fn from_moments(g: &Graph, m: usize, k: usize, u_hat: Vec<f64>, v_hat: Vec<f64>) -> Result<Self> {
        let pairs = adjacent_pairs(g);
        if u_hat.len() != g.num_edges() {
            return Err(EstimatorError::DimensionMismatch(u_hat.len(), g.num_edges()));
        }
        if v_hat.len() != pairs.len() {
            return Err(EstimatorError::DimensionMismatch(v_hat.len(), pairs.len()));
        }
        let mut delta_hat = Vec::with_capacity(pairs.len());
        let mut error_flags = Vec::new();
        for (idx, (p, &v)) in pairs.iter().zip(&v_hat).enumerate() {
            let gap = u_hat[p.e] * u_hat[p.f] - v;
            if gap > 0.0 {
                delta_hat.push(gap);
            } else {
                delta_hat.push(1.0);
                error_flags.push(idx);
            }
        }
        Ok(Self { m, k, u_hat, pairs, v_hat, delta_hat, error_flags })
    }

    /// Noise-free input: `Û = E U`, `V̂ = E U U'`.
    pub fn exact(oracle: &MomentOracle) -> Result<Self> {
        let g = oracle.graph();
        let u = (0..g.num_edges()).map(|e| oracle.expected_u(e)).collect::<std::result::Result<Vec<_>, _>>()?;
        let v = adjacent_pairs(g)
            .iter()
            .map(|p| oracle.expected_uu(p.e, p.f))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut est = Self::from_moments(g, 0, 0, u, v)?;
        // Use the closed-form gap directly rather than the cancelling difference.
        for (d, p) in est.delta_hat.iter_mut().zip(&est.pairs) {
            *d = oracle.covariance_gap(p.e, p.f)?;
        }
        est.error_flags.clear();
        Ok(est)
    }
}

fn pairwise_sum(rows: &[Vec<f64>]) -> Vec<f64> {
    match rows.len() {
        0 => Vec::new(),
        1 => rows[0].clone(),
        len => {
            let (l, r) = rows.split_at(len / 2);
            let (mut a, b) = rayon::join(|| pairwise_sum(l), || pairwise_sum(r));
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            a
        }
    }
}

/// `Û_e` and `V̂_{e,f}` averaged over trajectories. The K-average is a fixed
/// pairwise tree, so the result is bit-identical for any thread count.
pub fn empirical_moments(g: &Graph, trajectories: &[Trajectory], m: usize) -> Result<MomentEstimates> {
    if trajectories.is_empty() {
        return Err(EstimatorError::NoTrajectories);
    }
    if m == 0 {
        return Err(EstimatorError::InvalidTruncation);
    }
    let v0 = trajectories[0].v0();
    if let Some((index, t)) = trajectories.iter().enumerate().find(|(_, t)| t.v0() != v0) {
        return Err(EstimatorError::MixedStarts { index, expected: v0, got: t.v0() });
    }
    let pairs = adjacent_pairs(g);
    let ne = g.num_edges();
    let rows = trajectories
        .par_iter()
        .map(|t| {
            let u = empirical_transition(g, t, m)?.u_values(g);
            let mut row = u.clone();
            row.extend(pairs.iter().map(|p| u[p.e] * u[p.f]));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = trajectories.len();
    let mean: Vec<f64> = pairwise_sum(&rows).into_iter().map(|x| x / k as f64).collect();
    MomentEstimates::from_moments(g, m, k, mean[..ne].to_vec(), mean[ne..].to_vec())
}

/// Which adjacent pair determines `ô_v` at a vertex of degree ≥ 2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairChoice {
    /// The lexicographically smallest incident pair.
    #[default]
    Canonical,
    /// Mean of `2V̂/Δ̂` over every incident pair.
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub kind: String,
    pub edges: Vec<usize>,
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub v0: usize,
    pub o_hat: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub flags: Vec<Flag>,
    pub d: Option<f64>,
}

/// Positive root of `x(x+1) = c`.
pub fn solve_weight(c: f64) -> f64 {
    // 2c / (1 + √(1+4c)) equals -½ + √(¼ + c) without the cancellation.
    2.0 * c / (1.0 + (1.0 + 4.0 * c).sqrt())
}

/// Recovers `ô` and `â` from moment estimates; requires `deg(v0) ≥ 2`.
pub fn recover_weights(g: &Graph, v0: usize, est: &MomentEstimates, choice: PairChoice) -> Result<EstimationReport> {
    if v0 >= g.n() {
        return Err(ErrwError::VertexOutOfRange { vertex: v0, n: g.n() }.into());
    }
    if g.degree(v0) < 2 {
        return Err(EstimatorError::DegenerateStart { v0, degree: g.degree(v0) });
    }
    if est.pairs != adjacent_pairs(g) || est.u_hat.len() != g.num_edges() {
        return Err(EstimatorError::DimensionMismatch(est.u_hat.len(), g.num_edges()));
    }
    let n = g.n();
    let mut flags = Vec::new();
    let mut o_hat = vec![f64::NAN; n];
    for (v, o) in o_hat.iter_mut().enumerate() {
        if g.degree(v) < 2 {
            continue;
        }
        let at_v: Vec<usize> = (0..est.pairs.len()).filter(|&x| est.pairs[x].vertex == v).collect();
        let chosen = match choice {
            PairChoice::Canonical => vec![at_v[0]],
            PairChoice::Average => at_v,
        };
        let mut acc = 0.0;
        for &x in &chosen {
            acc += 2.0 * est.v_hat[x] / est.delta_hat[x];
        }
        *o = acc / chosen.len() as f64;
    }
    for v in 0..n {
        if g.degree(v) == 1 {
            let nb = g.neighbors(v)[0];
            o_hat[v] = o_hat[nb.vertex] * est.u_hat[nb.edge] + 1.0;
        }
    }
    // Every placeholder is reported, including pairs the chosen rule skips.
    for &x in &est.error_flags {
        let p = est.pairs[x];
        flags.push(Flag { kind: "delta_placeholder".into(), edges: vec![p.e, p.f], vertex: Some(p.vertex) });
    }
    let a_hat: Vec<f64> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| solve_weight(o_hat[i] * o_hat[j] * est.u_hat[e]))
        .collect();
    for (e, &x) in a_hat.iter().enumerate() {
        if !(x > 0.0 && x.is_finite()) {
            flags.push(Flag { kind: "nonpositive_weight".into(), edges: vec![e], vertex: None });
        }
    }
    Ok(EstimationReport { v0, o_hat, a_hat, flags, d: None })
}

/// `max_e max(A_e/B_e, B_e/A_e) - 1`.
pub fn divergence_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EstimatorError::DimensionMismatch(a.len(), b.len()));
    }
    for (index, &value) in a.iter().chain(b).enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(GraphError::NonPositiveWeight { index: index % a.len().max(1), value }.into());
        }
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x / y).max(y / x) - 1.0).fold(0.0, f64::max))
}

/// Trajectories from a degree-one start rewritten as trajectories from its
/// unique neighbor: the forced first step is dropped and the connecting edge
/// carries one extra unit of weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Reanchored {
    pub v0: usize,
    pub shifted_edge: usize,
    pub trajectories: Vec<Trajectory>,
}

pub fn reanchor_degree_one(g: &Graph, v0: usize, trajectories: &[Trajectory]) -> Result<Reanchored> {
    if g.degree(v0) != 1 {
        return Err(EstimatorError::DegenerateStart { v0, degree: g.degree(v0) });
    }
    let nb = g.neighbors(v0)[0];
    let moved = trajectories
        .iter()
        .enumerate()
        .map(|(index, t)| {
            if t.v0() != v0 {
                return Err(EstimatorError::MixedStarts { index, expected: v0, got: t.v0() });
            }
            if t.is_empty() {
                return Err(EstimatorError::TrajectoryTooShort { index });
            }
            Ok(Trajectory::new(t.steps()[1..].to_vec())?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reanchored { v0: nb.vertex, shifted_edge: nb.edge, trajectories: moved })
}

/// Full pipeline: moments, recovery, the degree-one reduction when needed,
/// and `d(A, Â)` when the truth is known.
pub fn estimate(
    g: &Graph,
    trajectories: &[Trajectory],
    m: usize,
    choice: PairChoice,
    truth: Option<&[f64]>,
) -> Result<EstimationReport> {
    let v0 = trajectories.first().ok_or(EstimatorError::NoTrajectories)?.v0();
    if v0 >= g.n() {
        return Err(ErrwError::VertexOutOfRange { vertex: v0, n: g.n() }.into());
    }
    let mut report = if g.degree(v0) == 1 {
        let r = reanchor_degree_one(g, v0, trajectories)?;
        let est = empirical_moments(g, &r.trajectories, m)?;
        let mut rep = recover_weights(g, r.v0, &est, choice)?;
        rep.a_hat[r.shifted_edge] -= 1.0;
        let x = rep.a_hat[r.shifted_edge];
        if !(x > 0.0) && !rep.flags.iter().any(|f| f.kind == "nonpositive_weight" && f.edges == [r.shifted_edge]) {
            rep.flags.push(Flag { kind: "nonpositive_weight".into(), edges: vec![r.shifted_edge], vertex: None });
        }
        rep.v0 = v0;
        rep
    } else {
        let est = empirical_moments(g, trajectories, m)?;
        recover_weights(g, v0, &est, choice)?
    };
    if let Some(a) = truth {
        g.check_weights(a)?;
        report.d = divergence_d(a, &report.a_hat).ok();
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    pub g1: f64,
    /// `ln` of the conductance range `(n/δ)^{±g1·diam}`.
    pub ln_q_lo: f64,
    pub ln_q_hi: f64,
    pub ln_tcov: f64,
    pub ln_pi_star: f64,
    pub ln_p_min: f64,
}

fn check_positive(field: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(EstimatorError::Domain { field, value })
    }
}

fn check_unit(field: &'static str, value: f64, hi: f64) -> Result<()> {
    if value > 0.0 && value < hi {
        Ok(())
    } else {
        Err(EstimatorError::Domain { field, value })
    }
}

/// `g1 = 3(ln(2ā) + (2ā + 3 + 2 ln 2)/a̲)`.
pub fn g1(a_lo: f64, a_hi: f64) -> f64 {
    3.0 * ((2.0 * a_hi).ln() + (2.0 * a_hi + 3.0 + 2.0 * std::f64::consts::LN_2) / a_lo)
}

fn check_shape(n: usize, diam: usize, a_lo: f64, a_hi: f64) -> Result<()> {
    if n < 2 {
        return Err(EstimatorError::Domain { field: "n", value: n as f64 });
    }
    if diam < 1 || diam >= n {
        return Err(EstimatorError::Domain { field: "diam", value: diam as f64 });
    }
    check_positive("a_lo", a_lo)?;
    check_positive("a_hi", a_hi)?;
    if a_lo > a_hi {
        return Err(EstimatorError::Domain { field: "a_lo", value: a_lo });
    }
    Ok(())
}

/// Cover-time and related high-probability bounds, all in natural log.
pub fn theoretical_bounds(n: usize, diam: usize, a_lo: f64, a_hi: f64, delta: f64) -> Result<TheoreticalBounds> {
    check_shape(n, diam, a_lo, a_hi)?;
    check_unit("delta", delta, 1.0)?;
    let g1 = g1(a_lo, a_hi);
    let nf = n as f64;
    let spread = g1 * diam as f64 * (nf / delta).ln();
    Ok(TheoreticalBounds {
        g1,
        ln_q_lo: -spread,
        ln_q_hi: spread,
        ln_tcov: 3.0 * nf.ln() + nf.ln().ln() + 2.0 * spread,
        ln_pi_star: -2.0 * nf.ln() - 2.0 * spread,
        ln_p_min: -nf.ln() - 2.0 * spread,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSizePlan {
    pub delta_prime: f64,
    pub eps_prime: f64,
    pub ln_m: f64,
    pub ln_t: f64,
    pub ln_k: f64,
}

fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// Sample sizes `(m, T, K)` that the analysis needs for `d(A, Â) ≤ ε` with
/// probability `1 - δ`; astronomically large, hence logs.
pub fn sample_size_plan(n: usize, diam: usize, a_lo: f64, a_hi: f64, eps: f64, delta: f64, g2: f64) -> Result<SampleSizePlan> {
    check_shape(n, diam, a_lo, a_hi)?;
    check_unit("epsilon", eps, 0.5)?;
    check_unit("delta", delta, 1.0)?;
    check_positive("g2", g2)?;
    let nf = n as f64;
    let na1 = nf * a_hi + 1.0;
    let d1 = eps * a_lo * (a_lo + 1.0) / (9.0 * na1.powi(2));
    let d2 = eps * a_lo.powi(3) * (a_lo + 1.0).powi(2) / (18.0 * (a_hi + 3.0) * na1.powi(4));
    let d3 = eps * a_lo.powi(2) * (a_lo + 1.0).powi(2) / (18.0 * (a_hi + 3.0) * na1.powi(4));
    let dp = d1.min(d2).min(d3);
    let ep = dp;
    let g1 = g1(a_lo, a_hi);
    let diam = diam as f64;
    let ln_n_dp = (nf / dp).ln();
    let ln_m = 8f64.ln() + 2.0 * nf.ln() - 2.0 * ep.ln() + 4.0 * g1 * diam * ln_n_dp + (2.0 * nf * nf / dp).ln().ln();
    let ln_cover = log_add(3.0 * nf.ln() + nf.ln().ln(), log_add(ln_m, 0.0) + 2.0 * nf.ln());
    let ln_t = 1.0 + g2.ln() + ln_cover + 2.0 * g1 * diam * ln_n_dp + (1.0 - dp.ln()).ln();
    let ln_k = 4.0 * nf.ln() + 2.0 * (a_hi + 3.0).ln() + 8.0 * na1.ln() + (2.0 + 13.0 * a_lo * a_lo).ln()
        - delta.ln()
        - 2.0 * eps.ln()
        - 6.0 * a_lo.ln()
        - 4.0 * (a_lo + 1.0).ln();
    Ok(SampleSizePlan { delta_prime: dp, eps_prime: ep, ln_m, ln_t, ln_k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::{path, star, triangle};

    fn traj(s: &[usize]) -> Trajectory {
        Trajectory::new(s.to_vec()).unwrap()
    }

    #[test]
    fn empirical_transition_examples() {
        let g = triangle();
        let p = empirical_transition(&g, &traj(&[0, 1, 0, 2, 0, 1]), 2).unwrap();
        assert_eq!(p.get(0, 1), 0.5);
        assert_eq!(p.get(0, 2), 0.5);
        // vertex 2 departed once, fewer than m: uniform
        assert_eq!(p.get(2, 0), 0.5);
        let p = empirical_transition(&g, &traj(&[0]), 1).unwrap();
        assert_eq!(p, TransitionMatrix::simple(&g));
        let p = empirical_transition(&g, &traj(&[0, 1, 2]), 5).unwrap();
        assert_eq!(p, TransitionMatrix::simple(&g));
    }

    #[test]
    fn single_trajectory_moments() {
        let g = triangle();
        let t = traj(&[0, 1, 0, 2, 1, 2, 0]);
        let est = empirical_moments(&g, std::slice::from_ref(&t), 1).unwrap();
        let u = empirical_transition(&g, &t, 1).unwrap().u_values(&g);
        assert_eq!(est.u_hat, u);
        for (p, v) in est.pairs.iter().zip(&est.v_hat) {
            assert_eq!(*v, u[p.e] * u[p.f]);
        }
    }

    #[test]
    fn placeholder_fires_and_is_reported() {
        let g = triangle();
        let est = MomentEstimates::from_moments(&g, 1, 1, vec![0.25; 3], vec![0.0625, 0.01, 0.01]).unwrap();
        assert_eq!(est.error_flags, vec![0]);
        assert_eq!(est.delta_hat[0], 1.0);
        let rep = recover_weights(&g, 0, &est, PairChoice::Canonical).unwrap();
        // pair 0 is (e01, e02), the canonical pair at vertex 0
        assert!(rep.flags.iter().any(|f| f.kind == "delta_placeholder"));
    }

    #[test]
    fn exact_triangle_recovery() {
        let oracle = MomentOracle::new(&triangle(), &[1.0; 3], 0).unwrap();
        let est = MomentEstimates::exact(&oracle).unwrap();
        let rep = recover_weights(oracle.graph(), 0, &est, PairChoice::Canonical).unwrap();
        for (x, y) in rep.o_hat.iter().zip([2.0, 3.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(rep.a_hat.iter().all(|a| (a - 1.0).abs() < 1e-12));
        assert!(rep.flags.is_empty());
    }

    #[test]
    fn exact_path_recovery_with_leaves() {
        let g = path(3);
        let oracle = MomentOracle::new(&g, &[1.0; 2], 1).unwrap();
        let est = MomentEstimates::exact(&oracle).unwrap();
        let rep = recover_weights(&g, 1, &est, PairChoice::Average).unwrap();
        assert!((rep.o_hat[1] - 2.0).abs() < 1e-12);
        assert!((rep.o_hat[0] - 2.0).abs() < 1e-12);
        assert!(rep.a_hat.iter().all(|a| (a - 1.0).abs() < 1e-12));
        assert!(matches!(
            recover_weights(&g, 0, &est, PairChoice::Canonical),
            Err(EstimatorError::DegenerateStart { .. })
        ));
    }

    #[test]
    fn quadratic_root() {
        assert!((solve_weight(6.0) - 2.0).abs() < 1e-15);
        assert!((solve_weight(0.75) - 0.5).abs() < 1e-15);
        assert!((solve_weight(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn divergence_examples() {
        assert_eq!(divergence_d(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(divergence_d(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(divergence_d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn reanchor_shifts_start() {
        let g = star(2);
        // star(2): center 0? find the leaves from the degrees
        let leaf = (0..3).find(|&v| g.degree(v) == 1).unwrap();
        let center = g.neighbors(leaf)[0].vertex;
        let r = reanchor_degree_one(&g, leaf, &[traj(&[leaf, center])]).unwrap();
        assert_eq!(r.v0, center);
        assert_eq!(r.trajectories[0].steps(), &[center]);
        assert!(matches!(
            reanchor_degree_one(&g, leaf, &[traj(&[leaf])]),
            Err(EstimatorError::TrajectoryTooShort { index: 0 })
        ));
    }

    #[test]
    fn g1_and_bounds() {
        let b = theoretical_bounds(3, 1, 1.0, 1.0, 0.1).unwrap();
        assert!((b.g1 - (9.0 * 2f64.ln() + 15.0)).abs() < 1e-12);
        assert!((b.g1 - 21.238).abs() < 1e-3);
        // (n/δ)^{2 g1 diam} → 3^{2 g1} as δ → 1
        let b = theoretical_bounds(3, 1, 1.0, 1.0, 1.0 - 1e-15).unwrap();
        let want = (27.0 * 3f64.ln()).ln() + 2.0 * b.g1 * 3f64.ln();
        assert!((b.ln_tcov - want).abs() < 1e-10);
        assert!(theoretical_bounds(3, 1, 1.0, 1.0, 1.0).is_err());
        assert!(theoretical_bounds(3, 1, 2.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn plan_example() {
        let p = sample_size_plan(3, 1, 1.0, 1.0, 0.1, 0.1, 1.0).unwrap();
        assert!((p.delta_prime - 0.1 * 4.0 / 18432.0).abs() < 1e-18);
        let want = (81.0_f64 * 16.0 * 65536.0 * 15.0 / (0.1 * 0.01 * 16.0)).ln();
        assert!((p.ln_k - want).abs() < 1e-10);
        assert!(sample_size_plan(3, 1, 1.0, 1.0, 0.5, 0.1, 1.0).is_err());
    }
}
