//! The random environment behind the ERRW: Gamma β-field, hyperbolic φ-field,
//! conductances `q_e = β_e exp(φ_i + φ_j)`, the mixing density with its
//! normalizer, and tail diagnostics for the φ-field.
//!
//! On a tree the gradients `y = φ_child - φ_parent` are independent with
//! density `Γ(a+½)/(√(2π)Γ(a)) e^{-y/2} cosh(y)^{-(a+½)}`, which gives an exact
//! sampler. Loopy graphs go through a coordinate-wise Metropolis chain.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::errw::{simulate_trajectory, transition_counts, ErrwError, Trajectory};
use crate::graph::{Graph, GraphError, WeightVector};
use crate::quadrature::{integrate_positive, integrate_positive_2d, Estimate};
use crate::rng;
use crate::special::{log_gamma, DomainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvironmentError {
    #[error("graph is not a tree")]
    NotATree,
    #[error("phi[{v0}] must be exactly 0, got {value}")]
    PhiNotAnchored { v0: usize, value: f64 },
    #[error("edge {e0} is not incident to start vertex {v0}")]
    E0NotIncident { e0: usize, v0: usize },
    #[error("reference edge must carry weight 1, got {0}")]
    E0NotUnit(f64),
    #[error("edge index {edge} out of range ({num_edges} edges)")]
    EdgeOutOfRange { edge: usize, num_edges: usize },
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("field has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("delta must lie in (0, 1], got {0}")]
    InvalidDelta(f64),
    #[error("quadrature oracle handles at most 2 free edges, got {0}")]
    TooManyFreeEdges(usize),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Errw(#[from] ErrwError),
}

type Result<T> = std::result::Result<T, EnvironmentError>;

/// One draw of `(β, φ, q)` anchored at `v0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub v0: usize,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub q: Vec<f64>,
}

impl Environment {
    /// `ln q_e = ln β_e + φ_i + φ_j`, free of overflow.
    pub fn log_q(&self, g: &Graph) -> Vec<f64> {
        g.edges()
            .iter()
            .zip(&self.beta)
            .map(|(&(i, j), b)| b.ln() + self.phi[i] + self.phi[j])
            .collect()
    }

    pub fn transition_matrix(&self, g: &Graph) -> TransitionMatrix {
        TransitionMatrix::from_log_conductances(g, &self.log_q(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Sweeps with step-size adaptation.
    pub burn_in: usize,
    /// Further sweeps at the frozen step size before the state is returned.
    pub thinning: usize,
    pub step_size: f64,
    /// `None`: every draw runs its own chain. `Some(c)`: a batch is split over
    /// `c` long chains emitting one draw every `thinning` sweeps.
    pub chains: Option<usize>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { burn_in: 500, thinning: 10, step_size: 0.5, chains: None }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(EnvironmentError::InvalidConfig(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if self.chains == Some(0) {
            return Err(EnvironmentError::InvalidConfig("chains must be >= 1".into()));
        }
        Ok(())
    }
}

const TARGET_ACCEPTANCE: f64 = 0.4;

/// Row-stochastic matrix of a reversible walk, dense row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub n: usize,
    pub p: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_log_conductances(g: &Graph, log_q: &[f64]) -> Self {
        let n = g.n();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let nbrs = g.neighbors(i);
            let top = nbrs.iter().map(|nb| log_q[nb.edge]).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = nbrs.iter().map(|nb| (log_q[nb.edge] - top).exp()).sum();
            for nb in nbrs {
                p[i * n + nb.vertex] = (log_q[nb.edge] - top).exp() / total;
            }
        }
        Self { n, p }
    }

    /// Uniform moves to neighbors.
    pub fn simple(g: &Graph) -> Self {
        Self::from_log_conductances(g, &vec![0.0; g.num_edges()])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.n..(i + 1) * self.n]
    }

    /// `U_e = P_ij P_ji` per edge.
    pub fn u_values(&self, g: &Graph) -> Vec<f64> {
        g.edges().iter().map(|&(i, j)| self.get(i, j) * self.get(j, i)).collect()
    }

    /// Log-probability of a path under the Markov chain started at its
    /// first vertex; `-inf` when a step has probability zero.
    pub fn path_log_prob(&self, traj: &Trajectory) -> f64 {
        traj.steps().windows(2).map(|w| self.get(w[0], w[1]).ln()).sum()
    }
}

/// `P_ij = q_ij / Σ_{j'} q_ij'`.
pub fn transition_matrix(g: &Graph, q: &[f64]) -> Result<TransitionMatrix> {
    g.check_weights(q)?;
    let log_q: Vec<f64> = q.iter().map(|x| x.ln()).collect();
    Ok(TransitionMatrix::from_log_conductances(g, &log_q))
}

pub fn environment_from_fields(g: &Graph, v0: usize, beta: &[f64], phi: &[f64]) -> Result<Environment> {
    g.check_weights(beta)?;
    check_phi(g, v0, phi)?;
    let q = g
        .edges()
        .iter()
        .zip(beta)
        .map(|(&(i, j), b)| b * (phi[i] + phi[j]).exp())
        .collect::<Vec<_>>();
    g.check_weights(&q)?;
    Ok(Environment { v0, beta: beta.to_vec(), phi: phi.to_vec(), q })
}

fn check_vertex(g: &Graph, v: usize) -> Result<()> {
    if v >= g.n() {
        return Err(EnvironmentError::VertexOutOfRange { vertex: v, n: g.n() });
    }
    Ok(())
}

fn check_phi(g: &Graph, v0: usize, phi: &[f64]) -> Result<()> {
    check_vertex(g, v0)?;
    if phi.len() != g.n() {
        return Err(EnvironmentError::DimensionMismatch { expected: g.n(), got: phi.len() });
    }
    if phi[v0] != 0.0 {
        return Err(EnvironmentError::PhiNotAnchored { v0, value: phi[v0] });
    }
    Ok(())
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("shape and rate validated by caller").sample(rng)
}

/// Independent `β_e ~ Gamma(a_e, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(a: &[f64], rng: &mut R) -> Result<WeightVector> {
    let a = WeightVector::new(a.to_vec())?;
    // A Gamma draw with tiny shape can underflow to 0; clamp to the smallest
    // positive double so the field stays strictly positive.
    let draws = a.iter().map(|&x| gamma_draw(x, 1.0, rng).max(f64::MIN_POSITIVE)).collect();
    Ok(WeightVector::new(draws)?)
}

/// `ln cosh y` without overflow.
fn ln_cosh(y: f64) -> f64 {
    let t = y.abs();
    t + (-2.0 * t).exp().ln_1p() - LN_2
}

/// Exact log-density of one tree gradient with edge weight `a`.
pub fn gradient_log_density(y: f64, a: f64) -> Result<f64> {
    let norm = log_gamma(a + 0.5)? - log_gamma(a)? - 0.5 * (2.0 * PI).ln();
    Ok(norm - 0.5 * y - (a + 0.5) * ln_cosh(y))
}

/// Exact draw from [`gradient_log_density`].
///
/// Proposal `∝ e^{-y/2 - (a+½)|y|}`: rate `a` to the left of 0, rate `a+1` to
/// the right. Since `cosh y = e^{|y|}(1 + e^{-2|y|})/2`, the acceptance
/// probability is `(1 + e^{-2|y|})^{-(a+½)} ≥ 2^{-(a+½)}`.
pub fn sample_tree_gradient<R: Rng + ?Sized>(a: f64, rng: &mut R) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(DomainError(a).into());
    }
    let p_left = (a + 1.0) / (2.0 * a + 1.0);
    loop {
        let exp1 = -(1.0 - rng.random::<f64>()).ln();
        let y = if rng.random::<f64>() < p_left { -exp1 / a } else { exp1 / (a + 1.0) };
        let log_accept = -(a + 0.5) * (-2.0 * y.abs()).exp().ln_1p();
        if (1.0 - rng.random::<f64>()).ln() <= log_accept {
            return Ok(y);
        }
    }
}

fn check_tree(g: &Graph, a: &[f64], v0: usize) -> Result<()> {
    g.check_weights(a)?;
    check_vertex(g, v0)?;
    if !g.is_tree() {
        return Err(EnvironmentError::NotATree);
    }
    Ok(())
}

/// Exact φ-field on a tree: independent gradients along edges oriented
/// towards `v0`, summed outward from `φ_{v0} = 0`.
pub fn sample_phi_tree<R: Rng + ?Sized>(tree: &Graph, a: &[f64], v0: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_tree(tree, a, v0)?;
    let rooted = tree.shortest_path_tree(v0);
    let mut phi = vec![0.0; tree.n()];
    for &v in rooted.order.iter().skip(1) {
        let (parent, e) = rooted.parent[v].expect("non-root vertex has a parent");
        phi[v] = phi[parent] + sample_tree_gradient(a[e], rng)?;
    }
    Ok(phi)
}

/// Exact joint `(β, φ)` on a tree: gradient `y` first, then
/// `β_e | y ~ Gamma(a_e + ½, rate cosh y)`.
pub fn sample_tree_environment<R: Rng + ?Sized>(tree: &Graph, a: &[f64], v0: usize, rng: &mut R) -> Result<Environment> {
    check_tree(tree, a, v0)?;
    let rooted = tree.shortest_path_tree(v0);
    let mut phi = vec![0.0; tree.n()];
    let mut beta = vec![0.0; tree.num_edges()];
    for &v in rooted.order.iter().skip(1) {
        let (parent, e) = rooted.parent[v].expect("non-root vertex has a parent");
        let y = sample_tree_gradient(a[e], rng)?;
        phi[v] = phi[parent] + y;
        beta[e] = gamma_draw(a[e] + 0.5, y.cosh(), rng).max(f64::MIN_POSITIVE);
    }
    environment_from_fields(tree, v0, &beta, &phi)
}

fn cosh_m1(x: f64) -> f64 {
    // cosh x - 1 = 2 sinh²(x/2), accurate near 0
    let s = (0.5 * x).sinh();
    2.0 * s * s
}

fn tree_term(g: &Graph, beta: &[f64], phi: &[f64]) -> Result<f64> {
    let w: Vec<f64> = g
        .edges()
        .iter()
        .zip(beta)
        .map(|(&(i, j), b)| b * (phi[i] + phi[j]).exp())
        .collect();
    Ok(0.5 * g.spanning_tree_log_sum(&w)?)
}

/// `-Σ β_e (cosh(φ_i - φ_j) - 1) - Σ_{i≠v0} φ_i + ½ ln Σ_T Π β_e e^{φ_i+φ_j}`.
pub fn phi_log_density_unnormalized(g: &Graph, v0: usize, beta: &[f64], phi: &[f64]) -> Result<f64> {
    g.check_weights(beta)?;
    check_phi(g, v0, phi)?;
    let mut s = 0.0;
    for (&(i, j), b) in g.edges().iter().zip(beta) {
        s -= b * cosh_m1(phi[i] - phi[j]);
    }
    s -= phi.iter().enumerate().filter(|(v, _)| *v != v0).map(|(_, x)| x).sum::<f64>();
    Ok(s + tree_term(g, beta, phi)?)
}

struct PhiChain<'a> {
    g: &'a Graph,
    v0: usize,
    beta: Vec<f64>,
    phi: Vec<f64>,
    tree: f64,
    step: f64,
    /// Step size of the subtree moves.
    block_step: f64,
    blocks: Vec<Block>,
}

/// Descendants of a vertex in the shortest-path tree from `v0`, with the
/// edges leaving that set.
struct Block {
    members: Vec<usize>,
    cut: Vec<usize>,
}

fn subtree_blocks(g: &Graph, v0: usize) -> Vec<Block> {
    let rooted = g.shortest_path_tree(v0);
    let mut members: Vec<Vec<usize>> = (0..g.n()).map(|v| vec![v]).collect();
    for &v in rooted.order.iter().rev() {
        if let Some((p, _)) = rooted.parent[v] {
            let below = members[v].clone();
            members[p].extend(below);
        }
    }
    rooted
        .order
        .iter()
        .skip(1)
        .map(|&v| {
            let mut inside = vec![false; g.n()];
            for &u in &members[v] {
                inside[u] = true;
            }
            let cut = (0..g.num_edges()).filter(|&e| {
                let (i, j) = g.edge(e);
                inside[i] != inside[j]
            });
            Block { cut: cut.collect(), members: std::mem::take(&mut members[v]) }
        })
        .collect()
}

impl PhiChain<'_> {
    /// One Metropolis update per free coordinate; returns the number accepted.
    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut accepted = 0;
        for v in 0..self.g.n() {
            if v == self.v0 {
                continue;
            }
            let old = self.phi[v];
            let z: f64 = StandardNormal.sample(rng);
            let new = old + self.step * z;
            let mut delta = old - new;
            for nb in self.g.neighbors(v) {
                let b = self.beta[nb.edge];
                let u = self.phi[nb.vertex];
                delta -= b * (cosh_m1(new - u) - cosh_m1(old - u));
            }
            self.phi[v] = new;
            match tree_term(self.g, &self.beta, &self.phi) {
                Ok(t) if (1.0 - rng.random::<f64>()).ln() < delta + t - self.tree => {
                    self.tree = t;
                    accepted += 1;
                }
                _ => self.phi[v] = old,
            }
        }
        accepted
    }

    /// Shifts `φ` on each subtree by a common offset. On a tree this moves a
    /// single gradient, which the single-site updates only reach slowly.
    fn block_sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let mut accepted = 0;
        for b in 0..self.blocks.len() {
            let z: f64 = StandardNormal.sample(rng);
            let shift = self.block_step * z;
            let block = &self.blocks[b];
            let mut delta = -(block.members.len() as f64) * shift;
            for &e in &block.cut {
                let (i, j) = self.g.edge(e);
                let old = self.phi[i] - self.phi[j];
                // Exactly one endpoint moves; the sign depends on which.
                let new = if block.members.contains(&i) { old + shift } else { old - shift };
                delta -= self.beta[e] * (cosh_m1(new) - cosh_m1(old));
            }
            for &v in &block.members {
                self.phi[v] += shift;
            }
            match tree_term(self.g, &self.beta, &self.phi) {
                Ok(t) if (1.0 - rng.random::<f64>()).ln() < delta + t - self.tree => {
                    self.tree = t;
                    accepted += 1;
                }
                _ => {
                    for &v in &self.blocks[b].members {
                        self.phi[v] -= shift;
                    }
                }
            }
        }
        accepted
    }

    /// Independence Metropolis update of each `β_e` given `φ`, proposing from
    /// `Gamma(a_e + ½, rate cosh ∇φ_e)`. The correction is the ratio of tree
    /// sums times `(β'/β)^{-1/2}`, identically 1 on trees.
    fn beta_sweep<R: Rng + ?Sized>(&mut self, a: &[f64], rng: &mut R) {
        for (e, &(i, j)) in self.g.edges().iter().enumerate() {
            let old = self.beta[e];
            let new = gamma_draw(a[e] + 0.5, (self.phi[i] - self.phi[j]).cosh(), rng).max(f64::MIN_POSITIVE);
            self.beta[e] = new;
            match tree_term(self.g, &self.beta, &self.phi) {
                Ok(t) if (1.0 - rng.random::<f64>()).ln() < t - self.tree - 0.5 * (new / old).ln() => self.tree = t,
                _ => self.beta[e] = old,
            }
        }
    }
}

/// Runs a chain from `φ = 0`. With `joint = Some(a)` the `β` coordinates are
/// updated too, so the chain targets the joint law of `(β, φ)`. `emit` sees
/// the state after burn-in and after every further `thinning` sweeps until
/// it returns `false`.
fn run_chain<R: Rng + ?Sized>(
    g: &Graph,
    v0: usize,
    beta: Vec<f64>,
    joint: Option<&[f64]>,
    cfg: &McmcConfig,
    rng: &mut R,
    mut emit: impl FnMut(&[f64], &[f64]) -> bool,
) -> Result<()> {
    let phi = vec![0.0; g.n()];
    let tree = tree_term(g, &beta, &phi)?;
    let blocks = subtree_blocks(g, v0);
    let mut chain = PhiChain { g, v0, beta, phi, tree, step: cfg.step_size, block_step: cfg.step_size, blocks };
    let free = (g.n() - 1).max(1) as f64;
    let sweep = |chain: &mut PhiChain, rng: &mut R| {
        if let Some(a) = joint {
            chain.beta_sweep(a, rng);
        }
        (chain.sweep(rng), chain.block_sweep(rng))
    };
    for k in 0..cfg.burn_in {
        let (single, block) = sweep(&mut chain, rng);
        // Robbins–Monro on the log step sizes, frozen after burn-in.
        let gain = 1.0 / (1.0 + k as f64).sqrt();
        chain.step *= ((single as f64 / free - TARGET_ACCEPTANCE) * gain).exp();
        chain.block_step *= ((block as f64 / free - TARGET_ACCEPTANCE) * gain).exp();
    }
    loop {
        for _ in 0..cfg.thinning {
            sweep(&mut chain, rng);
        }
        if !emit(&chain.beta, &chain.phi) {
            return Ok(());
        }
    }
}

/// Approximate draw from `p_β(φ)` by random-walk Metropolis started at
/// `φ = 0`; each of the `burn_in + thinning` sweeps updates every free
/// coordinate and then every subtree of the shortest-path tree from `v0`.
pub fn sample_phi_mcmc<R: Rng + ?Sized>(
    g: &Graph,
    v0: usize,
    beta: &[f64],
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    g.check_weights(beta)?;
    check_vertex(g, v0)?;
    cfg.validate()?;
    let mut out = Vec::new();
    run_chain(g, v0, beta.to_vec(), None, cfg, rng, |_, phi| {
        out = phi.to_vec();
        false
    })?;
    Ok(out)
}

/// One environment: fresh `β`, then `φ | β` by MCMC.
pub fn sample_environment_mcmc<R: Rng + ?Sized>(
    g: &Graph,
    a: &[f64],
    v0: usize,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<Environment> {
    let beta = sample_beta(a, rng)?;
    let phi = sample_phi_mcmc(g, v0, &beta, cfg, rng)?;
    environment_from_fields(g, v0, &beta, &phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnvSampler {
    /// Exact; trees only.
    Tree,
    Mcmc(McmcConfig),
}

/// `count` environments. Draw `k` uses stream `(seed, k)`; when an MCMC
/// config shares chains across draws, chain `c` uses stream `(seed, c)`.
pub fn sample_environments(
    g: &Graph,
    a: &[f64],
    v0: usize,
    count: usize,
    sampler: &EnvSampler,
    seed: u64,
) -> Result<Vec<Environment>> {
    g.check_weights(a)?;
    check_vertex(g, v0)?;
    match sampler {
        EnvSampler::Tree => (0..count)
            .into_par_iter()
            .map(|k| sample_tree_environment(g, a, v0, &mut rng::stream(seed, k as u64)))
            .collect(),
        EnvSampler::Mcmc(cfg) => {
            cfg.validate()?;
            match cfg.chains {
                None => (0..count)
                    .into_par_iter()
                    .map(|k| sample_environment_mcmc(g, a, v0, cfg, &mut rng::stream(seed, k as u64)))
                    .collect(),
                Some(c) => {
                    let per_chain: Vec<usize> = (0..c).map(|i| count / c + usize::from(i < count % c)).collect();
                    let chunks: Vec<Vec<Environment>> = per_chain
                        .into_par_iter()
                        .enumerate()
                        .map(|(ci, want)| joint_chain(g, a, v0, cfg, want, &mut rng::stream(seed, ci as u64)))
                        .collect::<Result<_>>()?;
                    Ok(chunks.into_iter().flatten().collect())
                }
            }
        }
    }
}

/// `want` correlated draws from one long chain on `(β, φ)`.
fn joint_chain<R: Rng + ?Sized>(
    g: &Graph,
    a: &[f64],
    v0: usize,
    cfg: &McmcConfig,
    want: usize,
    rng: &mut R,
) -> Result<Vec<Environment>> {
    let mut out = Vec::with_capacity(want);
    if want == 0 {
        return Ok(out);
    }
    let beta = sample_beta(a, rng)?.into_inner();
    let mut err = None;
    run_chain(g, v0, beta, Some(a), cfg, rng, |beta, phi| {
        match environment_from_fields(g, v0, beta, phi) {
            Ok(env) => out.push(env),
            Err(e) => err = Some(e),
        }
        err.is_none() && out.len() < want
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Empirical transition matrix of one long ERRW trajectory: `N_ij / N_i`,
/// uniform over neighbors where `N_i = 0`.
pub fn sample_environment_longrun<R: Rng + ?Sized>(
    g: &Graph,
    a: &[f64],
    v0: usize,
    t_long: usize,
    rng: &mut R,
) -> Result<TransitionMatrix> {
    let traj = simulate_trajectory(g, a, v0, t_long, rng)?;
    let counts = transition_counts(g, &traj)?;
    let n = g.n();
    let mut p = TransitionMatrix::simple(g);
    for i in 0..n {
        let ni = counts.departures[i];
        if ni == 0 {
            continue;
        }
        for nb in g.neighbors(i) {
            p.p[i * n + nb.vertex] = counts.directed(g, i, nb.vertex) as f64 / ni as f64;
        }
    }
    Ok(p)
}

/// First time a walk driven by `p` from `start` has visited every vertex
/// (`start` counts), or `None` if that takes more than `cap` steps.
pub fn srw_cover_time<R: Rng + ?Sized>(g: &Graph, p: &TransitionMatrix, start: usize, cap: usize, rng: &mut R) -> Option<usize> {
    let mut seen = vec![false; g.n()];
    seen[start] = true;
    let mut left = g.n() - 1;
    let mut x = start;
    for t in 1..=cap {
        if left == 0 {
            return Some(t - 1);
        }
        let u = rng.random::<f64>();
        let nbrs = g.neighbors(x);
        let mut acc = 0.0;
        let mut next = nbrs[nbrs.len() - 1].vertex;
        for nb in nbrs {
            acc += p.get(x, nb.vertex);
            if u < acc {
                next = nb.vertex;
                break;
            }
        }
        x = next;
        if !seen[x] {
            seen[x] = true;
            left -= 1;
        }
    }
    (left == 0).then_some(cap)
}

/// `ln Z` of the mixing measure:
/// `(|V|-1)/2 ln π - (1 - |V| + Σ a_e) ln 2 + Σ_e ln Γ(a_e) - Σ_v ln Γ(½ o_v)`.
pub fn log_normalizer_closed(g: &Graph, a: &[f64], v0: usize) -> Result<f64> {
    g.check_weights(a)?;
    check_vertex(g, v0)?;
    let n = g.n() as f64;
    let sum_a: f64 = a.iter().sum();
    let mut z = 0.5 * (n - 1.0) * PI.ln() - (1.0 - n + sum_a) * LN_2;
    for &ae in a {
        z += log_gamma(ae)?;
    }
    for (v, av) in g.vertex_sums(a).into_iter().enumerate() {
        let o = if v == v0 { av } else { av + 1.0 };
        z -= log_gamma(0.5 * o)?;
    }
    Ok(z)
}

fn check_e0(g: &Graph, v0: usize, e0: usize) -> Result<()> {
    check_vertex(g, v0)?;
    if e0 >= g.num_edges() {
        return Err(EnvironmentError::EdgeOutOfRange { edge: e0, num_edges: g.num_edges() });
    }
    let (i, j) = g.edge(e0);
    if i != v0 && j != v0 {
        return Err(EnvironmentError::E0NotIncident { e0, v0 });
    }
    Ok(())
}

/// Unnormalized log of the mixing integrand
/// `w_{v0}^{1/2} Π w_e^{a_e-1} / Π_v w_v^{(a_v+1)/2} · (Σ_T Π_{e∈T} w_e)^{1/2}`.
fn mixing_log_integrand(g: &Graph, a: &[f64], v0: usize, w: &[f64]) -> Result<f64> {
    Ok(mixing_log_prefactor(g, a, v0, w) + 0.5 * g.spanning_tree_log_sum(w)?)
}

fn mixing_log_prefactor(g: &Graph, a: &[f64], v0: usize, w: &[f64]) -> f64 {
    let a_v = g.vertex_sums(a);
    let w_v = g.vertex_sums(w);
    let mut s = 0.5 * w_v[v0].ln();
    for (&ae, &we) in a.iter().zip(w) {
        s += (ae - 1.0) * we.ln();
    }
    for (av, wv) in a_v.iter().zip(&w_v) {
        s -= 0.5 * (av + 1.0) * wv.ln();
    }
    s
}

/// Log-density of the mixing measure on `{w : w_{e0} = 1}` with respect to
/// Lebesgue measure on the other coordinates.
pub fn mixing_log_density(g: &Graph, a: &[f64], v0: usize, e0: usize, w: &[f64]) -> Result<f64> {
    g.check_weights(a)?;
    g.check_weights(w)?;
    check_e0(g, v0, e0)?;
    if w[e0] != 1.0 {
        return Err(EnvironmentError::E0NotUnit(w[e0]));
    }
    Ok(mixing_log_integrand(g, a, v0, w)? - log_normalizer_closed(g, a, v0)?)
}

/// `Z` by direct quadrature over the free coordinates (at most two).
/// A test oracle for [`log_normalizer_closed`]; returns `(ln Z, error of Z)`.
pub fn log_normalizer_quadrature(g: &Graph, a: &[f64], v0: usize, e0: usize, rel_tol: f64) -> Result<(f64, f64)> {
    g.check_weights(a)?;
    check_e0(g, v0, e0)?;
    let free: Vec<usize> = (0..g.num_edges()).filter(|&e| e != e0).collect();
    let mut w = vec![1.0; g.num_edges()];
    let mut failure = None;
    // The tree sum is enumerated: the Laplacian factorization loses its
    // pivots at the far ends of the |ln w| ≤ 40 window.
    let mut eval = |w: &[f64]| match g.spanning_tree_log_sum_enumerated(w) {
        Ok(t) => (mixing_log_prefactor(g, a, v0, w) + 0.5 * t).exp(),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let est: Estimate = match free.len() {
        0 => Estimate { value: eval(&w), abs_error: 0.0 },
        1 => integrate_positive(
            |x| {
                w[free[0]] = x;
                eval(&w)
            },
            0.0,
            rel_tol,
        ),
        2 => integrate_positive_2d(
            |x, y| {
                w[free[0]] = x;
                w[free[1]] = y;
                eval(&w)
            },
            0.0,
            rel_tol,
        ),
        k => return Err(EnvironmentError::TooManyFreeEdges(k)),
    };
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((est.value.ln(), est.abs_error))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCheck {
    pub name: String,
    /// Level the statistic is compared against.
    pub threshold: f64,
    /// Theoretical upper bound on the exceedance probability (capped at 1).
    pub bound: f64,
    pub exceedances: usize,
    pub samples: usize,
    pub frequency: f64,
    /// Binomial standard error at probability `bound`.
    pub sigma: f64,
    pub violated: bool,
}

impl TailCheck {
    fn new(name: String, threshold: f64, bound: f64, exceedances: usize, samples: usize) -> Self {
        let bound = bound.min(1.0);
        let frequency = exceedances as f64 / samples as f64;
        let sigma = (bound * (1.0 - bound) / samples as f64).sqrt();
        let violated = bound < 1.0 && frequency > bound + 3.0 * sigma;
        Self { name, threshold, bound, exceedances, samples, frequency, sigma, violated }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub delta: f64,
    pub checks: Vec<TailCheck>,
}

impl TailReport {
    pub fn any_violation(&self) -> bool {
        self.checks.iter().any(|c| c.violated)
    }
}

pub const MIN_TAIL_SAMPLES: usize = 1000;

/// Empirical exceedance frequencies of the φ- and β-field tail bounds:
///
/// * `P(|φ_i - φ_j| ≥ s) ≤ 2^{2a_e+1} e^{-a_e s}` per edge, `s ∈ {2, 4, 6}`;
/// * `P(sup |φ| > diam·((2ā+1)/a̲ + ln(n/δ)/a̲)) ≤ δ`;
/// * on trees, `P(Σ_e |∇φ_e| ≥ 2(c+ā+3)n/a̲) ≤ e^{-cn}` with `c = ln(1/δ)/n`;
/// * `P(β_e ≤ 0.01) ≤ 0.01^{a_e} / Γ(a_e + 1)` per edge.
pub fn tail_diagnostics(g: &Graph, a: &[f64], samples: &[Environment], delta: f64) -> Result<TailReport> {
    g.check_weights(a)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(EnvironmentError::InvalidDelta(delta));
    }
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(EnvironmentError::TooFewSamples { need: MIN_TAIL_SAMPLES, got: samples.len() });
    }
    for env in samples {
        check_phi(g, env.v0, &env.phi)?;
        if env.beta.len() != g.num_edges() {
            return Err(EnvironmentError::DimensionMismatch { expected: g.num_edges(), got: env.beta.len() });
        }
    }
    let n = g.n() as f64;
    let k = samples.len();
    let a_lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_hi = a.iter().copied().fold(0.0, f64::max);
    let mut checks = Vec::new();

    for (e, &(i, j)) in g.edges().iter().enumerate() {
        for s in [2.0, 4.0, 6.0] {
            let bound = (2.0 * a[e] + 1.0) * LN_2 - a[e] * s;
            let hits = samples.iter().filter(|env| (env.phi[i] - env.phi[j]).abs() >= s).count();
            checks.push(TailCheck::new(format!("gradient[{i}-{j}] s={s}"), s, bound.exp(), hits, k));
        }
    }

    let diam = g.diameter() as f64;
    let s = diam * ((2.0 * a_hi + 1.0) / a_lo + (n / delta).ln() / a_lo);
    let hits = samples
        .iter()
        .filter(|env| env.phi.iter().fold(0.0_f64, |m, x| m.max(x.abs())) > s)
        .count();
    checks.push(TailCheck::new("sup_phi".into(), s, delta, hits, k));

    if g.is_tree() {
        let c = -delta.ln() / n;
        let s = 2.0 * (c + a_hi + 3.0) / a_lo * n;
        let hits = samples
            .iter()
            .filter(|env| g.edges().iter().map(|&(i, j)| (env.phi[i] - env.phi[j]).abs()).sum::<f64>() >= s)
            .count();
        checks.push(TailCheck::new("gradient_sum".into(), s, (-c * n).exp(), hits, k));
    }

    let eps: f64 = 0.01;
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let bound = (a[e] * eps.ln() - log_gamma(a[e] + 1.0)?).exp();
        let hits = samples.iter().filter(|env| env.beta[e] <= eps).count();
        checks.push(TailCheck::new(format!("beta[{i}-{j}] <= {eps}"), eps, bound, hits, k));
    }
    Ok(TailReport { delta, checks })
}
