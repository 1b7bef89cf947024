//! Distributional checks on the environment samplers and the walk simulator.

mod common;

use std::collections::HashMap;

use errw_lab::environment::{gradient_log_density, sample_environment_longrun, sample_environments, EnvSampler};
use errw_lab::errw::{enumerate_walks, log_likelihood, simulate_batch};
use errw_lab::graph::families::{path, triangle};
use errw_lab::quadrature::integrate;
use errw_lab::{rng, Environment, Graph, McmcConfig, MomentOracle};
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

use common::{mean_se, random_connected_graph};

/// CDF of the tree gradient law on a grid of spacing `h` over `[-L, L]`,
/// interpolated linearly.
struct GradientCdf {
    lo: f64,
    h: f64,
    values: Vec<f64>,
}

impl GradientCdf {
    fn new(a: f64) -> Self {
        let (lo, hi, h) = (-60.0, 60.0, 0.01);
        let cells = ((hi - lo) / h) as usize;
        let mut values = vec![0.0];
        for k in 0..cells {
            let x = lo + k as f64 * h;
            let mass = integrate(|y| gradient_log_density(y, a).unwrap().exp(), x, x + h, 1e-16, 1e-12).value;
            values.push(values[k] + mass);
        }
        Self { lo, h, values }
    }

    fn at(&self, y: f64) -> f64 {
        let t = (y - self.lo) / self.h;
        if t <= 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return 1.0;
        }
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

fn ks_distance(mut xs: Vec<f64>, cdf: &GradientCdf) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.at(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Child-minus-parent gradients along the shortest-path tree from `v0`.
fn gradients(tree: &Graph, envs: &[Environment], v0: usize) -> Vec<(usize, Vec<f64>)> {
    let rooted = tree.shortest_path_tree(v0);
    rooted
        .order
        .iter()
        .skip(1)
        .map(|&v| {
            let (parent, e) = rooted.parent[v].unwrap();
            (e, envs.iter().map(|env| env.phi[v] - env.phi[parent]).collect())
        })
        .collect()
}

fn assert_invariants(g: &Graph, envs: &[Environment], v0: usize) {
    for env in envs {
        assert_eq!(env.phi[v0], 0.0);
        for (e, &(i, j)) in g.edges().iter().enumerate() {
            let q = env.beta[e] * (env.phi[i] + env.phi[j]).exp();
            assert!(env.q[e] > 0.0 && env.q[e].is_finite());
            assert!((env.q[e] / q - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn tree_and_mcmc_gradients_follow_the_exact_law() {
    let mut r = ChaCha8Rng::seed_from_u64(31);
    let trees = [
        (path(8), 3usize),
        (random_connected_graph(&mut r, 8, 0.0), 0usize),
    ];
    let k = 10_000;
    let mut cdfs: HashMap<u64, GradientCdf> = HashMap::new();
    for (case, (tree, v0)) in trees.iter().enumerate() {
        let a: Vec<f64> = (0..tree.num_edges()).map(|e| [0.5, 1.0, 2.0][(e + case) % 3]).collect();
        let exact = sample_environments(tree, &a, *v0, k, &EnvSampler::Tree, 300 + case as u64).unwrap();
        let mcmc =
            sample_environments(tree, &a, *v0, k, &EnvSampler::Mcmc(McmcConfig::default()), 400 + case as u64).unwrap();
        assert_invariants(tree, &exact, *v0);
        assert_invariants(tree, &mcmc, *v0);
        for envs in [&exact, &mcmc] {
            for (e, ys) in gradients(tree, envs, *v0) {
                let cdf = cdfs.entry(a[e].to_bits()).or_insert_with(|| GradientCdf::new(a[e]));
                let d = ks_distance(ys, cdf);
                assert!(d < 0.02, "case {case}, edge {e}: KS distance {d:.4}");
            }
        }
    }
}

#[test]
fn gradient_cdf_reaches_one() {
    let cdf = GradientCdf::new(1.0);
    assert!((cdf.values.last().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn mcmc_samples_satisfy_invariants_on_cyclic_graphs() {
    let mut r = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let g = random_connected_graph(&mut r, 6, 0.5);
        let a: Vec<f64> = (0..g.num_edges()).map(|_| r.random_range(0.5..2.0)).collect();
        let envs = sample_environments(&g, &a, 0, 50, &EnvSampler::Mcmc(McmcConfig::default()), 9).unwrap();
        assert_invariants(&g, &envs, 0);
        let joint = McmcConfig { chains: Some(2), ..McmcConfig::default() };
        let envs = sample_environments(&g, &a, 0, 50, &EnvSampler::Mcmc(joint), 9).unwrap();
        assert_invariants(&g, &envs, 0);
    }
}

#[test]
fn simulator_matches_likelihood_up_to_four_steps() {
    let g = triangle();
    let k = 100_000;
    let batch = simulate_batch(&g, &[1.0; 3], 0, 4, k, 77).unwrap();
    let mut freq: HashMap<&[usize], usize> = HashMap::new();
    for t in &batch {
        *freq.entry(t.steps()).or_default() += 1;
    }
    for t in 1..=4 {
        for w in enumerate_walks(&g, 0, t) {
            let p = log_likelihood(&g, &[1.0; 3], 0, std::slice::from_ref(&w)).unwrap().exp();
            if p < 0.01 {
                continue;
            }
            // Prefix frequencies of the length-4 runs.
            let count: usize = freq.iter().filter(|(s, _)| s.starts_with(w.steps())).map(|(_, c)| c).sum();
            let f = count as f64 / k as f64;
            let z = (f - p).abs() / (p * (1.0 - p) / k as f64).sqrt();
            assert!(z <= 4.0, "{:?}: frequency {f} vs {p} (z = {z:.2})", w.steps());
        }
    }
}

#[test]
fn first_step_is_fair_on_the_triangle() {
    let k = 10_000;
    let batch = simulate_batch(&triangle(), &[1.0; 3], 0, 10, k, 2024).unwrap();
    let ones = batch.iter().filter(|t| t.steps()[1] == 1).count() as f64 / k as f64;
    assert!((ones - 0.5).abs() <= 3.0 * (0.25 / k as f64).sqrt());
}

#[test]
fn long_runs_reproduce_the_opposite_edge_moment() {
    let g = triangle();
    let e12 = g.edge_index(1, 2).unwrap();
    let us: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|k| {
            let p = sample_environment_longrun(&g, &[1.0; 3], 0, 10_000, &mut rng::stream(88, k)).unwrap();
            p.u_values(&g)[e12]
        })
        .collect();
    let (m, se) = mean_se(&us);
    assert!((m - 2.0 / 9.0).abs() <= 3.0 * se, "{m} vs 2/9 (se {se})");
}

/// Environment Monte Carlo of all five moments on random instances. Takes
/// several minutes on one core.
#[test]
#[ignore = "long-running: 20 instances at 10^5 MCMC environments each"]
fn moments_match_environment_monte_carlo() {
    let mut r = ChaCha8Rng::seed_from_u64(606);
    let k = 100_000;
    let mut done = 0;
    while done < 20 {
        let n = r.random_range(3..=6);
        let g = random_connected_graph(&mut r, n, 0.4);
        let a: Vec<f64> = (0..g.num_edges()).map(|_| r.random_range(0.5..=2.0)).collect();
        let starts: Vec<usize> = (0..n).filter(|&v| g.degree(v) >= 2).collect();
        if starts.is_empty() {
            continue;
        }
        let v0 = starts[r.random_range(0..starts.len())];
        let oracle = MomentOracle::new(&g, &a, v0).unwrap();
        let sampler = if g.is_tree() { EnvSampler::Tree } else { EnvSampler::Mcmc(McmcConfig::default()) };
        let envs = sample_environments(&g, &a, v0, k, &sampler, 700 + done).unwrap();
        let us: Vec<Vec<f64>> = envs.iter().map(|env| env.transition_matrix(&g).u_values(&g)).collect();
        let check = |xs: Vec<f64>, want: f64, what: &str| {
            let (m, se) = mean_se(&xs);
            assert!((m - want).abs() <= 4.0 * se, "instance {done} {what}: {m} vs {want} (se {se})");
        };
        for e in 0..g.num_edges() {
            check(us.iter().map(|u| u[e].sqrt()).collect(), oracle.expected_sqrt_u(e).unwrap(), "E sqrt U");
            check(us.iter().map(|u| u[e]).collect(), oracle.expected_u(e).unwrap(), "E U");
            check(us.iter().map(|u| u[e] * u[e]).collect(), oracle.expected_u_sq(e).unwrap(), "E U^2");
        }
        for p in errw_lab::estimator::adjacent_pairs(&g) {
            check(us.iter().map(|u| u[p.e] * u[p.f]).collect(), oracle.expected_uu(p.e, p.f).unwrap(), "E UU'");
        }
        done += 1;
    }
}
