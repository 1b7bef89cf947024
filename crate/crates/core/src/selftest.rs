//! Reduced-scale versions of the acceptance checks, quick enough to run from
//! the command line. Each check reports pass/fail with a one-line detail.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::environment::{
    gradient_log_density, log_normalizer_closed, log_normalizer_quadrature, sample_environments, srw_cover_time,
    tail_diagnostics, EnvSampler, McmcConfig,
};
use crate::errw::{enumerate_walks, log_likelihood, simulate_batch, transition_counts};
use crate::estimator::{divergence_d, estimate, recover_weights, theoretical_bounds, MomentEstimates, PairChoice};
use crate::graph::families::{cycle, path, star, triangle};
use crate::graph::Graph;
use crate::moments::{kl_mixing, MomentOracle};
use crate::quadrature::integrate;
use crate::rng;
use crate::special::{digamma, log_gamma, trigamma, EULER_GAMMA};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), passed, detail }
}

fn normalization() -> CheckResult {
    let mut worst: f64 = 0.0;
    for g in [triangle(), path(3), star(3)] {
        let a: Vec<f64> = (0..g.num_edges()).map(|e| [0.5, 1.0, 2.0][e % 3]).collect();
        for t in 0..=4 {
            let walks = enumerate_walks(&g, 0, t);
            let total: f64 = walks.iter().map(|w| log_likelihood(&g, &a, 0, std::slice::from_ref(w)).unwrap().exp()).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    check("likelihood_normalization", worst < 1e-10, format!("max |sum - 1| = {worst:.2e}"))
}

fn simulator_agreement(seed: u64) -> CheckResult {
    let g = triangle();
    let k = 20_000;
    let batch = simulate_batch(&g, &[1.0; 3], 0, 2, k, seed).unwrap();
    let mut freq: HashMap<Vec<usize>, usize> = HashMap::new();
    for t in &batch {
        *freq.entry(t.steps().to_vec()).or_default() += 1;
    }
    let mut worst: f64 = 0.0;
    for w in enumerate_walks(&g, 0, 2) {
        let p = log_likelihood(&g, &[1.0; 3], 0, std::slice::from_ref(&w)).unwrap().exp();
        let f = *freq.get(w.steps()).unwrap_or(&0) as f64 / k as f64;
        worst = worst.max((f - p).abs() / (p * (1.0 - p) / k as f64).sqrt());
    }
    check("simulator_vs_likelihood", worst < 4.0, format!("max z = {worst:.2}"))
}

fn exchangeability() -> CheckResult {
    let g = triangle();
    let a = [0.5, 1.0, 2.0];
    let mut seen: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
    let mut bad = 0;
    for t in 0..=5 {
        for w in enumerate_walks(&g, 0, t) {
            let c = transition_counts(&g, &w).unwrap();
            let key = ((0..3).map(|e| c.undirected(e)).collect(), c.departures.clone());
            let ll = log_likelihood(&g, &a, 0, std::slice::from_ref(&w)).unwrap();
            if let Some(&prev) = seen.get(&key) {
                bad += usize::from(prev != ll);
            } else {
                seen.insert(key, ll);
            }
        }
    }
    check("partial_exchangeability", bad == 0, format!("{bad} mismatching classes"))
}

fn normalizer() -> CheckResult {
    let g = path(3);
    let e0 = g.edge_index(0, 1).unwrap();
    let (zq, _) = log_normalizer_quadrature(&g, &[1.0; 2], 1, e0, 1e-10).unwrap();
    let zc = log_normalizer_closed(&g, &[1.0; 2], 1).unwrap();
    let rel = (zq.exp() / PI - 1.0).abs();
    check("normalizer", rel < 1e-6 && (zc - PI.ln()).abs() < 1e-12, format!("quadrature Z/pi - 1 = {rel:.2e}"))
}

fn magic_formula(seed: u64) -> CheckResult {
    let g = triangle();
    let k = 4000;
    let envs = sample_environments(&g, &[1.0; 3], 0, k, &EnvSampler::Mcmc(McmcConfig::default()), seed).unwrap();
    let mats: Vec<_> = envs.iter().map(|e| e.transition_matrix(&g)).collect();
    let mut worst: f64 = 0.0;
    for t in 1..=2 {
        for w in enumerate_walks(&g, 0, t) {
            let xs: Vec<f64> = mats.iter().map(|p| p.path_log_prob(&w).exp()).collect();
            let mean = xs.iter().sum::<f64>() / k as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            let p = log_likelihood(&g, &[1.0; 3], 0, std::slice::from_ref(&w)).unwrap().exp();
            worst = worst.max((mean - p).abs() / (var / k as f64).sqrt());
        }
    }
    check("magic_formula", worst < 4.0, format!("max z = {worst:.2} over {k} MCMC environments"))
}

fn tree_moments(seed: u64) -> CheckResult {
    let g = star(3);
    let a = [1.0, 0.5, 2.0];
    let center = (0..4).find(|&v| g.degree(v) == 3).unwrap();
    let oracle = MomentOracle::new(&g, &a, center).unwrap();
    let k = 20_000;
    let envs = sample_environments(&g, &a, center, k, &EnvSampler::Tree, seed).unwrap();
    let us: Vec<Vec<f64>> = envs.iter().map(|e| e.transition_matrix(&g).u_values(&g)).collect();
    let mut worst: f64 = 0.0;
    for e in 0..3 {
        let xs: Vec<f64> = us.iter().map(|u| u[e]).collect();
        let mean = xs.iter().sum::<f64>() / k as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        worst = worst.max((mean - oracle.expected_u(e).unwrap()).abs() / (var / k as f64).sqrt());
    }
    check("moments_tree_sampler", worst < 4.0, format!("max z = {worst:.2}"))
}

fn gradient_density() -> CheckResult {
    let norm = integrate(|y| gradient_log_density(y, 1.0).unwrap().exp(), -200.0, 200.0, 1e-13, 1e-12).value;
    let mean = integrate(|y| y * gradient_log_density(y, 1.0).unwrap().exp(), -200.0, 200.0, 1e-13, 1e-12).value;
    check(
        "gradient_density",
        (norm - 1.0).abs() < 1e-8 && (mean + LN_2).abs() < 1e-8,
        format!("integral - 1 = {:.1e}, mean = {mean:.6}", norm - 1.0),
    )
}

fn kl_taylor() -> CheckResult {
    let g = triangle();
    let e = g.edge_index(1, 2).unwrap();
    let coef = (2.0 * trigamma(1.0).unwrap() - trigamma(1.5).unwrap()) / 4.0;
    let mut worst: f64 = 0.0;
    for eps in [1e-2, 1e-3] {
        let mut at = vec![1.0; 3];
        at[e] += eps;
        let kl = kl_mixing(&g, 0, &[1.0; 3], &at).unwrap();
        worst = worst.max((kl / (eps * eps) / coef - 1.0).abs());
    }
    check("kl_taylor", worst < 1e-2, format!("max relative gap = {worst:.2e}"))
}

fn exact_recovery(seed: u64) -> CheckResult {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let graphs: Vec<Graph> = vec![triangle(), cycle(4), star(3), path(4), cycle(5)];
    let mut worst: f64 = 0.0;
    for g in &graphs {
        let a: Vec<f64> = (0..g.num_edges()).map(|_| r.random_range(0.5..2.0)).collect();
        let v0 = (0..g.n()).find(|&v| g.degree(v) >= 2).unwrap();
        let oracle = MomentOracle::new(g, &a, v0).unwrap();
        let est = MomentEstimates::exact(&oracle).unwrap();
        let rep = recover_weights(g, v0, &est, PairChoice::Canonical).unwrap();
        worst = worst.max(divergence_d(&a, &rep.a_hat).unwrap());
    }
    check("exact_recovery", worst < 1e-10, format!("max d = {worst:.2e}"))
}

fn end_to_end(seed: u64) -> CheckResult {
    let g = triangle();
    let trajs = simulate_batch(&g, &[1.0; 3], 0, 1000, 2000, seed).unwrap();
    let rep = estimate(&g, &trajs, 30, PairChoice::Canonical, Some(&[1.0; 3])).unwrap();
    let d = rep.d.unwrap_or(f64::INFINITY);
    check("end_to_end", d <= 0.3, format!("d = {d:.3} (K = 2000, T = 1000, m = 30)"))
}

fn tails(seed: u64) -> CheckResult {
    let g = path(6);
    let envs = sample_environments(&g, &[1.0; 5], 0, 2000, &EnvSampler::Tree, seed).unwrap();
    let rep = tail_diagnostics(&g, &[1.0; 5], &envs, 0.1).unwrap();
    let n_bad = rep.checks.iter().filter(|c| c.violated).count();
    check("tail_bounds", n_bad == 0, format!("{n_bad} of {} checks violated", rep.checks.len()))
}

fn cover_bound(seed: u64) -> CheckResult {
    let g = triangle();
    let delta = 0.1;
    let b = theoretical_bounds(3, 1, 1.0, 1.0, delta).unwrap();
    let envs = sample_environments(&g, &[1.0; 3], 0, 200, &EnvSampler::Mcmc(McmcConfig::default()), seed).unwrap();
    let cap = b.ln_tcov.exp().min(1e7) as usize;
    let over = envs
        .par_iter()
        .enumerate()
        .filter(|(k, e)| {
            let mut r = rng::stream(seed ^ 0x5eed, *k as u64);
            srw_cover_time(&g, &e.transition_matrix(&g), 0, cap, &mut r).is_none_or(|t| t as f64 > b.ln_tcov.exp())
        })
        .count();
    check("cover_bound", (over as f64) / 200.0 <= delta, format!("{over}/200 environments above the bound"))
}

fn special_functions() -> CheckResult {
    let d = (digamma(1.0).unwrap() + EULER_GAMMA).abs();
    let t = (trigamma(1.0).unwrap() - PI * PI / 6.0).abs();
    let l = (log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs();
    check("special_functions", d.max(t).max(l) < 1e-12, format!("errors {d:.1e}, {t:.1e}, {l:.1e}"))
}

/// Runs every check; randomized ones draw from streams under `seed`.
pub fn run(seed: u64) -> Vec<CheckResult> {
    vec![
        normalization(),
        simulator_agreement(seed),
        exchangeability(),
        normalizer(),
        magic_formula(seed.wrapping_add(1)),
        tree_moments(seed.wrapping_add(2)),
        gradient_density(),
        kl_taylor(),
        exact_recovery(seed.wrapping_add(3)),
        end_to_end(seed.wrapping_add(4)),
        tails(seed.wrapping_add(5)),
        cover_bound(seed.wrapping_add(6)),
        special_functions(),
    ]
}
