//! Property tests for the structural invariants of each module.

mod common;

use errw_lab::errw::{cover_statistics, local_times, simulate_batch, simulate_trajectory};
use errw_lab::estimator::{recover_weights, solve_weight};
use errw_lab::graph::families::path;
use errw_lab::moments::kl_mixing;
use errw_lab::{rng, Graph, MomentEstimates, MomentOracle, PairChoice};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_connected_graph, spanning_tree_sum_brute};

fn log_uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    r.random_range(lo.ln()..hi.ln()).exp()
}

/// Random connected graph with weights drawn from `[lo, hi]` log-uniformly.
fn instance(seed: u64, n: usize, p_extra: f64, lo: f64, hi: f64) -> (Graph, Vec<f64>, ChaCha8Rng) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let g = random_connected_graph(&mut r, n, p_extra);
    let w = (0..g.num_edges()).map(|_| log_uniform(&mut r, lo, hi)).collect();
    (g, w, r)
}

fn pick_start(g: &Graph, r: &mut ChaCha8Rng) -> Option<usize> {
    let starts: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) >= 2).collect();
    (!starts.is_empty()).then(|| starts[r.random_range(0..starts.len())])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_tree_matches_enumeration(seed: u64, n in 2usize..=8, p in 0.0f64..0.5) {
        let (g, w, _) = instance(seed, n, p, 0.1, 10.0);
        prop_assume!(g.num_edges() <= 16);
        let brute = spanning_tree_sum_brute(&g, &w);
        let fast = g.spanning_tree_log_sum(&w).unwrap().exp();
        prop_assert!((fast / brute - 1.0).abs() < 1e-9, "{fast} vs {brute}");
        let enumerated = g.spanning_tree_log_sum_enumerated(&w).unwrap().exp();
        prop_assert!((enumerated / brute - 1.0).abs() < 1e-9);
    }

    #[test]
    fn resistance_is_symmetric(seed: u64, n in 2usize..=8, p in 0.0f64..0.8) {
        let (g, q, _) = instance(seed, n, p, 0.05, 20.0);
        for i in 0..n {
            for j in 0..n {
                let rij = g.effective_resistance(&q, i, j).unwrap();
                let rji = g.effective_resistance(&q, j, i).unwrap();
                prop_assert!((rij - rji).abs() <= 1e-12 * rij.max(1.0));
            }
        }
    }

    #[test]
    fn rayleigh_monotonicity(seed: u64, n in 2usize..=8, p in 0.0f64..0.8, factor in 1.0f64..10.0) {
        let (g, q, mut r) = instance(seed, n, p, 0.1, 10.0);
        let before = g.resistance_matrix(&q).unwrap();
        let mut raised = q.clone();
        raised[r.random_range(0..g.num_edges())] *= factor;
        let after = g.resistance_matrix(&raised).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(*a <= b + 1e-12 * b.max(1.0), "{a} > {b}");
        }
    }

    #[test]
    fn resistance_comparison(seed: u64, n in 2usize..=8, p in 0.0f64..0.8, lo in 0.1f64..1.0, spread in 1.0f64..5.0) {
        let (g, q, mut r) = instance(seed, n, p, 0.1, 10.0);
        let hi = lo * spread;
        // q_e / q'_e lies in [lo, hi].
        let q2: Vec<f64> = q.iter().map(|x| x / r.random_range(lo..=hi)).collect();
        let r1 = g.resistance_matrix(&q).unwrap();
        let r2 = g.resistance_matrix(&q2).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            if *a > 0.0 {
                let ratio = b / a;
                prop_assert!(ratio >= lo * (1.0 - 1e-10) && ratio <= hi * (1.0 + 1e-10), "{ratio} not in [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn shortest_path_tree_depth_within_diameter(seed: u64, n in 2usize..=12, p in 0.0f64..0.6) {
        let (g, _, _) = instance(seed, n, p, 1.0, 2.0);
        let diam = g.diameter();
        for root in 0..n {
            let t = g.shortest_path_tree(root);
            prop_assert!(t.max_depth() <= diam);
            prop_assert_eq!(t.max_depth(), g.eccentricity(root));
        }
    }

    #[test]
    fn local_time_conservation(seed: u64, n in 2usize..=7, p in 0.0f64..0.6, t in 0usize..200) {
        let (g, a, mut r) = instance(seed, n, p, 0.5, 2.0);
        let v0 = r.random_range(0..n);
        let traj = simulate_trajectory(&g, &a, v0, t, &mut r).unwrap();
        let lt = local_times(&g, &a, &traj).unwrap();
        let excess: f64 = lt.values.iter().zip(&a).map(|(l, a)| l - a).sum();
        prop_assert!((excess - t as f64).abs() < 1e-9);
        prop_assert!(lt.values.iter().zip(&a).all(|(l, a)| l >= a));
        let cover = cover_statistics(n, &traj, 1);
        prop_assert_eq!(cover.visits.iter().sum::<u64>(), t as u64 + 1);
    }

    #[test]
    fn simulation_is_reproducible(seed: u64, k in 1usize..6) {
        let g = path(4);
        let a = [1.0, 0.5, 2.0];
        let x = simulate_batch(&g, &a, 1, 30, k, seed).unwrap();
        let y = simulate_batch(&g, &a, 1, 30, k, seed).unwrap();
        prop_assert_eq!(&x, &y);
        let mut r = rng::stream(seed, 0);
        prop_assert_eq!(&x[0], &simulate_trajectory(&g, &a, 1, 30, &mut r).unwrap());
    }

    #[test]
    fn moment_identities(seed: u64, n in 3usize..=6, p in 0.0f64..0.6) {
        let (g, a, mut r) = instance(seed, n, p, 0.5, 2.0);
        let Some(v0) = pick_start(&g, &mut r) else { return Ok(()) };
        let o = MomentOracle::new(&g, &a, v0).unwrap();
        for e in 0..g.num_edges() {
            let u = o.expected_u(e).unwrap();
            prop_assert!(u > 0.0 && u < 1.0);
            prop_assert!(o.expected_sqrt_u(e).unwrap() > 0.0);
            prop_assert!(o.expected_u_sq(e).unwrap() <= u);
            for f in (0..g.num_edges()).filter(|&f| f != e) {
                if let Some(j) = o.shared_vertex(e, f).unwrap() {
                    let uu = o.expected_uu(e, f).unwrap();
                    let oj = o.o(j);
                    let want = u * o.expected_u(f).unwrap() * oj / (oj + 2.0);
                    prop_assert!(uu > 0.0 && uu < 1.0);
                    prop_assert!((uu - want).abs() <= 1e-14 * want);
                    prop_assert!(o.covariance_gap(e, f).unwrap() > 0.0);
                }
            }
        }
    }

    #[test]
    fn kl_is_nonnegative(seed: u64, n in 3usize..=6, p in 0.0f64..0.6) {
        let (g, a, mut r) = instance(seed, n, p, 0.5, 2.0);
        let Some(v0) = pick_start(&g, &mut r) else { return Ok(()) };
        let b: Vec<f64> = (0..g.num_edges()).map(|_| log_uniform(&mut r, 0.5, 2.0)).collect();
        let kab = kl_mixing(&g, v0, &a, &b).unwrap();
        let kba = kl_mixing(&g, v0, &b, &a).unwrap();
        prop_assert!(kab >= -1e-12 && kba >= -1e-12);
        prop_assert!(kab + kba >= 0.0);
        prop_assert!(kl_mixing(&g, v0, &a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn multiplicative_root_stability(a in 0.1f64..10.0, eps in 1e-6f64..0.3, t in -1.0f64..1.0) {
        let t = t * (1.0 - 1e-9);
        let x = solve_weight((1.0 + t * eps) * a * (a + 1.0));
        prop_assert!(x > a * (1.0 - eps) && x < a * (1.0 + eps), "{x} outside (1±{eps})·{a}");
    }

    #[test]
    fn degree_one_chain_is_exact(seed: u64, n in 3usize..=9) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let g = path(n);
        let a: Vec<f64> = (0..n - 1).map(|_| r.random_range(0.5..=2.0)).collect();
        let v0 = r.random_range(1..n - 1);
        let oracle = MomentOracle::new(&g, &a, v0).unwrap();
        let est = MomentEstimates::exact(&oracle).unwrap();
        let rep = recover_weights(&g, v0, &est, PairChoice::Canonical).unwrap();
        for leaf in [0, n - 1] {
            prop_assert!((rep.o_hat[leaf] / oracle.o(leaf) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_round_trip(seed: u64, n in 3usize..=6, p in 0.0f64..0.7, average: bool) {
        let (g, a, mut r) = instance(seed, n, p, 0.5, 2.0);
        let Some(v0) = pick_start(&g, &mut r) else { return Ok(()) };
        let oracle = MomentOracle::new(&g, &a, v0).unwrap();
        let est = MomentEstimates::exact(&oracle).unwrap();
        let choice = if average { PairChoice::Average } else { PairChoice::Canonical };
        let rep = recover_weights(&g, v0, &est, choice).unwrap();
        prop_assert!(rep.flags.is_empty());
        for (x, y) in a.iter().zip(&rep.a_hat) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn placeholder_flags_reach_the_report(seed: u64, n in 3usize..=6, p in 0.0f64..0.7) {
        let (g, _, mut r) = instance(seed, n, p, 0.5, 2.0);
        let Some(v0) = pick_start(&g, &mut r) else { return Ok(()) };
        let pairs = errw_lab::estimator::adjacent_pairs(&g);
        let u: Vec<f64> = (0..g.num_edges()).map(|_| r.random_range(0.05..0.9)).collect();
        let v: Vec<f64> = pairs.iter().map(|pr| u[pr.e] * u[pr.f] * r.random_range(0.5..1.5)).collect();
        let est = MomentEstimates::from_moments(&g, 1, 1, u, v).unwrap();
        let rep = recover_weights(&g, v0, &est, PairChoice::Canonical).unwrap();
        let reported = rep.flags.iter().filter(|f| f.kind == "delta_placeholder").count();
        prop_assert_eq!(reported, est.error_flags.len());
        for &x in &est.error_flags {
            prop_assert_eq!(est.delta_hat[x], 1.0);
        }
    }
}
