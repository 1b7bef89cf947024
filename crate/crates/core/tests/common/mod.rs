#![allow(dead_code)]

use errw_lab::Graph;
use rand::Rng;

/// Every connected simple graph on `n` labeled vertices.
pub fn all_connected_graphs(n: usize) -> Vec<Graph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    (1u32..(1 << pairs.len()))
        .filter_map(|mask| {
            let edges: Vec<_> = pairs.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &p)| p).collect();
            Graph::new(n, &edges).ok()
        })
        .collect()
}

/// Random spanning tree plus each remaining pair with probability `p_extra`.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize, p_extra: f64) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random::<f64>() < p_extra {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Σ_T Π_{e∈T} w_e by brute force over edge subsets, in plain arithmetic.
pub fn spanning_tree_sum_brute(g: &Graph, w: &[f64]) -> f64 {
    let m = g.num_edges();
    let n = g.n();
    let mut total = 0.0;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..m).filter(|e| mask & (1 << e) != 0).map(|e| g.edge(e)).collect();
        if Graph::new(n, &chosen).is_ok() {
            total += (0..m).filter(|e| mask & (1 << e) != 0).map(|e| w[e]).product::<f64>();
        }
    }
    total
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
