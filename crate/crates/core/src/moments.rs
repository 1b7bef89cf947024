//! Closed-form moments of `U_e = P_ij P_ji` under the ERRW mixing measure and
//! the KL divergence between two mixing measures.
//!
//! Everything is expressed through the shifted vertex weights
//! `o_v = a_v + 1 - 1{v = v0}`, where `a_v` sums the initial weights of the
//! edges at `v`.

use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::special::{digamma, log_gamma, DomainError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("start vertex {v0} has degree {degree}; at least 2 is required")]
    DegenerateStart { v0: usize, degree: usize },
    #[error("vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("edge index {edge} out of range ({num_edges} edges)")]
    EdgeOutOfRange { edge: usize, num_edges: usize },
    #[error("edge {0} paired with itself")]
    SameEdge(usize),
    #[error("edges {0} and {1} share both endpoints")]
    SharedTwoVertices(usize, usize),
    #[error("edges {0} and {1} do not share a vertex")]
    NotAdjacent(usize, usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// `a_v + 1 - 1{v = v0}` for every vertex.
pub fn shifted_vertex_weights(g: &Graph, a: &[f64], v0: usize) -> Vec<f64> {
    let mut o = g.vertex_sums(a);
    for (v, x) in o.iter_mut().enumerate() {
        if v != v0 {
            *x += 1.0;
        }
    }
    o
}

fn check_vertex(g: &Graph, v: usize) -> Result<(), MomentError> {
    if v >= g.n() {
        return Err(MomentError::VertexOutOfRange { vertex: v, n: g.n() });
    }
    Ok(())
}

/// Closed-form moment oracle for one `(G, A, v0)`.
#[derive(Debug, Clone)]
pub struct MomentOracle {
    graph: Graph,
    a: Vec<f64>,
    v0: usize,
    a_v: Vec<f64>,
    o: Vec<f64>,
}

impl MomentOracle {
    pub fn new(g: &Graph, a: &[f64], v0: usize) -> Result<Self, MomentError> {
        g.check_weights(a)?;
        check_vertex(g, v0)?;
        if g.degree(v0) < 2 {
            return Err(MomentError::DegenerateStart { v0, degree: g.degree(v0) });
        }
        Ok(Self {
            graph: g.clone(),
            a: a.to_vec(),
            v0,
            a_v: g.vertex_sums(a),
            o: shifted_vertex_weights(g, a, v0),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn weights(&self) -> &[f64] {
        &self.a
    }

    pub fn v0(&self) -> usize {
        self.v0
    }

    pub fn a_v(&self, v: usize) -> f64 {
        self.a_v[v]
    }

    pub fn o(&self, v: usize) -> f64 {
        self.o[v]
    }

    pub fn o_all(&self) -> &[f64] {
        &self.o
    }

    fn endpoints(&self, e: usize) -> Result<(usize, usize), MomentError> {
        if e >= self.graph.num_edges() {
            return Err(MomentError::EdgeOutOfRange { edge: e, num_edges: self.graph.num_edges() });
        }
        Ok(self.graph.edge(e))
    }

    pub fn expected_sqrt_u(&self, e: usize) -> Result<f64, MomentError> {
        let (i, j) = self.endpoints(e)?;
        let (oi, oj) = (self.o[i], self.o[j]);
        let log_ratio = log_gamma(0.5 * oi)? + log_gamma(0.5 * oj)?
            - log_gamma(0.5 * (oi + 1.0))?
            - log_gamma(0.5 * (oj + 1.0))?;
        Ok(0.5 * self.a[e] * log_ratio.exp())
    }

    pub fn expected_u(&self, e: usize) -> Result<f64, MomentError> {
        let (i, j) = self.endpoints(e)?;
        let a = self.a[e];
        Ok(a * (a + 1.0) / (self.o[i] * self.o[j]))
    }

    pub fn expected_u_sq(&self, e: usize) -> Result<f64, MomentError> {
        let (i, j) = self.endpoints(e)?;
        let a = self.a[e];
        let (oi, oj) = (self.o[i], self.o[j]);
        Ok(a * (a + 1.0) * (a + 2.0) * (a + 3.0) / (oi * (oi + 2.0) * oj * (oj + 2.0)))
    }

    /// Shared endpoint of two distinct edges, if any.
    pub fn shared_vertex(&self, e: usize, f: usize) -> Result<Option<usize>, MomentError> {
        let (i, j) = self.endpoints(e)?;
        let (k, l) = self.endpoints(f)?;
        if e == f {
            return Err(MomentError::SameEdge(e));
        }
        let shared: Vec<usize> = [i, j].into_iter().filter(|v| *v == k || *v == l).collect();
        match shared.len() {
            0 => Ok(None),
            1 => Ok(Some(shared[0])),
            _ => Err(MomentError::SharedTwoVertices(e, f)),
        }
    }

    pub fn expected_uu(&self, e: usize, f: usize) -> Result<f64, MomentError> {
        let shared = self.shared_vertex(e, f)?;
        let product = self.expected_u(e)? * self.expected_u(f)?;
        Ok(match shared {
            None => product,
            Some(j) => product * self.o[j] / (self.o[j] + 2.0),
        })
    }

    /// `EU_e EU_f - E[U_e U_f]` for edges meeting at one vertex `j`.
    pub fn covariance_gap(&self, e: usize, f: usize) -> Result<f64, MomentError> {
        let j = self.shared_vertex(e, f)?.ok_or(MomentError::NotAdjacent(e, f))?;
        Ok(self.expected_u(e)? * self.expected_u(f)? * 2.0 / (self.o[j] + 2.0))
    }
}

/// `∂ ln Z / ∂ a_e = -ln 2 + ψ(a_e) - Σ_{v ∈ e} ½ ψ(½ o_v)`.
pub fn log_normalizer_gradient(g: &Graph, a: &[f64], v0: usize) -> Result<Vec<f64>, MomentError> {
    g.check_weights(a)?;
    check_vertex(g, v0)?;
    let o = shifted_vertex_weights(g, a, v0);
    let half_psi: Vec<f64> = o.iter().map(|&x| digamma(0.5 * x).map(|p| 0.5 * p)).collect::<Result<_, _>>()?;
    g.edges()
        .iter()
        .zip(a)
        .map(|(&(i, j), &ae)| Ok(-std::f64::consts::LN_2 + digamma(ae)? - half_psi[i] - half_psi[j]))
        .collect()
}

/// `KL(μ_A ‖ μ_Ã)` between the mixing measures of two initial weight vectors
/// on the same graph and start vertex.
pub fn kl_mixing(g: &Graph, v0: usize, a: &[f64], a_tilde: &[f64]) -> Result<f64, MomentError> {
    g.check_weights(a)?;
    g.check_weights(a_tilde)?;
    check_vertex(g, v0)?;
    let ln2 = std::f64::consts::LN_2;
    let o = shifted_vertex_weights(g, a, v0);
    let o_t = shifted_vertex_weights(g, a_tilde, v0);
    let mut kl = 0.0;
    for (&x, &y) in o.iter().zip(&o_t) {
        kl += log_gamma(0.5 * x)? - log_gamma(0.5 * y)?;
    }
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let (ae, at) = (a[e], a_tilde[e]);
        let d = ae - at;
        kl += d * ln2;
        kl += log_gamma(at)? - log_gamma(ae)?;
        let grad = -ln2 + digamma(ae)? - 0.5 * digamma(0.5 * o[i])? - 0.5 * digamma(0.5 * o[j])?;
        kl += d * grad;
    }
    Ok(kl)
}
