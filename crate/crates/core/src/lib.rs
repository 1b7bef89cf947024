//! Edge-reinforced random walks (ERRW) on finite graphs.
//!
//! The crate covers four layers that build on each other:
//!
//! - [`graph`]: immutable simple connected graphs, weighted Matrix-Tree sums,
//!   effective resistances and shortest-path trees.
//! - [`errw`]: forward simulation of reinforced walks, the exact trajectory
//!   likelihood and local-time / cover-time bookkeeping.
//! - [`environment`]: the random environment behind the walk, sampled through
//!   an independent Gamma field (`beta`) and a hyperbolic Gaussian vertex
//!   field (`phi`), plus the explicit mixing density and its normalizer.
//! - [`moments`] and [`estimator`]: closed-form moments of the environment and
//!   the method-of-moments pipeline that recovers the initial edge weights
//!   from many observed trajectories.
//!
//! Everything random takes an explicit RNG; batch helpers derive one
//! independent stream per item from a master seed (see [`rng`]) so results do
//! not depend on thread count.

pub mod environment;
pub mod errw;
pub mod estimator;
pub mod graph;
pub mod io;
mod linalg;
pub mod moments;
pub mod quadrature;
pub mod rng;
pub mod selftest;
pub mod special;

pub use environment::{Environment, EnvironmentError, McmcConfig, TransitionMatrix};
pub use errw::{EdgeLocalTimes, ErrwError, Trajectory, TransitionCounts};
pub use estimator::{EstimationReport, EstimatorError, MomentEstimates, PairChoice};
pub use graph::{Graph, GraphError, RootedTree, WeightVector};
pub use moments::{MomentError, MomentOracle};
