//! File formats shared by the CLI and the Python bindings.
//!
//! * graph: `{"n": 3, "edges": [[0, 1], [1, 2]]}`
//! * weights: `{"weights": [1.0, 2.0]}` in canonical edge order
//! * trajectories: JSON lines `{"v0": 0, "steps": [0, 1, ...]}`, or CSV with
//!   one comma-separated trajectory per row
//! * environments: JSON lines `{"v0": 0, "beta": [...], "phi": [...], "q": [...]}`,
//!   or `{"v0": 0, "n": 3, "p": [...]}` for long-run transition estimates

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Environment, TransitionMatrix};
use crate::errw::Trajectory;
use crate::graph::{Graph, GraphError, WeightVector};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Invalid { path: String, source: GraphError },
}

impl IoError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, IoError::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl From<&Graph> for GraphFile {
    fn from(g: &Graph) -> Self {
        Self { n: g.n(), edges: g.edges().iter().map(|&(i, j)| [i, j]).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrajectoryLine {
    v0: usize,
    steps: Vec<usize>,
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn parse_err(path: &str, line: usize, e: impl std::fmt::Display) -> IoError {
    IoError::Parse { path: path.to_string(), line, message: e.to_string() }
}

pub fn parse_graph(text: &str, path: &str) -> Result<Graph, IoError> {
    let f: GraphFile = serde_json::from_str(text).map_err(|e| parse_err(path, e.line(), e))?;
    let edges: Vec<(usize, usize)> = f.edges.iter().map(|e| (e[0], e[1])).collect();
    Graph::new(f.n, &edges).map_err(|source| IoError::Invalid { path: path.to_string(), source })
}

pub fn graph_to_json(g: &Graph) -> String {
    serde_json::to_string(&GraphFile::from(g)).expect("plain data serializes")
}

pub fn parse_weights(text: &str, path: &str, g: &Graph) -> Result<WeightVector, IoError> {
    let f: WeightsFile = serde_json::from_str(text).map_err(|e| parse_err(path, e.line(), e))?;
    WeightVector::for_graph(g, f.weights).map_err(|source| IoError::Invalid { path: path.to_string(), source })
}

pub fn weights_to_json(w: &[f64]) -> String {
    serde_json::to_string(&WeightsFile { weights: w.to_vec() }).expect("plain data serializes")
}

pub fn parse_trajectories_jsonl(text: &str, path: &str) -> Result<Vec<Trajectory>, IoError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t: TrajectoryLine = serde_json::from_str(line).map_err(|e| parse_err(path, idx + 1, e))?;
        if t.steps.first() != Some(&t.v0) {
            return Err(parse_err(path, idx + 1, format!("steps must start at v0 = {}", t.v0)));
        }
        out.push(Trajectory::new(t.steps).map_err(|e| parse_err(path, idx + 1, e))?);
    }
    Ok(out)
}

pub fn trajectories_to_jsonl(trajs: &[Trajectory]) -> String {
    let mut s = String::new();
    for t in trajs {
        let line = TrajectoryLine { v0: t.v0(), steps: t.steps().to_vec() };
        s.push_str(&serde_json::to_string(&line).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

pub fn parse_trajectories_csv(text: &str, path: &str) -> Result<Vec<Trajectory>, IoError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let steps = line
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, idx + 1, e))?;
        out.push(Trajectory::new(steps).map_err(|e| parse_err(path, idx + 1, e))?);
    }
    Ok(out)
}

pub fn trajectories_to_csv(trajs: &[Trajectory]) -> String {
    let mut s = String::new();
    for t in trajs {
        let row: Vec<String> = t.steps().iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Reads either trajectory format, picking CSV by the `.csv` extension.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, IoError> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        parse_trajectories_csv(&text, &name)
    } else {
        parse_trajectories_jsonl(&text, &name)
    }
}

pub fn parse_environments_jsonl(text: &str, path: &str) -> Result<Vec<Environment>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| serde_json::from_str(l).map_err(|e| parse_err(path, idx + 1, e)))
        .collect()
}

/// Transition matrix estimated from one long run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunRecord {
    pub v0: usize,
    pub n: usize,
    pub p: Vec<f64>,
}

/// One line of an environment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentRecord {
    Full(Environment),
    LongRun(LongRunRecord),
}

impl EnvironmentRecord {
    pub fn v0(&self) -> usize {
        match self {
            Self::Full(e) => e.v0,
            Self::LongRun(r) => r.v0,
        }
    }

    pub fn transition_matrix(&self, g: &Graph) -> Result<TransitionMatrix, GraphError> {
        match self {
            Self::Full(e) => {
                g.check_weights(&e.q)?;
                Ok(e.transition_matrix(g))
            }
            Self::LongRun(r) if r.n == g.n() && r.p.len() == r.n * r.n => {
                Ok(TransitionMatrix { n: r.n, p: r.p.clone() })
            }
            Self::LongRun(r) => Err(GraphError::DimensionMismatch { expected: g.n() * g.n(), got: r.p.len() }),
        }
    }
}

pub fn parse_environment_records(text: &str, path: &str) -> Result<Vec<EnvironmentRecord>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| serde_json::from_str(l).map_err(|e| parse_err(path, idx + 1, e)))
        .collect()
}

pub fn records_to_jsonl(records: &[EnvironmentRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

pub fn environments_to_jsonl(envs: &[Environment]) -> String {
    let mut s = String::new();
    for e in envs {
        s.push_str(&serde_json::to_string(e).expect("plain data serializes"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::families::triangle;

    #[test]
    fn graph_round_trip() {
        let g = parse_graph(r#"{"n": 3, "edges": [[1, 0], [2, 1], [0, 2]]}"#, "g.json").unwrap();
        assert_eq!(g, triangle());
        assert_eq!(parse_graph(&graph_to_json(&g), "x").unwrap(), g);
        let e = parse_graph(r#"{"n": 4, "edges": [[0, 1], [2, 3]]}"#, "g.json").unwrap_err();
        assert!(e.to_string().contains("disconnected"));
    }

    #[test]
    fn trajectory_formats_round_trip() {
        let ts = vec![Trajectory::new(vec![0, 1, 2]).unwrap(), Trajectory::new(vec![0]).unwrap()];
        assert_eq!(parse_trajectories_jsonl(&trajectories_to_jsonl(&ts), "t").unwrap(), ts);
        assert_eq!(parse_trajectories_csv(&trajectories_to_csv(&ts), "t").unwrap(), ts);
        let bad = parse_trajectories_jsonl("{\"v0\": 1, \"steps\": [0, 1]}\n", "t.jsonl").unwrap_err();
        assert!(matches!(bad, IoError::Parse { line: 1, .. }));
    }

    #[test]
    fn weights_checked_against_graph() {
        let g = triangle();
        assert!(parse_weights(r#"{"weights": [1, 2, 3]}"#, "w", &g).is_ok());
        assert!(parse_weights(r#"{"weights": [1, 2]}"#, "w", &g).is_err());
        assert!(parse_weights(r#"{"weights": [1, 0, 3]}"#, "w", &g).is_err());
    }

    #[test]
    fn environment_records_of_both_kinds() {
        let g = triangle();
        let text = concat!(
            r#"{"v0": 0, "beta": [1, 1, 1], "phi": [0, 0, 0], "q": [1, 1, 1]}"#,
            "\n",
            r#"{"v0": 0, "n": 3, "p": [0, 0.5, 0.5, 0.5, 0, 0.5, 0.5, 0.5, 0]}"#,
            "\n"
        );
        let recs = parse_environment_records(text, "e").unwrap();
        assert!(matches!(recs[0], EnvironmentRecord::Full(_)));
        assert!(matches!(recs[1], EnvironmentRecord::LongRun(_)));
        assert_eq!(recs[0].transition_matrix(&g).unwrap(), recs[1].transition_matrix(&g).unwrap());
        assert_eq!(parse_environment_records(&records_to_jsonl(&recs), "e").unwrap(), recs);
    }
}
