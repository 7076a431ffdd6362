//! Trajectory graph induction, candidate pathlet mining, and the binary
//! edge-encoding matrices consumed by the optimizer.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_PATHLET_NODES: usize = 10;
pub const DEFAULT_TOP_M: usize = 10_000;

/// The smallest directed graph on which every corpus trajectory is a
/// valid walk. Edge indexing is the lexicographic order of the pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryGraph {
    nodes: Vec<u32>,
    edges: Vec<(u32, u32)>,
    edge_index: HashMap<(u32, u32), usize>,
}

impl TrajectoryGraph {
    pub fn nodes(&self) -> &[u32] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_id(&self, from: u32, to: u32) -> Option<usize> {
        self.edge_index.get(&(from, to)).copied()
    }

    /// Edge ids along a walk; errors if a step is not a graph edge.
    pub fn walk_edges(&self, ranks: &[u32]) -> Result<Vec<usize>> {
        ranks
            .windows(2)
            .map(|w| {
                self.edge_id(w[0], w[1]).ok_or_else(|| {
                    Error::Input(format!("({}, {}) is not an edge of the trajectory graph", w[0], w[1]))
                })
            })
            .collect()
    }
}

/// A short recurring path: 2..=L_max nodes plus its occurrence count in
/// the mining corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pathlet {
    pub ranks: Vec<u32>,
    pub support: u64,
}

impl Pathlet {
    pub fn len_nodes(&self) -> usize {
        self.ranks.len()
    }

    pub fn len_edges(&self) -> usize {
        self.ranks.len().saturating_sub(1)
    }
}

/// Binary edge -> path matrices: `p_mat[(e, j)] = 1` iff edge `e` occurs
/// in trajectory `j` (occurrence, not multiplicity); `d0_mat` likewise
/// for candidate pathlets.
#[derive(Debug, Clone)]
pub struct EdgeEncoding {
    pub p_mat: Array2<f64>,
    pub d0_mat: Array2<f64>,
}

/// Induce the graph from rank sequences. Nodes are the union of ranks;
/// edges the union of consecutive pairs. Errors when no trajectory
/// contributes an edge.
pub fn induce_graph<S: AsRef<[u32]>>(trajectories: &[S]) -> Result<TrajectoryGraph> {
    if trajectories.is_empty() {
        return Err(Error::Input("cannot induce a graph from an empty corpus".into()));
    }
    let mut nodes: Vec<u32> = trajectories
        .iter()
        .flat_map(|t| t.as_ref().iter().copied())
        .collect();
    nodes.sort_unstable();
    nodes.dedup();

    let mut edges: Vec<(u32, u32)> = trajectories
        .iter()
        .flat_map(|t| t.as_ref().windows(2).map(|w| (w[0], w[1])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    if edges.is_empty() {
        return Err(Error::Input(
            "every trajectory has fewer than 2 nodes; the graph has no edges".into(),
        ));
    }
    let edge_index = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    Ok(TrajectoryGraph { nodes, edges, edge_index })
}

/// Count every contiguous subsequence of node length `2..=max_nodes`
/// (multiple occurrences within one trajectory all count) and keep the
/// `top_m` by support; ties prefer shorter pathlets, then lexicographic
/// rank order.
pub fn mine_candidates<S: AsRef<[u32]>>(
    trajectories: &[S],
    max_nodes: usize,
    top_m: usize,
) -> Result<Vec<Pathlet>> {
    if top_m == 0 {
        return Err(Error::Config("top_m must be positive".into()));
    }
    if max_nodes < 2 {
        return Err(Error::Config(format!(
            "pathlets need at least 2 nodes, got max {max_nodes}"
        )));
    }
    let mut counts: HashMap<&[u32], u64> = HashMap::new();
    for traj in trajectories {
        let seq = traj.as_ref();
        for len in 2..=max_nodes.min(seq.len()) {
            for window in seq.windows(len) {
                *counts.entry(window).or_insert(0) += 1;
            }
        }
    }
    let mut candidates: Vec<Pathlet> = counts
        .into_iter()
        .map(|(ranks, support)| Pathlet { ranks: ranks.to_vec(), support })
        .collect();
    candidates.sort_unstable_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then_with(|| a.ranks.len().cmp(&b.ranks.len()))
            .then_with(|| a.ranks.cmp(&b.ranks))
    });
    candidates.truncate(top_m);
    Ok(candidates)
}

fn one_hot_columns<S: AsRef<[u32]>>(
    graph: &TrajectoryGraph,
    walks: &[S],
    what: &str,
) -> Result<Array2<f64>> {
    let mut mat = Array2::zeros((graph.n_edges(), walks.len()));
    for (j, walk) in walks.iter().enumerate() {
        let edge_ids = graph.walk_edges(walk.as_ref()).map_err(|e| {
            Error::Input(format!("{what} {j} is not a valid walk: {e}"))
        })?;
        for e in edge_ids {
            mat[[e, j]] = 1.0;
        }
    }
    Ok(mat)
}

/// Build the binary encoding matrices for trajectories and candidate
/// pathlets over the graph's edge index.
pub fn encode<S: AsRef<[u32]>, C: AsRef<[u32]>>(
    trajectories: &[S],
    candidates: &[C],
    graph: &TrajectoryGraph,
) -> Result<EdgeEncoding> {
    Ok(EdgeEncoding {
        p_mat: one_hot_columns(graph, trajectories, "trajectory")?,
        d0_mat: one_hot_columns(graph, candidates, "candidate pathlet")?,
    })
}
