//! Explicit trajectory embeddings by greedy longest-pathlet matching.
//!
//! The embedder repeatedly finds the longest dictionary pathlet occurring
//! as a contiguous node subsequence of the active segment, bumps that
//! pathlet's coordinate, and recurses on the left and right remainders.
//! Matching longer pathlets first stops nested pathlets from double
//! counting the same stretch, which keeps the embeddings sparse.

use std::collections::HashMap;

use crate::dict_learn::PathletDictionary;
use crate::error::{Error, Result};
use crate::trajectory::RankTrajectory;

/// A matched pathlet occupying trajectory nodes `start..end` (edges
/// `start..end-1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedSpan {
    pub start: usize,
    pub end: usize,
    pub pathlet: usize,
}

impl MatchedSpan {
    pub fn n_edges(&self) -> usize {
        self.end - self.start - 1
    }
}

/// Usage counts per dictionary pathlet, plus the matched spans and the
/// count of edges no pathlet covered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryEmbedding {
    pub coords: Vec<u32>,
    pub matched_spans: Vec<MatchedSpan>,
    pub uncovered_edges: usize,
}

impl TrajectoryEmbedding {
    pub fn coords_f64(&self) -> Vec<f64> {
        self.coords.iter().map(|&c| c as f64).collect()
    }

    /// Check span disjointness (on edges) and edge conservation against
    /// the trajectory length.
    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        let total_edges = n_nodes.saturating_sub(1);
        let mut spans = self.matched_spans.clone();
        spans.sort_by_key(|s| s.start);
        let mut covered = 0usize;
        let mut prev_end_edge = 0usize; // exclusive edge bound of the previous span
        for s in &spans {
            if s.end > n_nodes || s.end - s.start < 2 {
                return Err(Error::Shape(format!("span {s:?} out of bounds")));
            }
            if s.start < prev_end_edge {
                return Err(Error::Shape(format!("span {s:?} overlaps an earlier span")));
            }
            prev_end_edge = s.end - 1;
            covered += s.n_edges();
        }
        if covered + self.uncovered_edges != total_edges {
            return Err(Error::Shape(format!(
                "covered {covered} + uncovered {} != total {total_edges}",
                self.uncovered_edges
            )));
        }
        Ok(())
    }
}

/// Reusable matcher for one dictionary. Lookup tables are grouped by
/// pathlet length so the longest-first scan probes each length once.
pub struct Embedder<'d> {
    dict_len: usize,
    /// (node length, rank sequence -> dictionary index), lengths
    /// descending. Duplicate sequences keep the most influential index.
    by_length: Vec<(usize, HashMap<&'d [u32], usize>)>,
}

impl<'d> Embedder<'d> {
    pub fn new(dict: &'d PathletDictionary) -> Self {
        let mut grouped: HashMap<usize, HashMap<&[u32], usize>> = HashMap::new();
        for (idx, p) in dict.pathlets.iter().enumerate() {
            grouped
                .entry(p.ranks.len())
                .or_default()
                .entry(p.ranks.as_slice())
                .or_insert(idx);
        }
        let mut by_length: Vec<_> = grouped.into_iter().collect();
        by_length.sort_by(|a, b| b.0.cmp(&a.0));
        Self { dict_len: dict.len(), by_length }
    }

    /// Embed a rank sequence. An empty or single-node trajectory yields
    /// the zero embedding.
    pub fn embed(&self, ranks: &[u32]) -> TrajectoryEmbedding {
        let mut coords = vec![0u32; self.dict_len];
        let mut spans = Vec::new();
        self.cover_segment(ranks, 0, ranks.len(), &mut coords, &mut spans);
        spans.sort_by_key(|s: &MatchedSpan| s.start);
        let covered: usize = spans.iter().map(MatchedSpan::n_edges).sum();
        let total_edges = ranks.len().saturating_sub(1);
        TrajectoryEmbedding { coords, matched_spans: spans, uncovered_edges: total_edges - covered }
    }

    /// Greedy cover of nodes `start..end`: longest match wins; ties go to
    /// the earliest position, then the highest-influence pathlet. The
    /// remainders share the boundary nodes of the match (segments split
    /// on edges, not nodes).
    fn cover_segment(
        &self,
        ranks: &[u32],
        start: usize,
        end: usize,
        coords: &mut Vec<u32>,
        spans: &mut Vec<MatchedSpan>,
    ) {
        let seg_len = end - start;
        if seg_len < 2 {
            return;
        }
        for &(len, ref table) in &self.by_length {
            if len > seg_len {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for s in start..=end - len {
                if let Some(&idx) = table.get(&ranks[s..s + len]) {
                    best = match best {
                        Some(b) if b <= (s, idx) => Some(b),
                        _ => Some((s, idx)),
                    };
                    break; // earliest start wins for this length
                }
            }
            if let Some((s, idx)) = best {
                coords[idx] += 1;
                spans.push(MatchedSpan { start: s, end: s + len, pathlet: idx });
                self.cover_segment(ranks, start, s + 1, coords, spans);
                self.cover_segment(ranks, s + len - 1, end, coords, spans);
                return;
            }
        }
    }
}

/// One-off embedding of a single trajectory.
pub fn embed_trajectory(ranks: &[u32], dict: &PathletDictionary) -> TrajectoryEmbedding {
    Embedder::new(dict).embed(ranks)
}

/// Mean embedding coordinates over a pair's trajectories.
pub fn embed_pair(
    embedder: &Embedder<'_>,
    trajectories: &[RankTrajectory],
) -> Result<Vec<f64>> {
    if trajectories.is_empty() {
        return Err(Error::Input("a pair embedding needs at least one trajectory".into()));
    }
    let mut mean = vec![0.0; embedder.dict_len];
    for traj in trajectories {
        let emb = embedder.embed(&traj.ranks);
        for (m, c) in mean.iter_mut().zip(emb.coords) {
            *m += c as f64;
        }
    }
    let n = trajectories.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    Ok(mean)
}
