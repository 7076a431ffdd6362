//! Trajectory sampling and rank transformation.
//!
//! For every candidate pair (user, genre) we draw, per training window,
//! one genre that accompanied the anchor genre (from co-listening counts,
//! falling back to the window's allocation row), then replace genres by
//! user-specific popularity ranks with the anchor pinned at rank 0.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{colistening, AllocationTensor, CandidatePair, WindowedHistory};
use crate::rng;

/// One sampled genre per training window for a candidate pair. Positions
/// whose window held no signal at all are missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenreTrajectory {
    pub pair: CandidatePair,
    /// Genre index per window `0..K-1`; `None` marks an empty window.
    pub positions: Vec<Option<u32>>,
}

/// Bijection between a user's genres and popularity ranks. The anchor
/// genre takes rank 0; remaining genres are ranked by descending listen
/// count over the training windows, ties broken by genre id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankMap {
    /// `genres_by_rank[r]` is the genre id holding rank `r`.
    pub genres_by_rank: Vec<String>,
}

impl RankMap {
    pub fn rank_of(&self, genre: &str) -> Option<u32> {
        self.genres_by_rank
            .iter()
            .position(|g| g == genre)
            .map(|r| r as u32)
    }

    pub fn genre_of(&self, rank: u32) -> Option<&str> {
        self.genres_by_rank.get(rank as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.genres_by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genres_by_rank.is_empty()
    }
}

/// A trajectory expressed as ranks, with missing positions dropped.
/// The rank map is retained so ranks can be inverted back to genres.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankTrajectory {
    pub pair: CandidatePair,
    pub ranks: Vec<u32>,
    pub rank_map: RankMap,
}

impl RankTrajectory {
    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Invert the rank transformation.
    pub fn genres(&self) -> Vec<&str> {
        self.ranks
            .iter()
            .filter_map(|&r| self.rank_map.genre_of(r))
            .collect()
    }
}

/// Sampling context for one candidate pair: per-window co-listening
/// weights with the allocation row as fallback.
struct PairSampler {
    /// One weight vector per training window; `None` when the window is
    /// empty (missing position).
    window_weights: Vec<Option<Vec<f64>>>,
}

impl PairSampler {
    fn new(x: &AllocationTensor, windows: &WindowedHistory, user: usize, genre: u32) -> Self {
        let training_windows = x.window_count() - 1;
        let n_genres = x.n_genres();
        let window_weights = (0..training_windows)
            .map(|k| {
                let seq = windows.sequence(user, k);
                let eta = colistening(seq, genre, n_genres);
                if eta.total() > 0 {
                    Some(eta.counts.iter().map(|&c| c as f64).collect())
                } else if !seq.is_empty() {
                    Some((0..n_genres).map(|g| x.get(k, user, g)).collect())
                } else {
                    None
                }
            })
            .collect();
        Self { window_weights }
    }

    fn sample(&self, pair: &CandidatePair, rng: &mut ChaCha8Rng) -> GenreTrajectory {
        let positions = self
            .window_weights
            .iter()
            .map(|weights| {
                weights
                    .as_ref()
                    .and_then(|w| rng::sample_weighted(rng, w))
                    .map(|g| g as u32)
            })
            .collect();
        GenreTrajectory { pair: pair.clone(), positions }
    }
}

fn resolve_pair(x: &AllocationTensor, pair: &CandidatePair) -> Result<(usize, u32)> {
    let user = x
        .users()
        .get(&pair.user)
        .ok_or_else(|| Error::Lookup { kind: "user", id: pair.user.clone() })?;
    let genre = x
        .genres()
        .get(&pair.genre)
        .ok_or_else(|| Error::Lookup { kind: "genre", id: pair.genre.clone() })?;
    Ok((user, genre as u32))
}

/// Sample one genre trajectory for a candidate pair over the training
/// windows (all but the last window of `x`). Deterministic given `seed`.
pub fn sample_trajectory(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    pair: &CandidatePair,
    seed: u64,
) -> Result<GenreTrajectory> {
    let (user, genre) = resolve_pair(x, pair)?;
    let sampler = PairSampler::new(x, windows, user, genre);
    let mut rng = pair_stream(seed, pair);
    Ok(sampler.sample(pair, &mut rng))
}

fn pair_stream(seed: u64, pair: &CandidatePair) -> ChaCha8Rng {
    rng::stream(seed, &["trajectory", pair.kind.label(), &pair.user, &pair.genre])
}

/// Rank map for a pair: listen counts are accumulated over the training
/// windows only, so the target window never leaks into features.
pub fn rank_map(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    pair: &CandidatePair,
) -> Result<RankMap> {
    let (user, anchor) = resolve_pair(x, pair)?;
    let training_windows = x.window_count() - 1;
    let mut counts = vec![0u64; x.n_genres()];
    for k in 0..training_windows {
        for &g in windows.sequence(user, k) {
            counts[g as usize] += 1;
        }
    }
    let mut ranked: Vec<usize> = (0..counts.len())
        .filter(|&g| g as u32 != anchor && counts[g] > 0)
        .collect();
    ranked.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| x.genres().id(a).cmp(x.genres().id(b)))
    });
    let mut genres_by_rank = Vec::with_capacity(ranked.len() + 1);
    genres_by_rank.push(pair.genre.clone());
    genres_by_rank.extend(ranked.into_iter().map(|g| x.genres().id(g).to_owned()));
    Ok(RankMap { genres_by_rank })
}

/// Replace each sampled genre by its rank; missing positions are dropped
/// and consecutive duplicate ranks are kept (one position per window).
pub fn rank_transform(
    traj: &GenreTrajectory,
    map: &RankMap,
    genre_ids: &crate::ingest::Vocab,
) -> Result<RankTrajectory> {
    let mut ranks = Vec::with_capacity(traj.positions.len());
    for g in traj.positions.iter().flatten() {
        let id = genre_ids.id(*g as usize);
        let rank = map
            .rank_of(id)
            .ok_or_else(|| Error::Lookup { kind: "rank for genre", id: id.to_owned() })?;
        ranks.push(rank);
    }
    Ok(RankTrajectory { pair: traj.pair.clone(), ranks, rank_map: map.clone() })
}

/// Sample `n_per_pair` rank trajectories for every candidate pair, drop
/// the empty ones, then draw `total` of them uniformly without
/// replacement (all of them when fewer). Per-pair streams are derived
/// from the seed and the pair ids, so the result is independent of
/// scheduling order.
pub fn build_trajectory_set(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    candidates: &[CandidatePair],
    n_per_pair: usize,
    total: usize,
    seed: u64,
) -> Result<Vec<RankTrajectory>> {
    if total == 0 {
        return Err(Error::Config("trajectory set size must be positive".into()));
    }
    if candidates.is_empty() {
        return Err(Error::Input("no candidate pairs to sample from".into()));
    }
    let mut sorted: Vec<&CandidatePair> = candidates.iter().collect();
    sorted.sort();

    let per_pair: Vec<Vec<RankTrajectory>> = sorted
        .par_iter()
        .map(|pair| sample_pair_trajectories(x, windows, pair, n_per_pair, seed))
        .collect::<Result<_>>()?;
    let mut pool: Vec<RankTrajectory> = per_pair.into_iter().flatten().collect();

    if pool.len() > total {
        let mut rng = rng::stream(seed, &["trajectory", "selection"]);
        // Partial Fisher-Yates: the first `total` slots end up a uniform
        // draw without replacement.
        for i in 0..total {
            let j = i + (rand::Rng::random_range(&mut rng, 0..(pool.len() - i) as u64)) as usize;
            pool.swap(i, j);
        }
        pool.truncate(total);
    }
    Ok(pool)
}

/// All non-empty rank trajectories for a single pair (used both for the
/// dictionary corpus and for per-pair embeddings).
pub fn sample_pair_trajectories(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    pair: &CandidatePair,
    n_per_pair: usize,
    seed: u64,
) -> Result<Vec<RankTrajectory>> {
    let (user, genre) = resolve_pair(x, pair)?;
    let sampler = PairSampler::new(x, windows, user, genre);
    let map = rank_map(x, windows, pair)?;
    let mut stream = pair_stream(seed, pair);
    let mut out = Vec::with_capacity(n_per_pair);
    for _ in 0..n_per_pair {
        let traj = sampler.sample(pair, &mut stream);
        let ranked = rank_transform(&traj, &map, x.genres())?;
        if !ranked.is_empty() {
            out.push(ranked);
        }
    }
    Ok(out)
}
