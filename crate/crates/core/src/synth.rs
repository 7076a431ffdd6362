//! Synthetic corpora with planted pathlets: ground truth for recovery
//! tests of the mine/fit/select pipeline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dict_learn::PathletDictionary;
use crate::error::{Error, Result};
use crate::ingest::{CandidateKind, CandidatePair};
use crate::pathlet_graph::Pathlet;
use crate::rng;
use crate::trajectory::{RankMap, RankTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_pathlets: usize,
    pub pathlet_len_min: usize,
    pub pathlet_len_max: usize,
    pub rank_alphabet_size: u32,
    pub n_trajectories: usize,
    pub trajectory_length: usize,
    /// Per-position probability of replacement by a uniform random rank.
    pub noise_prob: f64,
    pub seed: u64,
}

impl PlantedSpec {
    /// The frozen recovery-gate corpus: 20 pathlets of 3..=5 nodes over
    /// a 12-rank alphabet, 500 trajectories of ~15 positions, 10% noise,
    /// seed 0.
    pub fn frozen_gate() -> Self {
        Self {
            n_pathlets: 20,
            pathlet_len_min: 3,
            pathlet_len_max: 5,
            rank_alphabet_size: 12,
            n_trajectories: 500,
            trajectory_length: 15,
            noise_prob: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank_alphabet_size == 0 {
            return Err(Error::Config("rank alphabet must contain at least rank 0".into()));
        }
        if self.pathlet_len_min < 2 || self.pathlet_len_min > self.pathlet_len_max {
            return Err(Error::Config(format!(
                "pathlet length range [{}, {}] is invalid",
                self.pathlet_len_min, self.pathlet_len_max
            )));
        }
        if self.pathlet_len_max > self.trajectory_length {
            return Err(Error::Config(format!(
                "pathlets of up to {} nodes cannot fit trajectories of length {}",
                self.pathlet_len_max, self.trajectory_length
            )));
        }
        if self.n_pathlets == 0 || self.n_trajectories == 0 {
            return Err(Error::Config("need at least one pathlet and one trajectory".into()));
        }
        if !(0.0..1.0).contains(&self.noise_prob) && self.noise_prob != 1.0 {
            return Err(Error::Config(format!("noise probability {} not in [0,1]", self.noise_prob)));
        }
        Ok(())
    }
}

/// A generated corpus: trajectories in the same shape the sampling stage
/// produces (so the pipeline runs on them unmodified) plus the planted
/// dictionary. Each planted pathlet's support records its number of
/// complete placements (truncated tails do not count).
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub trajectories: Vec<RankTrajectory>,
    pub planted: Vec<Pathlet>,
}

/// Build trajectories by concatenating whole, uniformly drawn planted
/// pathlets until `trajectory_length` is reached (so lengths may exceed
/// it by up to one pathlet), then flip each position to a uniform random
/// rank with probability `noise_prob`. Bit-reproducible per seed.
pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedCorpus> {
    spec.validate()?;

    let mut pathlet_rng = rng::stream(spec.seed, &["synth", "pathlets"]);
    let mut planted_seqs: Vec<Vec<u32>> = Vec::with_capacity(spec.n_pathlets);
    let mut attempts = 0usize;
    while planted_seqs.len() < spec.n_pathlets {
        attempts += 1;
        if attempts > 1000 * spec.n_pathlets {
            return Err(Error::Config(format!(
                "could not draw {} distinct pathlets from alphabet {} and lengths {}..={}",
                spec.n_pathlets,
                spec.rank_alphabet_size,
                spec.pathlet_len_min,
                spec.pathlet_len_max
            )));
        }
        let len = spec.pathlet_len_min
            + pathlet_rng.random_range(0..(spec.pathlet_len_max - spec.pathlet_len_min + 1) as u64)
                as usize;
        let seq: Vec<u32> = (0..len)
            .map(|_| pathlet_rng.random_range(0..spec.rank_alphabet_size as u64) as u32)
            .collect();
        if !planted_seqs.contains(&seq) {
            planted_seqs.push(seq);
        }
    }

    let rank_map = RankMap {
        genres_by_rank: (0..spec.rank_alphabet_size).map(|r| format!("g{r}")).collect(),
    };
    let mut placements = vec![0u64; spec.n_pathlets];
    let mut trajectories = Vec::with_capacity(spec.n_trajectories);
    for i in 0..spec.n_trajectories {
        let mut traj_rng = rng::stream(spec.seed, &["synth", "trajectory", &i.to_string()]);
        let mut ranks: Vec<u32> = Vec::with_capacity(spec.trajectory_length);
        while ranks.len() < spec.trajectory_length {
            let which = traj_rng.random_range(0..spec.n_pathlets as u64) as usize;
            placements[which] += 1;
            ranks.extend_from_slice(&planted_seqs[which]);
        }

        for r in ranks.iter_mut() {
            if traj_rng.random::<f64>() < spec.noise_prob {
                *r = traj_rng.random_range(0..spec.rank_alphabet_size as u64) as u32;
            }
        }
        trajectories.push(RankTrajectory {
            pair: CandidatePair {
                user: format!("synth-{i}"),
                genre: "g0".into(),
                kind: CandidateKind::Appearance,
            },
            ranks,
            rank_map: rank_map.clone(),
        });
    }

    let planted = planted_seqs
        .into_iter()
        .zip(placements)
        .map(|(ranks, support)| Pathlet { ranks, support })
        .collect();
    Ok(PlantedCorpus { trajectories, planted })
}

/// Fraction of planted pathlets found verbatim, or intact inside a
/// longer learned pathlet, among the first `|planted|` entries of the
/// learned dictionary.
pub fn recovery_score(learned: &PathletDictionary, planted: &[Pathlet]) -> f64 {
    if planted.is_empty() || learned.is_empty() {
        return 0.0;
    }
    let top = &learned.pathlets[..planted.len().min(learned.len())];
    let recovered = planted
        .iter()
        .filter(|p| top.iter().any(|l| contains_contiguous(&l.ranks, &p.ranks)))
        .count();
    recovered as f64 / planted.len() as f64
}

fn contains_contiguous(hay: &[u32], needle: &[u32]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathlet_graph::mine_candidates;

    fn spec() -> PlantedSpec {
        PlantedSpec {
            n_pathlets: 8,
            pathlet_len_min: 3,
            pathlet_len_max: 5,
            rank_alphabet_size: 10,
            n_trajectories: 100,
            trajectory_length: 15,
            noise_prob: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn noiseless_corpus_retains_planted_supports() {
        let corpus = generate_planted(&spec()).unwrap();
        let ranks: Vec<&[u32]> = corpus.trajectories.iter().map(|t| t.ranks.as_slice()).collect();
        let mined = mine_candidates(&ranks, 5, usize::MAX).unwrap();
        for p in &corpus.planted {
            let found = mined.iter().find(|m| m.ranks == p.ranks);
            let support = found.map_or(0, |m| m.support);
            assert!(
                support >= p.support,
                "pathlet {:?} planted {} times but mined support is {}",
                p.ranks,
                p.support,
                support
            );
        }
    }

    #[test]
    fn full_noise_flattens_the_rank_distribution() {
        let corpus = generate_planted(&PlantedSpec { noise_prob: 1.0, ..spec() }).unwrap();
        let mut counts = vec![0usize; 10];
        let mut total = 0usize;
        for t in &corpus.trajectories {
            for &r in &t.ranks {
                counts[r as usize] += 1;
                total += 1;
            }
        }
        let expected = total as f64 / 10.0;
        for (r, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - expected).abs() / expected.sqrt();
            assert!(dev < 6.0, "rank {r} count {c} deviates too far from uniform");
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let a = generate_planted(&spec()).unwrap();
        let b = generate_planted(&spec()).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.planted, b.planted);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(generate_planted(&PlantedSpec { pathlet_len_min: 1, ..spec() }).is_err());
        assert!(generate_planted(&PlantedSpec { pathlet_len_max: 99, ..spec() }).is_err());
        assert!(generate_planted(&PlantedSpec { rank_alphabet_size: 0, ..spec() }).is_err());
        // 2^2 = 4 distinct sequences cannot supply 8 pathlets.
        assert!(generate_planted(&PlantedSpec {
            n_pathlets: 8,
            pathlet_len_min: 2,
            pathlet_len_max: 2,
            rank_alphabet_size: 2,
            ..spec()
        })
        .is_err());
    }

    fn dict_of(seqs: &[&[u32]]) -> PathletDictionary {
        PathletDictionary {
            pathlets: seqs.iter().map(|s| Pathlet { ranks: s.to_vec(), support: 1 }).collect(),
            influence: vec![1.0; seqs.len()],
        }
    }

    #[test]
    fn recovery_score_counts_matches() {
        let planted = vec![
            Pathlet { ranks: vec![0, 1, 2], support: 1 },
            Pathlet { ranks: vec![3, 4], support: 1 },
        ];
        assert_eq!(recovery_score(&dict_of(&[&[0, 1, 2], &[3, 4]]), &planted), 1.0);
        assert_eq!(recovery_score(&dict_of(&[&[7, 8], &[8, 9]]), &planted), 0.0);
        assert_eq!(recovery_score(&dict_of(&[&[0, 1, 2], &[8, 9]]), &planted), 0.5);
    }

    #[test]
    fn supermatch_counts_as_recovery() {
        let planted = vec![Pathlet { ranks: vec![1, 2], support: 1 }];
        let learned = dict_of(&[&[0, 1, 2, 3]]);
        assert_eq!(recovery_score(&learned, &planted), 1.0);
    }

    #[test]
    fn recovery_only_inspects_the_top_n() {
        let planted = vec![Pathlet { ranks: vec![1, 2], support: 1 }];
        // The match sits at position 2 of the learned list; with
        // n = |planted| = 1, only the first entry is considered.
        let learned = dict_of(&[&[5, 6], &[1, 2]]);
        assert_eq!(recovery_score(&learned, &planted), 0.0);
    }
}
