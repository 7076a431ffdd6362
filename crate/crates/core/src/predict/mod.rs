//! Next-window allocation prediction: the copy-forward and popularity
//! baselines, an NMF baseline, and the plug-previous model that edits
//! the copy-forward prediction wherever the appearance/disappearance
//! classifiers fire.

pub mod forest;
pub mod nmf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use forest::{train_classifier, Classifier, ConstantClassifier, ForestConfig, RandomForest};
pub use nmf::{nmf, NmfConfig, NmfModel};

use crate::error::{Error, Result};
use crate::ingest::{AllocationTensor, CandidateKind, CandidatePair, WindowedHistory};
use crate::trajectory::RankMap;

/// A candidate pair with its mean trajectory embedding and the rank map
/// needed to invert pathlets back to genre names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedPair {
    pub pair: CandidatePair,
    pub features: Vec<f64>,
    pub rank_map: RankMap,
}

/// Training record: embedding features plus the outcome in the pair's
/// target window (appearance: the genre showed up; disappearance: it
/// vanished).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair: CandidatePair,
    pub features: Vec<f64>,
    pub label: bool,
}

/// The outcome label for a pair, read from the last window of `x`.
pub fn pair_label(x: &AllocationTensor, pair: &CandidatePair) -> Result<bool> {
    let u = x
        .users()
        .get(&pair.user)
        .ok_or_else(|| Error::Lookup { kind: "user", id: pair.user.clone() })?;
    let g = x
        .genres()
        .get(&pair.genre)
        .ok_or_else(|| Error::Lookup { kind: "genre", id: pair.genre.clone() })?;
    let target = x.get(x.window_count() - 1, u, g);
    Ok(match pair.kind {
        CandidateKind::Appearance => target > 0.0,
        CandidateKind::Disappearance => target == 0.0,
    })
}

/// Attach outcome labels to embedded pairs.
pub fn labeled_pairs(x: &AllocationTensor, embedded: &[EmbeddedPair]) -> Result<Vec<LabeledPair>> {
    embedded
        .iter()
        .map(|ep| {
            Ok(LabeledPair {
                pair: ep.pair.clone(),
                features: ep.features.clone(),
                label: pair_label(x, &ep.pair)?,
            })
        })
        .collect()
}

/// A `|U| x |G|` prediction of the next window's allocation. Rows either
/// sum to 1 or are flagged excluded (no valid prediction for that user).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub values: Array2<f64>,
    pub excluded: Vec<bool>,
}

impl PredictionMatrix {
    pub fn n_excluded(&self) -> usize {
        self.excluded.iter().filter(|&&e| e).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (u, row) in self.values.rows().into_iter().enumerate() {
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::Shape(format!("negative prediction for user row {u}")));
            }
            if self.excluded[u] {
                continue;
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Shape(format!("prediction row {u} sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Copy the penultimate window forward. Users inactive in that window
/// get an all-zero row, flagged excluded.
pub fn baseline_previous(x: &AllocationTensor) -> PredictionMatrix {
    let prev = x.window_count() - 2;
    let values = x.window(prev).to_owned();
    let excluded = values
        .rows()
        .into_iter()
        .map(|row| row.iter().all(|&v| v == 0.0))
        .collect();
    PredictionMatrix { values, excluded }
}

/// Every user receives the same distribution: genre event frequencies
/// pooled over the training windows.
pub fn baseline_popularity(
    x: &AllocationTensor,
    windows: &WindowedHistory,
) -> Result<PredictionMatrix> {
    if windows.genres().len() != x.n_genres() || windows.users().len() != x.n_users() {
        return Err(Error::Shape("tensor and windowed history disagree on vocabularies".into()));
    }
    let freqs = windows.genre_frequencies(x.window_count() - 1);
    let empty = freqs.iter().all(|&f| f == 0.0);
    let mut values = Array2::zeros((x.n_users(), x.n_genres()));
    for mut row in values.rows_mut() {
        for (v, &f) in row.iter_mut().zip(&freqs) {
            *v = f;
        }
    }
    Ok(PredictionMatrix { values, excluded: vec![empty; x.n_users()] })
}

/// Factorize the mean training-window allocation and row-normalize the
/// reconstruction. Users with an all-zero reconstruction are excluded.
pub fn baseline_nmf(x: &AllocationTensor, cfg: &NmfConfig) -> Result<(PredictionMatrix, NmfModel)> {
    let training = x.window_count() - 1;
    let mut mean = Array2::zeros((x.n_users(), x.n_genres()));
    for w in 0..training {
        mean += &x.window(w);
    }
    mean /= training as f64;

    let model = nmf(&mean, cfg)?;
    let mut values = model.reconstruction();
    let mut excluded = vec![false; x.n_users()];
    for (u, mut row) in values.rows_mut().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if sum > 1e-12 {
            row /= sum;
        } else {
            row.fill(0.0);
            excluded[u] = true;
        }
    }
    Ok((PredictionMatrix { values, excluded }, model))
}

/// Mean allocation of (user, genre) over its non-zero training windows;
/// 0 when the user never listened to the genre. This is the value an
/// appearance edit injects.
pub fn historical_mean(x: &AllocationTensor, user: usize, genre: usize) -> f64 {
    let training = x.window_count() - 1;
    let mut sum = 0.0;
    let mut n = 0usize;
    for w in 0..training {
        let v = x.get(w, user, genre);
        if v > 0.0 {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// The plug-previous prediction: start from the penultimate window,
/// inject the historical mean for appearance pairs whose classifier
/// probability exceeds 0.5, zero out disappearance pairs likewise, then
/// re-normalize the edited rows. A row emptied by disappearance edits
/// falls back to the popularity distribution. Untouched rows are
/// bit-identical to the previous baseline.
pub fn plug_previous(
    x: &AllocationTensor,
    appearance_clf: &dyn Classifier,
    disappearance_clf: &dyn Classifier,
    appearance_pairs: &[EmbeddedPair],
    disappearance_pairs: &[EmbeddedPair],
    popularity: &[f64],
) -> Result<PredictionMatrix> {
    if popularity.len() != x.n_genres() {
        return Err(Error::Shape(format!(
            "popularity distribution has {} entries for {} genres",
            popularity.len(),
            x.n_genres()
        )));
    }
    let prev = x.window_count() - 2;
    let mut values = x.window(prev).to_owned();
    let mut edited = vec![false; x.n_users()];

    let resolve = |pair: &CandidatePair, kind: CandidateKind| -> Result<(usize, usize)> {
        if pair.kind != kind {
            return Err(Error::Input(format!(
                "{} pair list contains a {} pair",
                kind.label(),
                pair.kind.label()
            )));
        }
        let u = x
            .users()
            .get(&pair.user)
            .ok_or_else(|| Error::Lookup { kind: "user", id: pair.user.clone() })?;
        let g = x
            .genres()
            .get(&pair.genre)
            .ok_or_else(|| Error::Lookup { kind: "genre", id: pair.genre.clone() })?;
        Ok((u, g))
    };

    for ep in appearance_pairs {
        let (u, g) = resolve(&ep.pair, CandidateKind::Appearance)?;
        if appearance_clf.predict_proba(&ep.features) > 0.5 {
            values[[u, g]] = historical_mean(x, u, g);
            edited[u] = true;
        }
    }
    for ep in disappearance_pairs {
        let (u, g) = resolve(&ep.pair, CandidateKind::Disappearance)?;
        if disappearance_clf.predict_proba(&ep.features) > 0.5 {
            values[[u, g]] = 0.0;
            edited[u] = true;
        }
    }

    let popularity_total: f64 = popularity.iter().sum();
    let mut excluded = vec![false; x.n_users()];
    for (u, mut row) in values.rows_mut().into_iter().enumerate() {
        if edited[u] {
            let sum: f64 = row.sum();
            if sum > 0.0 {
                row /= sum;
            } else if popularity_total > 0.0 {
                for (v, &p) in row.iter_mut().zip(popularity) {
                    *v = p;
                }
            } else {
                excluded[u] = true;
            }
        } else if row.iter().all(|&v| v == 0.0) {
            excluded[u] = true;
        }
    }
    Ok(PredictionMatrix { values, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Vocab;
    use ndarray::Array3;

    fn tensor(values: Vec<Vec<Vec<f64>>>) -> AllocationTensor {
        let (k, nu, ng) = (values.len(), values[0].len(), values[0][0].len());
        let mut arr = Array3::zeros((k, nu, ng));
        for (w, um) in values.iter().enumerate() {
            for (u, row) in um.iter().enumerate() {
                for (g, &v) in row.iter().enumerate() {
                    arr[[w, u, g]] = v;
                }
            }
        }
        let users = Vocab::from_ids((0..nu).map(|u| format!("u{u}")).collect());
        let genres = Vocab::from_ids((0..ng).map(|g| format!("g{g}")).collect());
        AllocationTensor::from_values(arr, users, genres).unwrap()
    }

    fn embedded(user: &str, genre: &str, kind: CandidateKind) -> EmbeddedPair {
        EmbeddedPair {
            pair: CandidatePair { user: user.into(), genre: genre.into(), kind },
            features: vec![0.0],
            rank_map: RankMap { genres_by_rank: vec![genre.into()] },
        }
    }

    #[test]
    fn previous_baseline_copies_penultimate_window() {
        let x = tensor(vec![
            vec![vec![1.0, 0.0]],
            vec![vec![0.3, 0.7]],
            vec![vec![0.5, 0.5]],
        ]);
        let pred = baseline_previous(&x);
        assert_eq!(pred.values[[0, 0]], 0.3);
        assert_eq!(pred.values[[0, 1]], 0.7);
        assert!(!pred.excluded[0]);
        pred.validate().unwrap();
    }

    #[test]
    fn previous_baseline_excludes_inactive_users() {
        let x = tensor(vec![
            vec![vec![1.0, 0.0]],
            vec![vec![0.0, 0.0]], // inactive in the penultimate window
            vec![vec![0.5, 0.5]],
        ]);
        let pred = baseline_previous(&x);
        assert!(pred.excluded[0]);
        assert_eq!(pred.n_excluded(), 1);
    }

    #[test]
    fn smallest_window_count_uses_first_window() {
        let x = tensor(vec![vec![vec![0.4, 0.6]], vec![vec![1.0, 0.0]]]);
        let pred = baseline_previous(&x);
        assert_eq!(pred.values[[0, 0]], 0.4);
    }

    #[test]
    fn popularity_is_shared_across_users() {
        use crate::ingest::{allocation, slice_windows, History, ListeningEvent, WindowConfig};
        let cfg = WindowConfig::new(0, 20, 2).unwrap();
        let events = vec![
            ListeningEvent { user: "a".into(), ts: 0, genre: "rock".into(), track: None },
            ListeningEvent { user: "a".into(), ts: 1, genre: "rock".into(), track: None },
            ListeningEvent { user: "a".into(), ts: 2, genre: "rock".into(), track: None },
            ListeningEvent { user: "b".into(), ts: 3, genre: "jazz".into(), track: None },
            ListeningEvent { user: "b".into(), ts: 4, genre: "jazz".into(), track: None },
            ListeningEvent { user: "b".into(), ts: 15, genre: "rock".into(), track: None },
        ];
        let h = History::from_events(events, Some(&cfg), None).unwrap();
        let w = slice_windows(&h, &cfg).unwrap();
        let x = allocation(&w);
        let pred = baseline_popularity(&x, &w).unwrap();
        let rock = x.genres().get("rock").unwrap();
        let jazz = x.genres().get("jazz").unwrap();
        // Training pool: 3 rock + 2 jazz.
        for u in 0..2 {
            assert!((pred.values[[u, rock]] - 0.6).abs() < 1e-12);
            assert!((pred.values[[u, jazz]] - 0.4).abs() < 1e-12);
        }
        assert_eq!(pred.values.row(0), pred.values.row(1));
        pred.validate().unwrap();
    }

    #[test]
    fn nmf_baseline_rows_are_distributions() {
        let x = tensor(vec![
            vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.2, 0.8]],
            vec![vec![0.6, 0.4, 0.0], vec![0.0, 0.4, 0.6]],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        ]);
        let (pred, model) = baseline_nmf(&x, &NmfConfig { rank: 2, max_iters: 300, seed: 0 }).unwrap();
        pred.validate().unwrap();
        assert!(!model.loss_history.is_empty());
    }

    #[test]
    fn plug_without_edits_is_exactly_previous() {
        let x = tensor(vec![
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            vec![vec![0.3, 0.7], vec![0.0, 0.0]],
            vec![vec![0.5, 0.5], vec![1.0, 0.0]],
        ]);
        let app = vec![embedded("u0", "g1", CandidateKind::Appearance)];
        let dis = vec![embedded("u0", "g0", CandidateKind::Disappearance)];
        let off = ConstantClassifier(0.0);
        let plugged =
            plug_previous(&x, &off, &off, &app, &dis, &[0.5, 0.5]).unwrap();
        let previous = baseline_previous(&x);
        assert_eq!(plugged, previous);
    }

    #[test]
    fn emptied_row_falls_back_to_popularity() {
        let x = tensor(vec![
            vec![vec![1.0, 0.0]],
            vec![vec![1.0, 0.0]], // user allocates everything to g0
            vec![vec![0.0, 1.0]],
        ]);
        let dis = vec![embedded("u0", "g0", CandidateKind::Disappearance)];
        let on = ConstantClassifier(1.0);
        let off = ConstantClassifier(0.0);
        let pop = [0.25, 0.75];
        let pred = plug_previous(&x, &off, &on, &[], &dis, &pop).unwrap();
        assert_eq!(pred.values[[0, 0]], 0.25);
        assert_eq!(pred.values[[0, 1]], 0.75);
        assert!(!pred.excluded[0]);
    }

    #[test]
    fn appearance_edit_injects_historical_mean_then_normalizes() {
        // Penultimate row (rock 0.8, jazz 0.2); metal was at 0.5 in the
        // first window and silent afterward, so its historical mean is
        // 0.5. The edited row (0.8, 0.2, 0.5) normalizes to
        // (0.533, 0.133, 0.333).
        let x = tensor(vec![
            vec![vec![0.5, 0.0, 0.5]],
            vec![vec![0.8, 0.2, 0.0]],
            vec![vec![0.4, 0.2, 0.4]],
        ]);
        let app = vec![embedded("u0", "g2", CandidateKind::Appearance)];
        let on = ConstantClassifier(1.0);
        let off = ConstantClassifier(0.0);
        let pred = plug_previous(&x, &on, &off, &app, &[], &[1.0, 0.0, 0.0]).unwrap();
        assert!((pred.values[[0, 0]] - 0.533).abs() < 1e-3);
        assert!((pred.values[[0, 1]] - 0.133).abs() < 1e-3);
        assert!((pred.values[[0, 2]] - 0.333).abs() < 1e-3);
        pred.validate().unwrap();
    }

    #[test]
    fn wrong_kind_in_pair_list_is_rejected() {
        let x = tensor(vec![vec![vec![1.0]], vec![vec![1.0]], vec![vec![1.0]]]);
        let wrong = vec![embedded("u0", "g0", CandidateKind::Disappearance)];
        let off = ConstantClassifier(0.0);
        let err = plug_previous(&x, &off, &off, &wrong, &[], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn labels_read_the_target_window() {
        let x = tensor(vec![
            vec![vec![0.5, 0.5]],
            vec![vec![0.0, 1.0]],
            vec![vec![0.3, 0.7]], // g0 reappears, g1 persists
        ]);
        let app = CandidatePair {
            user: "u0".into(),
            genre: "g0".into(),
            kind: CandidateKind::Appearance,
        };
        let dis = CandidatePair {
            user: "u0".into(),
            genre: "g1".into(),
            kind: CandidateKind::Disappearance,
        };
        assert!(pair_label(&x, &app).unwrap()); // appeared
        assert!(!pair_label(&x, &dis).unwrap()); // did not disappear
    }

    #[test]
    fn historical_mean_skips_zero_windows() {
        let x = tensor(vec![
            vec![vec![0.6]],
            vec![vec![0.0]],
            vec![vec![0.2]],
            vec![vec![1.0]],
        ]);
        // Training windows are the first three; non-zero values 0.6, 0.2.
        assert!((historical_mean(&x, 0, 0) - 0.4).abs() < 1e-12);
    }
}
