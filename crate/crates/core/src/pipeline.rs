//! Stage orchestration: the functions each CLI subcommand (and the
//! Python bindings) wires together, operating purely on in-memory types.
//!
//! Training never sees the last window: dictionaries, rank maps and
//! classifier labels are computed on the tensor truncated by one window,
//! and the final window only supplies evaluation labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dict_learn::{self, CodeModel, LearnConfig, PathletDictionary};
use crate::embed::{embed_pair, Embedder};
use crate::error::{Error, Result};
use crate::evaluate::{metrics_report, MetricsReport};
use crate::ingest::{candidate_sets, AllocationTensor, CandidateKind, CandidatePair, WindowedHistory};
use crate::pathlet_graph::{encode, induce_graph, mine_candidates, Pathlet};
use crate::predict::{
    baseline_nmf, baseline_popularity, baseline_previous, labeled_pairs, plug_previous,
    train_classifier, Classifier, EmbeddedPair, ForestConfig, LabeledPair, NmfConfig,
    PredictionMatrix, RandomForest,
};
use crate::synth::{generate_planted, recovery_score, PlantedCorpus, PlantedSpec};
use crate::trajectory::{build_trajectory_set, rank_map, sample_pair_trajectories, RankTrajectory};

/// Everything the learn stage produces for one candidate kind.
#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub dictionary: PathletDictionary,
    pub candidates: Vec<Pathlet>,
    pub code: CodeModel,
}

/// Mine candidates from a trajectory corpus, fit the code matrix, and
/// select the dictionary.
pub fn learn_dictionary(
    corpus: &[RankTrajectory],
    max_pathlet_nodes: usize,
    top_m: usize,
    cfg: &LearnConfig,
) -> Result<LearnOutput> {
    let ranks: Vec<&[u32]> = corpus.iter().map(|t| t.ranks.as_slice()).collect();
    learn_dictionary_from_ranks(&ranks, max_pathlet_nodes, top_m, cfg)
}

pub fn learn_dictionary_from_ranks<S: AsRef<[u32]> + Sync>(
    ranks: &[S],
    max_pathlet_nodes: usize,
    top_m: usize,
    cfg: &LearnConfig,
) -> Result<LearnOutput> {
    let graph = induce_graph(ranks)?;
    let candidates = mine_candidates(ranks, max_pathlet_nodes, top_m)?;
    let cand_ranks: Vec<&[u32]> = candidates.iter().map(|c| c.ranks.as_slice()).collect();
    let enc = encode(ranks, &cand_ranks, &graph)?;
    let code = dict_learn::fit(&enc.p_mat, &enc.d0_mat, cfg)?;
    let dictionary = dict_learn::select_topn(&code.alpha, &candidates, cfg.top_n)?;
    Ok(LearnOutput { dictionary, candidates, code })
}

/// Mean trajectory embedding per candidate pair. Pairs whose sampled
/// trajectories are all empty are dropped (they carry no signal).
pub fn embed_candidate_pairs(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    pairs: &[CandidatePair],
    dict: &PathletDictionary,
    n_per_pair: usize,
    seed: u64,
) -> Result<Vec<EmbeddedPair>> {
    use rayon::prelude::*;
    let embedder = Embedder::new(dict);
    let mut sorted: Vec<&CandidatePair> = pairs.iter().collect();
    sorted.sort();
    let embedded: Vec<Option<EmbeddedPair>> = sorted
        .par_iter()
        .map(|pair| {
            let trajs = sample_pair_trajectories(x, windows, pair, n_per_pair, seed)?;
            if trajs.is_empty() {
                return Ok(None);
            }
            let features = embed_pair(&embedder, &trajs)?;
            Ok(Some(EmbeddedPair {
                pair: (*pair).clone(),
                features,
                rank_map: rank_map(x, windows, pair)?,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(embedded.into_iter().flatten().collect())
}

/// A classifier as stored on disk: either a trained forest or the
/// constant fallback used when training data held a single class.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Forest(RandomForest),
    Constant { p: f64 },
}

impl Classifier for TrainedClassifier {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        match self {
            TrainedClassifier::Forest(f) => f.predict_proba(features),
            TrainedClassifier::Constant { p } => *p,
        }
    }
}

/// Train a forest on labeled pairs; single-class data falls back to the
/// constant classifier at that class value.
pub fn train_or_constant(pairs: &[LabeledPair], cfg: &ForestConfig) -> Result<TrainedClassifier> {
    if pairs.is_empty() {
        return Ok(TrainedClassifier::Constant { p: 0.0 });
    }
    let features: Vec<Vec<f64>> = pairs.iter().map(|p| p.features.clone()).collect();
    let labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    match train_classifier(&features, &labels, cfg) {
        Ok(forest) => Ok(TrainedClassifier::Forest(forest)),
        Err(Error::SingleClass(_)) => {
            Ok(TrainedClassifier::Constant { p: f64::from(labels[0]) })
        }
        Err(e) => Err(e),
    }
}

/// Sampling and mining settings for a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub n_per_pair: usize,
    pub total_trajectories: usize,
    pub trajectory_seed: u64,
    pub max_pathlet_nodes: usize,
    pub top_m: usize,
    pub learn: LearnConfig,
    pub forest: ForestConfig,
    pub nmf: NmfConfig,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_per_pair: 1000,
            total_trajectories: 5000,
            trajectory_seed: 0,
            max_pathlet_nodes: crate::pathlet_graph::DEFAULT_MAX_PATHLET_NODES,
            top_m: crate::pathlet_graph::DEFAULT_TOP_M,
            learn: LearnConfig::default(),
            forest: ForestConfig::default(),
            nmf: NmfConfig::default(),
        }
    }
}

impl RunParams {
    /// The pinned configuration of the planted-recovery gate. Recovery
    /// needs the sparsity-dominant regime (the production default
    /// lambda targets reconstruction quality instead) and a stopping
    /// rule tight enough to let influence mass concentrate.
    pub fn synth_gate() -> Self {
        Self {
            learn: LearnConfig {
                lambda: 0.5,
                learning_rate: 0.05,
                stagnation_tol: 1e-6,
                patience: 10,
                max_epochs: 500,
                ..LearnConfig::default()
            },
            ..Self::default()
        }
    }
}

/// Everything the training phase produces for one candidate kind:
/// dictionary, training labels and the fitted classifier. Built from the
/// tensor truncated by one window, so nothing here depends on the final
/// (evaluation) window.
#[derive(Debug, Clone)]
pub struct TrainedKind {
    pub corpus: Vec<RankTrajectory>,
    pub learned: LearnOutput,
    pub train_pairs: Vec<LabeledPair>,
    pub classifier: TrainedClassifier,
}

/// A trained kind plus its evaluation-phase pair embeddings.
#[derive(Debug, Clone)]
pub struct KindModel {
    pub trained: TrainedKind,
    pub eval_pairs: Vec<EmbeddedPair>,
}

/// Select one kind's pair list from candidate sets.
pub fn pairs_of_kind(sets: &crate::ingest::CandidateSets, kind: CandidateKind) -> &[CandidatePair] {
    match kind {
        CandidateKind::Appearance => &sets.appearance,
        CandidateKind::Disappearance => &sets.disappearance,
    }
}

/// Run the training phase for one candidate kind: sample the trajectory
/// corpus, learn the dictionary, embed and label the training pairs, and
/// fit the classifier. Returns `None` when the kind has no usable
/// candidates.
pub fn train_kind(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    kind: CandidateKind,
    params: &RunParams,
) -> Result<Option<TrainedKind>> {
    let k = x.window_count();
    if k < 3 {
        return Err(Error::Config(format!(
            "training needs at least 3 windows (train target + eval target), got {k}"
        )));
    }
    let x_train = x.truncated(k - 1);
    let w_train = windows.truncated(k - 1);
    let sets = candidate_sets(&x_train)?;
    let cands = pairs_of_kind(&sets, kind);
    if cands.is_empty() {
        return Ok(None);
    }
    let corpus = build_trajectory_set(
        &x_train,
        &w_train,
        cands,
        params.n_per_pair,
        params.total_trajectories,
        params.trajectory_seed,
    )?;
    if corpus.iter().all(|t| t.ranks.len() < 2) {
        return Ok(None);
    }
    let learned = learn_dictionary(&corpus, params.max_pathlet_nodes, params.top_m, &params.learn)?;

    let train_embedded = embed_candidate_pairs(
        &x_train,
        &w_train,
        cands,
        &learned.dictionary,
        params.n_per_pair,
        params.trajectory_seed,
    )?;
    let train_pairs = labeled_pairs(&x_train, &train_embedded)?;
    let classifier = train_or_constant(&train_pairs, &params.forest)?;
    Ok(Some(TrainedKind { corpus, learned, train_pairs, classifier }))
}

#[derive(Debug, Clone)]
pub struct PredictionBundle {
    pub previous: PredictionMatrix,
    pub popularity: PredictionMatrix,
    pub nmf: PredictionMatrix,
    pub nmf_converged: bool,
    pub plug_previous: PredictionMatrix,
}

#[derive(Debug, Clone)]
pub struct FullRun {
    pub appearance: Option<KindModel>,
    pub disappearance: Option<KindModel>,
    pub predictions: PredictionBundle,
    pub metrics: BTreeMap<String, MetricsReport>,
}

/// Assemble all four prediction matrices.
pub fn run_predictions(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    appearance: Option<(&TrainedClassifier, &[EmbeddedPair])>,
    disappearance: Option<(&TrainedClassifier, &[EmbeddedPair])>,
    nmf_cfg: &NmfConfig,
) -> Result<PredictionBundle> {
    let previous = baseline_previous(x);
    let popularity = baseline_popularity(x, windows)?;
    let (nmf_pred, nmf_model) = baseline_nmf(x, nmf_cfg)?;

    let freqs = windows.genre_frequencies(x.window_count() - 1);
    let off = TrainedClassifier::Constant { p: 0.0 };
    let no_pairs: Vec<EmbeddedPair> = Vec::new();
    let (app_clf, app_pairs) = appearance.unwrap_or((&off, &no_pairs));
    let (dis_clf, dis_pairs) = disappearance.unwrap_or((&off, &no_pairs));
    let plug = plug_previous(x, app_clf, dis_clf, app_pairs, dis_pairs, &freqs)?;

    Ok(PredictionBundle {
        previous,
        popularity,
        nmf: nmf_pred,
        nmf_converged: nmf_model.converged,
        plug_previous: plug,
    })
}

/// Table of per-model metrics. The copy-forward baseline gets the
/// one-window-shift convention for its subtask scores.
pub fn evaluate_models(
    x: &AllocationTensor,
    bundle: &PredictionBundle,
) -> Result<BTreeMap<String, MetricsReport>> {
    let mut out = BTreeMap::new();
    out.insert("previous".to_owned(), metrics_report(x, &bundle.previous, true)?);
    out.insert("popularity".to_owned(), metrics_report(x, &bundle.popularity, false)?);
    out.insert("nmf".to_owned(), metrics_report(x, &bundle.nmf, false)?);
    out.insert("plug_previous".to_owned(), metrics_report(x, &bundle.plug_previous, false)?);
    Ok(out)
}

/// End-to-end run: train-phase dictionaries and classifiers, eval-phase
/// embeddings, the four predictions, and their metrics.
pub fn run_full(
    x: &AllocationTensor,
    windows: &WindowedHistory,
    params: &RunParams,
) -> Result<FullRun> {
    let eval_sets = candidate_sets(x)?;
    let mut models: Vec<Option<KindModel>> = Vec::new();
    for kind in [CandidateKind::Appearance, CandidateKind::Disappearance] {
        let model = match train_kind(x, windows, kind, params)? {
            None => None,
            Some(trained) => {
                let eval_pairs = embed_candidate_pairs(
                    x,
                    windows,
                    pairs_of_kind(&eval_sets, kind),
                    &trained.learned.dictionary,
                    params.n_per_pair,
                    params.trajectory_seed,
                )?;
                Some(KindModel { trained, eval_pairs })
            }
        };
        models.push(model);
    }
    let disappearance = models.pop().unwrap();
    let appearance = models.pop().unwrap();

    let predictions = run_predictions(
        x,
        windows,
        appearance.as_ref().map(|m| (&m.trained.classifier, m.eval_pairs.as_slice())),
        disappearance.as_ref().map(|m| (&m.trained.classifier, m.eval_pairs.as_slice())),
        &params.nmf,
    )?;
    let metrics = evaluate_models(x, &predictions)?;
    Ok(FullRun { appearance, disappearance, predictions, metrics })
}

/// Dictionary quality over a lambda grid (the sensitivity sweep).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub cover_ratio: f64,
    pub code_sparsity: f64,
    pub mean_pathlets_per_trajectory: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

pub fn sweep_lambda(
    corpus: &[RankTrajectory],
    eval_corpus: &[RankTrajectory],
    lambdas: &[f64],
    params: &RunParams,
) -> Result<Vec<SweepPoint>> {
    let eval_ranks: Vec<Vec<u32>> = eval_corpus.iter().map(|t| t.ranks.clone()).collect();
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = LearnConfig { lambda, ..params.learn.clone() };
        let learned = learn_dictionary(corpus, params.max_pathlet_nodes, params.top_m, &cfg)?;
        let metrics = dict_learn::dict_metrics(&learned.dictionary, &eval_ranks)?;
        out.push(SweepPoint {
            lambda,
            cover_ratio: metrics.cover_ratio,
            code_sparsity: metrics.code_sparsity,
            mean_pathlets_per_trajectory: metrics.mean_pathlets_per_trajectory,
            final_loss: learned.code.final_loss(),
            epochs: learned.code.loss_history.len() - 1,
        });
    }
    Ok(out)
}

/// Outcome of the planted-pathlet recovery gate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub spec: PlantedSpec,
    pub recovery: f64,
    pub n_candidates: usize,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Generate a planted corpus and push it through mine + fit + select,
/// scoring how much of the planted dictionary is recovered in the top
/// `|planted|` learned pathlets.
pub fn synth_recovery(
    spec: &PlantedSpec,
    params: &RunParams,
) -> Result<(RecoveryReport, PlantedCorpus, PathletDictionary)> {
    let corpus = generate_planted(spec)?;
    let cfg = LearnConfig { top_n: spec.n_pathlets, ..params.learn.clone() };
    let learned = learn_dictionary(&corpus.trajectories, params.max_pathlet_nodes, params.top_m, &cfg)?;
    let recovery = recovery_score(&learned.dictionary, &corpus.planted);
    let report = RecoveryReport {
        spec: *spec,
        recovery,
        n_candidates: learned.candidates.len(),
        final_loss: learned.code.final_loss(),
        epochs: learned.code.loss_history.len() - 1,
    };
    Ok((report, corpus, learned.dictionary))
}
