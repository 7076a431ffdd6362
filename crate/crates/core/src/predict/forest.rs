//! Random forest of CART trees: Gini splits, bootstrap resampling, and
//! per-split feature subsampling. Trees output their leaf's positive
//! fraction; the forest averages them, which reduces to the fraction of
//! positive tree votes once leaves are pure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_N_TREES: usize = 100;
pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const DEFAULT_MIN_SAMPLES_LEAF: usize = 5;

/// Anything that scores a feature vector with a positive-class
/// probability. Lets the prediction assembly swap the forest for a
/// constant or a logistic model.
pub trait Classifier: Send + Sync {
    fn predict_proba(&self, features: &[f64]) -> f64;
}

/// Always outputs the same probability (the fallback when training data
/// has a single class: use the class value).
#[derive(Debug, Clone, Copy)]
pub struct ConstantClassifier(pub f64);

impl Classifier for ConstantClassifier {
    fn predict_proba(&self, _features: &[f64]) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: DEFAULT_N_TREES,
            max_depth: DEFAULT_MAX_DEPTH,
            min_samples_leaf: DEFAULT_MIN_SAMPLES_LEAF,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("forest needs at least one tree".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Leaf { p: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, features: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p } => return *p,
                Node::Split { feature, threshold, left, right } => {
                    at = if features[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<Tree>,
    pub n_features: usize,
}

impl Classifier for RandomForest {
    fn predict_proba(&self, features: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        sum / self.trees.len() as f64
    }
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [bool],
    cfg: &'a ForestConfig,
    n_split_features: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf(&mut self, indices: &[usize]) -> usize {
        let pos = indices.iter().filter(|&&i| self.labels[i]).count();
        self.nodes.push(Node::Leaf { p: pos as f64 / indices.len() as f64 });
        self.nodes.len() - 1
    }

    fn grow(&mut self, indices: &mut Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let pos = indices.iter().filter(|&&i| self.labels[i]).count();
        let pure = pos == 0 || pos == indices.len();
        if depth >= self.cfg.max_depth || pure || indices.len() < 2 * self.cfg.min_samples_leaf {
            return self.leaf(indices);
        }
        let Some((feature, threshold)) = self.best_split(indices, rng) else {
            return self.leaf(indices);
        };
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = indices
            .iter()
            .partition(|&&i| self.features[i][feature] <= threshold);
        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf { p: 0.0 });
        let left_id = self.grow(&mut left, depth + 1, rng);
        let right_id = self.grow(&mut right, depth + 1, rng);
        self.nodes[placeholder] = Node::Split { feature, threshold, left: left_id, right: right_id };
        placeholder
    }

    /// Best Gini split over a random subset of ceil(sqrt(d)) features.
    fn best_split(&self, indices: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let d = self.n_split_features;
        let mut all: Vec<usize> = (0..self.features[0].len()).collect();
        // Partial Fisher-Yates for the feature subset.
        for i in 0..d.min(all.len()) {
            let j = i + rng.random_range(0..(all.len() - i) as u64) as usize;
            all.swap(i, j);
        }
        let candidates = &all[..d.min(all.len())];

        let n = indices.len() as f64;
        let total_pos = indices.iter().filter(|&&i| self.labels[i]).count() as f64;
        let parent_gini = gini(total_pos, n);

        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(indices.len());
        for &feature in candidates {
            sorted.clear();
            sorted.extend(indices.iter().map(|&i| (self.features[i][feature], self.labels[i])));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

            let mut left_pos = 0.0;
            for split_at in 1..sorted.len() {
                left_pos += f64::from(sorted[split_at - 1].1);
                if sorted[split_at].0 == sorted[split_at - 1].0 {
                    continue; // can't split between equal values
                }
                let left_n = split_at as f64;
                let right_n = n - left_n;
                if (left_n as usize) < self.cfg.min_samples_leaf
                    || (right_n as usize) < self.cfg.min_samples_leaf
                {
                    continue;
                }
                let weighted = (left_n * gini(left_pos, left_n)
                    + right_n * gini(total_pos - left_pos, right_n))
                    / n;
                let gain = parent_gini - weighted;
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g) {
                    let threshold = 0.5 * (sorted[split_at - 1].0 + sorted[split_at].0);
                    best = Some((gain, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

/// Train a forest. Errors when only one class is present; callers should
/// fall back to a [`ConstantClassifier`] at that class value.
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[bool],
    cfg: &ForestConfig,
) -> Result<RandomForest> {
    cfg.validate()?;
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Input(format!(
            "got {} feature rows and {} labels",
            features.len(),
            labels.len()
        )));
    }
    let n_features = features[0].len();
    if features.iter().any(|f| f.len() != n_features) {
        return Err(Error::Shape("feature rows have differing lengths".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::SingleClass(if n_pos == 0 { "negative" } else { "positive" }.into()));
    }

    let n_split_features = (n_features as f64).sqrt().ceil() as usize;
    let trees: Vec<Tree> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(cfg.seed, &["forest", &t.to_string()]);
            let mut bootstrap: Vec<usize> = (0..features.len())
                .map(|_| rng.random_range(0..features.len() as u64) as usize)
                .collect();
            let mut builder = TreeBuilder {
                features,
                labels,
                cfg,
                n_split_features,
                nodes: Vec::new(),
            };
            builder.grow(&mut bootstrap, 0, &mut rng);
            Tree { nodes: builder.nodes }
        })
        .collect();

    Ok(RandomForest { trees, n_features })
}
