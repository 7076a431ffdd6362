//! Non-negative matrix factorization by Frobenius multiplicative updates.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_RANK: usize = 16;
pub const DEFAULT_MAX_ITERS: usize = 500;

const EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self { rank: DEFAULT_RANK, max_iters: DEFAULT_MAX_ITERS, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct NmfModel {
    pub w: Array2<f64>,
    pub h: Array2<f64>,
    /// Frobenius reconstruction error after each iteration.
    pub loss_history: Vec<f64>,
    /// False when `max_iters` ran out before the loss settled.
    pub converged: bool,
}

impl NmfModel {
    pub fn reconstruction(&self) -> Array2<f64> {
        self.w.dot(&self.h)
    }
}

fn frobenius_err(m: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let diff = m - &w.dot(h);
    diff.iter().map(|d| d * d).sum::<f64>().sqrt()
}

/// Factorize a non-negative matrix into `W H` with the classic
/// multiplicative update rules. The objective is non-increasing per
/// iteration; iteration stops early once the relative loss change drops
/// below 1e-9. Deterministic given the seed.
pub fn nmf(m: &Array2<f64>, cfg: &NmfConfig) -> Result<NmfModel> {
    if cfg.rank == 0 {
        return Err(Error::Config("NMF rank must be at least 1".into()));
    }
    if m.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Input("NMF input must be non-negative and finite".into()));
    }
    let (n_rows, n_cols) = m.dim();
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::Input("NMF input must be non-empty".into()));
    }

    // Strictly positive init: multiplicative updates preserve zeros, so
    // a zero entry would be frozen forever.
    let mean = m.sum() / (n_rows * n_cols) as f64;
    let scale = (mean.max(EPS) / cfg.rank as f64).sqrt();
    let mut init_rng = rng::stream(cfg.seed, &["nmf-init"]);
    let mut w = Array2::zeros((n_rows, cfg.rank));
    let mut h = Array2::zeros((cfg.rank, n_cols));
    for v in w.iter_mut().chain(h.iter_mut()) {
        *v = scale * (0.5 + init_rng.random::<f64>());
    }

    let mut loss_history = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let mut prev = frobenius_err(m, &w, &h);
    for _ in 0..cfg.max_iters {
        // H <- H * (W^T M) / (W^T W H)
        let wt = w.t();
        let numer = wt.dot(m);
        let denom = wt.dot(&w).dot(&h);
        ndarray::Zip::from(&mut h).and(&numer).and(&denom).for_each(|h, &n, &d| {
            *h *= n / (d + EPS);
        });
        // W <- W * (M H^T) / (W H H^T)
        let ht = h.t();
        let numer = m.dot(&ht);
        let denom = w.dot(&h.dot(&ht));
        ndarray::Zip::from(&mut w).and(&numer).and(&denom).for_each(|w, &n, &d| {
            *w *= n / (d + EPS);
        });

        let err = frobenius_err(m, &w, &h);
        if !err.is_finite() {
            return Err(Error::Numerical {
                epoch: loss_history.len() + 1,
                msg: "NMF loss became non-finite".into(),
            });
        }
        loss_history.push(err);
        if (prev - err).abs() <= 1e-9 * prev.max(EPS) {
            converged = true;
            break;
        }
        prev = err;
    }
    Ok(NmfModel { w, h, loss_history, converged })
}
