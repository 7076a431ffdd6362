//! Box-constrained sparse coding over candidate pathlets.
//!
//! Minimizes `0.5 * ||P - D0 a||_F^2 + lambda * ||a||_1` over
//! `a in [0,1]^{|D0| x |P|}`. This is the classic dictionary-learning
//! objective with the dictionary side fixed to the mined candidate set:
//! only the code matrix is learned, by Adam steps on the subgradient
//! with a clip to the box after every step. The final dictionary keeps
//! the top-n candidates by total code mass.

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::pathlet_graph::Pathlet;
use crate::rng;

pub const DEFAULT_LAMBDA: f64 = 0.0025;
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_MAX_EPOCHS: usize = 500;
pub const DEFAULT_PATIENCE: usize = 5;
pub const DEFAULT_STAGNATION_TOL: f64 = 1e-4;
pub const DEFAULT_TOP_N: usize = 1000;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer settings. Early stopping fires when the relative loss
/// improvement stays below `stagnation_tol` for `patience` consecutive
/// epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub stagnation_tol: f64,
    pub top_n: usize,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            learning_rate: DEFAULT_LEARNING_RATE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            stagnation_tol: DEFAULT_STAGNATION_TOL,
            top_n: DEFAULT_TOP_N,
            seed: 0,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// The fitted code matrix plus its optimization trace. `loss_history[0]`
/// is the loss at initialization; one entry follows per epoch.
#[derive(Debug, Clone)]
pub struct CodeModel {
    pub alpha: Array2<f64>,
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
}

impl CodeModel {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history holds the initial loss")
    }

    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }
}

/// Selected dictionary: pathlets in non-increasing influence order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathletDictionary {
    pub pathlets: Vec<Pathlet>,
    pub influence: Vec<f64>,
}

impl PathletDictionary {
    pub fn len(&self) -> usize {
        self.pathlets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pathlets.is_empty()
    }

    /// Column labels for serialized embeddings, e.g. "1-2-0".
    pub fn labels(&self) -> Vec<String> {
        self.pathlets
            .iter()
            .map(|p| {
                p.ranks
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join("-")
            })
            .collect()
    }
}

/// Column-compressed view of a binary matrix: the set of rows holding a
/// 1 per column. All optimizer products run over this structure, which
/// is what makes full-batch epochs cheap (every pathlet touches at most
/// a few edges).
struct BinaryCols {
    rows: Vec<Vec<usize>>,
}

impl BinaryCols {
    fn from_matrix(mat: &Array2<f64>, what: &str) -> Result<Self> {
        let mut rows = vec![Vec::new(); mat.ncols()];
        for ((r, c), &v) in mat.indexed_iter() {
            if v == 1.0 {
                rows[c].push(r);
            } else if v != 0.0 {
                return Err(Error::Input(format!(
                    "{what} matrix must be binary, found {v} at ({r}, {c})"
                )));
            }
        }
        Ok(Self { rows })
    }
}

fn check_shapes(p_mat: &Array2<f64>, d0_mat: &Array2<f64>, alpha: &Array2<f64>) -> Result<()> {
    let (pe, pn) = p_mat.dim();
    let (de, dn) = d0_mat.dim();
    let (ad, an) = alpha.dim();
    if pe != de || ad != dn || an != pn {
        return Err(Error::Shape(format!(
            "P is {pe}x{pn}, D0 is {de}x{dn}, alpha is {ad}x{an}"
        )));
    }
    Ok(())
}

/// `D0 a - P` computed column-structure-wise.
fn residual(p_mat: &Array2<f64>, d0: &BinaryCols, alpha: &Array2<f64>) -> Array2<f64> {
    let mut res = -p_mat.clone();
    for (c, rows) in d0.rows.iter().enumerate() {
        let a_row = alpha.row(c);
        for &e in rows {
            let mut r_row = res.row_mut(e);
            Zip::from(&mut r_row).and(&a_row).for_each(|r, &a| *r += a);
        }
    }
    res
}

/// `D0^T r` for the residual `r`.
fn smooth_grad_from_residual(d0: &BinaryCols, res: &Array2<f64>, n_cols: usize) -> Array2<f64> {
    let mut grad = Array2::zeros((d0.rows.len(), n_cols));
    for (c, rows) in d0.rows.iter().enumerate() {
        let mut g_row = grad.row_mut(c);
        for &e in rows {
            let r_row = res.row(e);
            Zip::from(&mut g_row).and(&r_row).for_each(|g, &r| *g += r);
        }
    }
    grad
}

fn objective(res: &Array2<f64>, alpha: &Array2<f64>, lambda: f64) -> f64 {
    let recon: f64 = res.iter().map(|&r| r * r).sum();
    let l1: f64 = alpha.iter().map(|&a| a.abs()).sum();
    0.5 * recon + lambda * l1
}

/// The full objective `0.5 * ||P - D0 a||_F^2 + lambda * ||a||_1`.
pub fn loss(
    p_mat: &Array2<f64>,
    d0_mat: &Array2<f64>,
    alpha: &Array2<f64>,
    lambda: f64,
) -> Result<f64> {
    check_shapes(p_mat, d0_mat, alpha)?;
    let d0 = BinaryCols::from_matrix(d0_mat, "candidate")?;
    Ok(objective(&residual(p_mat, &d0, alpha), alpha, lambda))
}

/// Gradient of the smooth term, `D0^T (D0 a - P)`. This is the exact
/// routine the optimizer steps on, exposed so it can be checked against
/// finite differences.
pub fn grad_smooth(
    p_mat: &Array2<f64>,
    d0_mat: &Array2<f64>,
    alpha: &Array2<f64>,
) -> Result<Array2<f64>> {
    check_shapes(p_mat, d0_mat, alpha)?;
    let d0 = BinaryCols::from_matrix(d0_mat, "candidate")?;
    let res = residual(p_mat, &d0, alpha);
    Ok(smooth_grad_from_residual(&d0, &res, alpha.ncols()))
}

/// Fit the code matrix by Adam on the subgradient
/// `D0^T (D0 a - P) + lambda` (entries are non-negative, so the l1
/// subgradient is +lambda; at 0 the clip absorbs the choice), clipping
/// to `[0,1]` after every step. Deterministic given the seed.
pub fn fit(p_mat: &Array2<f64>, d0_mat: &Array2<f64>, cfg: &LearnConfig) -> Result<CodeModel> {
    cfg.validate()?;
    let (_, n_paths) = p_mat.dim();
    let (_, n_cands) = d0_mat.dim();
    if n_paths == 0 || n_cands == 0 {
        return Err(Error::Input("encoding matrices must be non-empty".into()));
    }
    BinaryCols::from_matrix(p_mat, "trajectory")?;
    let d0 = BinaryCols::from_matrix(d0_mat, "candidate")?;
    check_shapes(p_mat, d0_mat, &Array2::zeros((n_cands, n_paths)))?;

    // Small positive start keeps the first steps off the flat
    // subgradient region at exactly 0.
    let mut init_rng = rng::stream(cfg.seed, &["alpha-init"]);
    let mut alpha = Array2::zeros((n_cands, n_paths));
    for a in alpha.iter_mut() {
        *a = init_rng.random::<f64>() * 0.1;
    }

    let mut m = Array2::<f64>::zeros((n_cands, n_paths));
    let mut v = Array2::<f64>::zeros((n_cands, n_paths));

    let mut res = residual(p_mat, &d0, &alpha);
    let mut loss_history = vec![objective(&res, &alpha, cfg.lambda)];
    let mut stagnant = 0usize;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let grad = smooth_grad_from_residual(&d0, &res, n_paths);
        let bc1 = 1.0 - ADAM_BETA1.powi(epoch as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(epoch as i32);
        Zip::from(&mut alpha)
            .and(&mut m)
            .and(&mut v)
            .and(&grad)
            .for_each(|a, m, v, &g_smooth| {
                let g = g_smooth + cfg.lambda;
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let step = cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                *a = (*a - step).clamp(0.0, 1.0);
            });

        if !alpha.iter().all(|a| (0.0..=1.0).contains(a)) {
            return Err(Error::Numerical {
                epoch,
                msg: "code matrix left the [0,1] box".into(),
            });
        }

        res = residual(p_mat, &d0, &alpha);
        let epoch_loss = objective(&res, &alpha, cfg.lambda);
        if !epoch_loss.is_finite() {
            return Err(Error::Numerical { epoch, msg: format!("loss became {epoch_loss}") });
        }
        let prev = *loss_history.last().unwrap();
        loss_history.push(epoch_loss);

        let improvement = (prev - epoch_loss) / prev.abs().max(f64::MIN_POSITIVE);
        if improvement < cfg.stagnation_tol {
            stagnant += 1;
            if stagnant >= cfg.patience {
                stopped_early = true;
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    Ok(CodeModel { alpha, loss_history, stopped_early })
}

/// Keep the `top_n` candidates by influence (total code mass over all
/// trajectories); ties prefer higher support, then shorter, then
/// lexicographically smaller pathlets.
pub fn select_topn(
    alpha: &Array2<f64>,
    candidates: &[Pathlet],
    top_n: usize,
) -> Result<PathletDictionary> {
    if alpha.nrows() != candidates.len() {
        return Err(Error::Shape(format!(
            "alpha has {} rows but there are {} candidates",
            alpha.nrows(),
            candidates.len()
        )));
    }
    let mut order: Vec<(f64, usize)> = alpha
        .rows()
        .into_iter()
        .map(|row| row.sum())
        .enumerate()
        .map(|(i, mass)| (mass, i))
        .collect();
    order.sort_by(|&(ma, a), &(mb, b)| {
        mb.partial_cmp(&ma)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| candidates[b].support.cmp(&candidates[a].support))
            .then_with(|| candidates[a].ranks.len().cmp(&candidates[b].ranks.len()))
            .then_with(|| candidates[a].ranks.cmp(&candidates[b].ranks))
    });
    order.truncate(top_n);
    Ok(PathletDictionary {
        pathlets: order.iter().map(|&(_, i)| candidates[i].clone()).collect(),
        influence: order.iter().map(|&(m, _)| m).collect(),
    })
}

/// Dictionary quality on an evaluation corpus, measured through the
/// greedy embeddings: mean fraction of trajectory edges covered, mean
/// fraction of zero embedding coordinates, and mean count of matched
/// pathlets. Zero-edge trajectories are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictMetrics {
    pub cover_ratio: f64,
    pub code_sparsity: f64,
    pub mean_pathlets_per_trajectory: f64,
}

pub fn dict_metrics<S: AsRef<[u32]>>(
    dict: &PathletDictionary,
    eval_trajectories: &[S],
) -> Result<DictMetrics> {
    if dict.is_empty() {
        return Err(Error::Input("dictionary is empty".into()));
    }
    let embedder = Embedder::new(dict);
    let mut n = 0usize;
    let (mut cover_sum, mut sparsity_sum, mut matches_sum) = (0.0, 0.0, 0.0);
    for traj in eval_trajectories {
        let ranks = traj.as_ref();
        if ranks.len() < 2 {
            continue;
        }
        let emb = embedder.embed(ranks);
        let total_edges = (ranks.len() - 1) as f64;
        let covered = total_edges - emb.uncovered_edges as f64;
        let nonzero = emb.coords.iter().filter(|&&c| c > 0).count() as f64;
        cover_sum += covered / total_edges;
        sparsity_sum += 1.0 - nonzero / dict.len() as f64;
        matches_sum += nonzero;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Input("evaluation set has no trajectory with edges".into()));
    }
    let n = n as f64;
    Ok(DictMetrics {
        cover_ratio: cover_sum / n,
        code_sparsity: sparsity_sum / n,
        mean_pathlets_per_trajectory: matches_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn single_candidate_instance(m_edges: usize) -> (Array2<f64>, Array2<f64>) {
        // One trajectory over m edges; one candidate covering all of them.
        let p = Array2::ones((m_edges, 1));
        let d0 = Array2::ones((m_edges, 1));
        (p, d0)
    }

    #[test]
    fn loss_is_zero_at_perfect_reconstruction() {
        let (p, d0) = single_candidate_instance(3);
        let alpha = array![[1.0]];
        assert_eq!(loss(&p, &d0, &alpha, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn loss_at_zero_code_is_half_frobenius_norm() {
        let (p, d0) = single_candidate_instance(4);
        let alpha = array![[0.0]];
        assert_eq!(loss(&p, &d0, &alpha, 0.0).unwrap(), 2.0); // 0.5 * 4
    }

    #[test]
    fn scalar_objective_matches_closed_form() {
        // One candidate covering both edges of a 2-edge trajectory:
        // loss(a) = (1-a)^2 + lambda a. At lambda=0.5 and a=0.75 the
        // closed-form minimum value is 0.0625 + 0.375 = 0.4375.
        let (p, d0) = single_candidate_instance(2);
        let alpha = array![[0.75]];
        let got = loss(&p, &d0, &alpha, 0.5).unwrap();
        assert!((got - 0.4375).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn loss_rejects_shape_mismatch() {
        let (p, d0) = single_candidate_instance(2);
        let alpha = Array2::zeros((2, 1));
        assert!(loss(&p, &d0, &alpha, 0.0).is_err());
    }

    #[test]
    fn grad_is_zero_at_unconstrained_optimum() {
        let (p, d0) = single_candidate_instance(2);
        let g = grad_smooth(&p, &d0, &array![[1.0]]).unwrap();
        assert!(g.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn grad_at_zero_is_minus_d0t_p() {
        let p = array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let d0 = array![[1.0, 0.0], [1.0, 1.0], [0.0, 0.0]];
        let alpha = Array2::zeros((2, 2));
        let g = grad_smooth(&p, &d0, &alpha).unwrap();
        // -D0^T P by hand.
        assert_eq!(g, array![[-2.0, -1.0], [-1.0, -1.0]]);
    }

    /// Central finite differences of the smooth objective, the
    /// independent oracle for the gradient route.
    fn finite_difference_grad(
        p: &Array2<f64>,
        d0: &Array2<f64>,
        alpha: &Array2<f64>,
        h: f64,
    ) -> Array2<f64> {
        let mut fd = Array2::zeros(alpha.dim());
        for i in 0..alpha.nrows() {
            for j in 0..alpha.ncols() {
                let mut hi = alpha.clone();
                hi[[i, j]] += h;
                let mut lo = alpha.clone();
                lo[[i, j]] -= h;
                let f_hi = loss(p, d0, &hi, 0.0).unwrap();
                let f_lo = loss(p, d0, &lo, 0.0).unwrap();
                fd[[i, j]] = (f_hi - f_lo) / (2.0 * h);
            }
        }
        fd
    }

    fn random_binary(rng: &mut impl Rng, rows: usize, cols: usize, density: f64) -> Array2<f64> {
        let mut mat = Array2::zeros((rows, cols));
        for v in mat.iter_mut() {
            if rng.random::<f64>() < density {
                *v = 1.0;
            }
        }
        mat
    }

    #[test]
    fn grad_matches_finite_differences_on_random_instances() {
        let mut rng = rng::stream(42, &["fd-test"]);
        for trial in 0..5 {
            let p = random_binary(&mut rng, 10, 10, 0.4);
            let d0 = random_binary(&mut rng, 10, 10, 0.4);
            let mut alpha = Array2::zeros((10, 10));
            for a in alpha.iter_mut() {
                *a = rng.random::<f64>();
            }
            let g = grad_smooth(&p, &d0, &alpha).unwrap();
            let fd = finite_difference_grad(&p, &d0, &alpha, 1e-6);
            let num: f64 = (&g - &fd).iter().map(|d| d * d).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|d| d * d).sum::<f64>().sqrt();
            assert!(num / den.max(1e-12) < 1e-5, "trial {trial}: rel err {}", num / den);
        }
    }

    #[test]
    fn fit_reaches_unique_optimum_for_identity_instance() {
        let (p, d0) = single_candidate_instance(2);
        let cfg = LearnConfig { lambda: 0.0, ..Default::default() };
        let model = fit(&p, &d0, &cfg).unwrap();
        assert!((model.alpha[[0, 0]] - 1.0).abs() < 1e-3, "alpha={}", model.alpha[[0, 0]]);
        assert!(model.final_loss() < 1e-5, "loss={}", model.final_loss());
    }

    #[test]
    fn fit_matches_scalar_closed_form() {
        // a* = max(0, 1 - lambda/m) for a single candidate covering all
        // m edges of a single trajectory. The default stagnation rule
        // halts this toy slightly short of the optimum, so the check
        // runs with a tighter stopping criterion.
        for &m in &[1usize, 2, 4] {
            for &lambda in &[0.0, 0.5, 1.0, 10.0] {
                let (p, d0) = single_candidate_instance(m);
                let cfg = LearnConfig {
                    lambda,
                    stagnation_tol: 1e-7,
                    patience: 20,
                    max_epochs: 2000,
                    ..Default::default()
                };
                let model = fit(&p, &d0, &cfg).unwrap();
                let expected = (1.0 - lambda / m as f64).max(0.0);
                let got = model.alpha[[0, 0]];
                assert!(
                    (got - expected).abs() < 0.01,
                    "m={m} lambda={lambda}: got {got}, expected {expected}"
                );
            }
        }
    }

    #[test]
    fn fit_never_increases_endpoint_loss() {
        let mut rng = rng::stream(7, &["fit-endpoints"]);
        let p = random_binary(&mut rng, 8, 12, 0.5);
        let d0 = random_binary(&mut rng, 8, 20, 0.3);
        let model = fit(&p, &d0, &LearnConfig::default()).unwrap();
        assert!(model.final_loss() <= model.initial_loss());
        assert!(model.alpha.iter().all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = rng::stream(8, &["fit-det"]);
        let p = random_binary(&mut rng, 6, 9, 0.5);
        let d0 = random_binary(&mut rng, 6, 14, 0.4);
        let cfg = LearnConfig { max_epochs: 50, ..Default::default() };
        let a = fit(&p, &d0, &cfg).unwrap();
        let b = fit(&p, &d0, &cfg).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn fit_rejects_non_binary_input() {
        let p = array![[0.5], [1.0]];
        let d0 = array![[1.0], [1.0]];
        assert!(fit(&p, &d0, &LearnConfig::default()).is_err());
    }

    fn pathlet(ranks: &[u32], support: u64) -> Pathlet {
        Pathlet { ranks: ranks.to_vec(), support }
    }

    #[test]
    fn selection_orders_by_row_mass() {
        let alpha = array![[0.9], [0.1], [0.5]];
        let cands = vec![pathlet(&[0, 1], 5), pathlet(&[1, 2], 4), pathlet(&[2, 0], 3)];
        let dict = select_topn(&alpha, &cands, 2).unwrap();
        assert_eq!(dict.pathlets[0].ranks, vec![0, 1]);
        assert_eq!(dict.pathlets[1].ranks, vec![2, 0]);
        assert!((dict.influence[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn selection_saturates_and_breaks_ties() {
        let alpha = Array2::zeros((3, 2));
        let cands = vec![
            pathlet(&[0, 1, 2], 7),
            pathlet(&[3, 4], 7), // same support, shorter: wins the tie
            pathlet(&[0, 1], 9), // highest support: first
        ];
        let dict = select_topn(&alpha, &cands, 10).unwrap();
        assert_eq!(dict.len(), 3);
        assert_eq!(dict.pathlets[0].ranks, vec![0, 1]);
        assert_eq!(dict.pathlets[1].ranks, vec![3, 4]);
        assert_eq!(dict.pathlets[2].ranks, vec![0, 1, 2]);
    }

    #[test]
    fn metrics_on_verbatim_dictionary() {
        let corpus: Vec<Vec<u32>> = vec![vec![0, 1, 2], vec![2, 1, 0]];
        let dict = PathletDictionary {
            pathlets: vec![pathlet(&[0, 1, 2], 1), pathlet(&[2, 1, 0], 1)],
            influence: vec![1.0, 1.0],
        };
        let m = dict_metrics(&dict, &corpus).unwrap();
        assert_eq!(m.cover_ratio, 1.0);
        assert_eq!(m.mean_pathlets_per_trajectory, 1.0);
        assert_eq!(m.code_sparsity, 0.5);
    }

    #[test]
    fn metrics_with_no_shared_edges() {
        let corpus: Vec<Vec<u32>> = vec![vec![0, 1, 2]];
        let dict =
            PathletDictionary { pathlets: vec![pathlet(&[7, 8], 1)], influence: vec![1.0] };
        let m = dict_metrics(&dict, &corpus).unwrap();
        assert_eq!(m.cover_ratio, 0.0);
        assert_eq!(m.mean_pathlets_per_trajectory, 0.0);
    }

    #[test]
    fn metrics_count_partial_coverage() {
        let corpus: Vec<Vec<u32>> = vec![vec![0, 1, 2]];
        let dict =
            PathletDictionary { pathlets: vec![pathlet(&[0, 1], 1)], influence: vec![1.0] };
        let m = dict_metrics(&dict, &corpus).unwrap();
        assert_eq!(m.cover_ratio, 0.5); // 1 of 2 edges
    }

    #[test]
    fn self_dictionary_reconstruction_is_tight() {
        // lambda = 0 with every trajectory in the candidate set: the
        // optimum reconstructs P essentially exactly.
        let corpus: Vec<Vec<u32>> = vec![vec![0, 1, 2], vec![1, 2, 0], vec![0, 1, 0]];
        let graph = crate::pathlet_graph::induce_graph(&corpus).unwrap();
        let enc = crate::pathlet_graph::encode(&corpus, &corpus, &graph).unwrap();
        let cfg = LearnConfig { lambda: 0.0, ..Default::default() };
        let model = fit(&enc.p_mat, &enc.d0_mat, &cfg).unwrap();
        let p_norm_sq: f64 = enc.p_mat.iter().map(|v| v * v).sum();
        assert!(
            model.final_loss() < 1e-4 * p_norm_sq,
            "loss {} vs bound {}",
            model.final_loss(),
            1e-4 * p_norm_sq
        );
    }
}
