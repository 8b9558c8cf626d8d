//! Adaptive structural embedding.
//!
//! An instance `x` is scored against class semantic vector `a` through the
//! bilinear form `xᵀ V a`. Its label-space embedding is `g = (V A)ᵀ x` and the
//! margin it must clear is the squared distance between `g` and its one-hot
//! label, so confidently-correct instances are penalised less than borderline
//! ones. Misclassified instances additionally pay the gap between the winning
//! score and the true-class score.
//!
//! Training follows a concave-convex procedure: every outer iteration freezes
//! the predicted labels under the current `V`, then runs minibatch SGD over the
//! resulting surrogate with each learning rate of the schedule in turn.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::types::{
    one_hot, validate_pair, CompatibilityModel, Dataset, LabelVector, SemanticMatrix, TrainConfig,
};

/// Index of the largest score; ties go to the smallest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_model_dims(x: &[f64], v: &DMatrix<f64>, q: usize) -> Result<()> {
    if x.len() != v.nrows() {
        return Err(Error::shape(format_args!(
            "feature length {} vs V rows {}",
            x.len(),
            v.nrows()
        )));
    }
    if q != v.ncols() {
        return Err(Error::shape(format_args!(
            "semantic dim {q} vs V columns {}",
            v.ncols()
        )));
    }
    Ok(())
}

/// Bilinear compatibility `xᵀ V a`.
pub fn compatibility_score(x: &[f64], v: &DMatrix<f64>, a: &[f64]) -> Result<f64> {
    check_model_dims(x, v, a.len())?;
    let mut total = 0.0;
    for (j, &aj) in a.iter().enumerate() {
        total += aj * dot(x, v.column(j).as_slice());
    }
    Ok(total)
}

/// Label-space embedding `g = (V A)ᵀ x`, one entry per class of `semantics`.
pub fn predict_embedding(
    x: &[f64],
    v: &DMatrix<f64>,
    semantics: &SemanticMatrix,
) -> Result<LabelVector> {
    check_model_dims(x, v, semantics.dim())?;
    let w = v * semantics.vectors();
    let g = w.tr_mul(&nalgebra::DVector::from_column_slice(x));
    Ok(LabelVector(g))
}

/// Class with the largest compatibility score.
pub fn predict_label(x: &[f64], v: &DMatrix<f64>, semantics: &SemanticMatrix) -> Result<usize> {
    let g = predict_embedding(x, v, semantics)?;
    Ok(argmax(g.as_slice()))
}

/// Predicted class for every row of an N×p feature matrix.
pub fn predict_labels(
    features: &DMatrix<f64>,
    v: &DMatrix<f64>,
    semantics: &SemanticMatrix,
) -> Result<Vec<usize>> {
    if features.ncols() != v.nrows() || semantics.dim() != v.ncols() {
        return Err(Error::shape(format_args!(
            "features {}x{}, V {}x{}, semantics dim {}",
            features.nrows(),
            features.ncols(),
            v.nrows(),
            v.ncols(),
            semantics.dim()
        )));
    }
    let scores = features * (v * semantics.vectors());
    Ok(scores
        .row_iter()
        .map(|row| argmax(row.transpose().as_slice()))
        .collect())
}

/// Squared distance between an embedding and its one-hot label.
pub fn adaptive_margin(g: &LabelVector, y: &LabelVector) -> Result<f64> {
    if g.len() != y.len() {
        return Err(Error::shape(format_args!(
            "embedding length {} vs label length {}",
            g.len(),
            y.len()
        )));
    }
    if y.one_hot_index().is_none() {
        return Err(Error::invalid(format_args!("label vector is not one-hot")));
    }
    Ok((&g.0 - &y.0).norm_squared())
}

/// The per-instance seen cost split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeenLossBreakdown {
    pub regularizer: f64,
    pub margin_delta: f64,
    /// Winning score minus true-class score; zero when the prediction is correct.
    pub score_gap: f64,
    pub total: f64,
}

fn regularizer_share(v: &DMatrix<f64>, a: &SemanticMatrix, c: f64, n: usize) -> f64 {
    c / (2.0 * n as f64) * (v * a.vectors()).norm_squared()
}

fn check_loss_args(label: usize, a: &SemanticMatrix, c: f64, n: usize) -> Result<()> {
    if label >= a.num_classes() {
        return Err(Error::invalid(format_args!(
            "label {label} out of range for {} classes",
            a.num_classes()
        )));
    }
    if !(c > 0.0) || n == 0 {
        return Err(Error::invalid(format_args!(
            "need C > 0 and N >= 1 (got C={c}, N={n})"
        )));
    }
    Ok(())
}

/// Cost of one seen instance: its `C/2N` share of the regulariser, the
/// adaptive margin, and the score gap when misclassified.
pub fn seen_instance_loss(
    x: &[f64],
    label: usize,
    v: &DMatrix<f64>,
    a_s: &SemanticMatrix,
    c: f64,
    n: usize,
) -> Result<SeenLossBreakdown> {
    check_model_dims(x, v, a_s.dim())?;
    let predicted = predict_label(x, v, a_s)?;
    seen_surrogate_loss(x, label, predicted, v, a_s, c, n)
}

/// [`seen_instance_loss`] with the predicted label supplied (held fixed)
/// rather than recomputed from `v`.
pub fn seen_surrogate_loss(
    x: &[f64],
    label: usize,
    predicted: usize,
    v: &DMatrix<f64>,
    a_s: &SemanticMatrix,
    c: f64,
    n: usize,
) -> Result<SeenLossBreakdown> {
    check_model_dims(x, v, a_s.dim())?;
    check_loss_args(label, a_s, c, n)?;
    check_loss_args(predicted, a_s, c, n)?;
    let g = predict_embedding(x, v, a_s)?;
    let y = one_hot(label, a_s.num_classes())?;
    let regularizer = regularizer_share(v, a_s, c, n);
    let margin_delta = adaptive_margin(&g, &y)?;
    let score_gap = if predicted == label {
        0.0
    } else {
        g.0[predicted] - g.0[label]
    };
    Ok(SeenLossBreakdown {
        regularizer,
        margin_delta,
        score_gap,
        total: regularizer + margin_delta + score_gap,
    })
}

/// Gradient of [`seen_instance_loss`] with respect to `V`, holding the
/// predicted label at its value under `v`.
pub fn seen_instance_gradient(
    x: &[f64],
    label: usize,
    v: &DMatrix<f64>,
    a_s: &SemanticMatrix,
    c: f64,
    n: usize,
) -> Result<DMatrix<f64>> {
    check_model_dims(x, v, a_s.dim())?;
    let predicted = predict_label(x, v, a_s)?;
    seen_surrogate_gradient(x, label, predicted, v, a_s, c, n)
}

/// Gradient of [`seen_surrogate_loss`]:
/// `(C/N)·V A Aᵀ + x·(2(g − y) + [ŷ ≠ y](ŷ − y))ᵀ·Aᵀ`.
pub fn seen_surrogate_gradient(
    x: &[f64],
    label: usize,
    predicted: usize,
    v: &DMatrix<f64>,
    a_s: &SemanticMatrix,
    c: f64,
    n: usize,
) -> Result<DMatrix<f64>> {
    check_model_dims(x, v, a_s.dim())?;
    check_loss_args(label, a_s, c, n)?;
    check_loss_args(predicted, a_s, c, n)?;
    let a = a_s.vectors();
    let mut grad = v * (a * a.transpose()) * (c / n as f64);
    let g = predict_embedding(x, v, a_s)?;
    let mut e = g.0 * 2.0;
    e[label] -= 2.0;
    if predicted != label {
        e[predicted] += 1.0;
        e[label] -= 1.0;
    }
    let r = a * e;
    let xv = nalgebra::DVector::from_column_slice(x);
    grad.ger(1.0, &xv, &r, 1.0);
    Ok(grad)
}

/// Full seen objective: `(C/2)‖V A‖² + Σₙ (Δₙ + score gapₙ)`.
pub fn aste_objective(seen: &Dataset, a_s: &SemanticMatrix, v: &DMatrix<f64>, c: f64) -> Result<f64> {
    let block = SeenBlock::new(seen, a_s)?;
    if block.xt.nrows() != v.nrows() || a_s.dim() != v.ncols() {
        return Err(Error::shape(format_args!("model does not match data dimensions")));
    }
    let problem = CccpProblem {
        seen: block,
        unseen: None,
        c,
    };
    Ok(problem.objective(v))
}

/// Seen instances laid out p×N so each instance is a contiguous column.
pub(crate) struct SeenBlock<'a> {
    pub xt: DMatrix<f64>,
    pub labels: &'a [usize],
    pub semantics: &'a SemanticMatrix,
}

impl<'a> SeenBlock<'a> {
    pub fn new(seen: &'a Dataset, semantics: &'a SemanticMatrix) -> Result<Self> {
        validate_pair(seen, semantics).into_result()?;
        Ok(SeenBlock {
            xt: seen.features().transpose(),
            labels: seen.labels(),
            semantics,
        })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn instance(&self, i: usize) -> &[f64] {
        let p = self.xt.nrows();
        &self.xt.as_slice()[i * p..(i + 1) * p]
    }
}

/// Selected unseen instances with frozen pseudo labels.
pub(crate) struct UnseenBlock<'a> {
    pub xt: DMatrix<f64>,
    pub pseudo_labels: Vec<usize>,
    pub semantics: &'a SemanticMatrix,
    /// Size of the full unseen set; sets the per-instance regulariser share.
    pub total: usize,
}

impl UnseenBlock<'_> {
    fn len(&self) -> usize {
        self.pseudo_labels.len()
    }

    fn instance(&self, i: usize) -> &[f64] {
        let p = self.xt.nrows();
        &self.xt.as_slice()[i * p..(i + 1) * p]
    }
}

/// Training problem for one V phase. Pool indices `0..N` address seen
/// instances, `N..N+S` the selected unseen ones.
pub(crate) struct CccpProblem<'a> {
    pub seen: SeenBlock<'a>,
    pub unseen: Option<UnseenBlock<'a>>,
    pub c: f64,
}

struct Scratch {
    g: Vec<f64>,
    r: Vec<f64>,
}

impl CccpProblem<'_> {
    pub fn pool_size(&self) -> usize {
        self.seen.len() + self.unseen.as_ref().map_or(0, |u| u.len())
    }

    pub fn freeze_predictions(&self, v: &DMatrix<f64>) -> Vec<usize> {
        let w = v * self.seen.semantics.vectors();
        let mut g = vec![0.0; w.ncols()];
        (0..self.seen.len())
            .map(|i| {
                embed(&w, self.seen.instance(i), &mut g);
                argmax(&g)
            })
            .collect()
    }

    /// Objective with seen predictions taken at `v` and unseen pseudo labels
    /// as frozen in the block.
    pub fn objective(&self, v: &DMatrix<f64>) -> f64 {
        let a_s = self.seen.semantics;
        let w = v * a_s.vectors();
        let mut total = 0.5 * self.c * w.norm_squared();
        let mut g = vec![0.0; w.ncols()];
        for i in 0..self.seen.len() {
            embed(&w, self.seen.instance(i), &mut g);
            let y = self.seen.labels[i];
            let predicted = argmax(&g);
            total += squared_distance_to_one_hot(&g, y) + (g[predicted] - g[y]);
        }
        if let Some(unseen) = &self.unseen {
            let wt = v * unseen.semantics.vectors();
            let share = self.c / (2.0 * unseen.total as f64) * wt.norm_squared();
            let mut g = vec![0.0; wt.ncols()];
            for i in 0..unseen.len() {
                embed(&wt, unseen.instance(i), &mut g);
                total += share + squared_distance_to_one_hot(&g, unseen.pseudo_labels[i]);
            }
        }
        total
    }

    /// Mean per-instance gradient over `batch` (pool indices) into `out`.
    fn minibatch_gradient(
        &self,
        v: &DMatrix<f64>,
        batch: &[usize],
        frozen: &[usize],
        scratch: &mut Scratch,
        out: &mut DMatrix<f64>,
    ) {
        out.fill(0.0);
        let n_seen = self.seen.len();
        let a_s = self.seen.semantics;
        let w_s = v * a_s.vectors();
        let mut seen_count = 0usize;
        let mut unseen_count = 0usize;
        let w_t = self.unseen.as_ref().map(|u| v * u.semantics.vectors());

        for &idx in batch {
            if idx < n_seen {
                seen_count += 1;
                let x = self.seen.instance(idx);
                let y = self.seen.labels[idx];
                let k = w_s.ncols();
                let g = &mut scratch.g[..k];
                embed(&w_s, x, g);
                for e in g.iter_mut() {
                    *e *= 2.0;
                }
                g[y] -= 2.0;
                let predicted = frozen[idx];
                if predicted != y {
                    g[predicted] += 1.0;
                    g[y] -= 1.0;
                }
                accumulate_outer(out, x, a_s.vectors(), g, &mut scratch.r);
            } else {
                let unseen = self.unseen.as_ref().expect("pool index beyond seen block");
                let w_t = w_t.as_ref().unwrap();
                unseen_count += 1;
                let j = idx - n_seen;
                let x = unseen.instance(j);
                let k = w_t.ncols();
                let g = &mut scratch.g[..k];
                embed(w_t, x, g);
                for e in g.iter_mut() {
                    *e *= 2.0;
                }
                g[unseen.pseudo_labels[j]] -= 2.0;
                accumulate_outer(out, x, unseen.semantics.vectors(), g, &mut scratch.r);
            }
        }

        if seen_count > 0 {
            let coef = self.c / n_seen as f64 * seen_count as f64;
            out.gemm(coef, &w_s, &a_s.vectors().transpose(), 1.0);
        }
        if let (Some(unseen), Some(w_t)) = (&self.unseen, &w_t) {
            if unseen_count > 0 {
                let coef = self.c / unseen.total as f64 * unseen_count as f64;
                out.gemm(coef, w_t, &unseen.semantics.vectors().transpose(), 1.0);
            }
        }
        let active = seen_count + unseen_count;
        if active > 0 {
            *out /= active as f64;
        }
    }
}

/// g = Wᵀx
#[inline]
fn embed(w: &DMatrix<f64>, x: &[f64], g: &mut [f64]) {
    let p = w.nrows();
    let ws = w.as_slice();
    for (k, gk) in g.iter_mut().enumerate() {
        *gk = dot(x, &ws[k * p..(k + 1) * p]);
    }
}

#[inline]
pub(crate) fn squared_distance_to_one_hot(g: &[f64], label: usize) -> f64 {
    g.iter()
        .enumerate()
        .map(|(k, &v)| {
            let d = if k == label { v - 1.0 } else { v };
            d * d
        })
        .sum()
}

/// out += x · (A e)ᵀ
#[inline]
fn accumulate_outer(out: &mut DMatrix<f64>, x: &[f64], a: &DMatrix<f64>, e: &[f64], r: &mut Vec<f64>) {
    let q = a.nrows();
    r.clear();
    r.resize(q, 0.0);
    let av = a.as_slice();
    for (k, &ek) in e.iter().enumerate() {
        if ek == 0.0 {
            continue;
        }
        for (rj, &ajk) in r.iter_mut().zip(&av[k * q..(k + 1) * q]) {
            *rj += ajk * ek;
        }
    }
    let p = x.len();
    let os = out.as_mut_slice();
    for (j, &rj) in r.iter().enumerate() {
        for (o, &xi) in os[j * p..(j + 1) * p].iter_mut().zip(x) {
            *o += rj * xi;
        }
    }
}

/// Runs the outer CCCP loop from `v`, returning the final matrix and the
/// objective after initialisation and after every outer iteration.
pub(crate) fn run_cccp(
    problem: &CccpProblem<'_>,
    mut v: DMatrix<f64>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut history = vec![problem.objective(&v)];
    if !history[0].is_finite() {
        return Err(Error::Diverged {
            outer: 0,
            minibatch: 0,
            detail: "initial objective is not finite".into(),
        });
    }
    let mut pool: Vec<usize> = (0..problem.pool_size()).collect();
    let max_k = problem
        .seen
        .semantics
        .num_classes()
        .max(problem.unseen.as_ref().map_or(0, |u| u.semantics.num_classes()));
    let mut scratch = Scratch {
        g: vec![0.0; max_k],
        r: Vec::new(),
    };
    let mut grad = DMatrix::zeros(v.nrows(), v.ncols());

    for outer in 1..=cfg.max_outer_iters {
        let frozen = problem.freeze_predictions(&v);
        let mut batch_no = 0usize;
        for &eta in &cfg.eta_schedule {
            for _ in 0..cfg.epochs_per_eta {
                pool.shuffle(rng);
                for batch in pool.chunks(cfg.minibatch) {
                    problem.minibatch_gradient(&v, batch, &frozen, &mut scratch, &mut grad);
                    v.zip_apply(&grad, |w, d| *w -= eta * d);
                    if !v.iter().all(|x| x.is_finite()) {
                        return Err(Error::Diverged {
                            outer,
                            minibatch: batch_no,
                            detail: format!("non-finite update at learning rate {eta}"),
                        });
                    }
                    batch_no += 1;
                }
            }
        }
        let obj = problem.objective(&v);
        if !obj.is_finite() {
            return Err(Error::Diverged {
                outer,
                minibatch: batch_no,
                detail: "objective is not finite".into(),
            });
        }
        let prev = *history.last().unwrap();
        history.push(obj);
        if ((prev - obj) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance {
            break;
        }
    }
    Ok((v, history))
}

pub(crate) fn random_init(p: usize, q: usize, std: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    if std == 0.0 {
        return DMatrix::zeros(p, q);
    }
    let normal = Normal::new(0.0, std).expect("finite std");
    DMatrix::from_fn(p, q, |_, _| normal.sample(rng))
}

/// Trains V on seen data. `v_init` replaces the random normal start.
pub fn train_aste(
    seen: &Dataset,
    a_s: &SemanticMatrix,
    cfg: &TrainConfig,
    v_init: Option<&DMatrix<f64>>,
) -> Result<CompatibilityModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    train_aste_with_rng(seen, a_s, cfg, v_init, &mut rng)
}

pub(crate) fn train_aste_with_rng(
    seen: &Dataset,
    a_s: &SemanticMatrix,
    cfg: &TrainConfig,
    v_init: Option<&DMatrix<f64>>,
    rng: &mut ChaCha8Rng,
) -> Result<CompatibilityModel> {
    cfg.validate()?;
    let block = SeenBlock::new(seen, a_s)?;
    let (p, q) = (seen.dim(), a_s.dim());
    let v0 = match v_init {
        Some(v) if v.shape() != (p, q) => {
            return Err(Error::shape(format_args!(
                "initial V is {}x{}, expected {p}x{q}",
                v.nrows(),
                v.ncols()
            )))
        }
        Some(v) => v.clone(),
        None => random_init(p, q, cfg.init_std, rng),
    };
    let problem = CccpProblem {
        seen: block,
        unseen: None,
        c: cfg.c,
    };
    let (v, history) = run_cccp(&problem, v0, cfg, rng)?;
    let mut model = CompatibilityModel::new(v, cfg.seed)?;
    model.objective_history = history;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b): (f64, f64) = ($a, $b);
                assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
            }};
        }
        pub(crate) use assert_close;
    }

    fn identity(n: usize) -> DMatrix<f64> {
        DMatrix::identity(n, n)
    }

    #[test]
    fn score_examples() {
        let v = identity(2);
        assert_eq!(compatibility_score(&[1., 0.], &v, &[0., 1.]).unwrap(), 0.0);
        assert_eq!(compatibility_score(&[1., 2.], &v, &[3., 4.]).unwrap(), 11.0);
        let v = DMatrix::from_row_slice(2, 3, &[1., -2., 3., 0.5, 4., -1.]);
        assert_eq!(compatibility_score(&[0., 0.], &v, &[1., 2., 3.]).unwrap(), 0.0);
        assert!(matches!(
            compatibility_score(&[1., 2., 3.], &identity(2), &[1., 1.]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn embedding_identity_chain() {
        let a = SemanticMatrix::new(identity(2)).unwrap();
        let g = predict_embedding(&[0.3, 0.7], &identity(2), &a).unwrap();
        assert_eq!(g.as_slice(), &[0.3, 0.7]);
        let g = predict_embedding(&[0.3, 0.7], &DMatrix::zeros(2, 2), &a).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn argmax_ties_take_smallest_index() {
        assert_eq!(argmax(&[0.2, 0.9, 0.1]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn predict_label_uses_scores() {
        let a = SemanticMatrix::new(identity(3)).unwrap();
        assert_eq!(predict_label(&[0.2, 0.9, 0.1], &identity(3), &a).unwrap(), 1);
        let a = SemanticMatrix::new(identity(2)).unwrap();
        assert_eq!(predict_label(&[0.5, 0.5], &identity(2), &a).unwrap(), 0);
    }

    #[test]
    fn adaptive_margin_examples() {
        let y = one_hot(1, 3).unwrap();
        assert_eq!(adaptive_margin(&y, &y).unwrap(), 0.0);
        let g = LabelVector(nalgebra::DVector::zeros(3));
        assert_eq!(adaptive_margin(&g, &y).unwrap(), 1.0);
        let bad = LabelVector(nalgebra::DVector::from_vec(vec![0.5, 0.5, 0.0]));
        assert!(adaptive_margin(&g, &bad).is_err());
        assert!(adaptive_margin(&LabelVector(nalgebra::DVector::zeros(2)), &y).is_err());
    }

    // Three seen classes with V = I and A = I so g equals x. The correct
    // instances embed at 0.7 and 0.5 on their true class; the wrong one puts
    // 0.6 on another class and 0.3 on its own.
    #[test]
    fn illustrated_costs() {
        let a = SemanticMatrix::new(identity(3)).unwrap();
        let v = identity(3);
        let xi = [0.7, 0.2, 0.1];
        let li = seen_instance_loss(&xi, 0, &v, &a, 0.1, 3).unwrap();
        assert_close!(li.margin_delta, 0.14, 1e-12);
        assert_eq!(li.score_gap, 0.0);

        let xj = [0.5, 0.3, 0.2];
        let lj = seen_instance_loss(&xj, 0, &v, &a, 0.1, 3).unwrap();
        assert_close!(lj.margin_delta, 0.38, 1e-12);
        assert_close!(lj.total, lj.regularizer + 0.38, 1e-12);

        let xk = [0.3, 0.6, 0.1];
        assert_eq!(predict_label(&xk, &v, &a).unwrap(), 1);
        let lk = seen_instance_loss(&xk, 0, &v, &a, 0.1, 3).unwrap();
        assert_close!(lk.margin_delta, 0.86, 1e-12);
        assert_close!(lk.score_gap, 0.3, 1e-12);
        assert_close!(lk.margin_delta + lk.score_gap, 1.16, 1e-12);
        assert_close!(lk.regularizer, 0.1 / 6.0 * 3.0, 1e-12);
    }

    #[test]
    fn zero_model_loss() {
        let a = SemanticMatrix::new(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.])).unwrap();
        let v = DMatrix::zeros(2, 2);
        let l = seen_instance_loss(&[1.0, -1.0], 2, &v, &a, 0.1, 10).unwrap();
        assert_eq!(l.regularizer, 0.0);
        assert_eq!(l.score_gap, 0.0);
        assert_eq!(l.total, 1.0);
    }

    #[test]
    fn zero_gradient_at_origin() {
        let a = SemanticMatrix::new(DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.])).unwrap();
        let g = seen_instance_gradient(&[0.0, 0.0], 1, &DMatrix::zeros(2, 2), &a, 0.1, 5).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn batch_gradient_matches_per_instance_mean() {
        let a = SemanticMatrix::new(DMatrix::from_row_slice(2, 3, &[1., -0.5, 0.3, 0.2, 0.8, -1.0])).unwrap();
        let x = DMatrix::from_row_slice(4, 3, &[0.1, 0.5, -0.2, 1.0, 0.0, 0.3, -0.4, 0.2, 0.9, 0.3, 0.3, 0.3]);
        let ds = Dataset::new(x, vec![0, 1, 2, 1], 3).unwrap();
        let v = DMatrix::from_row_slice(3, 2, &[0.3, -0.1, 0.2, 0.4, -0.6, 0.1]);
        let problem = CccpProblem {
            seen: SeenBlock::new(&ds, &a).unwrap(),
            unseen: None,
            c: 0.1,
        };
        let frozen = problem.freeze_predictions(&v);
        let mut scratch = Scratch { g: vec![0.0; 3], r: vec![] };
        let mut out = DMatrix::zeros(3, 2);
        problem.minibatch_gradient(&v, &[0, 1, 2, 3], &frozen, &mut scratch, &mut out);
        let mut expected = DMatrix::zeros(3, 2);
        for i in 0..4 {
            let row: Vec<f64> = ds.features().row(i).iter().copied().collect();
            expected += seen_instance_gradient(&row, ds.labels()[i], &v, &a, 0.1, 4).unwrap();
        }
        expected /= 4.0;
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn objective_matches_sum_of_instance_losses() {
        let a = SemanticMatrix::new(DMatrix::from_row_slice(2, 3, &[1., -0.5, 0.3, 0.2, 0.8, -1.0])).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.5, 1.0, 0.0, -0.4, 0.2]);
        let ds = Dataset::new(x, vec![0, 1, 2], 3).unwrap();
        let v = DMatrix::from_row_slice(2, 2, &[0.3, -0.1, 0.2, 0.4]);
        let total: f64 = (0..3)
            .map(|i| {
                let row: Vec<f64> = ds.features().row(i).iter().copied().collect();
                seen_instance_loss(&row, ds.labels()[i], &v, &a, 0.1, 3).unwrap().total
            })
            .sum();
        assert_close!(aste_objective(&ds, &a, &v, 0.1).unwrap(), total, 1e-12);
    }
}
