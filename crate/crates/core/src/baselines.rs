//! Closed-form comparison methods: ridge regression into the semantic space
//! (LR) and the bilinear ridge solution of ESZSL. Both predict through the
//! same bilinear arg-max as the learned models.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::types::{validate_pair, CompatibilityModel, Dataset, SemanticMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    /// Feature-side regularisation weight.
    pub gamma: f64,
    /// Semantic-side regularisation weight (ESZSL only).
    pub lambda_sem: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            gamma: 1.0,
            lambda_sem: 1.0,
        }
    }
}

impl RidgeConfig {
    /// Powers of ten from 1e-3 to 1e3, the cross-validation grid.
    pub fn grid() -> Vec<f64> {
        (-3..=3).map(|e| 10f64.powi(e)).collect()
    }

    fn validate(&self, need_lambda: bool) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format_args!("gamma must be > 0, got {}", self.gamma)));
        }
        if need_lambda && !(self.lambda_sem > 0.0 && self.lambda_sem.is_finite()) {
            return Err(Error::invalid(format_args!(
                "lambda_sem must be > 0, got {}",
                self.lambda_sem
            )));
        }
        Ok(())
    }
}

/// `Xᵀ Y` where Y is the one-hot label matrix: per-class feature sums, p×K.
fn class_feature_sums(dataset: &Dataset) -> DMatrix<f64> {
    let x = dataset.features();
    let mut sums = DMatrix::zeros(dataset.dim(), dataset.num_classes());
    for j in 0..dataset.dim() {
        let col = x.column(j);
        for (i, &l) in dataset.labels().iter().enumerate() {
            sums[(j, l)] += col[i];
        }
    }
    sums
}

fn regularised_gram(x: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    gram
}

fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m).ok_or_else(|| Error::invalid(format_args!("{what} is not positive definite")))
}

/// Ridge regression from features to class semantic vectors:
/// `W = (XᵀX + γI)⁻¹ Xᵀ S`, p×q, where row n of S is the semantic vector of
/// instance n's class.
pub fn train_lr(dataset: &Dataset, a_s: &SemanticMatrix, cfg: &RidgeConfig) -> Result<DMatrix<f64>> {
    validate_pair(dataset, a_s).into_result()?;
    cfg.validate(false)?;
    let rhs = class_feature_sums(dataset) * a_s.vectors().transpose();
    let chol = cholesky(regularised_gram(dataset.features(), cfg.gamma), "XᵀX + γI")?;
    Ok(chol.solve(&rhs))
}

/// ESZSL: `V = (XᵀX + γI)⁻¹ Xᵀ Y Aᵀ (A Aᵀ + λI)⁻¹`.
pub fn train_eszsl(
    dataset: &Dataset,
    a_s: &SemanticMatrix,
    cfg: &RidgeConfig,
) -> Result<CompatibilityModel> {
    validate_pair(dataset, a_s).into_result()?;
    cfg.validate(true)?;
    let a = a_s.vectors();
    let rhs = class_feature_sums(dataset) * a.transpose();
    let left = cholesky(regularised_gram(dataset.features(), cfg.gamma), "XᵀX + γI")?.solve(&rhs);
    let mut sem_gram = a * a.transpose();
    for i in 0..sem_gram.nrows() {
        sem_gram[(i, i)] += cfg.lambda_sem;
    }
    // V·G = left with G symmetric, so Vᵀ = G⁻¹ leftᵀ.
    let v = cholesky(sem_gram, "AAᵀ + λI")?
        .solve(&left.transpose())
        .transpose();
    CompatibilityModel::new(v, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_interpolates_identity_as_gamma_vanishes() {
        let ds = Dataset::new(DMatrix::identity(3, 3), vec![0, 1, 2], 3).unwrap();
        let a = SemanticMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let w = train_lr(&ds, &a, &RidgeConfig { gamma: 1e-10, lambda_sem: 1.0 }).unwrap();
        assert!((w - DMatrix::<f64>::identity(3, 3)).amax() < 1e-9);
    }

    #[test]
    fn lr_shrinks_to_zero() {
        let ds = Dataset::new(DMatrix::from_fn(6, 3, |i, j| (i as f64) - (j as f64) * 0.5), vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        let a = SemanticMatrix::new(DMatrix::from_fn(2, 3, |i, j| 1.0 + (i * j) as f64)).unwrap();
        let w = train_lr(&ds, &a, &RidgeConfig { gamma: 1e12, lambda_sem: 1.0 }).unwrap();
        assert!(w.amax() < 1e-9);
    }

    #[test]
    fn eszsl_interpolates_identity() {
        let ds = Dataset::new(DMatrix::identity(3, 3), vec![0, 1, 2], 3).unwrap();
        let a = SemanticMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let cfg = RidgeConfig { gamma: 1e-10, lambda_sem: 1e-10 };
        let v = train_eszsl(&ds, &a, &cfg).unwrap().v;
        assert!((v - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
    }

    #[test]
    fn rejects_non_positive_regularisers() {
        let ds = Dataset::new(DMatrix::identity(2, 2), vec![0, 1], 2).unwrap();
        let a = SemanticMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert!(train_lr(&ds, &a, &RidgeConfig { gamma: 0.0, lambda_sem: 1.0 }).is_err());
        assert!(train_eszsl(&ds, &a, &RidgeConfig { gamma: 1.0, lambda_sem: -1.0 }).is_err());
    }

    #[test]
    fn grid_spans_six_decades() {
        let g = RidgeConfig::grid();
        assert_eq!(g.len(), 7);
        assert!((g[0] - 1e-3).abs() < 1e-18 && (g[6] - 1e3).abs() < 1e-9);
    }
}
