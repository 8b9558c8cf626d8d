//! Fast training by class-mean condensation.
//!
//! Every training class is replaced by its visual pattern, the mean of its
//! feature rows, so an N-row problem becomes a K-row one. The second-moment
//! matrix of a class always dominates the outer product of its mean (their
//! difference is the class covariance), which bounds the condensed squared
//! loss of any linear mapping by the instance-level one.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::Dataset;

/// One mean feature row per class plus the original class sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedDataset {
    pub dataset: Dataset,
    pub counts: Vec<usize>,
}

/// Means of the rows of each class that has at least one row.
///
/// Returns the classes present (ascending), their means (one row each) and
/// their row counts.
pub fn class_means(
    features: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
) -> Result<(Vec<usize>, DMatrix<f64>, Vec<usize>)> {
    if labels.len() != features.nrows() {
        return Err(Error::shape(format_args!(
            "{} labels for {} rows",
            labels.len(),
            features.nrows()
        )));
    }
    let p = features.ncols();
    let mut sums = DMatrix::<f64>::zeros(num_classes, p);
    let mut counts = vec![0usize; num_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(Error::invalid(format_args!("label {l} out of range")));
        }
        counts[l] += 1;
        let mut row = sums.row_mut(l);
        row += features.row(i);
    }
    let present: Vec<usize> = (0..num_classes).filter(|&k| counts[k] > 0).collect();
    let means = DMatrix::from_fn(present.len(), p, |r, c| {
        let k = present[r];
        sums[(k, c)] / counts[k] as f64
    });
    let present_counts = present.iter().map(|&k| counts[k]).collect();
    Ok((present, means, present_counts))
}

/// Condenses each class to its mean feature vector.
pub fn class_visual_patterns(dataset: &Dataset) -> Result<CondensedDataset> {
    let k = dataset.num_classes();
    let (present, means, counts) = class_means(dataset.features(), dataset.labels(), k)?;
    if present.len() != k {
        let missing = (0..k).find(|c| !present.contains(c)).unwrap();
        return Err(Error::invalid(format_args!("class {missing} has no instances")));
    }
    Ok(CondensedDataset {
        dataset: Dataset::new(means, (0..k).collect(), k)?,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop1Check {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

/// Checks that `(1/k)Σ xⱼxⱼᵀ − x̄x̄ᵀ` is positive semidefinite for the rows
/// of one class. The matrix is formed as `(1/k)Σ (xⱼ − x̄)(xⱼ − x̄)ᵀ`, which is
/// equal and avoids cancellation when a class has (nearly) identical rows.
pub fn verify_proposition1(class_rows: &DMatrix<f64>) -> Result<Prop1Check> {
    let (k, p) = class_rows.shape();
    if k == 0 || p == 0 {
        return Err(Error::shape(format_args!("class rows must be non-empty, got {k}x{p}")));
    }
    let mean = class_rows.row_mean();
    let mut centered = class_rows.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let d = centered.tr_mul(&centered) / k as f64;
    let min_eigenvalue = SymmetricEigen::new(d.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(Prop1Check {
        psd: min_eigenvalue >= -1e-9 * d.norm(),
        min_eigenvalue,
    })
}

/// Mean squared regression loss of a fixed mapping before and after
/// condensation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRisk {
    /// `(1/N) Σ ‖xᵀW − t_label‖²` over all instances.
    pub full: f64,
    /// `(1/K) Σ ‖x̄ᵀW − t_k‖²` over the class patterns.
    pub condensed: f64,
    /// Patterns weighted by class size, `(1/N) Σ k_i ‖x̄ᵢᵀW − tᵢ‖²`.
    /// Bounded by `full` even for unbalanced classes.
    pub condensed_weighted: f64,
}

/// `targets` is q×K, one target per class; `mapping` is p×q.
pub fn compare_empirical_risk(
    dataset: &Dataset,
    mapping: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> Result<EmpiricalRisk> {
    if mapping.nrows() != dataset.dim() || mapping.ncols() != targets.nrows() {
        return Err(Error::shape(format_args!(
            "mapping {}x{} vs feature dim {} and target dim {}",
            mapping.nrows(),
            mapping.ncols(),
            dataset.dim(),
            targets.nrows()
        )));
    }
    if targets.ncols() != dataset.num_classes() {
        return Err(Error::shape(format_args!(
            "{} targets for {} classes",
            targets.ncols(),
            dataset.num_classes()
        )));
    }
    let residual_sq = |projected: &DMatrix<f64>, labels: &[usize]| -> Vec<f64> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (projected.row(i).transpose() - targets.column(l)).norm_squared())
            .collect()
    };
    let full_terms = residual_sq(&(dataset.features() * mapping), dataset.labels());
    let n = dataset.len() as f64;
    let full = full_terms.iter().sum::<f64>() / n;

    let condensed = class_visual_patterns(dataset)?;
    let pattern_terms = residual_sq(
        &(condensed.dataset.features() * mapping),
        condensed.dataset.labels(),
    );
    let k = pattern_terms.len() as f64;
    Ok(EmpiricalRisk {
        full,
        condensed: pattern_terms.iter().sum::<f64>() / k,
        condensed_weighted: pattern_terms
            .iter()
            .zip(&condensed.counts)
            .map(|(t, &c)| t * c as f64)
            .sum::<f64>()
            / n,
    })
}
