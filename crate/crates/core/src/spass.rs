//! Self-paced selection of pseudo-labelled unseen instances.
//!
//! Each unseen instance is pseudo-labelled with its arg-max unseen class and
//! scored by the squared distance between its embedding and that one-hot
//! label. Instances under the current threshold are selected; the threshold
//! walks up a schedule of fractions of the largest loss until every instance
//! has been admitted.

use nalgebra::DMatrix;

use crate::aste::{argmax, predict_embedding, squared_distance_to_one_hot};
use crate::error::{Error, Result};
use crate::types::{check_fractions, SemanticMatrix};

/// Loss of one unseen instance under its own pseudo label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnseenLoss {
    /// `C/2M · ‖V A_t‖²`, identical for every unseen instance.
    pub regularizer: f64,
    /// `‖1_z − g‖²` for the pseudo label z. This is the selection quantity.
    pub distance: f64,
    pub pseudo_label: usize,
}

impl UnseenLoss {
    pub fn total(&self) -> f64 {
        self.regularizer + self.distance
    }
}

pub fn unseen_instance_loss(
    x: &[f64],
    v: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    c: f64,
    m: usize,
) -> Result<UnseenLoss> {
    if m == 0 {
        return Err(Error::invalid(format_args!("unseen set size M must be >= 1")));
    }
    let g = predict_embedding(x, v, a_t)?;
    let pseudo_label = argmax(g.as_slice());
    Ok(UnseenLoss {
        regularizer: c / (2.0 * m as f64) * (v * a_t.vectors()).norm_squared(),
        distance: squared_distance_to_one_hot(g.as_slice(), pseudo_label),
        pseudo_label,
    })
}

/// Gradient of a selected unseen instance's loss with its pseudo label held
/// fixed: `(C/M)·V A Aᵀ + 2·x·(g − 1_z)ᵀ·Aᵀ`.
pub fn unseen_instance_gradient(
    x: &[f64],
    pseudo_label: usize,
    v: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    c: f64,
    m: usize,
) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::invalid(format_args!("unseen set size M must be >= 1")));
    }
    if pseudo_label >= a_t.num_classes() {
        return Err(Error::invalid(format_args!("pseudo label {pseudo_label} out of range")));
    }
    let g = predict_embedding(x, v, a_t)?;
    let a = a_t.vectors();
    let mut grad = v * (a * a.transpose()) * (c / m as f64);
    let mut e = g.0 * 2.0;
    e[pseudo_label] -= 2.0;
    let r = a * e;
    grad.ger(1.0, &nalgebra::DVector::from_column_slice(x), &r, 1.0);
    Ok(grad)
}

/// Loss of a selected unseen instance against a given (frozen) pseudo label.
pub fn unseen_surrogate_loss(
    x: &[f64],
    pseudo_label: usize,
    v: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    c: f64,
    m: usize,
) -> Result<f64> {
    if m == 0 || pseudo_label >= a_t.num_classes() {
        return Err(Error::invalid(format_args!("bad pseudo label or M")));
    }
    let g = predict_embedding(x, v, a_t)?;
    Ok(c / (2.0 * m as f64) * (v * a_t.vectors()).norm_squared()
        + squared_distance_to_one_hot(g.as_slice(), pseudo_label))
}

/// Indicator per instance: loss strictly below `theta`, or at most `theta`
/// on the final stage so the largest loss is admitted.
pub fn select(losses: &[f64], theta: f64, final_stage: bool) -> Result<Vec<bool>> {
    if !(theta >= 0.0) {
        return Err(Error::invalid(format_args!("threshold must be >= 0, got {theta}")));
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::invalid(format_args!(
            "loss {i} is {} (must be finite and >= 0)",
            losses[i]
        )));
    }
    Ok(losses
        .iter()
        .map(|&l| if final_stage { l <= theta } else { l < theta })
        .collect())
}

/// One stage of the threshold schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub theta: f64,
    pub final_stage: bool,
}

/// `fraction · max(losses)` for every fraction; the last stage is final.
pub fn theta_schedule(losses: &[f64], fractions: &[f64]) -> Result<Vec<Threshold>> {
    if losses.is_empty() {
        return Err(Error::invalid(format_args!("empty loss vector")));
    }
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid(format_args!("non-finite loss")));
    }
    check_fractions(fractions)?;
    let delta = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scaled_schedule(delta, fractions))
}

pub(crate) fn scaled_schedule(delta: f64, fractions: &[f64]) -> Vec<Threshold> {
    let last = fractions.len() - 1;
    fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| Threshold {
            theta: f * delta,
            final_stage: i == last,
        })
        .collect()
}

/// Selection indicators, losses and pseudo labels over the unseen set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub indicators: Vec<bool>,
    /// Squared-distance part of each instance's loss.
    pub losses: Vec<f64>,
    pub pseudo_labels: Vec<usize>,
    pub theta: f64,
    /// Shared `C/2M · ‖V A_t‖²` term.
    pub regularizer: f64,
}

impl SelectionState {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn selected_count(&self) -> usize {
        self.indicators.iter().filter(|&&u| u).count()
    }

    pub fn apply(&mut self, threshold: Threshold) -> Result<()> {
        self.indicators = select(&self.losses, threshold.theta, threshold.final_stage)?;
        self.theta = threshold.theta;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn select_examples() {
        assert_eq!(select(&[0.1, 0.5, 0.9], 0.6, false).unwrap(), vec![true, true, false]);
        assert_eq!(select(&[0.1, 0.5, 0.9], 0.0, false).unwrap(), vec![false; 3]);
        assert_eq!(select(&[0.1, 0.9], 0.9, true).unwrap(), vec![true, true]);
        assert_eq!(select(&[0.1, 0.9], 0.9, false).unwrap(), vec![true, false]);
        assert!(select(&[f64::NAN], 1.0, false).is_err());
    }

    #[test]
    fn schedule_examples() {
        let s = theta_schedule(&[0.3, 2.0, 1.1], &[0.5, 0.7, 0.9, 1.0]).unwrap();
        let thetas: Vec<f64> = s.iter().map(|t| t.theta).collect();
        assert_eq!(thetas, vec![1.0, 1.4, 1.8, 2.0]);
        assert!(s[3].final_stage && !s[2].final_stage);

        let s = theta_schedule(&[1.0], &[0.5, 0.7, 0.9, 1.0]).unwrap();
        let thetas: Vec<f64> = s.iter().map(|t| t.theta).collect();
        assert_eq!(thetas, vec![0.5, 0.7, 0.9, 1.0]);

        assert!(theta_schedule(&[], &[1.0]).is_err());
    }

    #[test]
    fn equal_losses_only_select_at_closure() {
        let c = 0.8;
        let losses = vec![c; 5];
        let schedule = theta_schedule(&losses, &[0.5, 0.7, 0.9, 1.0]).unwrap();
        for stage in &schedule[..3] {
            assert!(select(&losses, stage.theta, stage.final_stage).unwrap().iter().all(|u| !u));
        }
        let last = schedule[3];
        assert!(select(&losses, last.theta, last.final_stage).unwrap().iter().all(|&u| u));
    }

    #[test]
    fn unseen_loss_cases() {
        let a = SemanticMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let v = DMatrix::identity(2, 2);
        let l = unseen_instance_loss(&[0.5, 0.5], &v, &a, 0.1, 4).unwrap();
        assert_eq!(l.pseudo_label, 0);
        assert_eq!(l.distance, 0.5);
        assert!((l.regularizer - 0.1 / 8.0 * 2.0).abs() < 1e-15);

        let l = unseen_instance_loss(&[0.0, 1.0], &v, &a, 0.1, 4).unwrap();
        assert_eq!(l.pseudo_label, 1);
        assert_eq!(l.distance, 0.0);
        assert_eq!(l.total(), l.regularizer);
    }

    proptest! {
        #[test]
        fn distance_is_min_over_classes(
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            vv in proptest::collection::vec(-1.0f64..1.0, 6),
            aa in proptest::collection::vec(0.1f64..1.0, 8),
        ) {
            let v = DMatrix::from_column_slice(3, 2, &vv);
            let a = SemanticMatrix::new(DMatrix::from_column_slice(2, 4, &aa)).unwrap();
            let l = unseen_instance_loss(&x, &v, &a, 0.1, 1).unwrap();
            let g = predict_embedding(&x, &v, &a).unwrap();
            let brute = (0..4)
                .map(|z| squared_distance_to_one_hot(g.as_slice(), z))
                .fold(f64::INFINITY, f64::min);
            prop_assert!((l.distance - brute).abs() < 1e-12);
        }

        #[test]
        fn selection_is_monotone_in_theta(
            losses in proptest::collection::vec(0.0f64..5.0, 1..40),
            t1 in 0.0f64..5.0,
            dt in 0.0f64..5.0,
        ) {
            let a = select(&losses, t1, false).unwrap();
            let b = select(&losses, t1 + dt, false).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(&x, &y)| !x || y));
        }

        #[test]
        fn selection_is_permutation_equivariant(
            losses in proptest::collection::vec(0.0f64..5.0, 1..30),
            theta in 0.0f64..5.0,
            rot in 0usize..30,
        ) {
            let n = losses.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<f64> = perm.iter().map(|&i| losses[i]).collect();
            let base = select(&losses, theta, false).unwrap();
            let moved = select(&permuted, theta, false).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                prop_assert_eq!(moved[j], base[i]);
            }
        }
    }
}
