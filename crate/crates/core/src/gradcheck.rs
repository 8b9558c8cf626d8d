//! Central finite-difference checks of the analytic gradients.
//!
//! Predicted and pseudo labels are frozen at their values under the base
//! matrix, so both checked losses are smooth polynomials in `V`.

use nalgebra::DMatrix;

use crate::aste::{predict_label, seen_surrogate_gradient, seen_surrogate_loss};
use crate::error::Result;
use crate::spass::{unseen_instance_gradient, unseen_instance_loss, unseen_surrogate_loss};
use crate::types::SemanticMatrix;

pub const DEFAULT_STEP: f64 = 1e-6;

/// `‖fd − analytic‖_F / max(‖fd‖_F, ‖analytic‖_F)`, or the absolute
/// difference norm when both are below 1e-12.
pub fn relative_error(fd: &DMatrix<f64>, analytic: &DMatrix<f64>) -> f64 {
    let diff = (fd - analytic).norm();
    let scale = fd.norm().max(analytic.norm());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn central_difference<F>(v: &DMatrix<f64>, step: f64, mut f: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&DMatrix<f64>) -> Result<f64>,
{
    let mut probe = v.clone();
    let mut out = DMatrix::zeros(v.nrows(), v.ncols());
    for idx in 0..v.len() {
        let base = probe[idx];
        probe[idx] = base + step;
        let up = f(&probe)?;
        probe[idx] = base - step;
        let down = f(&probe)?;
        probe[idx] = base;
        out[idx] = (up - down) / (2.0 * step);
    }
    Ok(out)
}

/// Relative error of the seen-instance gradient against finite differences.
pub fn check_seen_gradient(
    x: &[f64],
    label: usize,
    v: &DMatrix<f64>,
    a_s: &SemanticMatrix,
    c: f64,
    n: usize,
    step: f64,
) -> Result<f64> {
    let predicted = predict_label(x, v, a_s)?;
    let analytic = seen_surrogate_gradient(x, label, predicted, v, a_s, c, n)?;
    let fd = central_difference(v, step, |w| {
        Ok(seen_surrogate_loss(x, label, predicted, w, a_s, c, n)?.total)
    })?;
    Ok(relative_error(&fd, &analytic))
}

/// Relative error of the selected-unseen-instance gradient against finite
/// differences.
pub fn check_unseen_gradient(
    x: &[f64],
    v: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    c: f64,
    m: usize,
    step: f64,
) -> Result<f64> {
    let pseudo = unseen_instance_loss(x, v, a_t, c, m)?.pseudo_label;
    let analytic = unseen_instance_gradient(x, pseudo, v, a_t, c, m)?;
    let fd = central_difference(v, step, |w| unseen_surrogate_loss(x, pseudo, w, a_t, c, m))?;
    Ok(relative_error(&fd, &analytic))
}
