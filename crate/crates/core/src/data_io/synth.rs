//! Seeded synthetic zero-shot data with a planted projection and an optional
//! projection shift between seen and unseen classes.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Bundle;
use crate::error::{Error, Result};
use crate::types::{Dataset, SemanticMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub k_seen: usize,
    pub l_unseen: usize,
    /// Instances per class, for seen and unseen classes alike.
    pub per_class: usize,
    /// Feature dimension.
    pub p: usize,
    /// Semantic dimension.
    pub q: usize,
    /// Expected L2 norm of the per-instance feature noise.
    pub noise_sigma: f64,
    /// Scale of the perturbation added to the planted projection for unseen
    /// classes; 0 means no domain shift.
    pub shift_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            k_seen: 20,
            l_unseen: 5,
            per_class: 50,
            p: 20,
            q: 8,
            noise_sigma: 0.1,
            shift_sigma: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k_seen", self.k_seen),
            ("per_class", self.per_class),
            ("p", self.p),
            ("q", self.q),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format_args!("{name} must be >= 1")));
        }
        if self.l_unseen < 2 {
            return Err(Error::invalid(format_args!(
                "l_unseen must be >= 2, got {}",
                self.l_unseen
            )));
        }
        for (name, s) in [("noise_sigma", self.noise_sigma), ("shift_sigma", self.shift_sigma)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format_args!("{name} must be finite and >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Generated bundle plus the ground-truth projections.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub bundle: Bundle,
    /// p×q projection generating seen prototypes `V*·a_c`.
    pub v_star: DMatrix<f64>,
    /// Projection generating unseen prototypes; equals `v_star` when
    /// `shift_sigma` is 0.
    pub v_unseen: DMatrix<f64>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    // Filled column-major so the draw order is fixed.
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

/// Standard-normal columns rescaled to unit length.
fn unit_semantics(rng: &mut ChaCha8Rng, q: usize, classes: usize) -> Result<SemanticMatrix> {
    let mut a = normal_matrix(rng, q, classes, 1.0);
    for mut col in a.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }
    SemanticMatrix::new(a)
}

fn instances(
    rng: &mut ChaCha8Rng,
    projection: &DMatrix<f64>,
    semantics: &SemanticMatrix,
    per_class: usize,
    noise_scale: f64,
) -> (DMatrix<f64>, Vec<usize>) {
    let prototypes = projection * semantics.vectors();
    let (p, classes) = prototypes.shape();
    let n = classes * per_class;
    let labels: Vec<usize> = (0..n).map(|i| i / per_class).collect();
    let mut x = DMatrix::zeros(n, p);
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..p {
            let z: f64 = StandardNormal.sample(rng);
            x[(i, j)] = prototypes[(j, c)] + noise_scale * z;
        }
    }
    (x, labels)
}

/// Draw order is fixed: seen semantics, unseen semantics, V*, shift
/// perturbation, seen noise, unseen noise.
///
/// Both semantic matrices are divided by the largest singular value of the
/// seen one and V* is scaled up to match, so prototypes keep norm near 1 while
/// `‖A_s A_sᵀ‖ = 1`. This bounds the curvature of the seen loss for any
/// class-to-dimension ratio.
pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a_s = unit_semantics(&mut rng, cfg.q, cfg.k_seen)?.vectors().clone();
    let mut a_t = unit_semantics(&mut rng, cfg.q, cfg.l_unseen)?.vectors().clone();
    let sigma = a_s.singular_values().max();
    a_s /= sigma;
    a_t /= sigma;
    let (a_s, a_t) = (SemanticMatrix::new(a_s)?, SemanticMatrix::new(a_t)?);
    let entry_scale = 1.0 / (cfg.p as f64).sqrt();
    let v_star = normal_matrix(&mut rng, cfg.p, cfg.q, sigma * entry_scale);
    let perturbation = normal_matrix(&mut rng, cfg.p, cfg.q, sigma * entry_scale);
    let v_unseen = &v_star + perturbation * cfg.shift_sigma;
    let noise = cfg.noise_sigma * entry_scale;
    let (xs, ls) = instances(&mut rng, &v_star, &a_s, cfg.per_class, noise);
    let (xt, lt) = instances(&mut rng, &v_unseen, &a_t, cfg.per_class, noise);
    let seen = Dataset::new(xs, ls, cfg.k_seen)?;
    let bundle = Bundle::new(seen, a_s, xt, Some(lt), a_t)?;
    Ok(SynthData {
        bundle,
        v_star,
        v_unseen,
    })
}
