//! Accuracy metrics, multi-trial reports, the fast-training benchmark and
//! training-set subsampling sweeps.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aste::{predict_labels, train_aste};
use crate::baselines::{train_eszsl, train_lr, RidgeConfig};
use crate::data_io::Bundle;
use crate::error::{Error, Result};
use crate::fast_training::class_visual_patterns;
use crate::taste::{train_taste_with, TasteOptions};
use crate::types::{CompatibilityModel, Dataset, SemanticMatrix, TrainConfig};

/// Mean over classes of the within-class top-1 accuracy.
pub fn per_class_top1(predictions: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::shape(format_args!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    let mut total = vec![0usize; num_classes];
    let mut correct = vec![0usize; num_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if t >= num_classes {
            return Err(Error::invalid(format_args!("label {t} out of range for {num_classes} classes")));
        }
        total[t] += 1;
        correct[t] += (p == t) as usize;
    }
    if let Some(k) = total.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format_args!("class {k} has no test instances")));
    }
    let sum: f64 = correct
        .iter()
        .zip(&total)
        .map(|(&c, &n)| c as f64 / n as f64)
        .sum();
    Ok(sum / num_classes as f64)
}

/// Accuracy of `model` on a labelled split.
pub fn evaluate(
    model: &CompatibilityModel,
    features: &DMatrix<f64>,
    truth: &[usize],
    semantics: &SemanticMatrix,
) -> Result<f64> {
    let predicted = predict_labels(features, &model.v, semantics)?;
    per_class_top1(&predicted, truth, semantics.num_classes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub base_seed: u64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// Training time per trial.
    pub wall_clock_seconds: Vec<f64>,
}

impl TrialReport {
    pub fn from_accuracies(base_seed: u64, accuracies: Vec<f64>, seconds: Vec<f64>) -> Result<Self> {
        if accuracies.is_empty() {
            return Err(Error::invalid(format_args!("a report needs at least one trial")));
        }
        let (mean, std) = mean_std(&accuracies);
        Ok(TrialReport {
            base_seed,
            accuracies,
            mean,
            std,
            wall_clock_seconds: seconds,
        })
    }

    pub fn mean_seconds(&self) -> f64 {
        mean_std(&self.wall_clock_seconds).0
    }

    /// `trial  seed  accuracy` rows.
    pub fn accuracy_table(&self) -> String {
        let mut out = String::from("trial\tseed\taccuracy\n");
        for (t, a) in self.accuracies.iter().enumerate() {
            let _ = writeln!(out, "{t}\t{}\t{a}", self.base_seed + t as u64);
        }
        out
    }

    /// `name = value` lines; excludes timing so it is reproducible.
    pub fn accuracy_kv(&self, prefix: &str) -> String {
        format!(
            "{prefix}trials = {}\n{prefix}mean = {}\n{prefix}std = {}\n",
            self.accuracies.len(),
            self.mean,
            self.std
        )
    }

    pub fn timing_kv(&self, prefix: &str) -> String {
        let mut out = String::new();
        for (t, s) in self.wall_clock_seconds.iter().enumerate() {
            let _ = writeln!(out, "{prefix}seconds_trial_{t} = {s}");
        }
        let _ = writeln!(out, "{prefix}mean_seconds = {}", self.mean_seconds());
        out
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs `train(seed)` for seeds `base_seed..base_seed + trials`, timing only
/// training, and scores each model on the evaluation split.
pub fn run_trials<F>(
    mut train: F,
    features: &DMatrix<f64>,
    truth: &[usize],
    semantics: &SemanticMatrix,
    trials: usize,
    base_seed: u64,
) -> Result<TrialReport>
where
    F: FnMut(u64) -> Result<CompatibilityModel>,
{
    if trials == 0 {
        return Err(Error::invalid(format_args!("trials must be >= 1")));
    }
    let mut accuracies = Vec::with_capacity(trials);
    let mut seconds = Vec::with_capacity(trials);
    for t in 0..trials {
        let seed = base_seed + t as u64;
        let wrap = |e| Error::Trial {
            trial: t,
            source: Box::new(e),
        };
        let started = Instant::now();
        let model = train(seed).map_err(wrap)?;
        seconds.push(started.elapsed().as_secs_f64());
        accuracies.push(evaluate(&model, features, truth, semantics).map_err(wrap)?);
    }
    TrialReport::from_accuracies(base_seed, accuracies, seconds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Lr,
    Eszsl,
    Aste,
    Taste,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lr, Method::Eszsl, Method::Aste, Method::Taste];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lr => "lr",
            Method::Eszsl => "eszsl",
            Method::Aste => "aste",
            Method::Taste => "taste",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format_args!("unknown method `{s}` (expected lr, eszsl, aste or taste)")))
    }
}

/// Everything the four methods need to train.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MethodConfig {
    pub train: TrainConfig,
    pub ridge: RidgeConfig,
}

/// Trains `method` on `seen` (and, for TASTE, the unlabelled unseen rows).
///
/// With `fast_training` the seen split is condensed to class means first and
/// the iterative methods start from the ESZSL solution on the condensed data.
pub fn train_method(
    method: Method,
    seen: &Dataset,
    a_s: &SemanticMatrix,
    unseen: Option<(&DMatrix<f64>, &SemanticMatrix)>,
    cfg: &MethodConfig,
    fast_training: bool,
    seed: u64,
) -> Result<CompatibilityModel> {
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    if method == Method::Taste {
        let (x_t, a_t) = unseen
            .ok_or_else(|| Error::invalid(format_args!("taste needs unseen features")))?;
        let opts = TasteOptions {
            fast_training,
            ridge: cfg.ridge,
        };
        return Ok(train_taste_with(seen, a_s, x_t, a_t, &train_cfg, None, opts)?.0);
    }
    let condensed = if fast_training {
        Some(class_visual_patterns(seen)?.dataset)
    } else {
        None
    };
    let data = condensed.as_ref().unwrap_or(seen);
    let mut model = match method {
        Method::Lr => CompatibilityModel::new(train_lr(data, a_s, &cfg.ridge)?, seed)?,
        Method::Eszsl => {
            let mut m = train_eszsl(data, a_s, &cfg.ridge)?;
            m.trial_seed = seed;
            m
        }
        Method::Aste => {
            let init = if fast_training {
                Some(train_eszsl(data, a_s, &cfg.ridge)?.v)
            } else {
                None
            };
            train_aste(data, a_s, &train_cfg, init.as_ref())?
        }
        Method::Taste => unreachable!(),
    };
    model.trained_with_ft = fast_training;
    Ok(model)
}

fn unseen_truth(bundle: &Bundle) -> Result<&[usize]> {
    bundle
        .unseen_labels
        .as_deref()
        .ok_or_else(|| Error::invalid(format_args!("evaluation needs unseen labels")))
}

/// Trials of `method` on a bundle, scored on the full unseen split.
pub fn run_method_trials(
    method: Method,
    bundle: &Bundle,
    cfg: &MethodConfig,
    fast_training: bool,
) -> Result<TrialReport> {
    let truth = unseen_truth(bundle)?;
    let unseen = Some((&bundle.unseen_features, &bundle.unseen_semantics));
    run_trials(
        |seed| train_method(method, &bundle.seen, &bundle.seen_semantics, unseen, cfg, fast_training, seed),
        &bundle.unseen_features,
        truth,
        &bundle.unseen_semantics,
        cfg.train.trials,
        cfg.train.seed,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FtBenchReport {
    pub method: Method,
    /// Mean training seconds per trial.
    pub time_without_ft: f64,
    pub time_with_ft: f64,
    /// `time_without_ft / time_with_ft`.
    pub speedup_ratio: f64,
    pub acc_without_ft: TrialReport,
    pub acc_with_ft: TrialReport,
}

impl FtBenchReport {
    pub fn accuracy_kv(&self) -> String {
        format!(
            "method = {}\n{}{}",
            self.method,
            self.acc_without_ft.accuracy_kv("without_ft."),
            self.acc_with_ft.accuracy_kv("with_ft.")
        )
    }

    pub fn timing_kv(&self) -> String {
        format!(
            "method = {}\ntime_without_ft = {}\ntime_with_ft = {}\nspeedup_ratio = {}\n{}{}",
            self.method,
            self.time_without_ft,
            self.time_with_ft,
            self.speedup_ratio,
            self.acc_without_ft.timing_kv("without_ft."),
            self.acc_with_ft.timing_kv("with_ft.")
        )
    }
}

/// Trials with and without class-mean condensation. Timing covers training
/// including condensation; trials run sequentially.
pub fn benchmark_ft(method: Method, bundle: &Bundle, cfg: &MethodConfig) -> Result<FtBenchReport> {
    let acc_without_ft = run_method_trials(method, bundle, cfg, false)?;
    let acc_with_ft = run_method_trials(method, bundle, cfg, true)?;
    let time_without_ft = acc_without_ft.mean_seconds();
    let time_with_ft = acc_with_ft.mean_seconds();
    Ok(FtBenchReport {
        method,
        time_without_ft,
        time_with_ft,
        speedup_ratio: time_without_ft / time_with_ft.max(f64::MIN_POSITIVE),
        acc_without_ft,
        acc_with_ft,
    })
}

/// One point of a subsampling curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// The fraction, `1-shot` or `ft`.
    pub label: String,
    pub report: TrialReport,
}

pub const ONE_SHOT: &str = "1-shot";
pub const FT_PATTERN: &str = "ft";

/// Indices of a stratified subsample keeping `round(fraction · n_k)` rows of
/// each class, in ascending order.
pub fn stratified_subsample(dataset: &Dataset, fraction: f64, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format_args!("fraction must be in (0, 1], got {fraction}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut keep = Vec::new();
    for (k, mut rows) in by_class.into_iter().enumerate() {
        let count = (fraction * rows.len() as f64).round() as usize;
        if count == 0 {
            return Err(Error::invalid(format_args!(
                "fraction {fraction} leaves class {k} ({} rows) empty",
                rows.len()
            )));
        }
        rows.shuffle(rng);
        keep.extend_from_slice(&rows[..count]);
    }
    keep.sort_unstable();
    Ok(keep)
}

/// Mean unseen accuracy of `method` trained on stratified subsamples of the
/// seen split, plus the random one-instance-per-class and class-pattern
/// points. Fraction 1.0 trains on the full split unchanged.
pub fn subsample_sweep(
    method: Method,
    bundle: &Bundle,
    fractions: &[f64],
    cfg: &MethodConfig,
) -> Result<Vec<SweepPoint>> {
    let truth = unseen_truth(bundle)?;
    let unseen = Some((&bundle.unseen_features, &bundle.unseen_semantics));
    let seen = &bundle.seen;
    let trials = cfg.train.trials;
    let base = cfg.train.seed;

    let subsampled = |pick: &dyn Fn(&mut ChaCha8Rng) -> Result<Vec<usize>>| {
        run_trials(
            |seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // separate stream from the trainer's
                rng.set_stream(1);
                let data = seen.subset(&pick(&mut rng)?)?;
                train_method(method, &data, &bundle.seen_semantics, unseen, cfg, false, seed)
            },
            &bundle.unseen_features,
            truth,
            &bundle.unseen_semantics,
            trials,
            base,
        )
    };

    let mut points = Vec::with_capacity(fractions.len() + 2);
    for &f in fractions {
        let report = if f == 1.0 {
            run_method_trials(method, bundle, cfg, false)?
        } else {
            subsampled(&|rng| stratified_subsample(seen, f, rng))?
        };
        points.push(SweepPoint {
            label: f.to_string(),
            report,
        });
    }
    let one_shot = subsampled(&|rng| {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); seen.num_classes()];
        for (i, &l) in seen.labels().iter().enumerate() {
            by_class[l].push(i);
        }
        let mut pick: Vec<usize> = by_class
            .iter()
            .map(|rows| *rows.choose(rng).expect("classes are non-empty"))
            .collect();
        pick.sort_unstable();
        Ok(pick)
    })?;
    points.push(SweepPoint {
        label: ONE_SHOT.into(),
        report: one_shot,
    });
    points.push(SweepPoint {
        label: FT_PATTERN.into(),
        report: run_method_trials(method, bundle, cfg, true)?,
    });
    Ok(points)
}

/// `point  mean  std` rows.
pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("point\tmean\tstd\n");
    for p in points {
        let _ = writeln!(out, "{}\t{}\t{}", p.label, p.report.mean, p.report.std);
    }
    out
}
