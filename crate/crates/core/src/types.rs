//! Domain types shared across the pipeline: labelled feature sets, class
//! semantic matrices, the compatibility model and the training configuration.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Instance features with integer class labels.
///
/// `features` is N×p (one instance per row). Labels are class indices in
/// `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let signed: Vec<i64> = labels.iter().map(|&l| l as i64).collect();
        let report = validate_parts(&features, &signed, num_classes, None);
        if !report.is_pass() {
            return Err(Error::Validation(report));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Number of instances N.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Feature dimensionality p.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows in the given order. Indices may repeat.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::invalid(format_args!("empty subset")));
        }
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.num_classes)
    }
}

/// Per-class semantic vectors stored q×C (one class per column).
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMatrix {
    vectors: DMatrix<f64>,
}

impl SemanticMatrix {
    pub fn new(vectors: DMatrix<f64>) -> Result<Self> {
        let report = check_semantics(&vectors);
        if !report.is_pass() {
            return Err(Error::Validation(report));
        }
        Ok(SemanticMatrix { vectors })
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Semantic dimensionality q.
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.vectors.ncols()
    }

    /// Semantic vector of class `k` as a contiguous slice.
    pub fn column(&self, k: usize) -> &[f64] {
        let q = self.dim();
        &self.vectors.as_slice()[k * q..(k + 1) * q]
    }
}

/// The learned p×q compatibility matrix V shared by seen and unseen classes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityModel {
    pub v: DMatrix<f64>,
    pub trained_with_ft: bool,
    pub trial_seed: u64,
    /// Training objective after initialisation and after each outer iteration.
    /// Empty for closed-form solutions.
    pub objective_history: Vec<f64>,
}

impl CompatibilityModel {
    pub fn new(v: DMatrix<f64>, trial_seed: u64) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format_args!(
                "compatibility matrix has non-finite entries"
            )));
        }
        Ok(CompatibilityModel {
            v,
            trained_with_ft: false,
            trial_seed,
            objective_history: Vec::new(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn semantic_dim(&self) -> usize {
        self.v.ncols()
    }

    /// W = V·A, the per-class parameter matrix (p×C). Computed on demand.
    pub fn class_weights(&self, semantics: &SemanticMatrix) -> Result<DMatrix<f64>> {
        if semantics.dim() != self.semantic_dim() {
            return Err(Error::shape(format_args!(
                "model semantic dim {} vs semantics dim {}",
                self.semantic_dim(),
                semantics.dim()
            )));
        }
        Ok(&self.v * semantics.vectors())
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().copied()
    }
}

/// A vector in label space: one-hot for ground truth, real-valued for a
/// predicted embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(pub DVector<f64>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Index of the single 1 when this is a one-hot vector.
    pub fn one_hot_index(&self) -> Option<usize> {
        let mut hit = None;
        for (i, &v) in self.0.iter().enumerate() {
            if v == 1.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some(i);
            } else if v != 0.0 {
                return None;
            }
        }
        hit
    }
}

pub fn one_hot(k: usize, num_classes: usize) -> Result<LabelVector> {
    if k >= num_classes {
        return Err(Error::invalid(format_args!(
            "class index {k} out of range for {num_classes} classes"
        )));
    }
    let mut v = DVector::zeros(num_classes);
    v[k] = 1.0;
    Ok(LabelVector(v))
}

/// Hyperparameters of the stochastic CCCP trainer and the transductive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Trade-off weight on the ‖V·A‖² regulariser.
    pub c: f64,
    pub minibatch: usize,
    /// Learning rates visited in order inside every outer iteration.
    pub eta_schedule: Vec<f64>,
    pub epochs_per_eta: usize,
    /// Relative objective change below which the outer loop stops.
    pub tolerance: f64,
    pub max_outer_iters: usize,
    /// Threshold fractions of the maximal unseen loss; strictly increasing, last is 1.
    pub theta_fractions: Vec<f64>,
    pub seed: u64,
    pub trials: usize,
    /// Std of the normal initialisation of V.
    pub init_std: f64,
    /// Keep the maximal loss from the initial model instead of refreshing it each stage.
    pub fixed_delta: bool,
    /// Keep the first pseudo label assigned to an unseen instance.
    pub keep_first_label: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 0.1,
            minibatch: 50,
            eta_schedule: vec![1.0, 0.1, 0.01],
            epochs_per_eta: 50,
            tolerance: 1e-4,
            max_outer_iters: 20,
            theta_fractions: vec![0.5, 0.7, 0.9, 1.0],
            seed: 0,
            trials: 5,
            init_std: 0.01,
            fixed_delta: false,
            keep_first_label: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::invalid(format_args!("train config: {msg}")));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return fail("c must be positive");
        }
        if self.minibatch == 0 {
            return fail("minibatch must be positive");
        }
        if self.eta_schedule.is_empty() || self.eta_schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return fail("eta_schedule must be a non-empty list of positive reals");
        }
        if self.epochs_per_eta == 0 {
            return fail("epochs_per_eta must be positive");
        }
        if !(self.tolerance > 0.0) {
            return fail("tolerance must be positive");
        }
        if self.max_outer_iters == 0 {
            return fail("max_outer_iters must be positive");
        }
        if self.trials == 0 {
            return fail("trials must be positive");
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return fail("init_std must be non-negative");
        }
        check_fractions(&self.theta_fractions)
    }
}

pub(crate) fn check_fractions(fractions: &[f64]) -> Result<()> {
    let fail = |msg: &str| Err(Error::invalid(format_args!("theta fractions: {msg}")));
    if fractions.is_empty() {
        return fail("empty");
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return fail("each fraction must lie in (0, 1]");
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return fail("must be strictly increasing");
    }
    if *fractions.last().unwrap() != 1.0 {
        return fail("must end at 1.0");
    }
    Ok(())
}

/// One violated invariant found by [`validate_pair`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyFeatures,
    LabelCount { labels: usize, rows: usize },
    TooFewClasses(usize),
    LabelOutOfRange { index: usize, label: i64 },
    NonFiniteFeature { row: usize, col: usize },
    EmptyClass(usize),
    ClassCountMismatch { dataset: usize, semantics: usize },
    NonFiniteSemantic { row: usize, col: usize },
    ZeroSemanticColumn(usize),
    EmptySemantics,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyFeatures => write!(f, "feature matrix has no rows or columns"),
            Violation::LabelCount { labels, rows } => {
                write!(f, "{labels} labels for {rows} feature rows")
            }
            Violation::TooFewClasses(k) => write!(f, "need at least 2 classes, got {k}"),
            Violation::LabelOutOfRange { index, label } => {
                write!(f, "label range: instance {index} has label {label}")
            }
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "non-finite feature at ({row}, {col})")
            }
            Violation::EmptyClass(k) => write!(f, "class {k} has no instances"),
            Violation::ClassCountMismatch { dataset, semantics } => write!(
                f,
                "class-count mismatch: dataset has {dataset} classes, semantics has {semantics}"
            ),
            Violation::NonFiniteSemantic { row, col } => {
                write!(f, "non-finite semantic entry at ({row}, {col})")
            }
            Violation::ZeroSemanticColumn(k) => write!(f, "semantic column {k} is all zero"),
            Violation::EmptySemantics => write!(f, "semantic matrix is empty"),
        }
    }
}

/// Outcome of structural validation. Empty means pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_pass() {
            Ok(())
        } else {
            Err(Error::Validation(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "pass");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_semantics(vectors: &DMatrix<f64>) -> ValidationReport {
    let mut violations = Vec::new();
    if vectors.is_empty() {
        violations.push(Violation::EmptySemantics);
    }
    for ((row, col), v) in vectors.iter().enumerate().map(|(i, v)| {
        let r = vectors.nrows();
        ((i % r, i / r), v)
    }) {
        if !v.is_finite() {
            violations.push(Violation::NonFiniteSemantic { row, col });
        }
    }
    for (k, column) in vectors.column_iter().enumerate() {
        if column.iter().all(|&v| v == 0.0) {
            violations.push(Violation::ZeroSemanticColumn(k));
        }
    }
    ValidationReport { violations }
}

/// Validates raw dataset parts (labels may be negative, as read from disk)
/// and, optionally, the paired semantic matrix.
pub fn validate_parts(
    features: &DMatrix<f64>,
    labels: &[i64],
    num_classes: usize,
    semantics: Option<&DMatrix<f64>>,
) -> ValidationReport {
    let mut violations = Vec::new();
    let (rows, cols) = features.shape();
    if rows == 0 || cols == 0 {
        violations.push(Violation::EmptyFeatures);
    }
    if labels.len() != rows {
        violations.push(Violation::LabelCount {
            labels: labels.len(),
            rows,
        });
    }
    if num_classes < 2 {
        violations.push(Violation::TooFewClasses(num_classes));
    }
    for (index, &label) in labels.iter().enumerate() {
        if label < 0 || label as usize >= num_classes {
            violations.push(Violation::LabelOutOfRange { index, label });
        }
    }
    if let Some(idx) = features.iter().position(|v| !v.is_finite()) {
        violations.push(Violation::NonFiniteFeature {
            row: idx % rows,
            col: idx / rows,
        });
    }
    if let Some(sem) = semantics {
        if sem.ncols() != num_classes {
            violations.push(Violation::ClassCountMismatch {
                dataset: num_classes,
                semantics: sem.ncols(),
            });
        }
        violations.extend(check_semantics(sem).violations);
        let mut counts = vec![0usize; num_classes];
        for &l in labels {
            if l >= 0 && (l as usize) < num_classes {
                counts[l as usize] += 1;
            }
        }
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                violations.push(Violation::EmptyClass(k));
            }
        }
    }
    ValidationReport { violations }
}

/// Cross-checks a dataset against its class semantics: class counts agree and
/// every class has at least one instance.
pub fn validate_pair(dataset: &Dataset, semantics: &SemanticMatrix) -> ValidationReport {
    let labels: Vec<i64> = dataset.labels.iter().map(|&l| l as i64).collect();
    validate_parts(
        &dataset.features,
        &labels,
        dataset.num_classes,
        Some(semantics.vectors()),
    )
}
