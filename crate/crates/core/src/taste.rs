//! Transductive refinement.
//!
//! Starting from a model trained on seen data alone, alternate two blocks:
//! with `V` fixed, pseudo-label every unseen instance and select those whose
//! loss is under the current threshold; with the selection fixed, retrain `V`
//! on seen plus selected-unseen instances by the same CCCP/SGD procedure.
//! The threshold climbs its schedule each round until every unseen instance
//! has been admitted.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::aste::{
    argmax, dot, run_cccp, squared_distance_to_one_hot, train_aste_with_rng, CccpProblem,
    SeenBlock, UnseenBlock,
};
use crate::baselines::{train_eszsl, RidgeConfig};
use crate::error::{Error, Result};
use crate::fast_training::{class_means, class_visual_patterns};
use crate::spass::{scaled_schedule, SelectionState, Threshold};
use crate::types::{CompatibilityModel, Dataset, SemanticMatrix, TrainConfig};

/// One row of the transductive trace. Iteration 0 is the seen-only model.
#[derive(Debug, Clone, PartialEq)]
pub struct TasteRecord {
    pub iteration: usize,
    pub theta: f64,
    pub selected: usize,
    /// Fraction of selected pseudo labels that match the supplied ground truth.
    pub pseudo_label_accuracy: Option<f64>,
    /// Joint objective over seen and selected unseen instances at the end of the round.
    pub objective: f64,
    pub seconds: f64,
    /// Objective after each outer CCCP iteration of this round's V phase.
    pub phase_objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TasteTrace {
    pub records: Vec<TasteRecord>,
}

impl TasteTrace {
    /// Tab-separated log: iteration, theta, selected, pseudo-label accuracy
    /// (`NA` without ground truth), objective. Deterministic for a fixed seed.
    pub fn to_log(&self) -> String {
        let mut out = String::from("# iteration\ttheta\tselected\tpseudo_label_accuracy\tobjective\n");
        for r in &self.records {
            let acc = r
                .pseudo_label_accuracy
                .map_or_else(|| "NA".to_string(), |a| a.to_string());
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", r.iteration, r.theta, r.selected, acc, r.objective);
        }
        out
    }

    /// Tab-separated wall-clock seconds per iteration.
    pub fn to_timing_log(&self) -> String {
        let mut out = String::from("# iteration\tseconds\n");
        for r in &self.records {
            let _ = writeln!(out, "{}\t{}", r.iteration, r.seconds);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TasteOptions {
    /// Condense seen classes and selected pseudo-classes to their means and
    /// start from the ESZSL solution.
    pub fast_training: bool,
    pub ridge: RidgeConfig,
}

/// Pseudo labels and squared-distance losses for every unseen row under
/// `v`. Indicators start unset.
pub fn assign_pseudo_labels(
    v: &DMatrix<f64>,
    unseen: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    c: f64,
) -> Result<SelectionState> {
    check_unseen(v, unseen, a_t)?;
    let m = unseen.nrows();
    let w = v * a_t.vectors();
    let scores = unseen * &w;
    let mut losses = Vec::with_capacity(m);
    let mut pseudo_labels = Vec::with_capacity(m);
    for row in scores.row_iter() {
        let g: Vec<f64> = row.iter().copied().collect();
        let z = argmax(&g);
        pseudo_labels.push(z);
        losses.push(squared_distance_to_one_hot(&g, z));
    }
    Ok(SelectionState {
        indicators: vec![false; m],
        losses,
        pseudo_labels,
        theta: 0.0,
        regularizer: c / (2.0 * m as f64) * w.norm_squared(),
    })
}

fn check_unseen(v: &DMatrix<f64>, unseen: &DMatrix<f64>, a_t: &SemanticMatrix) -> Result<()> {
    if unseen.nrows() == 0 {
        return Err(Error::invalid(format_args!("unseen set is empty")));
    }
    if unseen.ncols() != v.nrows() || a_t.dim() != v.ncols() {
        return Err(Error::shape(format_args!(
            "unseen features {}x{}, V {}x{}, unseen semantics dim {}",
            unseen.nrows(),
            unseen.ncols(),
            v.nrows(),
            v.ncols(),
            a_t.dim()
        )));
    }
    if unseen.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format_args!("unseen features contain non-finite values")));
    }
    if a_t.num_classes() < 2 {
        return Err(Error::invalid(format_args!("need at least 2 unseen classes")));
    }
    Ok(())
}

/// Relabels with a fixed earlier label where one was kept, recomputing the
/// distance against that label.
fn pin_labels(state: &mut SelectionState, pinned: &[Option<usize>], unseen: &DMatrix<f64>, w: &DMatrix<f64>) {
    for (m, pin) in pinned.iter().enumerate() {
        if let Some(z) = *pin {
            if z != state.pseudo_labels[m] {
                let x: Vec<f64> = unseen.row(m).iter().copied().collect();
                let g: Vec<f64> = (0..w.ncols()).map(|k| dot(&x, w.column(k).as_slice())).collect();
                state.pseudo_labels[m] = z;
                state.losses[m] = squared_distance_to_one_hot(&g, z);
            }
        }
    }
}

/// Joint objective over seen instances and the selected unseen instances of
/// `state` (pseudo labels frozen). Unselected instances contribute nothing.
pub fn taste_objective(
    v: &DMatrix<f64>,
    seen: &Dataset,
    a_s: &SemanticMatrix,
    unseen: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    state: &SelectionState,
    c: f64,
) -> Result<f64> {
    check_unseen(v, unseen, a_t)?;
    let problem = CccpProblem {
        seen: SeenBlock::new(seen, a_s)?,
        unseen: Some(selected_block(unseen, a_t, state)),
        c,
    };
    Ok(problem.objective(v))
}

fn selected_block<'a>(unseen: &DMatrix<f64>, a_t: &'a SemanticMatrix, state: &SelectionState) -> UnseenBlock<'a> {
    let active: Vec<usize> = (0..state.len()).filter(|&m| state.indicators[m]).collect();
    UnseenBlock {
        xt: unseen.select_rows(&active).transpose(),
        pseudo_labels: active.iter().map(|&m| state.pseudo_labels[m]).collect(),
        semantics: a_t,
        total: state.len(),
    }
}

fn pseudo_accuracy(state: &SelectionState, truth: Option<&[usize]>) -> Option<f64> {
    let truth = truth?;
    let selected = state.selected_count();
    if selected == 0 {
        return None;
    }
    let correct = (0..state.len())
        .filter(|&m| state.indicators[m] && state.pseudo_labels[m] == truth[m])
        .count();
    Some(correct as f64 / selected as f64)
}

/// Seen-only start, then self-paced transductive rounds.
pub fn train_taste(
    seen: &Dataset,
    a_s: &SemanticMatrix,
    unseen: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    cfg: &TrainConfig,
    truth: Option<&[usize]>,
) -> Result<(CompatibilityModel, TasteTrace)> {
    train_taste_with(seen, a_s, unseen, a_t, cfg, truth, TasteOptions::default())
}

pub fn train_taste_with(
    seen: &Dataset,
    a_s: &SemanticMatrix,
    unseen: &DMatrix<f64>,
    a_t: &SemanticMatrix,
    cfg: &TrainConfig,
    truth: Option<&[usize]>,
    opts: TasteOptions,
) -> Result<(CompatibilityModel, TasteTrace)> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.len() != unseen.nrows() || t.iter().any(|&z| z >= a_t.num_classes()) {
            return Err(Error::invalid(format_args!(
                "unseen ground truth must have {} labels in [0, {})",
                unseen.nrows(),
                a_t.num_classes()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let condensed_seen = if opts.fast_training {
        Some(class_visual_patterns(seen)?.dataset)
    } else {
        None
    };
    let train_seen = condensed_seen.as_ref().unwrap_or(seen);

    let started = Instant::now();
    let init = if opts.fast_training {
        Some(train_eszsl(train_seen, a_s, &opts.ridge)?.v)
    } else {
        None
    };
    let initial = train_aste_with_rng(train_seen, a_s, cfg, init.as_ref(), &mut rng)?;
    check_unseen(&initial.v, unseen, a_t)?;
    let mut v = initial.v;

    let mut trace = TasteTrace::default();
    let mut state = assign_pseudo_labels(&v, unseen, a_t, cfg.c)?;
    trace.records.push(TasteRecord {
        iteration: 0,
        theta: 0.0,
        selected: 0,
        pseudo_label_accuracy: None,
        objective: *initial.objective_history.last().unwrap(),
        seconds: started.elapsed().as_secs_f64(),
        phase_objectives: initial.objective_history.clone(),
    });

    let initial_delta = state.losses.iter().copied().fold(0.0, f64::max);
    let mut pinned: Vec<Option<usize>> = vec![None; unseen.nrows()];
    let mut last_history = Vec::new();
    let mut previous = vec![false; unseen.nrows()];

    for stage in 0..cfg.theta_fractions.len() {
        let started = Instant::now();
        if stage > 0 {
            state = assign_pseudo_labels(&v, unseen, a_t, cfg.c)?;
        }
        if cfg.keep_first_label {
            pin_labels(&mut state, &pinned, unseen, &(&v * a_t.vectors()));
        }
        let current_max = state.losses.iter().copied().fold(0.0, f64::max);
        let delta = if cfg.fixed_delta { initial_delta } else { current_max };
        let mut threshold: Threshold = scaled_schedule(delta, &cfg.theta_fractions)[stage];
        if threshold.final_stage {
            // the last round admits everything even if losses grew past a fixed delta
            threshold.theta = threshold.theta.max(current_max);
        }
        state.apply(threshold)?;
        if cfg.keep_first_label {
            for m in 0..state.len() {
                if state.indicators[m] && pinned[m].is_none() {
                    pinned[m] = Some(state.pseudo_labels[m]);
                }
            }
        }

        let selected = state.selected_count();
        let accuracy = pseudo_accuracy(&state, truth);
        let admits_new = state.indicators.iter().zip(&previous).any(|(&u, &was)| u && !was);
        previous.clone_from(&state.indicators);
        if !admits_new {
            let objective = taste_objective(&v, seen, a_s, unseen, a_t, &state, cfg.c)?;
            trace.records.push(TasteRecord {
                iteration: stage + 1,
                theta: threshold.theta,
                selected,
                pseudo_label_accuracy: accuracy,
                objective,
                seconds: started.elapsed().as_secs_f64(),
                phase_objectives: Vec::new(),
            });
            continue;
        }

        let problem_unseen = if opts.fast_training {
            // one pattern per pseudo-class, each standing in for its selected rows
            let active: Vec<usize> = (0..state.len()).filter(|&m| state.indicators[m]).collect();
            let rows = unseen.select_rows(&active);
            let labels: Vec<usize> = active.iter().map(|&m| state.pseudo_labels[m]).collect();
            let (classes, means, _) = class_means(&rows, &labels, a_t.num_classes())?;
            UnseenBlock {
                xt: means.transpose(),
                total: classes.len(),
                pseudo_labels: classes,
                semantics: a_t,
            }
        } else {
            selected_block(unseen, a_t, &state)
        };
        let problem = CccpProblem {
            seen: SeenBlock::new(train_seen, a_s)?,
            unseen: Some(problem_unseen),
            c: cfg.c,
        };
        let (next, history) = run_cccp(&problem, v, cfg, &mut rng)?;
        v = next;
        trace.records.push(TasteRecord {
            iteration: stage + 1,
            theta: threshold.theta,
            selected,
            pseudo_label_accuracy: accuracy,
            objective: *history.last().unwrap(),
            seconds: started.elapsed().as_secs_f64(),
            phase_objectives: history.clone(),
        });
        last_history = history;
    }

    let mut model = CompatibilityModel::new(v, cfg.seed)?;
    model.trained_with_ft = opts.fast_training;
    model.objective_history = if last_history.is_empty() {
        initial.objective_history
    } else {
        last_history
    };
    Ok((model, trace))
}
