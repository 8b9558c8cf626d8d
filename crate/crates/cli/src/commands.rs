use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsl_core::aste::predict_labels;
use zsl_core::baselines::train_lr;
use zsl_core::data_io::{
    load_bundle, read_matrix, synth_generate, write_bundle, write_labels,
    write_matrix, Bundle, Manifest,
};
use zsl_core::eval::{
    benchmark_ft, evaluate, run_method_trials, subsample_sweep, sweep_table, train_method, Method,
};
use zsl_core::fast_training::{compare_empirical_risk, verify_proposition1};
use zsl_core::gradcheck::{check_seen_gradient, check_unseen_gradient};
use zsl_core::taste::{train_taste_with, TasteOptions};
use zsl_core::{CompatibilityModel, Error, SemanticMatrix};

use crate::config::RunConfig;
use crate::CliError;

/// Largest gradient error `gradcheck` accepts.
pub const GRADCHECK_LIMIT: f64 = 1e-4;

type CliResult = Result<(), CliError>;

fn write_text(path: &Path, text: &str) -> zsl_core::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.into(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.into(), source })
}

/// Contents of run.log. The output directory is left out so that repeated
/// runs into different directories log identically.
struct RunLog {
    command: &'static str,
    fields: Vec<(&'static str, String)>,
}

impl RunLog {
    fn new(command: &'static str) -> Self {
        RunLog { command, fields: Vec::new() }
    }

    fn field(mut self, key: &'static str, value: impl ToString) -> Self {
        self.fields.push((key, value.to_string()));
        self
    }

    fn write(&self, out: &Path, cfg: Option<&RunConfig>) -> zsl_core::Result<()> {
        let mut text = format!("command = {}\n", self.command);
        let mut invocation = format!("zsl {}", self.command);
        for (key, value) in &self.fields {
            let _ = writeln!(text, "{key} = {value}");
            let _ = write!(invocation, " --{key} {value}");
        }
        let _ = write!(invocation, " --out OUT");
        if let Some(cfg) = cfg {
            text.push_str(&cfg.to_kv());
            let _ = write!(invocation, " {}", cfg.to_set_args());
        }
        let _ = writeln!(text, "invocation = {invocation}");
        write_text(&out.join("run.log"), &text)
    }
}

fn ensure_dir(dir: &Path) -> zsl_core::Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.into(), source })
}

fn load(manifest: &Path) -> zsl_core::Result<Bundle> {
    load_bundle(&Manifest::read(manifest)?)
}

fn load_model(path: &Path) -> zsl_core::Result<CompatibilityModel> {
    CompatibilityModel::new(read_matrix(path)?, 0)
}

fn require_truth(bundle: &Bundle) -> zsl_core::Result<&[usize]> {
    bundle
        .unseen_labels
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("manifest has no unseen_labels".into()))
}

pub fn synth(out: &Path, cfg: &RunConfig) -> CliResult {
    let data = synth_generate(&cfg.synth)?;
    write_bundle(out, &data.bundle)?;
    write_matrix(&out.join("planted_projection.txt"), &data.v_star)?;
    write_matrix(&out.join("unseen_projection.txt"), &data.v_unseen)?;
    RunLog::new("synth").write(out, Some(cfg))?;
    println!(
        "wrote {} seen and {} unseen instances to {}",
        data.bundle.seen.len(),
        data.bundle.unseen_features.nrows(),
        out.display()
    );
    Ok(())
}

pub fn train(manifest: &Path, method: Method, out: &Path, cfg: &RunConfig) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let mc = cfg.method_config();
    let start = Instant::now();
    let (model, trace) = if method == Method::Taste {
        let opts = TasteOptions { fast_training: cfg.fast_training, ridge: cfg.ridge };
        let (m, t) = train_taste_with(
            &bundle.seen,
            &bundle.seen_semantics,
            &bundle.unseen_features,
            &bundle.unseen_semantics,
            &mc.train,
            bundle.unseen_labels.as_deref(),
            opts,
        )?;
        (m, Some(t))
    } else {
        let unseen = Some((&bundle.unseen_features, &bundle.unseen_semantics));
        let m = train_method(method, &bundle.seen, &bundle.seen_semantics, unseen, &mc, cfg.fast_training, mc.train.seed)?;
        (m, None)
    };
    let seconds = start.elapsed().as_secs_f64();

    write_matrix(&out.join("model.txt"), &model.v)?;
    let mut history = String::from("# outer_iteration\tobjective\n");
    for (t, obj) in model.objective_history.iter().enumerate() {
        let _ = writeln!(history, "{t}\t{obj}");
    }
    write_text(&out.join("objective.tsv"), &history)?;
    if let Some(trace) = &trace {
        write_text(&out.join("trace.tsv"), &trace.to_log())?;
        write_text(&out.join("trace_timing.tsv"), &trace.to_timing_log())?;
    }
    write_text(&out.join("timing.txt"), &format!("train_seconds = {seconds}\n"))?;
    RunLog::new("train")
        .field("manifest", manifest.display())
        .field("method", method)
        .write(out, Some(cfg))?;
    println!("trained {method} model ({}x{}) in {seconds:.3} s", model.v.nrows(), model.v.ncols());
    Ok(())
}

pub fn predict(manifest: &Path, model: &Path, out: &Path) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let m = load_model(model)?;
    let predicted = predict_labels(&bundle.unseen_features, &m.v, &bundle.unseen_semantics)?;
    write_labels(&out.join("predictions.txt"), &predicted)?;
    RunLog::new("predict")
        .field("manifest", manifest.display())
        .field("model", model.display())
        .write(out, None)?;
    println!("predicted {} unseen instances", predicted.len());
    Ok(())
}

pub fn eval_model(manifest: &Path, model: &Path, out: &Path) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let m = load_model(model)?;
    let truth = require_truth(&bundle)?;
    let acc = evaluate(&m, &bundle.unseen_features, truth, &bundle.unseen_semantics)?;
    write_text(&out.join("report.txt"), &format!("accuracy = {acc}\n"))?;
    RunLog::new("eval")
        .field("manifest", manifest.display())
        .field("model", model.display())
        .write(out, None)?;
    println!("accuracy = {acc}");
    Ok(())
}

pub fn eval_method(manifest: &Path, method: Method, out: &Path, cfg: &RunConfig) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let report = run_method_trials(method, &bundle, &cfg.method_config(), cfg.fast_training)?;
    write_text(&out.join("accuracy.tsv"), &report.accuracy_table())?;
    write_text(&out.join("report.txt"), &report.accuracy_kv(""))?;
    write_text(&out.join("timing.txt"), &report.timing_kv(""))?;
    RunLog::new("eval")
        .field("manifest", manifest.display())
        .field("method", method)
        .write(out, Some(cfg))?;
    println!("{method}: {:.4} ± {:.4} over {} trials", report.mean, report.std, report.accuracies.len());
    Ok(())
}

pub fn bench_ft(manifest: &Path, method: Option<Method>, out: &Path, cfg: &RunConfig) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let methods = match method {
        Some(m) => vec![m],
        None => vec![Method::Lr, Method::Eszsl, Method::Aste],
    };
    let (mut accuracy, mut timing) = (String::new(), String::new());
    println!("method\twithout_ft\twith_ft\tspeedup");
    for m in methods {
        let r = benchmark_ft(m, &bundle, &cfg.method_config())?;
        accuracy.push_str(&r.accuracy_kv());
        timing.push_str(&r.timing_kv());
        println!(
            "{m}\t{:.4}±{:.4}\t{:.4}±{:.4}\t{:.2}",
            r.acc_without_ft.mean, r.acc_without_ft.std, r.acc_with_ft.mean, r.acc_with_ft.std, r.speedup_ratio
        );
    }
    write_text(&out.join("bench_accuracy.txt"), &accuracy)?;
    write_text(&out.join("bench_timing.txt"), &timing)?;
    let mut log = RunLog::new("bench-ft").field("manifest", manifest.display());
    if let Some(m) = method {
        log = log.field("method", m);
    }
    log.write(out, Some(cfg))?;
    Ok(())
}

pub fn sweep(manifest: &Path, method: Method, out: &Path, cfg: &RunConfig) -> CliResult {
    ensure_dir(out)?;
    let bundle = load(manifest)?;
    let points = subsample_sweep(method, &bundle, &cfg.sweep_fractions, &cfg.method_config())?;
    let table = sweep_table(&points);
    let mut timing = String::from("point\tmean_seconds\n");
    for p in &points {
        let _ = writeln!(timing, "{}\t{}", p.label, p.report.mean_seconds());
    }
    write_text(&out.join("sweep.tsv"), &table)?;
    write_text(&out.join("sweep_timing.tsv"), &timing)?;
    RunLog::new("sweep")
        .field("manifest", manifest.display())
        .field("method", method)
        .write(out, Some(cfg))?;
    print!("{table}");
    Ok(())
}

/// Maximal seen and unseen gradient errors over random small instances
/// with p, q ≤ 8 and at most 5 classes.
pub fn gradient_errors(cfg: &RunConfig) -> zsl_core::Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let (mut seen_max, mut unseen_max) = (0.0f64, 0.0f64);
    for _ in 0..cfg.gradcheck_cases {
        let p = rng.random_range(1..=8);
        let q = rng.random_range(1..=8);
        let k = rng.random_range(2..=5);
        let sem = SemanticMatrix::new(DMatrix::from_fn(q, k, |_, _| rng.random_range(-1.0..1.0)))?;
        let v = DMatrix::from_fn(p, q, |_, _| rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let label = rng.random_range(0..k);
        let n = rng.random_range(1..=50);
        let c = cfg.train.c;
        seen_max = seen_max.max(check_seen_gradient(&x, label, &v, &sem, c, n, cfg.gradcheck_step)?);
        unseen_max = unseen_max.max(check_unseen_gradient(&x, &v, &sem, c, n, cfg.gradcheck_step)?);
    }
    Ok((seen_max, unseen_max))
}

pub fn gradcheck(out: Option<&Path>, cfg: &RunConfig) -> CliResult {
    let (seen, unseen) = gradient_errors(cfg)?;
    let worst = seen.max(unseen);
    let report = format!(
        "cases = {}\nseen_max_relative_error = {seen:e}\nunseen_max_relative_error = {unseen:e}\nmax_relative_error = {worst:e}\n",
        cfg.gradcheck_cases
    );
    print!("{report}");
    if let Some(out) = out {
        write_text(&out.join("gradcheck.txt"), &report)?;
        RunLog::new("gradcheck").write(out, Some(cfg))?;
    }
    if worst > GRADCHECK_LIMIT {
        return Err(CliError::Check(format!("max relative gradient error {worst:e} exceeds {GRADCHECK_LIMIT}")));
    }
    Ok(())
}

pub fn verify_prop1(manifest: &Path, out: Option<&Path>, cfg: &RunConfig) -> CliResult {
    let bundle = load(manifest)?;
    let seen = &bundle.seen;
    let mut table = String::from("class\tinstances\tmin_eigenvalue\tpsd\n");
    let mut failing = Vec::new();
    for k in 0..seen.num_classes() {
        let rows: Vec<usize> = (0..seen.len()).filter(|&i| seen.labels()[i] == k).collect();
        let check = verify_proposition1(&seen.features().select_rows(&rows))?;
        let _ = writeln!(table, "{k}\t{}\t{}\t{}", rows.len(), check.min_eigenvalue, check.psd);
        if !check.psd {
            failing.push(k);
        }
    }
    let mapping = train_lr(seen, &bundle.seen_semantics, &cfg.ridge)?;
    let risk = compare_empirical_risk(seen, &mapping, bundle.seen_semantics.vectors())?;
    let risk_kv = format!(
        "full = {}\ncondensed = {}\ncondensed_weighted = {}\n",
        risk.full, risk.condensed, risk.condensed_weighted
    );
    print!("{table}{risk_kv}");
    if let Some(out) = out {
        write_text(&out.join("prop1.tsv"), &table)?;
        write_text(&out.join("risk.txt"), &risk_kv)?;
        RunLog::new("verify-prop1").field("manifest", manifest.display()).write(out, Some(cfg))?;
    }
    if !failing.is_empty() {
        return Err(CliError::Check(format!("classes {failing:?} are not positive semidefinite")));
    }
    if risk.condensed > risk.full + 1e-9 {
        return Err(CliError::Check(format!("condensed risk {} exceeds full risk {}", risk.condensed, risk.full)));
    }
    Ok(())
}
