use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn zsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsl")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = zsl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> (i32, String) {
    let out = zsl(args);
    (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
}

/// File name to contents, skipping wall-clock files.
fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .filter(|(name, _)| !name.contains("timing"))
        .collect()
}

fn synth(dir: &Path, extra: &[&str]) -> String {
    let out = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", out];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join("manifest.txt").to_str().unwrap().to_owned()
}

#[test]
fn synth_twice_gives_identical_directories() {
    let tmp = tempfile::tempdir().unwrap();
    synth(&tmp.path().join("a"), &["--seed", "7"]);
    synth(&tmp.path().join("b"), &["--seed", "7"]);
    let (a, b) = (contents(&tmp.path().join("a")), contents(&tmp.path().join("b")));
    assert_eq!(a.len(), 10);
    assert_eq!(a, b);
    synth(&tmp.path().join("c"), &["--seed", "8"]);
    assert_ne!(a["seen_features.txt"], contents(&tmp.path().join("c"))["seen_features.txt"]);
}

#[test]
fn train_then_eval_on_unshifted_data_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &["--set", "synth.noise_sigma=0.1"]);
    let m = tmp.path().join("m");
    ok(&["train", "--manifest", &manifest, "--method", "aste", "--out", m.to_str().unwrap()]);
    let model = m.join("model.txt");
    let e = tmp.path().join("e");
    let stdout = ok(&["eval", "--manifest", &manifest, "--model", model.to_str().unwrap(), "--out", e.to_str().unwrap()]);
    assert_eq!(stdout.trim(), "accuracy = 1");
    assert_eq!(fs::read_to_string(e.join("report.txt")).unwrap(), "accuracy = 1\n");

    let p = tmp.path().join("p");
    ok(&["predict", "--manifest", &manifest, "--model", model.to_str().unwrap(), "--out", p.to_str().unwrap()]);
    let predicted = fs::read_to_string(p.join("predictions.txt")).unwrap();
    let truth = fs::read_to_string(tmp.path().join("d/unseen_labels.txt")).unwrap();
    assert_eq!(predicted, truth);
}

#[test]
fn repeated_commands_reproduce_outputs_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &["--set", "synth.shift_sigma=0.5", "--set", "synth.noise_sigma=0.5"]);
    let runs: [&[&str]; 5] = [
        &["train", "--method", "taste", "--set", "train.epochs_per_eta=5"],
        &["train", "--method", "aste", "--seed", "3"],
        &["eval", "--method", "aste", "--trials", "2", "--set", "train.epochs_per_eta=5"],
        &["sweep", "--method", "eszsl", "--trials", "2"],
        &["bench-ft", "--method", "lr", "--trials", "2"],
    ];
    for (i, run) in runs.iter().enumerate() {
        let dirs: Vec<String> = ["x", "y"]
            .iter()
            .map(|s| tmp.path().join(format!("{s}{i}")).to_str().unwrap().to_owned())
            .collect();
        for dir in &dirs {
            let mut args = run.to_vec();
            args.extend_from_slice(&["--manifest", &manifest, "--out", dir]);
            ok(&args);
        }
        let (a, b) = (contents(Path::new(&dirs[0])), contents(Path::new(&dirs[1])));
        assert!(a.contains_key("run.log"));
        assert_eq!(a, b, "{run:?}");
    }
}

#[test]
fn run_log_alone_reproduces_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &["--set", "synth.noise_sigma=0.4"]);
    let first = tmp.path().join("first");
    ok(&[
        "train", "--manifest", &manifest, "--method", "aste", "--out", first.to_str().unwrap(),
        "--seed", "5", "--set", "train.c=0.3", "--set", "train.epochs_per_eta=7",
    ]);
    let log = fs::read_to_string(first.join("run.log")).unwrap();
    let invocation = log.lines().find_map(|l| l.strip_prefix("invocation = zsl ")).unwrap();
    let replay = tmp.path().join("replay");
    let args: Vec<&str> = invocation
        .split(' ')
        .map(|a| if a == "OUT" { replay.to_str().unwrap() } else { a })
        .collect();
    ok(&args);
    assert_eq!(fs::read(first.join("model.txt")).unwrap(), fs::read(replay.join("model.txt")).unwrap());
    assert_eq!(log, fs::read_to_string(replay.join("run.log")).unwrap());
}

#[test]
fn commands_leave_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    let manifest = synth(&d, &[]);
    let before = contents(&d);
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    ok(&["train", "--manifest", &manifest, "--method", "lr", "--out", out]);
    let model = format!("{out}/model.txt");
    let model_before = fs::read(&model).unwrap();
    ok(&["predict", "--manifest", &manifest, "--model", &model, "--out", out]);
    ok(&["eval", "--manifest", &manifest, "--model", &model, "--out", out]);
    ok(&["verify-prop1", "--manifest", &manifest, "--out", out]);
    assert_eq!(before, contents(&d));
    assert_eq!(model_before, fs::read(&model).unwrap());
}

#[test]
fn gradcheck_passes_and_reports_its_maximum() {
    let stdout = ok(&["gradcheck", "--seed", "3"]);
    let worst: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("max_relative_error = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(worst < 1e-4);
    assert!(stdout.contains("cases = 100"));
}

#[test]
fn verify_prop1_reports_every_class() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &["--set", "synth.k_seen=6"]);
    let stdout = ok(&["verify-prop1", "--manifest", &manifest]);
    assert_eq!(stdout.lines().filter(|l| l.ends_with("\ttrue")).count(), 6);
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("d"), &[]);
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();

    let (c, err) = code(&["train", "--manifest", &manifest, "--method", "aste", "--out", out, "--set", "train.lr=1"]);
    assert_eq!(c, 2);
    assert!(err.contains("unknown config key `train.lr`"));
    assert_eq!(err.lines().count(), 1);

    let (c, err) = code(&["train", "--method", "aste", "--out", out]);
    assert_eq!((c, err.lines().count()), (2, 1), "{err}");
    assert_eq!(code(&["train", "--manifest", &manifest, "--method", "svm", "--out", out]).0, 2);
    assert_eq!(code(&["frobnicate"]).0, 2);

    let (c, err) = code(&["train", "--manifest", "missing.txt", "--method", "aste", "--out", out]);
    assert_eq!((c, err.lines().count()), (3, 1));
    fs::write(tmp.path().join("d/seen_features.txt"), "2 2\n1 0\n0\n").unwrap();
    let (c, err) = code(&["train", "--manifest", &manifest, "--method", "lr", "--out", out]);
    assert_eq!(c, 3);
    assert!(err.contains("seen_features.txt:3: expected 2 values"), "{err}");

    let fresh = synth(&tmp.path().join("f"), &[]);
    let (c, err) = code(&[
        "train", "--manifest", &fresh, "--method", "aste", "--out", out,
        "--set", "train.eta_schedule=1e6", "--set", "train.init_std=1",
    ]);
    assert_eq!(c, 4, "{err}");
    assert!(err.contains("diverged"));
    assert_eq!(code(&["--help"]).0, 0);
}
