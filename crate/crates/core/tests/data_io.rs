use std::fs;

use nalgebra::DMatrix;
use zsl_core::data_io::{
    load_bundle, read_matrix, synth_generate, write_bundle, write_matrix, Manifest, SynthConfig,
};
use zsl_core::fast_training::class_means;
use zsl_core::Error;

fn dir_contents(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn written_bundle_loads_back_equal() {
    let d = synth_generate(&SynthConfig { noise_sigma: 0.3, shift_sigma: 0.5, ..Default::default() }).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_bundle(tmp.path(), &d.bundle).unwrap();
    let loaded = load_bundle(&Manifest::read(&manifest).unwrap()).unwrap();
    assert_eq!(loaded, d.bundle);
}

#[test]
fn same_seed_writes_identical_files() {
    let cfg = SynthConfig { seed: 7, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_bundle(a.path(), &synth_generate(&cfg).unwrap().bundle).unwrap();
    write_bundle(b.path(), &synth_generate(&cfg).unwrap().bundle).unwrap();
    let (ca, cb) = (dir_contents(a.path()), dir_contents(b.path()));
    assert_eq!(ca.len(), 7);
    assert_eq!(ca, cb);
}

#[test]
fn random_matrix_round_trips_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.txt");
    let m = DMatrix::from_fn(5, 3, |i, j| ((i * 7 + j) as f64).sin() * 1e-3 + (j as f64) / 3.0);
    write_matrix(&path, &m).unwrap();
    let back = read_matrix(&path).unwrap();
    for (x, y) in m.iter().zip(back.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn out_of_range_label_fails_validation() {
    let d = synth_generate(&SynthConfig::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_bundle(tmp.path(), &d.bundle).unwrap();
    let labels = tmp.path().join("seen_labels.txt");
    let text = fs::read_to_string(&labels).unwrap().replacen("0\n", "-1\n", 1);
    fs::write(&labels, text).unwrap();
    let err = load_bundle(&Manifest::read(&manifest).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
    assert!(err.to_string().contains("label range"), "{err}");
}

#[test]
fn manifest_paths_resolve_against_its_directory() {
    let d = synth_generate(&SynthConfig::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let sub = tmp.path().join("data");
    write_bundle(&sub, &d.bundle).unwrap();
    let text = Manifest::standard()
        .to_text()
        .replace("l2_normalize_rows = false", "l2_normalize_rows true")
        .replace("= ", "= data/")
        .replace("l2_normalize_rows true", "l2_normalize_rows = true");
    let manifest = tmp.path().join("m.txt");
    fs::write(&manifest, text).unwrap();
    let m = Manifest::read(&manifest).unwrap();
    assert!(m.l2_normalize_rows);
    let loaded = load_bundle(&m).unwrap();
    for row in loaded.seen.features().row_iter() {
        assert!((row.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn missing_file_is_an_io_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("m.txt");
    fs::write(&manifest, Manifest::standard().to_text()).unwrap();
    let err = load_bundle(&Manifest::read(&manifest).unwrap()).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("seen_features.txt"), "{err}");
}

/// Least-squares projection from class semantics to class prototypes.
fn regress_projection(d: &zsl_core::data_io::SynthData) -> DMatrix<f64> {
    let b = &d.bundle;
    let labels = b.unseen_labels.as_ref().unwrap();
    let (_, means, _) = class_means(&b.unseen_features, labels, b.unseen_semantics.num_classes()).unwrap();
    let a = b.unseen_semantics.vectors();
    let gram = (a * a.transpose()).try_inverse().unwrap();
    means.transpose() * a.transpose() * gram
}

#[test]
fn unshifted_unseen_prototypes_recover_planted_projection() {
    let cfg = SynthConfig { l_unseen: 16, per_class: 400, noise_sigma: 0.2, ..Default::default() };
    let d = synth_generate(&cfg).unwrap();
    let v = regress_projection(&d);
    let rel = (&v - &d.v_star).norm() / d.v_star.norm();
    assert!(rel < 0.05, "relative recovery error {rel}");

    let shifted = synth_generate(&SynthConfig { shift_sigma: 1.0, ..cfg }).unwrap();
    let v = regress_projection(&shifted);
    assert!((&v - &shifted.v_unseen).norm() / shifted.v_unseen.norm() < 0.05);
    assert!((&v - &shifted.v_star).norm() / shifted.v_star.norm() > 0.5);
}
