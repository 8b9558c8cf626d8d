//! Text file formats and dataset bundles.
//!
//! Matrix files: a header line `R C`, then R lines of C whitespace-separated
//! decimals. Label files: one 0-based integer per line. In both, lines whose
//! first non-blank character is `#` are comments and blank lines are skipped.
//! Semantic matrices are stored one class per row and transposed on load.
//!
//! A manifest is a flat `key = value` file naming the files of a bundle;
//! relative paths resolve against the manifest's directory.

mod synth;

pub use synth::{synth_generate, SynthConfig, SynthData};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fast_training::class_means;
use crate::types::{validate_parts, Dataset, SemanticMatrix};

/// Matrices above this many entries trigger a size warning on read and write.
pub const SIZE_WARNING_ENTRIES: usize = 10_000_000;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn warn_if_large(path: &Path, rows: usize, cols: usize) {
    if rows.saturating_mul(cols) > SIZE_WARNING_ENTRIES {
        eprintln!(
            "warning: {} holds {rows}x{cols} entries; the text format is slow at this size",
            path.display()
        );
    }
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut lines = content_lines(text);
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing header `R C`"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| s.parse::<usize>().ok();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (parse_dim(r), parse_dim(c)) {
            (Some(r), Some(c)) => (r, c),
            _ => return Err(parse_err(path, header_line, format!("malformed header `{header}`"))),
        },
        _ => return Err(parse_err(path, header_line, format!("malformed header `{header}`"))),
    };
    warn_if_large(path, rows, cols);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    let mut last_line = header_line;
    for (line_no, line) in lines {
        last_line = line_no;
        if seen_rows == rows {
            return Err(parse_err(path, line_no, format!("expected {rows} rows, found more")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("non-numeric token `{tok}`")))?;
            data.push(v);
        }
        let got = data.len() - before;
        if got != cols {
            return Err(parse_err(path, line_no, format!("expected {cols} values, found {got}")));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_err(
            path,
            last_line + 1,
            format!("expected {rows} rows, found {seen_rows}"),
        ));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_matrix(&text, path)
}

/// Writes with 17 significant digits so every f64 reads back exactly.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24 + 16);
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    warn_if_large(path, m.nrows(), m.ncols());
    fs::write(path, format_matrix(m)).map_err(|e| io_err(path, e))
}

/// Labels as signed integers so that out-of-range values surface in
/// validation rather than as parse errors.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<i64>> {
    content_lines(text)
        .map(|(line_no, line)| {
            line.parse::<i64>()
                .map_err(|_| parse_err(path, line_no, format!("expected an integer label, found `{line}`")))
        })
        .collect()
}

pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_labels(&text, path)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    fs::write(path, format_labels(labels)).map_err(|e| io_err(path, e))
}

/// Reads a class-per-row semantic file into a q×C matrix.
pub fn read_semantics(path: &Path) -> Result<SemanticMatrix> {
    let rows = read_matrix(path)?;
    SemanticMatrix::new(rows.transpose())
}

pub fn write_semantics(path: &Path, semantics: &SemanticMatrix) -> Result<()> {
    write_matrix(path, &semantics.vectors().transpose())
}

/// Column k is the mean of the attribute rows labelled k.
pub fn class_semantics_from_instance_attributes(
    instance_attrs: &DMatrix<f64>,
    labels: &[usize],
    num_classes: usize,
) -> Result<SemanticMatrix> {
    let (present, means, _) = class_means(instance_attrs, labels, num_classes)?;
    if present.len() != num_classes {
        let missing = (0..num_classes).find(|k| !present.contains(k)).unwrap();
        return Err(Error::invalid(format_args!("class {missing} has no instances")));
    }
    SemanticMatrix::new(means.transpose())
}

/// Scales each row to unit L2 norm; all-zero rows are left alone.
pub fn l2_normalize_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
}

/// Paths of a dataset bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub seen_features: PathBuf,
    pub seen_labels: PathBuf,
    pub seen_semantics: PathBuf,
    pub unseen_features: PathBuf,
    pub unseen_semantics: PathBuf,
    /// Ground truth for evaluation only.
    pub unseen_labels: Option<PathBuf>,
    pub l2_normalize_rows: bool,
}

impl Manifest {
    /// File names used by [`write_bundle`].
    pub fn standard() -> Self {
        Manifest {
            seen_features: "seen_features.txt".into(),
            seen_labels: "seen_labels.txt".into(),
            seen_semantics: "seen_semantics.txt".into(),
            unseen_features: "unseen_features.txt".into(),
            unseen_semantics: "unseen_semantics.txt".into(),
            unseen_labels: Some("unseen_labels.txt".into()),
            l2_normalize_rows: false,
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut fields: [Option<PathBuf>; 6] = Default::default();
        let mut normalize = false;
        const KEYS: [&str; 6] = [
            "seen_features",
            "seen_labels",
            "seen_semantics",
            "unseen_features",
            "unseen_semantics",
            "unseen_labels",
        ];
        for (line_no, line) in content_lines(text) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(path, line_no, format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "l2_normalize_rows" {
                normalize = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(parse_err(path, line_no, format!("expected true/false, found `{value}`"))),
                };
                continue;
            }
            let slot = KEYS
                .iter()
                .position(|&k| k == key)
                .ok_or_else(|| parse_err(path, line_no, format!("unknown key `{key}`")))?;
            if fields[slot].is_some() {
                return Err(parse_err(path, line_no, format!("duplicate key `{key}`")));
            }
            fields[slot] = Some(base.join(value));
        }
        let [sf, sl, ss, uf, us, ul] = fields;
        let need = |p: Option<PathBuf>, key: &str| {
            p.ok_or_else(|| parse_err(path, 0, format!("missing required key `{key}`")))
        };
        Ok(Manifest {
            seen_features: need(sf, KEYS[0])?,
            seen_labels: need(sl, KEYS[1])?,
            seen_semantics: need(ss, KEYS[2])?,
            unseen_features: need(uf, KEYS[3])?,
            unseen_semantics: need(us, KEYS[4])?,
            unseen_labels: ul,
            l2_normalize_rows: normalize,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Manifest::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, p: &Path| {
            let _ = writeln!(out, "{k} = {}", p.display());
        };
        put("seen_features", &self.seen_features);
        put("seen_labels", &self.seen_labels);
        put("seen_semantics", &self.seen_semantics);
        put("unseen_features", &self.unseen_features);
        put("unseen_semantics", &self.unseen_semantics);
        if let Some(p) = &self.unseen_labels {
            put("unseen_labels", p);
        }
        let _ = writeln!(out, "l2_normalize_rows = {}", self.l2_normalize_rows);
        out
    }
}

/// Seen training data, unlabelled (or evaluation-labelled) unseen data and
/// both semantic matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub seen: Dataset,
    pub seen_semantics: SemanticMatrix,
    /// M×p.
    pub unseen_features: DMatrix<f64>,
    pub unseen_labels: Option<Vec<usize>>,
    pub unseen_semantics: SemanticMatrix,
}

impl Bundle {
    pub fn new(
        seen: Dataset,
        seen_semantics: SemanticMatrix,
        unseen_features: DMatrix<f64>,
        unseen_labels: Option<Vec<usize>>,
        unseen_semantics: SemanticMatrix,
    ) -> Result<Self> {
        crate::types::validate_pair(&seen, &seen_semantics).into_result()?;
        if unseen_features.ncols() != seen.dim() {
            return Err(Error::shape(format_args!(
                "unseen feature dim {} vs seen feature dim {}",
                unseen_features.ncols(),
                seen.dim()
            )));
        }
        if unseen_semantics.dim() != seen_semantics.dim() {
            return Err(Error::shape(format_args!(
                "unseen semantic dim {} vs seen semantic dim {}",
                unseen_semantics.dim(),
                seen_semantics.dim()
            )));
        }
        let signed: Vec<i64> = match &unseen_labels {
            Some(l) => l.iter().map(|&z| z as i64).collect(),
            None => vec![0; unseen_features.nrows()],
        };
        let semantics_check = unseen_labels.as_ref().map(|_| unseen_semantics.vectors());
        validate_parts(&unseen_features, &signed, unseen_semantics.num_classes(), semantics_check)
            .into_result()?;
        Ok(Bundle {
            seen,
            seen_semantics,
            unseen_features,
            unseen_labels,
            unseen_semantics,
        })
    }

    /// The unseen split as a labelled dataset; needs ground truth.
    pub fn unseen_dataset(&self) -> Result<Dataset> {
        let labels = self
            .unseen_labels
            .clone()
            .ok_or_else(|| Error::invalid(format_args!("bundle has no unseen labels")))?;
        Dataset::new(
            self.unseen_features.clone(),
            labels,
            self.unseen_semantics.num_classes(),
        )
    }
}

fn to_labels(raw: Vec<i64>, features: &DMatrix<f64>, num_classes: usize) -> Result<Vec<usize>> {
    validate_parts(features, &raw, num_classes, None).into_result()?;
    Ok(raw.into_iter().map(|l| l as usize).collect())
}

pub fn load_bundle(manifest: &Manifest) -> Result<Bundle> {
    let mut seen_x = read_matrix(&manifest.seen_features)?;
    let seen_semantics = read_semantics(&manifest.seen_semantics)?;
    let seen_labels = to_labels(
        read_labels(&manifest.seen_labels)?,
        &seen_x,
        seen_semantics.num_classes(),
    )?;
    let mut unseen_x = read_matrix(&manifest.unseen_features)?;
    let unseen_semantics = read_semantics(&manifest.unseen_semantics)?;
    let unseen_labels = match &manifest.unseen_labels {
        Some(p) => Some(to_labels(read_labels(p)?, &unseen_x, unseen_semantics.num_classes())?),
        None => None,
    };
    if manifest.l2_normalize_rows {
        l2_normalize_rows(&mut seen_x);
        l2_normalize_rows(&mut unseen_x);
    }
    let seen = Dataset::new(seen_x, seen_labels, seen_semantics.num_classes())?;
    Bundle::new(seen, seen_semantics, unseen_x, unseen_labels, unseen_semantics)
}

/// Writes every file of `bundle` plus `manifest.txt` into `dir`; returns the
/// manifest path.
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut manifest = Manifest::standard();
    if bundle.unseen_labels.is_none() {
        manifest.unseen_labels = None;
    }
    write_matrix(&dir.join(&manifest.seen_features), bundle.seen.features())?;
    write_labels(&dir.join(&manifest.seen_labels), bundle.seen.labels())?;
    write_semantics(&dir.join(&manifest.seen_semantics), &bundle.seen_semantics)?;
    write_matrix(&dir.join(&manifest.unseen_features), &bundle.unseen_features)?;
    write_semantics(&dir.join(&manifest.unseen_semantics), &bundle.unseen_semantics)?;
    if let (Some(p), Some(l)) = (&manifest.unseen_labels, &bundle.unseen_labels) {
        write_labels(&dir.join(p), l)?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest.to_text()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}
