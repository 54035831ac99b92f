//! Multi-view datasets on disk: a JSON manifest pointing at one numeric CSV
//! per view and a single-column CSV of 0-based integer labels.
//!
//! ```json
//! {
//!   "name": "miniature",
//!   "views": [{"name": "a", "csv_path": "a.csv", "dim": 6}],
//!   "labels_path": "labels.csv",
//!   "n_classes": 3,
//!   "delimiter": ",",
//!   "has_header": false
//! }
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

mod demo;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use demo::{demo_dataset, write_demo_dataset, DEMO_SEED};

use crate::error::{CumiError, Result};
use crate::model::{MultiViewBatch, ViewSpec};
use crate::tensor::Matrix;

/// Features below this standard deviation are centred but not scaled.
pub const MIN_STD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewEntry {
    pub name: String,
    pub csv_path: PathBuf,
    pub dim: usize,
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub views: Vec<ViewEntry>,
    pub labels_path: PathBuf,
    pub n_classes: usize,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub has_header: bool,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CumiError::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| CumiError::Invalid {
            path: path.to_path_buf(),
            msg: format!("manifest: {e}"),
        })?;
        m.validate(path)?;
        Ok(m)
    }

    /// A single view is accepted; callers that need two can check `views.len()`.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let invalid = |msg: String| {
            Err(CumiError::Invalid {
                path: path.to_path_buf(),
                msg,
            })
        };
        if self.views.is_empty() {
            return invalid("manifest lists no views".into());
        }
        if let Some(v) = self.views.iter().find(|v| v.dim == 0) {
            return invalid(format!("view '{}' declares zero columns", v.name));
        }
        if self.n_classes < 2 {
            return invalid(format!(
                "n_classes must be at least 2, got {}",
                self.n_classes
            ));
        }
        if !self.delimiter.is_ascii() {
            return invalid(format!(
                "delimiter {:?} is not a single ASCII character",
                self.delimiter
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    pub view_names: Vec<String>,
    pub views: Vec<Matrix>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl MultiViewDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn view_specs(&self) -> Vec<ViewSpec> {
        ViewSpec::list(&self.views.iter().map(Matrix::cols).collect::<Vec<_>>())
    }

    /// Rows `idx` of every view, with labels.
    pub fn batch(&self, idx: &[usize]) -> MultiViewBatch {
        MultiViewBatch {
            views: self.views.iter().map(|x| x.select_rows(idx)).collect(),
            labels: Some(idx.iter().map(|&i| self.labels[i]).collect()),
        }
    }

    pub fn full_batch(&self) -> MultiViewBatch {
        MultiViewBatch {
            views: self.views.clone(),
            labels: Some(self.labels.clone()),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn reader(path: &Path, delimiter: char, has_header: bool) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| CumiError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CumiError {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CumiError::io(path, io),
        other => CumiError::Parse {
            path: path.to_path_buf(),
            row,
            col: 0,
            msg: format!("{other:?}"),
        },
    }
}

fn line_of(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map_or(fallback, |p| p.line() as usize)
}

/// Reads a numeric matrix of exactly `dim` columns. Blank lines are skipped.
pub fn read_matrix_csv(
    path: &Path,
    view: &str,
    dim: usize,
    delimiter: char,
    has_header: bool,
) -> Result<Matrix> {
    let mut rdr = reader(path, delimiter, has_header)?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, k + 1);
        if rec.len() != dim {
            return Err(CumiError::ViewWidth {
                path: path.to_path_buf(),
                view: view.to_string(),
                row: line,
                declared: dim,
                found: rec.len(),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| CumiError::Parse {
                path: path.to_path_buf(),
                row: line,
                col: j + 1,
                msg: format!("{cell:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(CumiError::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    col: j + 1,
                    msg: format!("{cell:?} is not finite"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    Matrix::new(rows, dim, data)
}

/// Reads a matrix whose width is whatever the first row has.
pub fn read_any_matrix_csv(path: &Path, delimiter: char, has_header: bool) -> Result<Matrix> {
    let mut rdr = reader(path, delimiter, has_header)?;
    let width = match rdr.records().next() {
        Some(rec) => rec.map_err(|e| csv_error(path, e))?.len(),
        None => {
            return Err(CumiError::Invalid {
                path: path.to_path_buf(),
                msg: "no data rows".into(),
            })
        }
    };
    read_matrix_csv(path, "input", width, delimiter, has_header)
}

fn read_labels(
    path: &Path,
    n_classes: usize,
    delimiter: char,
    has_header: bool,
) -> Result<Vec<usize>> {
    let mut rdr = reader(path, delimiter, has_header)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = line_of(&rec, k + 1);
        if rec.len() != 1 {
            return Err(CumiError::Parse {
                path: path.to_path_buf(),
                row: line,
                col: 2,
                msg: format!("label files have one column, found {}", rec.len()),
            });
        }
        let cell = &rec[0];
        let value: usize = cell.parse().map_err(|_| CumiError::Parse {
            path: path.to_path_buf(),
            row: line,
            col: 1,
            msg: format!("{cell:?} is not a non-negative integer label"),
        })?;
        if value >= n_classes {
            return Err(CumiError::LabelRange {
                path: path.to_path_buf(),
                row: line,
                value,
                n_classes,
            });
        }
        out.push(value);
    }
    Ok(out)
}

/// Reads and validates every file a manifest points to.
pub fn load(manifest: &DatasetManifest, base_dir: &Path) -> Result<MultiViewDataset> {
    let labels_path = resolve(base_dir, &manifest.labels_path);
    let labels = read_labels(
        &labels_path,
        manifest.n_classes,
        manifest.delimiter,
        manifest.has_header,
    )?;
    let mut views = Vec::with_capacity(manifest.views.len());
    for v in &manifest.views {
        let path = resolve(base_dir, &v.csv_path);
        let x = read_matrix_csv(
            &path,
            &v.name,
            v.dim,
            manifest.delimiter,
            manifest.has_header,
        )?;
        if x.rows() != labels.len() {
            return Err(CumiError::RowCount {
                path,
                expected: labels.len(),
                found: x.rows(),
            });
        }
        views.push(x);
    }
    if labels.is_empty() {
        return Err(CumiError::Invalid {
            path: labels_path,
            msg: "dataset has no rows".into(),
        });
    }
    Ok(MultiViewDataset {
        name: manifest.name.clone(),
        view_names: manifest.views.iter().map(|v| v.name.clone()).collect(),
        views,
        labels,
        n_classes: manifest.n_classes,
    })
}

/// Reads a manifest file and the dataset it describes.
pub fn load_manifest(path: &Path) -> Result<MultiViewDataset> {
    let m = DatasetManifest::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    load(&m, base)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CumiError::io(path, e))
}

fn matrix_csv(x: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..x.rows() {
        let cells: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Writes `ds` into `dir` as `<view>.csv`, `labels.csv` and `manifest.json`;
/// returns the manifest path. Values round-trip bit-exactly through [`load_manifest`].
pub fn save(ds: &MultiViewDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CumiError::io(dir, e))?;
    let mut views = Vec::new();
    for (name, x) in ds.view_names.iter().zip(&ds.views) {
        let file = PathBuf::from(format!("{name}.csv"));
        write_file(&dir.join(&file), &matrix_csv(x))?;
        views.push(ViewEntry {
            name: name.clone(),
            csv_path: file,
            dim: x.cols(),
        });
    }
    let labels: String = ds.labels.iter().map(|y| format!("{y}\n")).collect();
    write_file(&dir.join("labels.csv"), &labels)?;
    let manifest = DatasetManifest {
        name: ds.name.clone(),
        views,
        labels_path: "labels.csv".into(),
        n_classes: ds.n_classes,
        delimiter: ',',
        has_header: false,
    };
    let path = dir.join("manifest.json");
    write_file(&path, &serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// Per-feature mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n == 0 {
            return Err(CumiError::Contract(
                "cannot standardize with an empty split".into(),
            ));
        }
        let mut mean = vec![0.0; x.cols()];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; x.cols()];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n as f64).sqrt()).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(CumiError::dim(
                "standardize",
                format!("{} columns, statistics for {}", x.cols(), self.mean.len()),
            ));
        }
        let k = x.cols();
        Ok(Matrix::from_fn(x.rows(), k, |i, j| {
            let c = x.get(i, j) - self.mean[j];
            if self.std[j] < MIN_STD {
                c
            } else {
                c / self.std[j]
            }
        }))
    }
}

/// z-scores every view with statistics from rows `stats_rows`.
pub fn standardize(ds: &MultiViewDataset, stats_rows: &[usize]) -> Result<MultiViewDataset> {
    let mut out = ds.clone();
    for x in &mut out.views {
        let s = Standardizer::fit(&x.select_rows(stats_rows))?;
        *x = s.apply(x)?;
    }
    Ok(out)
}

/// Disjoint sorted row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// `true` for test rows.
    pub fn test_mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.test {
            m[i] = true;
        }
        m
    }
}

/// Stratified split: each class sends `round(fraction · count)` rows to the
/// test side, clamped so both sides keep at least one row of every class.
pub fn split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CumiError::Contract(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(CumiError::Contract(format!(
                "class {class} has a single sample and cannot be split"
            )));
        }
        rows.shuffle(&mut rng);
        let n_test =
            ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_balanced_binary() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let s = split(&labels, 0.2, 3).unwrap();
        assert_eq!(s.test.len(), 2);
        assert_eq!(s.test.iter().filter(|&&i| labels[i] == 0).count(), 1);
        assert_eq!(s, split(&labels, 0.2, 3).unwrap());
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_singletons() {
        assert!(matches!(
            split(&[0, 0, 1], 0.2, 0),
            Err(CumiError::Contract(_))
        ));
        assert!(split(&[0, 0, 1, 1], 1.0, 0).is_err());
    }

    #[test]
    fn constant_feature_centred_only() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        let z = s.apply(&x).unwrap();
        assert_eq!(z.column(1), vec![0.0, 0.0]);
        assert_eq!(z.column(0), vec![-1.0, 1.0]);
    }
}
