//! CSV datasets and prediction files.
//!
//! Datasets: header `f0,...,f{d-1},label`, one point per line, `-1` marks an
//! unlabeled point. Predictions: `index,pred_label,score_c0,...`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::adaptation::Prediction;
use crate::data::LabeledDataset;
use crate::datagen::{Scenario, ScenarioParams};
use crate::error::{Error, Result};

pub const UNLABELED: i64 = -1;

/// A dataset as read from disk; labels may be [`UNLABELED`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
}

impl CsvDataset {
    pub fn is_unlabeled(&self) -> bool {
        self.labels.iter().all(|&y| y == UNLABELED)
    }

    pub fn into_labeled(self, path: &Path) -> Result<LabeledDataset> {
        let mut labels = Vec::with_capacity(self.labels.len());
        for (i, &y) in self.labels.iter().enumerate() {
            if y < 0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i as u64 + 2,
                    message: format!("expected a class label, found {y}"),
                });
            }
            labels.push(y as usize);
        }
        LabeledDataset::new(self.points, labels)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

pub fn load_labeled_csv(path: &Path) -> Result<CsvDataset> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(parse(1, "missing header row".into()));
    }
    let d = headers.len() - 1;
    let expected = (0..d).map(|k| format!("f{k}")).chain(["label".to_string()]);
    for (got, want) in headers.iter().zip(expected) {
        if got.trim() != want {
            return Err(parse(
                1,
                format!("header must be f0,...,f{{d-1}},label; found `{got}` where `{want}` was expected"),
            ));
        }
    }
    if d == 0 {
        return Err(parse(1, "no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        for field in record.iter().take(d) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse(line, format!("non-numeric feature `{field}`")))?;
            values.push(v);
        }
        let field = &record[d];
        let y: i64 = field
            .trim()
            .parse()
            .map_err(|_| parse(line, format!("non-integer label `{field}`")))?;
        if y < UNLABELED {
            return Err(parse(line, format!("label {y} is below -1")));
        }
        labels.push(y);
    }
    let points = Array2::from_shape_vec((labels.len(), d), values).expect("row-major fill");
    Ok(CsvDataset { points, labels })
}

pub fn write_labeled_csv(path: &Path, points: ArrayView2<'_, f64>, labels: &[i64]) -> Result<()> {
    if points.nrows() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} labels",
            points.nrows(),
            labels.len()
        )));
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..points.ncols())
        .map(|k| format!("f{k}"))
        .chain(["label".to_string()])
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    for (row, y) in points.outer_iter().zip(labels) {
        for v in row {
            write!(w, "{v},").map_err(io_err(path))?;
        }
        writeln!(w, "{y}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_dataset_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let labels: Vec<i64> = data.labels.iter().map(|&y| y as i64).collect();
    write_labeled_csv(path, data.points(), &labels)
}

pub fn write_predictions_csv(path: &Path, prediction: &Prediction) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let c = prediction.scores.num_classes();
    let mut header = vec!["index".to_string(), "pred_label".to_string()];
    header.extend((0..c).map(|k| format!("score_c{k}")));
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    let scores = prediction.scores.values();
    for (j, y) in prediction.labels.iter().enumerate() {
        write!(w, "{j},{y}").map_err(io_err(path))?;
        for k in 0..c {
            write!(w, ",{}", scores[[k, j]]).map_err(io_err(path))?;
        }
        writeln!(w).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `index,pred_label,...` back into labels (scores are ignored).
pub fn load_prediction_labels(path: &Path) -> Result<Vec<usize>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let y = record.get(1).and_then(|f| f.trim().parse().ok()).ok_or(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: "missing or invalid pred_label".into(),
        })?;
        labels.push(y);
    }
    Ok(labels)
}

/// Loads labeled source files; every label must be a class id.
pub fn load_sources(paths: &[PathBuf]) -> Result<Vec<LabeledDataset>> {
    paths.iter().map(|p| load_labeled_csv(p)?.into_labeled(p)).collect()
}

#[derive(Debug, Serialize)]
struct ScenarioManifest<'a> {
    seed: u64,
    params: &'a ScenarioParams,
    source_files: Vec<String>,
    target_file: &'a str,
    truth_file: &'a str,
    source_proportions: &'a [Vec<f64>],
    target_proportions: &'a [f64],
}

pub const TARGET_FILE: &str = "target.csv";
pub const TRUTH_FILE: &str = "target_truth.csv";
pub const MANIFEST_FILE: &str = "scenario.json";

pub fn source_file_name(k: usize) -> String {
    format!("source_{k}.csv")
}

/// Writes `source_k.csv`, the unlabeled `target.csv`, the held-out
/// `target_truth.csv` and a `scenario.json` manifest into `dir`.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut source_files = Vec::new();
    for (k, s) in scenario.sources.iter().enumerate() {
        let name = source_file_name(k);
        write_dataset_csv(&dir.join(&name), s)?;
        source_files.push(name);
    }
    let unlabeled = vec![UNLABELED; scenario.target.nrows()];
    write_labeled_csv(&dir.join(TARGET_FILE), scenario.target.view(), &unlabeled)?;
    let truth: Vec<i64> = scenario.truth.labels.iter().map(|&y| y as i64).collect();
    write_labeled_csv(&dir.join(TRUTH_FILE), scenario.target.view(), &truth)?;

    let manifest = ScenarioManifest {
        seed: scenario.seed,
        params: &scenario.params,
        source_files,
        target_file: TARGET_FILE,
        truth_file: TRUTH_FILE,
        source_proportions: &scenario.source_proportions,
        target_proportions: &scenario.truth.proportions,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(io_err(&path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_multisource_scenario;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "f0,f1,label\n0,0,0\n1,1,1\n");
        let d = load_labeled_csv(&p).unwrap();
        assert_eq!(d.points, ndarray::array![[0.0, 0.0], [1.0, 1.0]]);
        assert_eq!(d.labels, vec![0, 1]);
        assert!(!d.is_unlabeled());
    }

    #[test]
    fn unlabeled_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "f0,label\n0.5,-1\n2,-1\n");
        let d = load_labeled_csv(&p).unwrap();
        assert!(d.is_unlabeled());
        assert!(d.into_labeled(&p).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bad.csv", "f0,f1,label\n0,0,0\n1,x,1\n");
        match load_labeled_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "ragged.csv", "f0,f1,label\n0,0,0\n1,1\n");
        match load_labeled_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "nohdr.csv", "0,0,0\n1,1,1\n");
        match load_labeled_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let p = write(&dir, "empty.csv", "");
        assert!(matches!(load_labeled_csv(&p), Err(Error::Parse { line: 1, .. })));
        let p = write(&dir, "label.csv", "f0,label\n1,0.5\n");
        assert!(matches!(load_labeled_csv(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_labeled_csv(Path::new("/nonexistent/x.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn scenario_round_trip() {
        let params = ScenarioParams {
            num_sources: 2,
            n_source: 40,
            n_target: 30,
            ..Default::default()
        };
        let s = gen_multisource_scenario(&params, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scenario(dir.path(), &s).unwrap();
        for (k, src) in s.sources.iter().enumerate() {
            let p = dir.path().join(source_file_name(k));
            let back = load_labeled_csv(&p).unwrap().into_labeled(&p).unwrap();
            assert_eq!(&back, src);
        }
        let t = load_labeled_csv(&dir.path().join(TARGET_FILE)).unwrap();
        assert!(t.is_unlabeled());
        assert_eq!(t.points, s.target);
        let truth = load_labeled_csv(&dir.path().join(TRUTH_FILE)).unwrap();
        let labels: Vec<usize> = truth.labels.iter().map(|&y| y as usize).collect();
        assert_eq!(labels, s.truth.labels);
    }
}
