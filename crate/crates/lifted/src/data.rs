//! Dataset loading, synthetic blob generation, and the class-disjoint split.
//!
//! Input formats: headerless CSV with the class label in column 0 and
//! features thereafter, or JSON lines of `{"label": <u32>, "features": [..]}`.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Feature vectors with class labels and an index from class id to rows.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<u32>,
    class_index: BTreeMap<u32, Vec<usize>>,
    provenance: String,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<u32>, provenance: String) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidInput("dataset must be non-empty".into()));
        }
        if labels.len() != features.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                features.nrows()
            )));
        }
        for (row, r) in features.rows().into_iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row });
            }
        }
        let mut class_index: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (row, &label) in labels.iter().enumerate() {
            class_index.entry(label).or_default().push(row);
        }
        Ok(Self {
            features,
            labels,
            class_index,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_index(&self) -> &BTreeMap<u32, Vec<usize>> {
        &self.class_index
    }

    pub fn num_classes(&self) -> usize {
        self.class_index.len()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Features for a subset of rows, in the given order.
    pub fn gather(&self, rows: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), self.dim()), |(i, j)| {
            self.features[[rows[i], j]]
        })
    }

    pub fn gather_labels(&self, rows: &[usize]) -> Vec<u32> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    JsonLines,
}

impl DatasetFormat {
    /// Picks a format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => DatasetFormat::JsonLines,
            _ => DatasetFormat::Csv,
        }
    }
}

#[derive(Deserialize)]
struct JsonRow {
    label: u32,
    features: Vec<f64>,
}

/// Loads a dataset file, preserving row order. Parse failures carry the
/// 1-based line number.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path)?;
    let path_str = path.display().to_string();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u32> = Vec::new();
    let mut width: Option<usize> = None;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path_str.clone(),
            line: lineno,
            msg,
        };
        let (label, feats) = match format {
            DatasetFormat::Csv => {
                let mut fields = line.split(',');
                let label: u32 = fields
                    .next()
                    .unwrap()
                    .trim()
                    .parse()
                    .map_err(|_| err("missing or non-integer label in column 0".into()))?;
                let feats: Vec<f64> = fields
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|_| err(format!("non-numeric field `{}`", f.trim())))
                    })
                    .collect::<Result<_>>()?;
                (label, feats)
            }
            DatasetFormat::JsonLines => {
                let row: JsonRow =
                    serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
                (row.label, row.features)
            }
        };
        if feats.is_empty() {
            return Err(err("row has no feature columns".into()));
        }
        if let Some(v) = feats.iter().find(|v| !v.is_finite()) {
            return Err(err(format!("non-finite feature value {v}")));
        }
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(err(format!(
                    "ragged row: {} features, expected {w}",
                    feats.len()
                )))
            }
            _ => {}
        }
        labels.push(label);
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path_str,
            line: 0,
            msg: "file contains no data rows".into(),
        });
    }
    let d = width.unwrap();
    let features = Array2::from_shape_fn((rows.len(), d), |(i, j)| rows[i][j]);
    LabeledDataset::new(features, labels, format!("file:{}", path.display()))
}

/// Writes a dataset as headerless CSV (`label,f0,...`).
pub fn save_dataset_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (row, &label) in dataset.labels().iter().enumerate() {
        out.push_str(&label.to_string());
        for v in dataset.features().row(row) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes embeddings as CSV rows of `label,e0,...,e(c-1)`.
pub fn save_embeddings_csv(embeddings: &Array2<f64>, labels: &[u32], path: &Path) -> Result<()> {
    if embeddings.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} embedding rows for {} labels",
            embeddings.nrows(),
            labels.len()
        )));
    }
    let mut out = String::new();
    for (row, &label) in labels.iter().enumerate() {
        out.push_str(&label.to_string());
        for v in embeddings.row(row) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Synthetic Gaussian blobs: class centers uniform in
/// `[-center_scale, center_scale]^dim`, points at center plus isotropic
/// Gaussian noise. Deterministic per seed.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    center_scale: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::InvalidInput(
            "num_classes, per_class, and dim must all be positive".into(),
        ));
    }
    if noise_sigma < 0.0 || center_scale < 0.0 {
        return Err(Error::InvalidInput(
            "center_scale and noise_sigma must be non-negative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = num_classes * per_class;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for class in 0..num_classes {
        let center: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-center_scale..=center_scale))
            .collect();
        for _ in 0..per_class {
            for (j, &c) in center.iter().enumerate() {
                features[[row, j]] = c + noise_sigma * normal.sample(&mut rng);
            }
            labels.push(class as u32);
            row += 1;
        }
    }
    LabeledDataset::new(
        features,
        labels,
        format!(
            "blobs:classes={num_classes},per_class={per_class},dim={dim},\
             center_scale={center_scale},noise_sigma={noise_sigma},seed={seed}"
        ),
    )
}

/// How the class-disjoint split orders classes before taking the first
/// fraction for training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitOrdering {
    /// Ascending class id, matching a "first half of classes" protocol.
    ByClassId,
    /// Deterministic shuffle of class ids from the given seed.
    BySeedShuffle(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub ordering: SplitOrdering,
    /// Fraction of classes assigned to the training split, in (0, 1).
    pub train_fraction_of_classes: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ordering: SplitOrdering::ByClassId,
            train_fraction_of_classes: 0.5,
        }
    }
}

/// Splits a dataset so that train and test share no classes. With ascending
/// ordering and fraction 0.5 the first `ceil(C/2)` classes train.
pub fn class_disjoint_split(
    dataset: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let classes: Vec<u32> = dataset.class_index().keys().cloned().collect();
    if classes.len() < 2 {
        return Err(Error::InvalidInput(
            "class-disjoint split requires at least 2 classes".into(),
        ));
    }
    if !(0.0..1.0).contains(&spec.train_fraction_of_classes)
        || spec.train_fraction_of_classes <= 0.0
    {
        return Err(Error::Config(
            "train_fraction_of_classes must lie in (0, 1)".into(),
        ));
    }
    let mut ordered = classes.clone();
    if let SplitOrdering::BySeedShuffle(seed) = spec.ordering {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Fisher-Yates
        for i in (1..ordered.len()).rev() {
            let j = rng.gen_range(0..=i);
            ordered.swap(i, j);
        }
    }
    let n_train = ((ordered.len() as f64 * spec.train_fraction_of_classes).ceil() as usize)
        .clamp(1, ordered.len() - 1);
    let train_classes: std::collections::BTreeSet<u32> =
        ordered[..n_train].iter().cloned().collect();

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (row, &label) in dataset.labels().iter().enumerate() {
        if train_classes.contains(&label) {
            train_rows.push(row);
        } else {
            test_rows.push(row);
        }
    }
    let make = |rows: &[usize], tag: &str| {
        LabeledDataset::new(
            dataset.gather(rows),
            dataset.gather_labels(rows),
            format!("{}:{tag}", dataset.provenance()),
        )
    };
    Ok((make(&train_rows, "train")?, make(&test_rows, "test")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_csv() {
        let f = write_temp("0,1.0,2.0\n0,1.5,2.5\n1,-1.0,0.0\n", ".csv");
        let ds = load_dataset(f.path(), DatasetFormat::Csv).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.labels(), &[0, 0, 1]);
    }

    #[test]
    fn loads_jsonl() {
        let f = write_temp(
            "{\"label\": 3, \"features\": [1.0, 2.0]}\n{\"label\": 4, \"features\": [0.5, 0.5]}\n",
            ".jsonl",
        );
        let ds = load_dataset(f.path(), DatasetFormat::JsonLines).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), &[3, 4]);
    }

    #[test]
    fn rejects_nan_with_line_number() {
        let f = write_temp("0,1.0\n1,NaN\n", ".csv");
        match load_dataset(f.path(), DatasetFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        let f = write_temp("0,1.0,2.0\n1,3.0\n", ".csv");
        match load_dataset(f.path(), DatasetFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_file() {
        let f = write_temp("", ".csv");
        assert!(load_dataset(f.path(), DatasetFormat::Csv).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = make_blobs(3, 4, 2, 1.0, 0.1, 9).unwrap();
        let f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        save_dataset_csv(&ds, f.path()).unwrap();
        let loaded = load_dataset(f.path(), DatasetFormat::Csv).unwrap();
        assert_eq!(loaded.labels(), ds.labels());
        assert_eq!(loaded.features(), ds.features());
    }

    #[test]
    fn blobs_are_deterministic() {
        let a = make_blobs(5, 3, 4, 2.0, 0.3, 77).unwrap();
        let b = make_blobs(5, 3, 4, 2.0, 0.3, 77).unwrap();
        assert_eq!(a.features(), b.features());
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn blobs_zero_noise_coincide() {
        let ds = make_blobs(2, 3, 2, 1.0, 0.0, 1).unwrap();
        let rows = &ds.class_index()[&0];
        for &r in rows.iter().skip(1) {
            assert_eq!(ds.features().row(r), ds.features().row(rows[0]));
        }
    }

    #[test]
    fn blobs_count() {
        let ds = make_blobs(20, 10, 8, 1.0, 0.1, 7).unwrap();
        assert_eq!(ds.len(), 200);
    }

    #[test]
    fn split_even_classes() {
        let ds = make_blobs(200, 1, 2, 1.0, 0.0, 1).unwrap();
        let (train, test) = class_disjoint_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(train.num_classes(), 100);
        assert_eq!(test.num_classes(), 100);
        assert!(train.class_index().keys().all(|&c| c < 100));
        assert!(test.class_index().keys().all(|&c| c >= 100));
    }

    #[test]
    fn split_two_classes() {
        let ds = make_blobs(2, 3, 2, 1.0, 0.1, 1).unwrap();
        let (train, test) = class_disjoint_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(train.num_classes(), 1);
        assert_eq!(test.num_classes(), 1);
    }

    #[test]
    fn split_odd_classes_puts_extra_in_train() {
        let ds = make_blobs(5, 2, 2, 1.0, 0.1, 1).unwrap();
        let (train, test) = class_disjoint_split(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(train.num_classes(), 3);
        assert_eq!(test.num_classes(), 2);
    }

    #[test]
    fn split_preserves_rows_and_disjointness() {
        let ds = make_blobs(7, 4, 3, 1.0, 0.2, 5).unwrap();
        for ordering in [SplitOrdering::ByClassId, SplitOrdering::BySeedShuffle(3)] {
            let spec = SplitSpec {
                ordering,
                train_fraction_of_classes: 0.5,
            };
            let (train, test) = class_disjoint_split(&ds, &spec).unwrap();
            assert_eq!(train.len() + test.len(), ds.len());
            let train_set: std::collections::BTreeSet<u32> =
                train.class_index().keys().cloned().collect();
            let test_set: std::collections::BTreeSet<u32> =
                test.class_index().keys().cloned().collect();
            assert!(train_set.is_disjoint(&test_set));
            assert_eq!(train_set.len() + test_set.len(), ds.num_classes());
        }
    }

    #[test]
    fn split_single_class_fails() {
        let ds = make_blobs(1, 4, 2, 1.0, 0.1, 1).unwrap();
        assert!(class_disjoint_split(&ds, &SplitSpec::default()).is_err());
    }
}
