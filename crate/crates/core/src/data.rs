//! Labeled prediction matrices: loading, validation, splitting and error indicators.
//!
//! CSV layout (UTF-8, comma separated, `\n` line endings):
//!
//! ```text
//! label,model_a,model_b
//! +1,+1,-1
//! -1,-1,-1
//! ```
//!
//! Every cell is `+1` or `-1` (`1` is accepted on input; `+1` is always written).
//!
//! # Split reproducibility
//!
//! [`split_train_test`] shuffles row indices with a Fisher–Yates pass driven by
//! `ChaCha8Rng::seed_from_u64(seed + split_index)` (wrapping add). Step `i`
//! (from `n - 1` down to `1`) swaps position `i` with
//! `j = (next_u64() as u128 * (i + 1) as u128) >> 64`. The first
//! `round(n * train_fraction)` shuffled indices form the training set; both
//! halves are returned in ascending row order.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseErrorKind, Result};

/// A ±1 label or prediction.
pub type Sign = i8;

/// N labels and an N×M prediction matrix over {−1, +1}.
///
/// Rows may carry nonnegative weights. Unweighted datasets behave as if every
/// weight is 1. Weighted datasets are how exact, fully enumerated
/// distributions are injected into the counting estimators: one row per
/// outcome, weighted by its probability times a large total mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    labels: Vec<Sign>,
    predictions: Vec<Sign>,
    model_names: Vec<String>,
    weights: Option<Vec<f64>>,
}

fn check_sign(v: Sign) -> bool {
    v == 1 || v == -1
}

impl Dataset {
    /// `predictions` is row-major, N rows of M entries.
    pub fn new(labels: Vec<Sign>, predictions: Vec<Sign>, model_names: Vec<String>) -> Result<Self> {
        let n = labels.len();
        let m = model_names.len();
        if n == 0 {
            return Err(Error::invalid("dataset needs at least one row"));
        }
        if m == 0 {
            return Err(Error::invalid("dataset needs at least one model"));
        }
        if predictions.len() != n * m {
            return Err(Error::invalid(format!(
                "prediction matrix has {} entries, expected {n}x{m}",
                predictions.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&v| !check_sign(v)) {
            return Err(Error::invalid(format!("label at row {i} is {}", labels[i])));
        }
        if let Some(i) = predictions.iter().position(|&v| !check_sign(v)) {
            return Err(Error::invalid(format!(
                "prediction at row {}, model {} is {}",
                i / m,
                i % m,
                predictions[i]
            )));
        }
        let mut seen = HashSet::new();
        for name in &model_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate model name `{name}`")));
            }
        }
        Ok(Self {
            labels,
            predictions,
            model_names,
            weights: None,
        })
    }

    /// Attaches per-row weights (finite, nonnegative, positive total).
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_rows() {
            return Err(Error::invalid(format!(
                "{} weights for {} rows",
                weights.len(),
                self.n_rows()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("weights must have positive total"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    /// Default names `m0, m1, ...`.
    pub fn default_names(m: usize) -> Vec<String> {
        (0..m).map(|j| format!("m{j}")).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of row `i` (1 when unweighted).
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Sum of row weights; equals N when unweighted.
    pub fn total_weight(&self) -> f64 {
        self.weights
            .as_ref()
            .map_or(self.n_rows() as f64, |w| w.iter().sum())
    }

    pub fn prediction(&self, row: usize, model: usize) -> Sign {
        self.predictions[row * self.n_models() + model]
    }

    pub fn row(&self, row: usize) -> &[Sign] {
        let m = self.n_models();
        &self.predictions[row * m..(row + 1) * m]
    }

    pub fn column(&self, model: usize) -> Vec<Sign> {
        (0..self.n_rows()).map(|i| self.prediction(i, model)).collect()
    }

    /// Weighted fraction of rows where model `j` is correct.
    pub fn accuracy(&self, model: usize) -> f64 {
        let correct: f64 = (0..self.n_rows())
            .filter(|&i| self.prediction(i, model) == self.labels[i])
            .map(|i| self.weight(i))
            .sum();
        correct / self.total_weight()
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("row selection is empty"));
        }
        let m = self.n_models();
        let mut predictions = Vec::with_capacity(rows.len() * m);
        for &r in rows {
            predictions.extend_from_slice(self.row(r));
        }
        Ok(Self {
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            predictions,
            model_names: self.model_names.clone(),
            weights: self
                .weights
                .as_ref()
                .map(|w| rows.iter().map(|&r| w[r]).collect()),
        })
    }

    /// Parses the CSV text format.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (header_line, header) = lines
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(Error::Parse {
                line: 1,
                kind: ParseErrorKind::EmptyFile,
            })?;
        let mut cols = header.split(',').map(str::trim);
        if cols.next() != Some("label") {
            return Err(Error::Parse {
                line: header_line,
                kind: ParseErrorKind::MissingLabelColumn,
            });
        }
        let model_names: Vec<String> = cols.map(str::to_owned).collect();
        if model_names.is_empty() {
            return Err(Error::Parse {
                line: header_line,
                kind: ParseErrorKind::NoModelColumns,
            });
        }
        let mut seen = HashSet::new();
        for name in &model_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Parse {
                    line: header_line,
                    kind: ParseErrorKind::DuplicateModelName(name.clone()),
                });
            }
        }

        let m = model_names.len();
        let mut labels = Vec::new();
        let mut predictions = Vec::new();
        for (line_no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != m + 1 {
                return Err(Error::Parse {
                    line: line_no,
                    kind: ParseErrorKind::FieldCount {
                        expected: m + 1,
                        found: fields.len(),
                    },
                });
            }
            for (k, field) in fields.iter().enumerate() {
                let v = parse_sign(field).ok_or_else(|| Error::Parse {
                    line: line_no,
                    kind: ParseErrorKind::InvalidValue((*field).to_owned()),
                })?;
                if k == 0 {
                    labels.push(v);
                } else {
                    predictions.push(v);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::Parse {
                line: header_line,
                kind: ParseErrorKind::EmptyFile,
            });
        }
        Self::new(labels, predictions, model_names)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("label");
        for name in &self.model_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.n_rows() {
            out.push_str(sign_str(self.labels[i]));
            for &v in self.row(i) {
                out.push(',');
                out.push_str(sign_str(v));
            }
            out.push('\n');
        }
        out
    }
}

fn parse_sign(s: &str) -> Option<Sign> {
    match s {
        "+1" | "1" => Some(1),
        "-1" => Some(-1),
        _ => None,
    }
}

fn sign_str(v: Sign) -> &'static str {
    if v > 0 {
        "+1"
    } else {
        "-1"
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_csv_str(&text)
}

/// Writes the CSV format read by [`load_dataset`]. Row weights are not stored.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset.to_csv_string()).map_err(|e| Error::io(path, e))
}

/// N×M error indicators, `1` where a prediction disagrees with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMatrix {
    n_rows: usize,
    n_models: usize,
    entries: Vec<u8>,
}

impl ErrorMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn get(&self, row: usize, model: usize) -> u8 {
        self.entries[row * self.n_models + model]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.entries[row * self.n_models..(row + 1) * self.n_models]
    }

    pub fn column(&self, model: usize) -> Vec<u8> {
        (0..self.n_rows).map(|i| self.get(i, model)).collect()
    }

    /// Rebuilds predictions as `X = Y · (−1)^E`.
    pub fn reconstruct_predictions(&self, labels: &[Sign]) -> Vec<Sign> {
        let mut out = Vec::with_capacity(self.entries.len());
        for (i, &y) in labels.iter().enumerate() {
            out.extend(self.row(i).iter().map(|&e| if e == 1 { -y } else { y }));
        }
        out
    }
}

pub fn error_matrix(d: &Dataset) -> ErrorMatrix {
    let m = d.n_models();
    let mut entries = Vec::with_capacity(d.n_rows() * m);
    for i in 0..d.n_rows() {
        let y = d.labels[i];
        entries.extend(d.row(i).iter().map(|&x| u8::from(x != y)));
    }
    ErrorMatrix {
        n_rows: d.n_rows(),
        n_models: m,
        entries,
    }
}

/// How to cut a dataset into seeded train/test partitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub num_splits: usize,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, num_splits: usize) -> Result<Self> {
        let spec = Self {
            train_fraction,
            seed,
            num_splits,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train_fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        if self.num_splits == 0 {
            return Err(Error::invalid("num_splits must be positive"));
        }
        Ok(())
    }
}

/// Row indices `(train, test)` for one split, each ascending.
pub fn split_indices(n: usize, spec: &SplitSpec, split_index: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if split_index >= spec.num_splits {
        return Err(Error::invalid(format!(
            "split_index {split_index} out of range for {} splits",
            spec.num_splits
        )));
    }
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "split of {n} rows at fraction {} leaves an empty side",
            spec.train_fraction
        )));
    }
    let perm = shuffled_rows(n, spec.seed.wrapping_add(split_index as u64));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// The seeded Fisher–Yates permutation of `0..n` described in the module docs.
pub fn shuffled_rows(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
        perm.swap(i, j);
    }
    perm
}

pub fn split_train_test(d: &Dataset, spec: &SplitSpec, split_index: usize) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d.n_rows(), spec, split_index)?;
    Ok((d.select_rows(&train)?, d.select_rows(&test)?))
}

/// Human-readable one-line summary.
pub fn describe(d: &Dataset) -> String {
    let mut s = format!("{} rows x {} models;", d.n_rows(), d.n_models());
    for j in 0..d.n_models() {
        let _ = write!(s, " {}={:.3}", d.model_names[j], d.accuracy(j));
    }
    s
}
