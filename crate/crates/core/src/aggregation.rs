//! Aggregators turning a subset's votes into one label: empirical MAP over
//! vote patterns, majority vote, and log-odds weighted majority vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sign};
use crate::error::{Error, Result};

/// Largest subset a dense [`MapTable`] will hold (2^24 patterns).
pub const MAX_MAP_K: usize = 24;
/// Accuracies are clamped to `[ACCURACY_CLAMP, 1 − ACCURACY_CLAMP]` before taking log-odds.
pub const ACCURACY_CLAMP: f64 = 1e-6;

fn check_sign(v: Sign) -> Result<()> {
    if v == 1 || v == -1 {
        Ok(())
    } else {
        Err(Error::invalid(format!("vote {v} is not -1 or +1")))
    }
}

/// Zero-based pattern offset: bit `j` is set when `x[j] == +1`.
fn pattern_offset(x: impl IntoIterator<Item = Sign>) -> usize {
    x.into_iter()
        .enumerate()
        .fold(0, |acc, (j, v)| acc | (usize::from(v == 1) << j))
}

/// One-based pattern index `1 + Σ (x_j + 1)/2 · 2^(j−1)`.
pub fn pattern_index(x: &[Sign]) -> Result<usize> {
    if x.is_empty() || x.len() > 63 {
        return Err(Error::invalid(format!("pattern length {} outside [1, 63]", x.len())));
    }
    for &v in x {
        check_sign(v)?;
    }
    Ok(1 + pattern_offset(x.iter().copied()))
}

/// Add-one smoothed label counts per vote pattern of a fixed subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTable {
    k: usize,
    c_plus: Vec<f64>,
    c_minus: Vec<f64>,
}

impl MapTable {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Counts `(C⁺, C⁻)` for a one-based pattern index.
    pub fn counts(&self, index: usize) -> (f64, f64) {
        (self.c_plus[index - 1], self.c_minus[index - 1])
    }

    fn decide(&self, offset: usize) -> Sign {
        if self.c_minus[offset] > self.c_plus[offset] {
            -1
        } else {
            1
        }
    }

    /// Predicts row `row` of `d` using the columns in `subset`.
    pub fn predict_row(&self, d: &Dataset, subset: &[usize], row: usize) -> Sign {
        self.decide(pattern_offset(subset.iter().map(|&j| d.prediction(row, j))))
    }
}

fn check_subset(d: &Dataset, s: &[usize]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::invalid("subset must be nonempty"));
    }
    let mut seen = vec![false; d.n_models()];
    for &j in s {
        if j >= d.n_models() {
            return Err(Error::invalid(format!("model index {j} out of range (M = {})", d.n_models())));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(format!("model index {j} repeated in subset")));
        }
    }
    Ok(())
}

/// Counts training labels per vote pattern of `s`, starting every cell at 1.
///
/// Row weights, when present, are added in place of unit counts.
pub fn fit_map(train: &Dataset, s: &[usize]) -> Result<MapTable> {
    check_subset(train, s)?;
    if s.len() > MAX_MAP_K {
        return Err(Error::ResourceLimit(format!(
            "MAP table for k = {} exceeds the dense limit k <= {MAX_MAP_K}",
            s.len()
        )));
    }
    let cells = 1usize << s.len();
    let mut c_plus = vec![1.0; cells];
    let mut c_minus = vec![1.0; cells];
    for (row, &y) in train.labels().iter().enumerate() {
        let offset = pattern_offset(s.iter().map(|&j| train.prediction(row, j)));
        let w = train.weight(row);
        if y == 1 {
            c_plus[offset] += w;
        } else {
            c_minus[offset] += w;
        }
    }
    Ok(MapTable {
        k: s.len(),
        c_plus,
        c_minus,
    })
}

/// `+1` when `C⁺ ≥ C⁻` for the pattern of `x`, else `−1`.
pub fn predict_map(table: &MapTable, x: &[Sign]) -> Result<Sign> {
    if x.len() != table.k {
        return Err(Error::invalid(format!("pattern has {} votes, table expects {}", x.len(), table.k)));
    }
    let index = pattern_index(x)?;
    Ok(table.decide(index - 1))
}

/// Sign of the vote sum; a zero sum draws one fair coin from `rng`.
pub fn majority_vote_with<R: Rng + ?Sized>(x: &[Sign], rng: &mut R) -> Sign {
    let sum: i64 = x.iter().map(|&v| i64::from(v)).sum();
    match sum.signum() {
        1 => 1,
        -1 => -1,
        _ => {
            if rng.random::<bool>() {
                1
            } else {
                -1
            }
        }
    }
}

/// Majority vote with ties broken by `ChaCha8Rng::seed_from_u64(seed)`.
pub fn majority_vote(x: &[Sign], seed: u64) -> Result<Sign> {
    for &v in x {
        check_sign(v)?;
    }
    if x.is_empty() {
        return Err(Error::invalid("cannot vote over an empty pattern"));
    }
    Ok(majority_vote_with(x, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Log-odds weights `w_j = ln(p_j / (1 − p_j))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn from_accuracies(accuracies: &[f64]) -> Result<Self> {
        let weights = accuracies
            .iter()
            .map(|&p| {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!("accuracy {p} outside [0, 1]")));
                }
                let p = p.clamp(ACCURACY_CLAMP, 1.0 - ACCURACY_CLAMP);
                Ok((p / (1.0 - p)).ln())
            })
            .collect::<Result<_>>()?;
        Ok(Self { weights })
    }

    /// Weights from the (weighted) training accuracies of the models in `s`.
    pub fn fit(train: &Dataset, s: &[usize]) -> Result<Self> {
        check_subset(train, s)?;
        let acc: Vec<f64> = s.iter().map(|&j| train.accuracy(j)).collect();
        Self::from_accuracies(&acc)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn decide(&self, votes: impl Iterator<Item = Sign>) -> Sign {
        let score: f64 = self.weights.iter().zip(votes).map(|(w, v)| w * f64::from(v)).sum();
        if score < 0.0 {
            -1
        } else {
            1
        }
    }

    pub fn predict_row(&self, d: &Dataset, subset: &[usize], row: usize) -> Sign {
        self.decide(subset.iter().map(|&j| d.prediction(row, j)))
    }
}

/// `sign(Σ w_j x_j)` with an exact zero resolved to `+1`.
pub fn weighted_majority_vote(x: &[Sign], w: &WeightVector) -> Result<Sign> {
    if x.len() != w.weights.len() {
        return Err(Error::invalid(format!(
            "pattern has {} votes but {} weights",
            x.len(),
            w.weights.len()
        )));
    }
    for &v in x {
        check_sign(v)?;
    }
    Ok(w.decide(x.iter().copied()))
}

/// Aggregation rule applied to a selected subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Map,
    Mv,
    Wmv,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Map, Aggregator::Mv, Aggregator::Wmv];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Map => "map",
            Aggregator::Mv => "mv",
            Aggregator::Wmv => "wmv",
        }
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Fits `agg` on `train` for subset `s` and returns its (weighted) error on `test`.
///
/// Majority-vote ties draw from one `ChaCha8Rng` seeded with `tie_seed`, in row order.
pub fn evaluate_aggregator(train: &Dataset, test: &Dataset, s: &[usize], agg: Aggregator, tie_seed: u64) -> Result<f64> {
    check_subset(test, s)?;
    let predictions: Vec<Sign> = match agg {
        Aggregator::Map => {
            let table = fit_map(train, s)?;
            (0..test.n_rows()).map(|r| table.predict_row(test, s, r)).collect()
        }
        Aggregator::Wmv => {
            let w = WeightVector::fit(train, s)?;
            (0..test.n_rows()).map(|r| w.predict_row(test, s, r)).collect()
        }
        Aggregator::Mv => {
            let mut rng = ChaCha8Rng::seed_from_u64(tie_seed);
            let mut votes = vec![0; s.len()];
            (0..test.n_rows())
                .map(|r| {
                    for (v, &j) in votes.iter_mut().zip(s) {
                        *v = test.prediction(r, j);
                    }
                    majority_vote_with(&votes, &mut rng)
                })
                .collect()
        }
    };
    let wrong: f64 = predictions
        .iter()
        .zip(test.labels())
        .enumerate()
        .filter(|(_, (p, y))| p != y)
        .map(|(r, _)| test.weight(r))
        .sum();
    Ok(wrong / test.total_weight())
}
