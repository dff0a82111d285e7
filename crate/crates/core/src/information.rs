//! Entropy and mutual information over discrete sequences, in bits.
//!
//! The smoothed estimators add `alpha` to every cell of the full product
//! alphabet, observed or not, and normalize by `N + alpha * K`. Every entropy
//! term of an MI or CMI expression is smoothed over its own product alphabet.
//! The final MI/CMI is clipped at zero.
//!
//! Rows may be weighted; a weighted dataset whose weights are probabilities
//! times a large mass behaves like an exactly enumerated distribution. With
//! `alpha = 0` ([`MiEstimator::plug_in`]) the estimators are exact functionals of
//! the weighted empirical distribution.

use std::collections::HashMap;

use crate::data::{error_matrix, Dataset, ErrorMatrix, Sign};
use crate::error::{Error, Result};

/// Values in `0..alphabet_size`, one per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteSequence {
    values: Vec<u64>,
    alphabet_size: u64,
}

impl DiscreteSequence {
    pub fn new(values: Vec<u64>, alphabet_size: u64) -> Result<Self> {
        if alphabet_size == 0 {
            return Err(Error::invalid("alphabet size must be positive"));
        }
        if let Some(v) = values.iter().find(|&&v| v >= alphabet_size) {
            return Err(Error::invalid(format!(
                "value {v} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(Self {
            values,
            alphabet_size,
        })
    }

    /// Single-symbol sequence; conditioning on it is conditioning on nothing.
    pub fn constant(len: usize) -> Self {
        Self {
            values: vec![0; len],
            alphabet_size: 1,
        }
    }

    /// −1 ↦ 0, +1 ↦ 1.
    pub fn from_signs(signs: &[Sign]) -> Self {
        Self {
            values: signs.iter().map(|&s| u64::from(s > 0)).collect(),
            alphabet_size: 2,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self {
            values: bits.iter().map(|&b| u64::from(b != 0)).collect(),
            alphabet_size: 2,
        }
    }

    /// Mixed-radix joint encoding; the first part is the least significant digit.
    /// An empty list gives a constant sequence of length `len`.
    pub fn joint(parts: &[&DiscreteSequence], len: usize) -> Result<Self> {
        let mut out = Self::constant(len);
        for part in parts {
            out = out.pair_with(part)?;
        }
        Ok(out)
    }

    fn pair_with(&self, high: &DiscreteSequence) -> Result<Self> {
        if self.len() != high.len() {
            return Err(Error::invalid(format!(
                "sequence lengths differ: {} vs {}",
                self.len(),
                high.len()
            )));
        }
        let alphabet_size = self
            .alphabet_size
            .checked_mul(high.alphabet_size)
            .ok_or_else(|| Error::ResourceLimit("joint alphabet exceeds 2^64 symbols".into()))?;
        let values = self
            .values
            .iter()
            .zip(&high.values)
            .map(|(&lo, &hi)| lo + self.alphabet_size * hi)
            .collect();
        Ok(Self {
            values,
            alphabet_size,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn alphabet_size(&self) -> u64 {
        self.alphabet_size
    }
}

/// Default Laplace smoothing.
pub const DEFAULT_ALPHA: f64 = 1.0;

const DENSE_LIMIT: u64 = 1 << 20;

/// Entropy/MI estimator with a fixed smoothing level and optional row weights.
#[derive(Debug, Clone, Copy)]
pub struct MiEstimator<'w> {
    alpha: f64,
    weights: Option<&'w [f64]>,
}

impl<'w> MiEstimator<'w> {
    /// Add-`alpha` smoothing; `alpha` must be positive and finite.
    pub fn smoothed(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("smoothing alpha {alpha} must be > 0")));
        }
        Ok(Self {
            alpha,
            weights: None,
        })
    }

    /// Unsmoothed plug-in estimates (exact for enumerated, weighted inputs).
    pub fn plug_in() -> Self {
        Self {
            alpha: 0.0,
            weights: None,
        }
    }

    pub fn with_weights(self, weights: Option<&'w [f64]>) -> Self {
        Self { weights, ..self }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check_len(&self, seqs: &[&DiscreteSequence]) -> Result<usize> {
        let n = seqs.first().map_or(0, |s| s.len());
        if seqs.iter().any(|s| s.len() != n) {
            return Err(Error::invalid("sequence lengths differ"));
        }
        if let Some(w) = self.weights {
            if w.len() != n {
                return Err(Error::invalid(format!("{} weights for {n} rows", w.len())));
            }
        }
        Ok(n)
    }

    /// Joint entropy of the given sequences over their full product alphabet.
    pub fn entropy(&self, seqs: &[&DiscreteSequence]) -> Result<f64> {
        let n = self.check_len(seqs)?;
        let joint = DiscreteSequence::joint(seqs, n)?;
        Ok(self.entropy_of(&joint))
    }

    fn entropy_of(&self, seq: &DiscreteSequence) -> f64 {
        let k = seq.alphabet_size;
        let weight = |i: usize| self.weights.map_or(1.0, |w| w[i]);
        let counts: Vec<f64> = if k <= DENSE_LIMIT {
            let mut dense = vec![0.0; k as usize];
            for (i, &v) in seq.values.iter().enumerate() {
                dense[v as usize] += weight(i);
            }
            dense.retain(|&c| c > 0.0);
            dense
        } else {
            let mut sparse: HashMap<u64, f64> = HashMap::new();
            for (i, &v) in seq.values.iter().enumerate() {
                *sparse.entry(v).or_default() += weight(i);
            }
            let mut keyed: Vec<(u64, f64)> = sparse.into_iter().filter(|&(_, c)| c > 0.0).collect();
            // Summation order must not depend on hash iteration order.
            keyed.sort_unstable_by_key(|&(key, _)| key);
            keyed.into_iter().map(|(_, c)| c).collect()
        };
        let total: f64 = counts.iter().sum();
        let mut h = 0.0;
        if self.alpha > 0.0 {
            let denom = total + self.alpha * k as f64;
            for &c in &counts {
                let q = (c + self.alpha) / denom;
                h -= q * q.log2();
            }
            let unseen = k as f64 - counts.len() as f64;
            if unseen > 0.0 {
                let q0 = self.alpha / denom;
                h -= unseen * q0 * q0.log2();
            }
        } else {
            for &c in &counts {
                let p = c / total;
                h -= p * p.log2();
            }
        }
        h
    }

    fn finish(&self, value: f64) -> f64 {
        if self.alpha > 0.0 {
            value.max(0.0)
        } else {
            value
        }
    }

    /// Î(A; B) = Ĥ(A) + Ĥ(B) − Ĥ(A, B).
    pub fn mi(&self, a: &DiscreteSequence, b: &DiscreteSequence) -> Result<f64> {
        self.check_len(&[a, b])?;
        let v = self.entropy(&[a])? + self.entropy(&[b])? - self.entropy(&[a, b])?;
        Ok(self.finish(v))
    }

    /// Î(Y; X | Z) = Ĥ(Y, Z) + Ĥ(X, Z) − Ĥ(Z) − Ĥ(Y, X, Z).
    pub fn cmi(&self, y: &DiscreteSequence, x: &DiscreteSequence, z: &DiscreteSequence) -> Result<f64> {
        self.check_len(&[y, x, z])?;
        let v = self.entropy(&[y, z])? + self.entropy(&[x, z])?
            - self.entropy(&[z])?
            - self.entropy(&[y, x, z])?;
        Ok(self.finish(v))
    }
}

/// Add-`alpha` smoothed mutual information in bits.
pub fn smoothed_mi(a: &DiscreteSequence, b: &DiscreteSequence, alpha: f64) -> Result<f64> {
    MiEstimator::smoothed(alpha)?.mi(a, b)
}

/// Add-`alpha` smoothed conditional mutual information Î(Y; X | Z) in bits.
pub fn smoothed_conditional_mi(
    y: &DiscreteSequence,
    x: &DiscreteSequence,
    given: &DiscreteSequence,
    alpha: f64,
) -> Result<f64> {
    MiEstimator::smoothed(alpha)?.cmi(y, x, given)
}

/// Normalization tolerance for explicit probability tables.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// An explicit two-variable probability table, row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || probs.len() != rows * cols {
            return Err(Error::invalid("table shape does not match its entries"));
        }
        check_distribution(&probs)?;
        Ok(Self { rows, cols, probs })
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.cols + b]
    }
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("probabilities must be finite and nonnegative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Exact I(A; B) = Σ p(a,b) log₂ [p(a,b) / (p(a) p(b))], with 0·log 0 = 0.
pub fn exact_mi(joint: &JointTable) -> f64 {
    let pa: Vec<f64> = (0..joint.rows)
        .map(|a| (0..joint.cols).map(|b| joint.get(a, b)).sum())
        .collect();
    let pb: Vec<f64> = (0..joint.cols)
        .map(|b| (0..joint.rows).map(|a| joint.get(a, b)).sum())
        .collect();
    let mut mi = 0.0;
    for a in 0..joint.rows {
        for b in 0..joint.cols {
            let p = joint.get(a, b);
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    mi
}

/// A fully enumerated joint distribution over several finite variables.
///
/// Outcomes are indexed mixed-radix with variable 0 as the least significant digit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJoint {
    arities: Vec<usize>,
    probs: Vec<f64>,
}

impl ExactJoint {
    pub fn new(arities: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if arities.is_empty() || arities.contains(&0) {
            return Err(Error::invalid("every variable needs a positive arity"));
        }
        let size = arities
            .iter()
            .try_fold(1usize, |acc, &a| acc.checked_mul(a))
            .ok_or_else(|| Error::ResourceLimit("outcome space too large".into()))?;
        if probs.len() != size {
            return Err(Error::invalid(format!(
                "{} probabilities for an outcome space of {size}",
                probs.len()
            )));
        }
        check_distribution(&probs)?;
        Ok(Self { arities, probs })
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn n_vars(&self) -> usize {
        self.arities.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Digits of outcome `index`, one per variable.
    pub fn outcome(&self, mut index: usize) -> Vec<usize> {
        self.arities
            .iter()
            .map(|&a| {
                let d = index % a;
                index /= a;
                d
            })
            .collect()
    }

    /// Marginal distribution of `vars`, indexed mixed-radix in the order given.
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let size: usize = vars.iter().map(|&v| self.arities[v]).product();
        let mut out = vec![0.0; size];
        for (idx, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let digits = self.outcome(idx);
            let mut code = 0;
            let mut radix = 1;
            for &v in vars {
                code += digits[v] * radix;
                radix *= self.arities[v];
            }
            out[code] += p;
        }
        out
    }

    /// H(vars) in bits; the empty set has entropy 0.
    pub fn entropy(&self, vars: &[usize]) -> f64 {
        self.marginal(vars)
            .into_iter()
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// I(A; B | C) = H(A,C) + H(B,C) − H(C) − H(A,B,C). Pass an empty `given` for I(A; B).
    pub fn cmi(&self, a: &[usize], b: &[usize], given: &[usize]) -> f64 {
        let cat = |xs: &[&[usize]]| xs.concat();
        self.entropy(&cat(&[a, given])) + self.entropy(&cat(&[b, given]))
            - self.entropy(given)
            - self.entropy(&cat(&[a, b, given]))
    }

    pub fn mi(&self, a: &[usize], b: &[usize]) -> f64 {
        self.cmi(a, b, &[])
    }

    /// A weighted dataset with one row per outcome of positive probability.
    ///
    /// Variable `label_var` becomes the label, `model_vars` the prediction
    /// columns; all must be binary, digit 0 ↦ −1 and 1 ↦ +1. Weights are
    /// probabilities times `mass`.
    pub fn to_weighted_dataset(&self, label_var: usize, model_vars: &[usize], mass: f64) -> Result<Dataset> {
        if std::iter::once(&label_var)
            .chain(model_vars)
            .any(|&v| v >= self.n_vars() || self.arities[v] != 2)
        {
            return Err(Error::invalid("label and model variables must be binary variables of the joint"));
        }
        let sign = |d: usize| if d == 1 { 1 } else { -1 };
        let mut labels = Vec::new();
        let mut preds = Vec::new();
        let mut weights = Vec::new();
        for (idx, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let digits = self.outcome(idx);
            labels.push(sign(digits[label_var]));
            preds.extend(model_vars.iter().map(|&v| sign(digits[v])));
            weights.push(p * mass);
        }
        Dataset::new(labels, preds, Dataset::default_names(model_vars.len()))?.with_weights(weights)
    }
}

/// The four terms of the marginal-gain decomposition, plus the direct CMI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBreakdown {
    /// Î(Y; X_j)
    pub relevance: f64,
    /// Î(X_j; X_S)
    pub redundancy: f64,
    /// Î(E_j; E_S)
    pub error_correlation: f64,
    /// Λ̂_j(S) = Î(E_j; Y | E_S) − Î(E_j; Y)
    pub correction: f64,
    /// Î(Y; X_j | X_S)
    pub total_cmi: f64,
    /// Î(E_j; Y), used by the correction bounds.
    pub error_label_mi: f64,
    /// Ĥ(Y)
    pub label_entropy: f64,
}

impl GainBreakdown {
    /// Relevance − redundancy + error correlation, without the correction.
    pub fn three_term(&self) -> f64 {
        self.relevance - self.redundancy + self.error_correlation
    }

    /// Sum of all four decomposition terms.
    pub fn four_term(&self) -> f64 {
        self.three_term() + self.correction
    }

    /// `[−Î(E_j;Y), Ĥ(Y) − Î(E_j;Y)]`, the admissible range of the correction.
    pub fn correction_bounds(&self) -> (f64, f64) {
        (-self.error_label_mi, self.label_entropy - self.error_label_mi)
    }
}

/// Per-dataset sequences shared by the gain computations.
pub(crate) struct GainContext<'d> {
    dataset: &'d Dataset,
    labels: DiscreteSequence,
    predictions: Vec<DiscreteSequence>,
    errors: Vec<DiscreteSequence>,
}

impl<'d> GainContext<'d> {
    pub(crate) fn new(dataset: &'d Dataset) -> Self {
        let em: ErrorMatrix = error_matrix(dataset);
        Self {
            dataset,
            labels: DiscreteSequence::from_signs(dataset.labels()),
            predictions: (0..dataset.n_models())
                .map(|j| DiscreteSequence::from_signs(&dataset.column(j)))
                .collect(),
            errors: (0..dataset.n_models())
                .map(|j| DiscreteSequence::from_bits(&em.column(j)))
                .collect(),
        }
    }

    pub(crate) fn labels(&self) -> &DiscreteSequence {
        &self.labels
    }

    pub(crate) fn prediction(&self, j: usize) -> &DiscreteSequence {
        &self.predictions[j]
    }

    pub(crate) fn joint_predictions(&self, s: &[usize]) -> Result<DiscreteSequence> {
        let parts: Vec<&DiscreteSequence> = s.iter().map(|&i| &self.predictions[i]).collect();
        DiscreteSequence::joint(&parts, self.dataset.n_rows())
    }

    pub(crate) fn error(&self, j: usize) -> &DiscreteSequence {
        &self.errors[j]
    }

    pub(crate) fn joint_errors(&self, s: &[usize]) -> Result<DiscreteSequence> {
        let parts: Vec<&DiscreteSequence> = s.iter().map(|&i| &self.errors[i]).collect();
        DiscreteSequence::joint(&parts, self.dataset.n_rows())
    }

    pub(crate) fn estimator(&self, alpha: Option<f64>) -> Result<MiEstimator<'d>> {
        let est = match alpha {
            Some(a) => MiEstimator::smoothed(a)?,
            None => MiEstimator::plug_in(),
        };
        Ok(est.with_weights(self.dataset.weights()))
    }

    pub(crate) fn check_candidate(&self, j: usize, s: &[usize]) -> Result<()> {
        let m = self.dataset.n_models();
        if j >= m || s.iter().any(|&i| i >= m) {
            return Err(Error::invalid(format!("model index out of range for {m} models")));
        }
        if s.contains(&j) {
            return Err(Error::invalid(format!("model {j} is already in the subset")));
        }
        Ok(())
    }

    pub(crate) fn breakdown(&self, j: usize, s: &[usize], alpha: Option<f64>) -> Result<GainBreakdown> {
        self.check_candidate(j, s)?;
        let est = self.estimator(alpha)?;
        let x_s = self.joint_predictions(s)?;
        let e_s = self.joint_errors(s)?;
        let x_j = &self.predictions[j];
        let e_j = &self.errors[j];
        let error_label_mi = est.mi(e_j, &self.labels)?;
        Ok(GainBreakdown {
            relevance: est.mi(&self.labels, x_j)?,
            redundancy: est.mi(x_j, &x_s)?,
            error_correlation: est.mi(e_j, &e_s)?,
            correction: est.cmi(e_j, &self.labels, &e_s)? - error_label_mi,
            total_cmi: est.cmi(&self.labels, x_j, &x_s)?,
            error_label_mi,
            label_entropy: est.entropy(&[&self.labels])?,
        })
    }
}

/// Smoothed decomposition of the gain from adding model `j` to subset `s`.
pub fn gain_breakdown(d: &Dataset, j: usize, s: &[usize], alpha: f64) -> Result<GainBreakdown> {
    GainContext::new(d).breakdown(j, s, Some(alpha))
}

/// Unsmoothed decomposition; exact when `d` enumerates a distribution through its weights.
pub fn exact_gain_breakdown(d: &Dataset, j: usize, s: &[usize]) -> Result<GainBreakdown> {
    GainContext::new(d).breakdown(j, s, None)
}
