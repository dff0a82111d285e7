//! Subset selection: greedy conditional-MI selection (direct CMI or the
//! three-term estimate), top-k by accuracy, relevance-only ranking, mRMR and
//! an exhaustive oracle.
//!
//! Ties are resolved toward the lowest model index; scores within
//! [`TIE_TOL`] of each other count as tied so that summation-order noise
//! cannot change a selection.
//!
//! `alpha` is the add-alpha smoothing level of the MI estimates; `alpha = 0`
//! gives unsmoothed plug-in estimates, which are exact on enumerated
//! (weighted) datasets.

use serde::{Deserialize, Serialize};

use crate::aggregation::{evaluate_aggregator, Aggregator};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::information::{DiscreteSequence, GainContext, MiEstimator};

/// Scores closer than this are treated as equal.
pub const TIE_TOL: f64 = 1e-12;
/// Default limit on the number of subsets the exhaustive oracle may visit.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 10_000;

/// Selection strategy identifiers, as used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    GreedyMiDirect,
    GreedyMiThreeTerm,
    TopK,
    Term1,
    Mrmr,
    Exhaustive,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::GreedyMiDirect => "greedy_mi_direct",
            SelectionMethod::GreedyMiThreeTerm => "greedy_mi_three_term",
            SelectionMethod::TopK => "top_k",
            SelectionMethod::Term1 => "term1",
            SelectionMethod::Mrmr => "mrmr",
            SelectionMethod::Exhaustive => "exhaustive",
        }
    }

    /// Whether results for smaller budgets are prefixes of larger ones.
    pub fn is_nested(self) -> bool {
        self != SelectionMethod::Exhaustive
    }
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Score used by greedy MI selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyMode {
    /// Î(Y; X_j | X_S) computed directly.
    DirectCmi,
    /// Relevance − redundancy + error correlation, without the correction term.
    ThreeTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// Model indices in selection order.
    pub order: Vec<usize>,
    /// Winning gain (greedy methods) or ranking score at each step.
    pub step_scores: Vec<f64>,
}

#[derive(Serialize)]
struct SelectionRecord<'a> {
    method: &'a str,
    order: Vec<&'a str>,
    step_scores: &'a [f64],
}

impl SelectionResult {
    pub fn k(&self) -> usize {
        self.order.len()
    }

    /// The first `k` steps; only meaningful for nested methods.
    pub fn prefix(&self, k: usize) -> SelectionResult {
        SelectionResult {
            method: self.method,
            order: self.order[..k].to_vec(),
            step_scores: self.step_scores[..k].to_vec(),
        }
    }

    /// JSON object `{method, order, step_scores}` with `order` as model names.
    pub fn to_json_value(&self, model_names: &[String]) -> serde_json::Value {
        let record = SelectionRecord {
            method: self.method.name(),
            order: self.order.iter().map(|&j| model_names[j].as_str()).collect(),
            step_scores: &self.step_scores,
        };
        serde_json::to_value(record).expect("selection records always serialize")
    }
}

fn check_budget(d: &Dataset, k: usize) -> Result<()> {
    if k == 0 || k > d.n_models() {
        return Err(Error::invalid(format!("budget k = {k} outside [1, {}]", d.n_models())));
    }
    Ok(())
}

fn estimator<'d>(ctx: &GainContext<'d>, alpha: f64) -> Result<MiEstimator<'d>> {
    if alpha == 0.0 {
        ctx.estimator(None)
    } else {
        ctx.estimator(Some(alpha))
    }
}

/// Index of the best score, lowest index among near-ties.
fn argmax(scores: &[(usize, f64)]) -> (usize, f64) {
    let mut best = scores[0];
    for &(j, s) in &scores[1..] {
        if s > best.1 + TIE_TOL {
            best = (j, s);
        }
    }
    best
}

/// Ranks by descending score, lowest index first among near-ties.
fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Selection-sort style ranking keeps the tolerance-aware tie rule transitive per step.
    let mut ranked = Vec::with_capacity(scores.len());
    while !order.is_empty() {
        let pairs: Vec<(usize, f64)> = order.iter().map(|&j| (j, scores[j])).collect();
        let (best, _) = argmax(&pairs);
        order.retain(|&j| j != best);
        ranked.push(best);
    }
    ranked
}

fn greedy<F>(
    d: &Dataset,
    ctx: &GainContext<'_>,
    k: usize,
    method: SelectionMethod,
    mut score: F,
) -> Result<SelectionResult>
where
    F: FnMut(usize, &[usize], &DiscreteSequence, &DiscreteSequence) -> Result<f64>,
{
    check_budget(d, k)?;
    let mut order = Vec::with_capacity(k);
    let mut step_scores = Vec::with_capacity(k);
    for _ in 0..k {
        let x_s = ctx.joint_predictions(&order)?;
        let e_s = ctx.joint_errors(&order)?;
        let scores = (0..d.n_models())
            .filter(|j| !order.contains(j))
            .map(|j| Ok((j, score(j, &order, &x_s, &e_s)?)))
            .collect::<Result<Vec<_>>>()?;
        let (j, s) = argmax(&scores);
        order.push(j);
        step_scores.push(s);
    }
    Ok(SelectionResult {
        method,
        order,
        step_scores,
    })
}

/// Greedy forward selection maximizing the estimated gain Δ̂(j | S).
pub fn greedy_mi_select(train: &Dataset, k: usize, mode: GreedyMode, alpha: f64) -> Result<SelectionResult> {
    let ctx = GainContext::new(train);
    let est = estimator(&ctx, alpha)?;
    let y = ctx.labels();
    let relevance: Vec<f64> = (0..train.n_models())
        .map(|j| est.mi(y, ctx.prediction(j)))
        .collect::<Result<_>>()?;
    match mode {
        GreedyMode::DirectCmi => greedy(train, &ctx, k, SelectionMethod::GreedyMiDirect, |j, _, x_s, _| {
            est.cmi(y, ctx.prediction(j), x_s)
        }),
        GreedyMode::ThreeTerm => greedy(train, &ctx, k, SelectionMethod::GreedyMiThreeTerm, |j, s, x_s, e_s| {
            if s.is_empty() {
                return Ok(relevance[j]);
            }
            Ok(relevance[j] - est.mi(ctx.prediction(j), x_s)? + est.mi(ctx.error(j), e_s)?)
        }),
    }
}

/// Greedy with score Î(Y; X_j) − Î(X_j; X_S).
pub fn mrmr_select(train: &Dataset, k: usize, alpha: f64) -> Result<SelectionResult> {
    let ctx = GainContext::new(train);
    let est = estimator(&ctx, alpha)?;
    let relevance: Vec<f64> = (0..train.n_models())
        .map(|j| est.mi(ctx.labels(), ctx.prediction(j)))
        .collect::<Result<_>>()?;
    greedy(train, &ctx, k, SelectionMethod::Mrmr, |j, s, x_s, _| {
        if s.is_empty() {
            return Ok(relevance[j]);
        }
        Ok(relevance[j] - est.mi(ctx.prediction(j), x_s)?)
    })
}

fn ranked(method: SelectionMethod, scores: &[f64], k: usize) -> SelectionResult {
    let order: Vec<usize> = rank_descending(scores).into_iter().take(k).collect();
    SelectionResult {
        method,
        step_scores: order.iter().map(|&j| scores[j]).collect(),
        order,
    }
}

/// The `k` most accurate models on `train`; scores are training accuracies.
pub fn top_k_select(train: &Dataset, k: usize) -> Result<SelectionResult> {
    check_budget(train, k)?;
    let acc: Vec<f64> = (0..train.n_models()).map(|j| train.accuracy(j)).collect();
    Ok(ranked(SelectionMethod::TopK, &acc, k))
}

/// The `k` models with the highest individual relevance Î(Y; X_j).
pub fn term1_select(train: &Dataset, k: usize, alpha: f64) -> Result<SelectionResult> {
    check_budget(train, k)?;
    let ctx = GainContext::new(train);
    let est = estimator(&ctx, alpha)?;
    let rel: Vec<f64> = (0..train.n_models())
        .map(|j| est.mi(ctx.labels(), ctx.prediction(j)))
        .collect::<Result<_>>()?;
    Ok(ranked(SelectionMethod::Term1, &rel, k))
}

/// Where the exhaustive oracle evaluates candidate subsets.
#[derive(Debug, Clone, Copy)]
pub enum EvalContext<'a> {
    /// Treat the training data (typically an enumerated, weighted
    /// distribution) as the true joint: MAP error is the Bayes error of its
    /// pattern table and MI is the unsmoothed plug-in value.
    Exact,
    /// Fit on the training data, score on this evaluation set: MAP error of
    /// the fitted table, or smoothed Î(Y; X_S) on the evaluation rows.
    Holdout(&'a Dataset),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinMapError,
    MaxMi,
}

/// Number of size-`k` subsets of `m` items, saturating at `u64::MAX`.
pub fn binomial(m: usize, k: usize) -> u64 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Advances `s` to the next size-k subset of `0..m` in lexicographic order.
fn next_combination(s: &mut [usize], m: usize) -> bool {
    let k = s.len();
    for pos in (0..k).rev() {
        if s[pos] < m - k + pos {
            s[pos] += 1;
            for q in pos + 1..k {
                s[q] = s[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Bayes error of the pattern table of `s` under the row weights of `d`.
fn pattern_bayes_error(d: &Dataset, s: &[usize]) -> f64 {
    let mut mass = std::collections::HashMap::<u64, (f64, f64)>::new();
    for row in 0..d.n_rows() {
        let key = s
            .iter()
            .enumerate()
            .fold(0u64, |acc, (b, &j)| acc | (u64::from(d.prediction(row, j) == 1) << b));
        let cell = mass.entry(key).or_default();
        if d.labels()[row] == 1 {
            cell.0 += d.weight(row);
        } else {
            cell.1 += d.weight(row);
        }
    }
    // Sum in key order so the result does not depend on hash iteration order.
    let mut cells: Vec<_> = mass.into_iter().collect();
    cells.sort_unstable_by_key(|c| c.0);
    cells.iter().map(|(_, (p, m))| p.min(*m)).sum::<f64>() / d.total_weight()
}

fn subset_mi(d: &Dataset, s: &[usize], alpha: Option<f64>) -> Result<f64> {
    let ctx = GainContext::new(d);
    let est = ctx.estimator(alpha)?;
    est.mi(ctx.labels(), &ctx.joint_predictions(s)?)
}

/// Enumerates every size-`k` subset and returns the best under `objective`.
///
/// Subsets are visited in lexicographic order and a later subset replaces
/// the incumbent only when it is better by more than [`TIE_TOL`], so ties
/// go to the lexicographically smallest subset. `order` lists the winner
/// ascending; every entry of `step_scores` holds its objective value
/// (error rate or bits).
pub fn exhaustive_select(
    train: &Dataset,
    ctx: EvalContext<'_>,
    k: usize,
    objective: Objective,
    alpha: f64,
    cap: u64,
) -> Result<SelectionResult> {
    check_budget(train, k)?;
    let m = train.n_models();
    if let EvalContext::Holdout(test) = ctx {
        if test.n_models() != m {
            return Err(Error::invalid("evaluation set has a different number of models"));
        }
    }
    let count = binomial(m, k);
    if count > cap {
        return Err(Error::ResourceLimit(format!(
            "exhaustive search over C({m}, {k}) = {count} subsets exceeds the cap of {cap}"
        )));
    }
    let smoothing = if alpha == 0.0 { None } else { Some(alpha) };
    // Minimize a loss; MI is negated.
    let loss = |s: &[usize]| -> Result<f64> {
        match (objective, ctx) {
            (Objective::MinMapError, EvalContext::Exact) => Ok(pattern_bayes_error(train, s)),
            (Objective::MinMapError, EvalContext::Holdout(test)) => {
                evaluate_aggregator(train, test, s, Aggregator::Map, 0)
            }
            (Objective::MaxMi, EvalContext::Exact) => Ok(-subset_mi(train, s, None)?),
            (Objective::MaxMi, EvalContext::Holdout(test)) => Ok(-subset_mi(test, s, smoothing)?),
        }
    };
    let mut s: Vec<usize> = (0..k).collect();
    let mut best = (s.clone(), loss(&s)?);
    while next_combination(&mut s, m) {
        let l = loss(&s)?;
        if l < best.1 - TIE_TOL {
            best = (s.clone(), l);
        }
    }
    let value = match objective {
        Objective::MinMapError => best.1,
        Objective::MaxMi => -best.1,
    };
    Ok(SelectionResult {
        method: SelectionMethod::Exhaustive,
        order: best.0,
        step_scores: vec![value; k],
    })
}
