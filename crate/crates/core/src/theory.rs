//! Closed-form results and brute-force oracles: the correlated-ensemble
//! error floor, BSC degradation, exact MAP error and MI of independent
//! binary symmetric channels, and the difficulty-aware decomposition with
//! its submodularity check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::information::ExactJoint;
use crate::numerics::{phi, phi_inv};

/// Largest subset the exact BSC enumerations accept.
pub const MAX_EXACT_BSC: usize = 20;
/// Largest model count for difficulty joints and the submodularity check.
pub const MAX_DIFFICULTY_MODELS: usize = 4;
/// Slack used when testing monotonicity and diminishing returns.
pub const SUBMODULARITY_TOL: f64 = 1e-9;
const INDEPENDENCE_TOL: f64 = 1e-10;

/// Error floor `Φ(Φ⁻¹(1 − α) / √ρ)` of an infinitely large equicorrelated ensemble.
pub fn saturation_floor(alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (1/2, 1)")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho {rho} outside (0, 1)")));
    }
    Ok(phi(phi_inv(1.0 - alpha) / rho.sqrt()))
}

/// Per-model error probability given the common factor: `Φ((τ − √ρ u) / √(1 − ρ))`.
pub fn conditional_error_rate(u: f64, tau: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::invalid(format!("rho {rho} outside (0, 1)")));
    }
    if u.is_nan() || !tau.is_finite() {
        return Err(Error::invalid("u and tau must be numbers (u may be infinite)"));
    }
    Ok(phi((tau - rho.sqrt() * u) / (1.0 - rho).sqrt()))
}

/// Crossover δ of the BSC that degrades a BSC(ε₁) into a BSC(ε₂).
pub fn degradation_parameter(eps1: f64, eps2: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eps1) || !(0.0..0.5).contains(&eps2) {
        return Err(Error::invalid(format!("error rates ({eps1}, {eps2}) must lie in [0, 1/2)")));
    }
    if eps1 > eps2 {
        return Err(Error::invalid(format!("eps1 {eps1} exceeds eps2 {eps2}")));
    }
    Ok((eps2 - eps1) / (1.0 - 2.0 * eps1))
}

/// Independent binary symmetric channels observed under a balanced label.
#[derive(Debug, Clone, PartialEq)]
pub struct BscPool {
    epsilons: Vec<f64>,
}

impl BscPool {
    /// Error rates must lie in `(0, 1/2]`; `1/2` is an uninformative channel.
    pub fn new(epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.is_empty() {
            return Err(Error::invalid("pool needs at least one channel"));
        }
        if let Some(e) = epsilons.iter().find(|&&e| !(e > 0.0 && e <= 0.5)) {
            return Err(Error::invalid(format!("channel error rate {e} outside (0, 1/2]")));
        }
        Ok(Self { epsilons })
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn len(&self) -> usize {
        self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilons.is_empty()
    }

    /// Indices of the `k` most reliable channels, lowest index first among ties.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.epsilons[a].total_cmp(&self.epsilons[b]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    fn subset_logs(&self, s: &[usize]) -> Result<Vec<(f64, f64)>> {
        if s.len() > MAX_EXACT_BSC {
            return Err(Error::ResourceLimit(format!(
                "exact enumeration over {} channels exceeds {MAX_EXACT_BSC}",
                s.len()
            )));
        }
        let mut seen = vec![false; self.len()];
        for &j in s {
            if j >= self.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid(format!("invalid or repeated channel index {j}")));
            }
        }
        Ok(s.iter().map(|&j| (self.epsilons[j].ln(), (1.0 - self.epsilons[j]).ln())).collect())
    }
}

/// Calls `f(ln P(x | +1), ln P(x | −1))` for every vote pattern of the channels.
fn for_each_pattern(logs: &[(f64, f64)], f: &mut impl FnMut(f64, f64)) {
    fn rec(logs: &[(f64, f64)], lp: f64, lm: f64, f: &mut impl FnMut(f64, f64)) {
        match logs.split_first() {
            None => f(lp, lm),
            Some((&(ln_e, ln_c), rest)) => {
                // Vote +1: correct under Y = +1, wrong under Y = −1; vote −1 the reverse.
                rec(rest, lp + ln_c, lm + ln_e, f);
                rec(rest, lp + ln_e, lm + ln_c, f);
            }
        }
    }
    rec(logs, 0.0, 0.0, f);
}

/// Exact MAP error `Σ_x min(P(x|+1), P(x|−1)) / 2` of the channels in `s`.
pub fn exact_bsc_error(pool: &BscPool, s: &[usize]) -> Result<f64> {
    let logs = pool.subset_logs(s)?;
    if s.is_empty() {
        return Ok(0.5);
    }
    let mut total = 0.0;
    for_each_pattern(&logs, &mut |lp, lm| total += lp.min(lm).exp());
    Ok(0.5 * total)
}

/// Exact I(Y; X_S) in bits under a balanced label.
pub fn exact_bsc_mi(pool: &BscPool, s: &[usize]) -> Result<f64> {
    let logs = pool.subset_logs(s)?;
    let mut total = 0.0;
    for_each_pattern(&logs, &mut |lp, lm| {
        // ln P(x) = ln((P₊ + P₋) / 2), computed stably.
        let hi = lp.max(lm);
        let ln_px = hi + ((lp - hi).exp() + (lm - hi).exp()).ln() - std::f64::consts::LN_2;
        for l in [lp, lm] {
            total += 0.5 * l.exp() * (l - ln_px);
        }
    });
    Ok((total / std::f64::consts::LN_2).max(0.0))
}

/// Exact joint over `(Y, D, X_1..X_m)` with a finite difficulty variable `D`.
///
/// Variable order in the underlying table: 0 is `Y` (digit 1 ↦ +1), 1 is
/// `D`, and `2 + j` is model `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyJoint {
    joint: ExactJoint,
}

impl DifficultyJoint {
    /// Wraps an explicit table with arities `[2, d_size, 2, …, 2]`.
    pub fn from_table(d_size: usize, m: usize, probs: Vec<f64>) -> Result<Self> {
        if m == 0 || m > MAX_DIFFICULTY_MODELS {
            return Err(Error::ResourceLimit(format!(
                "difficulty joints support 1..={MAX_DIFFICULTY_MODELS} models, got {m}"
            )));
        }
        let mut arities = vec![2, d_size];
        arities.extend(std::iter::repeat_n(2, m));
        Ok(Self {
            joint: ExactJoint::new(arities, probs)?,
        })
    }

    /// Random joint `P(Y) P(D) Π_j P(X_j | Y, D)` with a balanced label.
    ///
    /// Difficulty is independent of the label and the models are
    /// conditionally independent given `(Y, D)` by construction.
    pub fn random(m: usize, d_size: usize, seed: u64) -> Result<Self> {
        if d_size == 0 {
            return Err(Error::invalid("difficulty needs at least one level"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..d_size).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let p_d: Vec<f64> = raw.iter().map(|r| r / z).collect();
        // p_plus[j][y][d] = P(X_j = +1 | Y = y, D = d)
        let p_plus: Vec<[Vec<f64>; 2]> = (0..m)
            .map(|_| {
                [
                    (0..d_size).map(|_| rng.random_range(0.02..0.98)).collect(),
                    (0..d_size).map(|_| rng.random_range(0.02..0.98)).collect(),
                ]
            })
            .collect();
        let size = (2 * d_size) << m;
        let mut probs = vec![0.0; size];
        for (idx, p) in probs.iter_mut().enumerate() {
            let y = idx % 2;
            let d = (idx / 2) % d_size;
            let mut v = 0.5 * p_d[d];
            for (j, pj) in p_plus.iter().enumerate() {
                let x = (idx / (2 * d_size)) >> j & 1;
                let q = pj[y][d];
                v *= if x == 1 { q } else { 1.0 - q };
            }
            *p = v;
        }
        Self::from_table(d_size, m, probs)
    }

    pub fn n_models(&self) -> usize {
        self.joint.n_vars() - 2
    }

    pub fn d_size(&self) -> usize {
        self.joint.arities()[1]
    }

    pub fn joint(&self) -> &ExactJoint {
        &self.joint
    }

    fn model_vars(&self, s: &[usize]) -> Result<Vec<usize>> {
        let mut seen = vec![false; self.n_models()];
        s.iter()
            .map(|&j| {
                if j >= self.n_models() || std::mem::replace(&mut seen[j], true) {
                    Err(Error::invalid(format!("invalid or repeated model index {j}")))
                } else {
                    Ok(2 + j)
                }
            })
            .collect()
    }

    /// I(D; Y), zero for joints that satisfy the difficulty assumption.
    pub fn difficulty_label_dependence(&self) -> f64 {
        self.joint.mi(&[0], &[1])
    }

    /// F(S) = I(Y; X_S | D).
    pub fn difficulty_aware_mi(&self, s: &[usize]) -> Result<f64> {
        let vars = self.model_vars(s)?;
        Ok(self.joint.cmi(&[0], &vars, &[1]))
    }
}

/// `lhs = I(Y; X_S)`, `oracle_term = I(Y; X_S | D)`, `price = I(Y; D | X_S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyDecomposition {
    pub lhs: f64,
    pub oracle_term: f64,
    pub price: f64,
}

/// Evaluates the three sides of `I(Y;X_S) = I(Y;X_S|D) − I(Y;D|X_S)`.
///
/// Rejects joints where the difficulty variable depends on the label.
pub fn difficulty_decomposition(joint: &DifficultyJoint, s: &[usize]) -> Result<DifficultyDecomposition> {
    let dep = joint.difficulty_label_dependence();
    if dep > INDEPENDENCE_TOL {
        return Err(Error::invalid(format!("difficulty is not independent of the label (I = {dep:e} bits)")));
    }
    let vars = joint.model_vars(s)?;
    let j = &joint.joint;
    Ok(DifficultyDecomposition {
        lhs: j.mi(&[0], &vars),
        oracle_term: j.cmi(&[0], &vars, &[1]),
        price: j.cmi(&[0], &[1], &vars),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// F(S ∪ {j}) < F(S).
    Monotonicity,
    /// F(S ∪ {j}) − F(S) < F(T ∪ {j}) − F(T) for some S ⊆ T.
    DiminishingReturns,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityViolation {
    pub kind: ViolationKind,
    pub s: Vec<usize>,
    /// Equal to `s` for monotonicity violations.
    pub t: Vec<usize>,
    pub j: usize,
    /// How far the inequality fails, in bits.
    pub amount: f64,
}

fn members(mask: usize, m: usize) -> Vec<usize> {
    (0..m).filter(|&j| mask >> j & 1 == 1).collect()
}

fn f_table(joint: &DifficultyJoint) -> Result<Vec<f64>> {
    let m = joint.n_models();
    (0..1usize << m).map(|mask| joint.difficulty_aware_mi(&members(mask, m))).collect()
}

/// Checks monotonicity and diminishing returns of F over all subset pairs.
pub fn submodularity_check(joint: &DifficultyJoint) -> Result<Vec<SubmodularityViolation>> {
    let m = joint.n_models();
    let f = f_table(joint)?;
    let mut out = Vec::new();
    for s in 0..1usize << m {
        for j in (0..m).filter(|&j| s >> j & 1 == 0) {
            let gain_s = f[s | 1 << j] - f[s];
            if gain_s < -SUBMODULARITY_TOL {
                out.push(SubmodularityViolation {
                    kind: ViolationKind::Monotonicity,
                    s: members(s, m),
                    t: members(s, m),
                    j,
                    amount: -gain_s,
                });
            }
            // Supersets T ⊇ S that exclude j.
            for t in (0..1usize << m).filter(|&t| t & s == s && t >> j & 1 == 0 && t != s) {
                let gain_t = f[t | 1 << j] - f[t];
                if gain_s < gain_t - SUBMODULARITY_TOL {
                    out.push(SubmodularityViolation {
                        kind: ViolationKind::DiminishingReturns,
                        s: members(s, m),
                        t: members(t, m),
                        j,
                        amount: gain_t - gain_s,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Greedy maximization of F with lowest-index tie-breaking; returns the set and F of it.
pub fn greedy_difficulty_aware(joint: &DifficultyJoint, k: usize) -> Result<(Vec<usize>, f64)> {
    let m = joint.n_models();
    if k > m {
        return Err(Error::invalid(format!("budget {k} exceeds {m} models")));
    }
    let mut s: Vec<usize> = Vec::with_capacity(k);
    let mut value = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..m).filter(|j| !s.contains(j)) {
            let mut cand = s.clone();
            cand.push(j);
            let v = joint.difficulty_aware_mi(&cand)?;
            if best.is_none_or(|(_, b)| v > b + 1e-12) {
                best = Some((j, v));
            }
        }
        let (j, v) = best.expect("k <= m leaves a candidate");
        s.push(j);
        value = v;
    }
    Ok((s, value))
}

/// Exhaustive maximum of F over size-`k` subsets.
pub fn optimal_difficulty_aware(joint: &DifficultyJoint, k: usize) -> Result<(Vec<usize>, f64)> {
    let m = joint.n_models();
    if k > m {
        return Err(Error::invalid(format!("budget {k} exceeds {m} models")));
    }
    let f = f_table(joint)?;
    let (mask, value) = (0..1usize << m)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (mask, f[mask]))
        .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 + 1e-12 { c } else { best });
    Ok((members(mask, m), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::information::{exact_mi, JointTable};

    fn hb(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn saturation_floor_examples() {
        assert_abs_diff_eq!(saturation_floor(0.8, 1.0 - 1e-12).unwrap(), 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(saturation_floor(0.75, 0.55).unwrap(), 0.1815, epsilon = 1e-3);
        assert_abs_diff_eq!(saturation_floor(0.8, 0.5).unwrap(), 0.117, epsilon = 1e-3);
        assert!(saturation_floor(0.5, 0.3).is_err());
        assert!(saturation_floor(0.8, 1.0).is_err());
        assert!(saturation_floor(0.8, 0.0).is_err());
    }

    #[test]
    fn saturation_floor_monotone_on_grid() {
        let alphas: Vec<f64> = (1..20).map(|i| 0.5 + 0.025 * i as f64).collect();
        let rhos: Vec<f64> = (1..20).map(|i| 0.05 * i as f64).collect();
        for &a in &alphas {
            for w in rhos.windows(2) {
                assert!(saturation_floor(a, w[1]).unwrap() > saturation_floor(a, w[0]).unwrap());
            }
        }
        for &r in &rhos {
            for w in alphas.windows(2) {
                assert!(saturation_floor(w[1], r).unwrap() < saturation_floor(w[0], r).unwrap());
            }
        }
    }

    #[test]
    fn conditional_error_examples() {
        let tau = phi_inv(0.2);
        let rho: f64 = 0.5;
        assert_abs_diff_eq!(conditional_error_rate(tau / rho.sqrt(), tau, rho).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(conditional_error_rate(tau / 0.5, tau, 0.25).unwrap(), 0.5);
        assert_eq!(conditional_error_rate(f64::INFINITY, tau, rho).unwrap(), 0.0);
        assert_abs_diff_eq!(conditional_error_rate(0.0, tau, rho).unwrap(), 0.117, epsilon = 1e-3);
        assert!(conditional_error_rate(0.0, tau, 1.0).is_err());
    }

    #[test]
    fn degradation_examples() {
        assert_abs_diff_eq!(degradation_parameter(0.2, 0.4).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(degradation_parameter(0.1, 0.1).unwrap(), 0.0);
        let d = degradation_parameter(0.1, 0.2).unwrap();
        assert_abs_diff_eq!(d, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(0.1 + d * 0.8, 0.2, epsilon = 1e-15);
        assert!(degradation_parameter(0.3, 0.2).is_err());
    }

    #[test]
    fn exact_bsc_error_examples() {
        let pool = BscPool::new(vec![0.1, 0.2, 0.2, 0.2, 0.2]).unwrap();
        assert_abs_diff_eq!(exact_bsc_error(&pool, &[0]).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(exact_bsc_error(&pool, &[0, 1]).unwrap(), 0.1, epsilon = 1e-15);
        let e: f64 = 0.2;
        let want = 3.0 * e * e * (1.0 - e) + e.powi(3);
        assert_abs_diff_eq!(exact_bsc_error(&pool, &[2, 3, 4]).unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.104, epsilon = 1e-15);
    }

    #[test]
    fn exact_bsc_mi_examples() {
        let pool = BscPool::new(vec![0.1, 0.5, 0.3, 0.25]).unwrap();
        assert_abs_diff_eq!(exact_bsc_mi(&pool, &[0]).unwrap(), 1.0 - hb(0.1), epsilon = 1e-12);
        assert_abs_diff_eq!(exact_bsc_mi(&pool, &[0]).unwrap(), 0.53101, epsilon = 1e-5);
        assert_abs_diff_eq!(exact_bsc_mi(&pool, &[1]).unwrap(), 0.0, epsilon = 1e-15);
        // Two channels against a table-based evaluation of the same joint.
        let (a, b) = (0.1, 0.3);
        let mut probs = Vec::new();
        for y in [1.0, -1.0] {
            for x in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let pa = if x.0 == y { 1.0 - a } else { a };
                let pb = if x.1 == y { 1.0 - b } else { b };
                probs.push(0.5 * pa * pb);
            }
        }
        let table = JointTable::new(2, 4, probs).unwrap();
        assert_abs_diff_eq!(exact_bsc_mi(&pool, &[0, 2]).unwrap(), exact_mi(&table), epsilon = 1e-12);
    }

    #[test]
    fn exact_bsc_mi_monotone_in_subsets() {
        let pool = BscPool::new(vec![0.12, 0.31, 0.2, 0.45, 0.05]).unwrap();
        for mask in 0..32usize {
            let s = members(mask, 5);
            let base = exact_bsc_mi(&pool, &s).unwrap();
            for j in (0..5).filter(|&j| mask >> j & 1 == 0) {
                let mut t = s.clone();
                t.push(j);
                assert!(exact_bsc_mi(&pool, &t).unwrap() >= base - 1e-12);
            }
        }
    }

    #[test]
    fn exact_bsc_caps_and_underflow() {
        let pool = BscPool::new(vec![0.01; 21]).unwrap();
        let s: Vec<usize> = (0..21).collect();
        assert!(matches!(exact_bsc_error(&pool, &s), Err(Error::ResourceLimit(_))));
        let e = exact_bsc_error(&pool, &s[..20]).unwrap();
        assert!(e > 0.0 && e < 1e-15);
        assert!(BscPool::new(vec![0.6]).is_err());
    }

    #[test]
    fn difficulty_decomposition_examples() {
        let joint = DifficultyJoint::random(3, 2, 11).unwrap();
        assert!(joint.difficulty_label_dependence() < 1e-12);
        for mask in 1..8usize {
            let d = difficulty_decomposition(&joint, &members(mask, 3)).unwrap();
            assert_abs_diff_eq!(d.lhs, d.oracle_term - d.price, epsilon = 1e-9);
        }
        let constant = DifficultyJoint::random(2, 1, 3).unwrap();
        let d = difficulty_decomposition(&constant, &[0, 1]).unwrap();
        assert_abs_diff_eq!(d.price, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.lhs, d.oracle_term, epsilon = 1e-12);
    }

    #[test]
    fn difficulty_independent_of_everything_has_no_price() {
        // P(y, d, x) = P(d) P(y, x): D independent of (Y, X).
        let p_d = [0.3, 0.7];
        let p_yx = [[0.4, 0.1], [0.15, 0.35]]; // [y][x]
        let mut probs = vec![0.0; 8];
        for (idx, p) in probs.iter_mut().enumerate() {
            let (y, d, x) = (idx % 2, idx / 2 % 2, idx / 4);
            *p = p_d[d] * p_yx[y][x];
        }
        let joint = DifficultyJoint::from_table(2, 1, probs).unwrap();
        let d = difficulty_decomposition(&joint, &[0]).unwrap();
        assert_abs_diff_eq!(d.price, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn label_dependent_difficulty_rejected() {
        // D copies Y.
        let mut probs = vec![0.0; 8];
        for x in 0..2 {
            probs[x * 4] = 0.25;
            probs[x * 4 + 3] = 0.25;
        }
        let joint = DifficultyJoint::from_table(2, 1, probs).unwrap();
        assert!(difficulty_decomposition(&joint, &[0]).is_err());
        // The check still runs on such joints.
        assert!(submodularity_check(&joint).is_ok());
    }

    #[test]
    fn builder_joints_are_submodular_and_greedy_is_near_optimal() {
        for seed in 0..20 {
            let joint = DifficultyJoint::random(4, 3, seed).unwrap();
            assert!(submodularity_check(&joint).unwrap().is_empty(), "seed {seed}");
            let (_, g) = greedy_difficulty_aware(&joint, 2).unwrap();
            let (_, opt) = optimal_difficulty_aware(&joint, 2).unwrap();
            assert!(g >= (1.0 - (-1.0f64).exp()) * opt - 1e-12);
        }
        assert!(DifficultyJoint::random(5, 2, 0).is_err());
    }
}
