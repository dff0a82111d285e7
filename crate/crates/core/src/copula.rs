//! Gaussian-copula model of correlated binary errors.
//!
//! Model `j` errs when a latent standard normal `Z_j` falls below its
//! threshold `τ_j = Φ⁻¹(ε_j)`, with `Z ~ N(0, Σ)` for a unit-diagonal
//! correlation matrix `Σ`.
//!
//! Fitting estimates marginal error rates, solves each pair's tetrachoric
//! correlation from its joint error rate, and projects the pairwise matrix
//! onto the PSD cone (eigenvalue floor, then diagonal renormalization).
//!
//! Sampling is single-threaded and reproducible for a given seed:
//! `ChaCha8Rng::seed_from_u64(seed)`, and for each row one `bool` label draw
//! followed by standard normals from `rand_distr::StandardNormal`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{error_matrix, Dataset, ErrorMatrix, Sign};
use crate::error::{Error, Result};
use crate::numerics::{bvn_lower, phi, phi_inv, symmetric_eigendecomposition, SymmetricMatrix};

/// Floor and ceiling offset for fitted marginal error rates.
pub const CLAMP_EPS: f64 = 1e-6;
/// Eigenvalue floor used when projecting onto correlation matrices.
pub const EIG_EPS: f64 = 1e-6;
/// Tetrachoric correlations are confined to `[−1 + RHO_EPS, 1 − RHO_EPS]`.
pub const RHO_EPS: f64 = 1e-6;

const PSD_TOL: f64 = 1e-8;
const THRESHOLD_TOL: f64 = 1e-8;
// Rounding slack when comparing joint rates against the Fréchet bounds.
const FRECHET_TOL: f64 = 1e-12;
const MODEL_FORMAT: u32 = 1;

/// Latent correlation matrix, thresholds and marginal error rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaModel {
    model_names: Vec<String>,
    error_rates: Vec<f64>,
    thresholds: Vec<f64>,
    sigma: SymmetricMatrix,
}

impl CopulaModel {
    /// Builds a model from error rates and a correlation matrix; thresholds are derived.
    pub fn new(model_names: Vec<String>, error_rates: Vec<f64>, sigma: SymmetricMatrix) -> Result<Self> {
        let thresholds = error_rates.iter().map(|&e| phi_inv(e)).collect();
        let model = Self {
            model_names,
            error_rates,
            thresholds,
            sigma,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.model_names.len();
        if m == 0 {
            return Err(Error::invalid("copula model needs at least one model"));
        }
        if self.error_rates.len() != m || self.thresholds.len() != m || self.sigma.dim() != m {
            return Err(Error::invalid("copula model dimensions disagree"));
        }
        for (j, (&e, &t)) in self.error_rates.iter().zip(&self.thresholds).enumerate() {
            if !(CLAMP_EPS..=1.0 - CLAMP_EPS).contains(&e) {
                return Err(Error::invalid(format!(
                    "error rate {e} of model {j} outside [{CLAMP_EPS}, {}]",
                    1.0 - CLAMP_EPS
                )));
            }
            if (t - phi_inv(e)).abs() > THRESHOLD_TOL {
                return Err(Error::invalid(format!("threshold of model {j} does not match its error rate")));
            }
        }
        for i in 0..m {
            if (self.sigma.get(i, i) - 1.0).abs() > PSD_TOL {
                return Err(Error::invalid("sigma must have a unit diagonal"));
            }
        }
        let min_eig = symmetric_eigendecomposition(&self.sigma).eigenvalues[0];
        if min_eig < -PSD_TOL {
            return Err(Error::invalid(format!(
                "sigma is not positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        Ok(())
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn model_names(&self) -> &[String] {
        &self.model_names
    }

    pub fn error_rates(&self) -> &[f64] {
        &self.error_rates
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn sigma(&self) -> &SymmetricMatrix {
        &self.sigma
    }

    /// Mean of the strictly upper-triangular entries of `sigma` (0 for a single model).
    pub fn mean_offdiag_rho(&self) -> f64 {
        let m = self.n_models();
        if m < 2 {
            return 0.0;
        }
        let sum: f64 = pairs(m).map(|(i, j)| self.sigma.get(i, j)).sum();
        sum / (m * (m - 1) / 2) as f64
    }

    /// Exact pairwise joint error probability Φ₂(τ_i, τ_j; ρ_ij).
    pub fn pairwise_joint_error(&self, i: usize, j: usize) -> f64 {
        let rho = self.sigma.get(i, j).clamp(-1.0 + RHO_EPS, 1.0 - RHO_EPS);
        bvn_lower(self.thresholds[i], self.thresholds[j], rho)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CopulaModelFile {
            format: MODEL_FORMAT,
            model_names: self.model_names.clone(),
            error_rates: self.error_rates.clone(),
            thresholds: self.thresholds.clone(),
            sigma: (0..self.n_models())
                .map(|i| (0..self.n_models()).map(|j| self.sigma.get(i, j)).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CopulaModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::invalid(format!(
                "unsupported copula model format {} (expected {MODEL_FORMAT})",
                file.format
            )));
        }
        let model = Self {
            model_names: file.model_names,
            error_rates: file.error_rates,
            thresholds: file.thresholds,
            sigma: SymmetricMatrix::from_rows(&file.sigma)?,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// On-disk JSON layout of a [`CopulaModel`]; `sigma` is a list of rows.
#[derive(Debug, Serialize, Deserialize)]
struct CopulaModelFile {
    format: u32,
    model_names: Vec<String>,
    error_rates: Vec<f64>,
    thresholds: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

/// One-factor model: `m` models sharing correlation `rho` and accuracy `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicorrelatedSpec {
    pub m: usize,
    pub rho: f64,
    pub alpha: f64,
}

impl EquicorrelatedSpec {
    pub fn new(m: usize, rho: f64, alpha: f64) -> Result<Self> {
        let spec = Self { m, rho, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("equicorrelated spec needs m >= 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("rho {} outside [0, 1)", self.rho)));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (1/2, 1)", self.alpha)));
        }
        Ok(())
    }

    /// Common threshold Φ⁻¹(1 − α).
    pub fn threshold(&self) -> f64 {
        phi_inv(1.0 - self.alpha)
    }

    /// The equivalent copula model with constant off-diagonal `rho`.
    pub fn to_copula_model(&self) -> Result<CopulaModel> {
        let mut sigma = SymmetricMatrix::identity(self.m);
        for (i, j) in pairs(self.m) {
            sigma.set_sym(i, j, self.rho);
        }
        CopulaModel::new(Dataset::default_names(self.m), vec![1.0 - self.alpha; self.m], sigma)
    }
}

fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j)))
}

/// Clamped column error rates and their thresholds.
pub fn fit_marginals(e: &ErrorMatrix) -> (Vec<f64>, Vec<f64>) {
    fit_marginals_weighted(e, None)
}

fn fit_marginals_weighted(e: &ErrorMatrix, weights: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..e.n_rows()).map(w).sum();
    let rates: Vec<f64> = (0..e.n_models())
        .map(|j| {
            let errs: f64 = (0..e.n_rows()).filter(|&i| e.get(i, j) == 1).map(w).sum();
            (errs / total).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS)
        })
        .collect();
    let thresholds = rates.iter().map(|&r| phi_inv(r)).collect();
    (rates, thresholds)
}

/// Solved latent correlation; `clamped` marks a joint rate outside the attainable range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetrachoricSolution {
    pub rho: f64,
    pub clamped: bool,
}

/// Finds ρ with Φ₂(τ_i, τ_j; ρ) equal to `joint_err` by bisection.
///
/// Joint rates outside what `ρ ∈ [−1 + RHO_EPS, 1 − RHO_EPS]` can reach are
/// clamped to the nearest endpoint and flagged instead of failing.
pub fn solve_tetrachoric(tau_i: f64, tau_j: f64, joint_err: f64) -> Result<TetrachoricSolution> {
    if !(tau_i.is_finite() && tau_j.is_finite() && joint_err.is_finite()) {
        return Err(Error::invalid("tetrachoric inputs must be finite"));
    }
    let (lo_rho, hi_rho) = (-1.0 + RHO_EPS, 1.0 - RHO_EPS);
    let f = |rho: f64| bvn_lower(tau_i, tau_j, rho);
    let (f_lo, f_hi) = (f(lo_rho), f(hi_rho));
    let (p_i, p_j) = (phi(tau_i), phi(tau_j));
    let frechet_lo = (p_i + p_j - 1.0).max(0.0);
    let frechet_hi = p_i.min(p_j);
    let outside = joint_err < frechet_lo - FRECHET_TOL || joint_err > frechet_hi + FRECHET_TOL;
    if outside {
        log::warn!(
            "joint error rate {joint_err} outside Fréchet bounds [{frechet_lo}, {frechet_hi}]; clamping"
        );
    }
    if joint_err >= f_hi {
        return Ok(TetrachoricSolution {
            rho: hi_rho,
            clamped: outside,
        });
    }
    if joint_err <= f_lo {
        return Ok(TetrachoricSolution {
            rho: lo_rho,
            clamped: outside,
        });
    }
    let (mut lo, mut hi) = (lo_rho, hi_rho);
    // Φ₂ is strictly increasing in ρ; 60 halvings take the bracket below 1e-17.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < joint_err {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TetrachoricSolution {
        rho: 0.5 * (lo + hi),
        clamped: false,
    })
}

/// Clips eigenvalues at [`EIG_EPS`], reconstructs, and rescales to a unit diagonal.
///
/// Inputs that are already PSD with a unit diagonal are returned unchanged, so
/// the projection is exactly idempotent.
pub fn project_to_correlation(a: &SymmetricMatrix) -> SymmetricMatrix {
    let eig = symmetric_eigendecomposition(a);
    let unit_diag = (0..a.dim()).all(|i| (a.get(i, i) - 1.0).abs() <= 1e-12);
    if unit_diag && eig.eigenvalues.first().is_none_or(|&l| l >= 0.0) {
        let mut out = a.clone();
        for i in 0..a.dim() {
            out.set_sym(i, i, 1.0);
        }
        return out;
    }
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(EIG_EPS)).collect();
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&DVector::from_vec(clipped)) * v.transpose();
    let n = a.dim();
    let scale: Vec<f64> = (0..n).map(|i| rebuilt[(i, i)].sqrt()).collect();
    let normalized = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            rebuilt[(i, j)] / (scale[i] * scale[j])
        }
    });
    SymmetricMatrix::from_dmatrix_symmetrized(&normalized)
}

/// Fitted model plus the pairs whose joint rates had to be clamped.
#[derive(Debug, Clone)]
pub struct CopulaFit {
    pub model: CopulaModel,
    pub clamped_pairs: Vec<(usize, usize)>,
}

pub fn fit_copula(d: &Dataset) -> Result<CopulaModel> {
    Ok(fit_copula_report(d)?.model)
}

pub fn fit_copula_report(d: &Dataset) -> Result<CopulaFit> {
    if d.n_rows() < 2 {
        return Err(Error::invalid("copula fitting needs at least two rows"));
    }
    let e = error_matrix(d);
    let (rates, thresholds) = fit_marginals_weighted(&e, d.weights());
    let m = d.n_models();
    let total = d.total_weight();
    let mut sigma = SymmetricMatrix::identity(m);
    let mut clamped_pairs = Vec::new();
    for (i, j) in pairs(m) {
        let joint: f64 = (0..d.n_rows())
            .filter(|&r| e.get(r, i) == 1 && e.get(r, j) == 1)
            .map(|r| d.weight(r))
            .sum::<f64>()
            / total;
        let sol = solve_tetrachoric(thresholds[i], thresholds[j], joint)?;
        if sol.clamped {
            clamped_pairs.push((i, j));
        }
        sigma.set_sym(i, j, sol.rho);
    }
    let sigma = project_to_correlation(&sigma);
    let model = CopulaModel {
        model_names: d.model_names().to_vec(),
        error_rates: rates,
        thresholds,
        sigma,
    };
    model.validate()?;
    Ok(CopulaFit {
        model,
        clamped_pairs,
    })
}

/// Lower-triangular factor `L` with `L Lᵀ = Σ`; falls back to `V √D` if Cholesky fails.
fn factor(sigma: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    let s = sigma.to_dmatrix();
    if let Some(ch) = Cholesky::new(s.clone()) {
        return Ok(ch.l());
    }
    let eig = symmetric_eigendecomposition(sigma);
    if eig.eigenvalues[0] < -PSD_TOL {
        return Err(Error::Internal("sigma cannot be factorized".into()));
    }
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root))
}

fn random_label(rng: &mut ChaCha8Rng) -> Sign {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Draws `n` synthetic rows: uniform labels, latent `Z = L g`, `E_j = 1(Z_j < τ_j)`.
pub fn sample(model: &CopulaModel, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let m = model.n_models();
    let l = factor(&model.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n * m);
    let mut g = vec![0.0; m];
    for _ in 0..n {
        let y = random_label(&mut rng);
        labels.push(y);
        for gi in g.iter_mut() {
            *gi = rng.sample(StandardNormal);
        }
        for j in 0..m {
            let z: f64 = (0..=j).map(|c| l[(j, c)] * g[c]).sum();
            preds.push(if z < model.thresholds[j] { -y } else { y });
        }
    }
    Dataset::new(labels, preds, model.model_names.clone())
}

/// Streams rows of the one-factor model `Z_j = √ρ U + √(1−ρ) ξ_j`.
///
/// Per row: one label draw, then `U`, then `ξ_1..ξ_m`.
pub struct EquicorrelatedSampler {
    spec: EquicorrelatedSpec,
    tau: f64,
    rng: ChaCha8Rng,
}

impl EquicorrelatedSampler {
    pub fn new(spec: EquicorrelatedSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            tau: spec.threshold(),
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Fills `errors` (length m) for the next row and returns its label.
    pub fn next_row(&mut self, errors: &mut [u8]) -> Sign {
        let y = random_label(&mut self.rng);
        let (a, b) = (self.spec.rho.sqrt(), (1.0 - self.spec.rho).sqrt());
        let u: f64 = self.rng.sample(StandardNormal);
        for e in errors.iter_mut().take(self.spec.m) {
            let xi: f64 = self.rng.sample(StandardNormal);
            *e = u8::from(a * u + b * xi < self.tau);
        }
        y
    }
}

pub fn sample_equicorrelated(spec: &EquicorrelatedSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let mut sampler = EquicorrelatedSampler::new(*spec, seed)?;
    let mut errors = vec![0u8; spec.m];
    let mut labels = Vec::with_capacity(n);
    let mut preds = Vec::with_capacity(n * spec.m);
    for _ in 0..n {
        let y = sampler.next_row(&mut errors);
        labels.push(y);
        preds.extend(errors.iter().map(|&e| if e == 1 { -y } else { y }));
    }
    Dataset::new(labels, preds, Dataset::default_names(spec.m))
}

/// Real-versus-model statistics for judging a fitted copula.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaDiagnostics {
    /// `(i, j)` with `i < j`, in lexicographic order.
    pub pairs: Vec<(usize, usize)>,
    pub pairwise_joint_empirical: Vec<f64>,
    pub pairwise_joint_model: Vec<f64>,
    /// Entry `k` is the fraction of rows where exactly `k` models err.
    pub simultaneous_error_hist_empirical: Vec<f64>,
    pub simultaneous_error_hist_model: Vec<f64>,
    pub mean_offdiag_rho: f64,
}

fn error_statistics(d: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let e = error_matrix(d);
    let m = d.n_models();
    let total = d.total_weight();
    let mut joint = vec![0.0; m * (m - 1) / 2];
    let mut hist = vec![0.0; m + 1];
    for r in 0..d.n_rows() {
        let w = d.weight(r);
        let row = e.row(r);
        hist[row.iter().filter(|&&v| v == 1).count()] += w;
        for (k, (i, j)) in pairs(m).enumerate() {
            if row[i] == 1 && row[j] == 1 {
                joint[k] += w;
            }
        }
    }
    for v in joint.iter_mut().chain(hist.iter_mut()) {
        *v /= total;
    }
    (joint, hist)
}

/// Compares `real` against a fresh synthetic sample of `n_synth` rows from `model`.
pub fn copula_diagnostics(real: &Dataset, model: &CopulaModel, n_synth: usize, seed: u64) -> Result<CopulaDiagnostics> {
    if real.n_models() != model.n_models() {
        return Err(Error::invalid(format!(
            "dataset has {} models, copula has {}",
            real.n_models(),
            model.n_models()
        )));
    }
    let synth = sample(model, n_synth, seed)?;
    let (pairwise_joint_empirical, simultaneous_error_hist_empirical) = error_statistics(real);
    let (pairwise_joint_model, simultaneous_error_hist_model) = error_statistics(&synth);
    Ok(CopulaDiagnostics {
        pairs: pairs(model.n_models()).collect(),
        pairwise_joint_empirical,
        pairwise_joint_model,
        simultaneous_error_hist_empirical,
        simultaneous_error_hist_model,
        mean_offdiag_rho: model.mean_offdiag_rho(),
    })
}

impl CopulaDiagnostics {
    /// Columns `pair_i,pair_j,empirical,model`.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("pair_i,pair_j,empirical,model\n");
        for (k, (i, j)) in self.pairs.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{j},{},{}",
                self.pairwise_joint_empirical[k], self.pairwise_joint_model[k]
            );
        }
        out
    }

    /// Columns `k,empirical,model`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("k,empirical,model\n");
        for (k, (e, m)) in self
            .simultaneous_error_hist_empirical
            .iter()
            .zip(&self.simultaneous_error_hist_model)
            .enumerate()
        {
            let _ = writeln!(out, "{k},{e},{m}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn column_rates_dataset(rates: &[usize], n: usize) -> Dataset {
        // Column j errs on its first rates[j] rows.
        let m = rates.len();
        let labels = vec![1; n];
        let mut preds = Vec::with_capacity(n * m);
        for i in 0..n {
            preds.extend(rates.iter().map(|&r| if i < r { -1 } else { 1 }));
        }
        Dataset::new(labels, preds, Dataset::default_names(m)).unwrap()
    }

    #[test]
    fn marginal_examples() {
        let d = column_rates_dataset(&[0, 25, 50], 100);
        let (rates, tau) = fit_marginals(&error_matrix(&d));
        assert_eq!(rates[0], CLAMP_EPS);
        assert_abs_diff_eq!(tau[0], phi_inv(CLAMP_EPS), epsilon = 1e-15);
        assert_abs_diff_eq!(rates[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(tau[1], -0.67449, epsilon = 1e-4);
        assert_abs_diff_eq!(tau[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tetrachoric_examples() {
        let s = solve_tetrachoric(0.0, 0.0, 0.25).unwrap();
        assert_abs_diff_eq!(s.rho, 0.0, epsilon = 1e-6);
        // Bisection against a quadrature-evaluated Φ₂ gives 0.5 for joint 1/3.
        let s = solve_tetrachoric(0.0, 0.0, 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(s.rho, 0.5, epsilon = 1e-4);
        let s = solve_tetrachoric(0.0, 0.0, 0.5).unwrap();
        assert_eq!(s.rho, 1.0 - RHO_EPS);
        assert!(!s.clamped);
        let s = solve_tetrachoric(0.0, 0.0, 0.6).unwrap();
        assert_eq!(s.rho, 1.0 - RHO_EPS);
        assert!(s.clamped);
        let s = solve_tetrachoric(0.0, 0.0, 0.0).unwrap();
        assert_eq!(s.rho, -1.0 + RHO_EPS);
    }

    #[test]
    fn projection_examples() {
        let id = SymmetricMatrix::identity(4);
        let p = project_to_correlation(&id);
        for (a, b) in p.row_major().iter().zip(id.row_major()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let bad = SymmetricMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).unwrap();
        let p = project_to_correlation(&bad);
        // V = (1, ±1)/√2: clip −0.2 to EIG_EPS, rebuild, renormalize.
        let want = (2.2 - EIG_EPS) / (2.2 + EIG_EPS);
        assert_abs_diff_eq!(p.get(0, 1), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 0.999999, epsilon = 1e-6);
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 1), 1.0);
    }

    #[test]
    fn identical_columns_fit_comonotone() {
        let labels: Vec<Sign> = (0..400).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
        let preds: Vec<Sign> = labels
            .iter()
            .enumerate()
            .flat_map(|(i, &y)| {
                let v = if i % 5 == 0 { -y } else { y };
                [v, v]
            })
            .collect();
        let d = Dataset::new(labels, preds, Dataset::default_names(2)).unwrap();
        let m = fit_copula(&d).unwrap();
        assert_abs_diff_eq!(m.sigma().get(0, 1), 1.0 - RHO_EPS, epsilon = 1e-6);
    }

    #[test]
    fn independent_columns_fit_near_zero() {
        let spec = EquicorrelatedSpec::new(4, 0.0, 0.7).unwrap();
        let d = sample_equicorrelated(&spec, 200_000, 17).unwrap();
        let m = fit_copula(&d).unwrap();
        for (i, j) in pairs(4) {
            assert!(m.sigma().get(i, j).abs() <= 0.02, "{}", m.sigma().get(i, j));
        }
    }

    #[test]
    fn json_round_trip_and_format_check() {
        let model = EquicorrelatedSpec::new(3, 0.4, 0.75).unwrap().to_copula_model().unwrap();
        let text = model.to_json().unwrap();
        assert!(text.contains("\"format\": 1"));
        let back = CopulaModel::from_json(&text).unwrap();
        assert_eq!(back.sigma(), model.sigma());
        assert_eq!(back.error_rates(), model.error_rates());
        let bumped = text.replace("\"format\": 1", "\"format\": 2");
        assert!(CopulaModel::from_json(&bumped).is_err());
    }

    #[test]
    fn invalid_models_rejected() {
        let not_psd = SymmetricMatrix::from_rows(&[
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ])
        .unwrap();
        assert!(CopulaModel::new(Dataset::default_names(3), vec![0.2; 3], not_psd).is_err());
        assert!(CopulaModel::new(Dataset::default_names(2), vec![0.0, 0.2], SymmetricMatrix::identity(2)).is_err());
    }

    fn binomial_sd(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn sample_marginals_and_identity_joint() {
        let model = CopulaModel::new(
            Dataset::default_names(3),
            vec![0.3, 0.1, 0.45],
            SymmetricMatrix::identity(3),
        )
        .unwrap();
        let n = 200_000;
        let d = sample(&model, n, 5).unwrap();
        for j in 0..3 {
            let err = 1.0 - d.accuracy(j);
            let eps = model.error_rates()[j];
            assert!((err - eps).abs() <= 3.0 * binomial_sd(eps, n), "model {j}: {err}");
        }
        let indep = CopulaModel::new(Dataset::default_names(2), vec![0.3, 0.3], SymmetricMatrix::identity(2)).unwrap();
        let d = sample(&indep, n, 6).unwrap();
        let diag = copula_diagnostics(&d, &indep, 10, 0).unwrap();
        let joint = diag.pairwise_joint_empirical[0];
        assert!((joint - 0.09).abs() <= 4.0 * binomial_sd(0.09, n), "{joint}");
    }

    #[test]
    fn comonotone_sample_duplicates_errors() {
        let mut sigma = SymmetricMatrix::identity(3);
        for (i, j) in pairs(3) {
            sigma.set_sym(i, j, 1.0 - RHO_EPS);
        }
        let model = CopulaModel::new(Dataset::default_names(3), vec![0.2; 3], project_to_correlation(&sigma)).unwrap();
        let d = sample(&model, 50_000, 8).unwrap();
        let diag = copula_diagnostics(&d, &model, 10, 0).unwrap();
        for &j in &diag.pairwise_joint_empirical {
            assert!((j - 0.2).abs() < 0.01, "{j}");
        }
    }

    #[test]
    fn sample_is_deterministic() {
        let model = EquicorrelatedSpec::new(4, 0.3, 0.8).unwrap().to_copula_model().unwrap();
        assert_eq!(sample(&model, 500, 99).unwrap(), sample(&model, 500, 99).unwrap());
        assert_ne!(sample(&model, 500, 99).unwrap(), sample(&model, 500, 100).unwrap());
    }

    #[test]
    fn equicorrelated_examples() {
        let n = 200_000;
        let spec = EquicorrelatedSpec::new(2, 0.0, 0.8).unwrap();
        let d = sample_equicorrelated(&spec, n, 3).unwrap();
        let (joint, _) = error_statistics(&d);
        assert!((joint[0] - 0.04).abs() <= 4.0 * binomial_sd(0.04, n));

        let spec = EquicorrelatedSpec::new(2, 0.5, 0.8).unwrap();
        let d = sample_equicorrelated(&spec, n, 4).unwrap();
        let (joint, _) = error_statistics(&d);
        let tau = spec.threshold();
        let want = bvn_lower(tau, tau, 0.5);
        assert!((joint[0] - want).abs() <= 3.0 * binomial_sd(want, n), "{} vs {want}", joint[0]);
    }

    #[test]
    fn diagnostics_point_mass_for_perfect_data() {
        let labels = vec![1, -1, 1, -1];
        let preds: Vec<Sign> = labels.iter().flat_map(|&y| [y, y, y]).collect();
        let d = Dataset::new(labels, preds, Dataset::default_names(3)).unwrap();
        let model = fit_copula(&d).unwrap();
        let diag = copula_diagnostics(&d, &model, 1_000, 1).unwrap();
        assert_eq!(diag.simultaneous_error_hist_empirical, vec![1.0, 0.0, 0.0, 0.0]);
        let total: f64 = diag.simultaneous_error_hist_model.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
        assert_eq!(diag.scatter_csv().lines().count(), 1 + 3);
        assert_eq!(diag.histogram_csv().lines().count(), 1 + 4);
    }

    proptest! {
        #[test]
        fn tetrachoric_inverts_forward_map(tau_i in -2.5f64..2.5, tau_j in -2.5f64..2.5, rho in -0.95f64..0.95) {
            let joint = bvn_lower(tau_i, tau_j, rho);
            let s = solve_tetrachoric(tau_i, tau_j, joint).unwrap();
            prop_assert!((bvn_lower(tau_i, tau_j, s.rho) - joint).abs() <= 1e-7);
            prop_assert!(!s.clamped);
        }

        #[test]
        fn projection_is_idempotent(vals in proptest::collection::vec(-1.0f64..1.0, 10)) {
            let mut a = SymmetricMatrix::identity(5);
            for (k, (i, j)) in pairs(5).enumerate() {
                a.set_sym(i, j, vals[k]);
            }
            let once = project_to_correlation(&a);
            let twice = project_to_correlation(&once);
            for (x, y) in once.row_major().iter().zip(twice.row_major()) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
            let min_eig = symmetric_eigendecomposition(&once).eigenvalues[0];
            prop_assert!(min_eig >= -1e-10);
            for i in 0..5 {
                prop_assert_eq!(once.get(i, i), 1.0);
            }
        }
    }
}
