//! Experiment orchestration: error-versus-budget curves over seeded splits,
//! copula validation, and the saturation experiment, plus report writers.
//!
//! # Config schema
//!
//! Experiments are described by a JSON object ([`ExperimentConfig`]):
//!
//! ```json
//! {
//!   "seed": 7,
//!   "data": { "kind": "csv", "path": "predictions.csv" },
//!   "methods": ["greedy_mi_direct", "top_k"],
//!   "aggregators": ["map", "mv", "wmv"],
//!   "k_min": 1,
//!   "k_max": 5,
//!   "split": { "train_fraction": 0.8, "num_splits": 5 },
//!   "alpha": 1.0,
//!   "exhaustive_cap": 10000,
//!   "exhaustive_objective": "min_map_error",
//!   "n_synth": 100000,
//!   "saturation": { "alpha": 0.8, "rho": 0.5, "m_schedule": [1, 5, 25], "n": 200000 },
//!   "output_dir": "out"
//! }
//! ```
//!
//! `data` is one of `{"kind": "csv", "path"}`,
//! `{"kind": "copula_model", "path", "n"}` (a model JSON written by
//! `fit-copula`) or `{"kind": "equicorrelated", "m", "rho", "alpha", "n"}`.
//! Relative paths (data and `output_dir`) resolve against the config file's
//! directory. Every field
//! except `data` has a default; `saturation` is only needed by `saturate`.
//!
//! # Seeds
//!
//! All randomness derives from `seed` through [`derive_seed`]: `"data"`
//! for synthetic datasets, `"split"` for the split permutation,
//! `"mv_ties"` with `[split, k]` for majority-vote tie coins (shared by all
//! methods so equal subsets score identically), `"synth"` for copula
//! diagnostics and `"saturation"` / `"saturation_ties"` with `[m]`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::{evaluate_aggregator, Aggregator};
use crate::copula::{
    copula_diagnostics, fit_copula_report, sample, sample_equicorrelated, CopulaDiagnostics, CopulaFit,
    CopulaModel, EquicorrelatedSampler, EquicorrelatedSpec,
};
use crate::data::{load_dataset, split_train_test, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::information::DEFAULT_ALPHA;
use crate::selection::{
    binomial, exhaustive_select, greedy_mi_select, mrmr_select, term1_select, top_k_select, EvalContext,
    GreedyMode, Objective, SelectionMethod, SelectionResult, DEFAULT_EXHAUSTIVE_CAP,
};
use crate::theory::saturation_floor;

/// Seed for a named component and index tuple, mixed from the master seed.
///
/// FNV-1a over the component's bytes and each index as little-endian
/// `u64`, XORed into `seed` and passed through the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, component: &str, indices: &[u64]) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let bytes = component
        .bytes()
        .chain(indices.iter().flat_map(|i| i.to_le_bytes()));
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    let mut z = (seed ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv { path: PathBuf },
    CopulaModel { path: PathBuf, n: usize },
    Equicorrelated { m: usize, rho: f64, alpha: f64, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub num_splits: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            num_splits: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaturationConfig {
    pub alpha: f64,
    pub rho: f64,
    pub m_schedule: Vec<usize>,
    pub n: usize,
}

fn default_methods() -> Vec<SelectionMethod> {
    vec![SelectionMethod::GreedyMiDirect, SelectionMethod::TopK]
}

fn default_aggregators() -> Vec<Aggregator> {
    Aggregator::ALL.to_vec()
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_cap() -> u64 {
    DEFAULT_EXHAUSTIVE_CAP
}

fn default_objective() -> Objective {
    Objective::MinMapError
}

fn default_n_synth() -> usize {
    100_000
}

fn default_k_min() -> usize {
    1
}

/// One experiment; see the module docs for the JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSource,
    #[serde(default = "default_methods")]
    pub methods: Vec<SelectionMethod>,
    #[serde(default = "default_aggregators")]
    pub aggregators: Vec<Aggregator>,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    /// Defaults to the number of models.
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_cap")]
    pub exhaustive_cap: u64,
    #[serde(default = "default_objective")]
    pub exhaustive_objective: Objective,
    #[serde(default = "default_n_synth")]
    pub n_synth: usize,
    #[serde(default)]
    pub saturation: Option<SaturationConfig>,
    /// Where reports go unless the command line says otherwise.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the data source.
    pub fn new(data: DataSource) -> Self {
        Self {
            seed: 0,
            data,
            methods: default_methods(),
            aggregators: default_aggregators(),
            k_min: 1,
            k_max: None,
            split: SplitConfig::default(),
            alpha: DEFAULT_ALPHA,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            exhaustive_objective: Objective::MinMapError,
            n_synth: default_n_synth(),
            saturation: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, resolving relative data paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        match &mut config.data {
            DataSource::Csv { path } | DataSource::CopulaModel { path, .. } if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
        if let Some(out) = config.output_dir.as_mut().filter(|p| p.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize") + "\n"
    }

    /// Checks everything that does not depend on the loaded data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.aggregators.is_empty() {
            return bad("at least one aggregator is required".into());
        }
        if self.k_min == 0 || self.k_max.is_some_and(|k| k < self.k_min) {
            return bad(format!("invalid k range {}..={:?}", self.k_min, self.k_max));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be >= 0", self.alpha));
        }
        if self.exhaustive_cap == 0 {
            return bad("exhaustive_cap must be positive".into());
        }
        SplitSpec::new(self.split.train_fraction, 0, self.split.num_splits)
            .map_err(|e| Error::Config(format!("split: {e}")))?;
        match &self.data {
            DataSource::Csv { .. } => {}
            DataSource::CopulaModel { n, .. } if *n == 0 => return bad("synthetic n must be positive".into()),
            DataSource::Equicorrelated { m, rho, alpha, n } => {
                if *n == 0 {
                    return bad("synthetic n must be positive".into());
                }
                EquicorrelatedSpec::new(*m, *rho, *alpha).map_err(|e| Error::Config(e.to_string()))?;
            }
            DataSource::CopulaModel { .. } => {}
        }
        if let Some(s) = &self.saturation {
            saturation_spec(s, 1)?;
            if s.n == 0 || s.m_schedule.is_empty() || s.m_schedule.windows(2).any(|w| w[0] >= w[1]) || s.m_schedule[0] == 0 {
                return bad("saturation needs n > 0 and a strictly increasing, positive m_schedule".into());
            }
        }
        Ok(())
    }

    /// The inclusive budget range for a pool of `m` models.
    pub fn k_range(&self, m: usize) -> Result<std::ops::RangeInclusive<usize>> {
        let k_max = self.k_max.unwrap_or(m);
        if k_max > m || self.k_min > k_max {
            return Err(Error::Config(format!(
                "k range {}..={k_max} outside [1, {m}] for this dataset",
                self.k_min
            )));
        }
        Ok(self.k_min..=k_max)
    }
}

fn saturation_spec(s: &SaturationConfig, m: usize) -> Result<EquicorrelatedSpec> {
    EquicorrelatedSpec::new(m, s.rho, s.alpha).map_err(|e| Error::Config(format!("saturation: {e}")))
}

/// Loads or synthesizes the dataset named by `config.data`.
pub fn load_data(config: &ExperimentConfig) -> Result<Dataset> {
    let seed = derive_seed(config.seed, "data", &[]);
    match &config.data {
        DataSource::Csv { path } => load_dataset(path),
        DataSource::CopulaModel { path, n } => sample(&CopulaModel::load(path)?, *n, seed),
        DataSource::Equicorrelated { m, rho, alpha, n } => {
            sample_equicorrelated(&EquicorrelatedSpec::new(*m, *rho, *alpha)?, *n, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub method: SelectionMethod,
    pub aggregator: Aggregator,
    pub k: usize,
    pub split: usize,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub method: SelectionMethod,
    pub aggregator: Aggregator,
    pub k: usize,
    pub n_splits: usize,
    pub mean: f64,
    /// Sample standard deviation across splits (0 for a single split).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSelection {
    pub split: usize,
    pub k: usize,
    pub result: SelectionResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model_names: Vec<String>,
    /// Ordered by method and aggregator (config order), then k, then split.
    pub rows: Vec<CurveRow>,
    pub summary: Vec<CurveSummary>,
    /// Full-budget selections for nested methods, per-k ones for exhaustive.
    pub selections: Vec<SplitSelection>,
    pub warnings: Vec<String>,
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn select_nested(method: SelectionMethod, train: &Dataset, k: usize, alpha: f64) -> Result<SelectionResult> {
    match method {
        SelectionMethod::GreedyMiDirect => greedy_mi_select(train, k, GreedyMode::DirectCmi, alpha),
        SelectionMethod::GreedyMiThreeTerm => greedy_mi_select(train, k, GreedyMode::ThreeTerm, alpha),
        SelectionMethod::TopK => top_k_select(train, k),
        SelectionMethod::Term1 => term1_select(train, k, alpha),
        SelectionMethod::Mrmr => mrmr_select(train, k, alpha),
        SelectionMethod::Exhaustive => Err(Error::Internal("exhaustive selection is not nested".into())),
    }
}

/// Loads the data named by the config and runs [`run_error_curve_on`].
pub fn run_error_curve(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let data = load_data(config)?;
    run_error_curve_on(&data, config)
}

/// Select on train, fit the aggregator on train, score on test, for every
/// split, method, budget and aggregator of the config.
///
/// Aggregators see the selected subset sorted by model index. Exhaustive
/// selection scores subsets on the split's test rows (an oracle) and is
/// skipped with a warning for budgets where C(M, k) exceeds the cap.
pub fn run_error_curve_on(data: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let ks = config.k_range(data.n_models())?;
    let k_max = *ks.end();
    let spec = SplitSpec::new(
        config.split.train_fraction,
        derive_seed(config.seed, "split", &[]),
        config.split.num_splits,
    )?;
    let mut warnings = Vec::new();
    let skipped_k: Vec<usize> = if config.methods.contains(&SelectionMethod::Exhaustive) {
        ks.clone()
            .filter(|&k| binomial(data.n_models(), k) > config.exhaustive_cap)
            .collect()
    } else {
        Vec::new()
    };
    for &k in &skipped_k {
        let msg = format!(
            "exhaustive skipped at k = {k}: C({}, {k}) = {} exceeds cap {}",
            data.n_models(),
            binomial(data.n_models(), k),
            config.exhaustive_cap
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    // errors[(method index, aggregator index, k)] -> per-split errors
    let mut cells: Vec<Vec<Vec<Option<f64>>>> =
        vec![vec![vec![None; config.split.num_splits]; k_max + 1]; config.methods.len() * config.aggregators.len()];
    let mut selections = Vec::new();
    for split in 0..config.split.num_splits {
        let (train, test) = split_train_test(data, &spec, split)?;
        for (mi, &method) in config.methods.iter().enumerate() {
            let full = if method.is_nested() {
                let r = select_nested(method, &train, k_max, config.alpha)?;
                selections.push(SplitSelection {
                    split,
                    k: k_max,
                    result: r.clone(),
                });
                Some(r)
            } else {
                None
            };
            for k in ks.clone() {
                let mut subset = match &full {
                    Some(r) => r.order[..k].to_vec(),
                    None if skipped_k.contains(&k) => continue,
                    None => {
                        let r = exhaustive_select(
                            &train,
                            EvalContext::Holdout(&test),
                            k,
                            config.exhaustive_objective,
                            config.alpha,
                            config.exhaustive_cap,
                        )?;
                        let order = r.order.clone();
                        selections.push(SplitSelection { split, k, result: r });
                        order
                    }
                };
                subset.sort_unstable();
                let tie_seed = derive_seed(config.seed, "mv_ties", &[split as u64, k as u64]);
                for (ai, &agg) in config.aggregators.iter().enumerate() {
                    let err = evaluate_aggregator(&train, &test, &subset, agg, tie_seed)?;
                    cells[mi * config.aggregators.len() + ai][k][split] = Some(err);
                }
            }
        }
    }

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (mi, &method) in config.methods.iter().enumerate() {
        for (ai, &aggregator) in config.aggregators.iter().enumerate() {
            for k in ks.clone() {
                let errs: Vec<f64> = cells[mi * config.aggregators.len() + ai][k].iter().flatten().copied().collect();
                if errs.is_empty() {
                    continue;
                }
                for (split, &test_error) in errs.iter().enumerate() {
                    rows.push(CurveRow {
                        method,
                        aggregator,
                        k,
                        split,
                        test_error,
                    });
                }
                let (mean, std) = mean_std(&errs);
                summary.push(CurveSummary {
                    method,
                    aggregator,
                    k,
                    n_splits: errs.len(),
                    mean,
                    std,
                });
            }
        }
    }
    Ok(ExperimentReport {
        model_names: data.model_names().to_vec(),
        rows,
        summary,
        selections,
        warnings,
    })
}

impl ExperimentReport {
    /// Columns `method,aggregator,k,split,test_error`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("method,aggregator,k,split,test_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.method, r.aggregator, r.k, r.split, r.test_error);
        }
        out
    }

    /// Columns `method,aggregator,k,n_splits,mean,std`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,aggregator,k,n_splits,mean,std\n");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.method, s.aggregator, s.k, s.n_splits, s.mean, s.std
            );
        }
        out
    }

    pub fn selections_json(&self) -> String {
        let items: Vec<serde_json::Value> = self
            .selections
            .iter()
            .map(|s| {
                let mut v = s.result.to_json_value(&self.model_names);
                v["split"] = s.split.into();
                v["k"] = s.k.into();
                v
            })
            .collect();
        serde_json::to_string_pretty(&items).expect("selections always serialize") + "\n"
    }

    pub fn summary_for(&self, method: SelectionMethod, aggregator: Aggregator, k: usize) -> Option<&CurveSummary> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.aggregator == aggregator && s.k == k)
    }

    pub fn errors_for(&self, method: SelectionMethod, aggregator: Aggregator, k: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.aggregator == aggregator && r.k == k)
            .map(|r| r.test_error)
            .collect()
    }
}

/// Fits a copula to the whole dataset and compares it with a fresh synthetic sample.
pub fn run_copula_validation(data: &Dataset, n_synth: usize, seed: u64) -> Result<(CopulaFit, CopulaDiagnostics)> {
    let fit = fit_copula_report(data)?;
    let diag = copula_diagnostics(data, &fit.model, n_synth, derive_seed(seed, "synth", &[]))?;
    Ok((fit, diag))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationRow {
    pub m: usize,
    pub error: f64,
    /// Binomial standard error of `error`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationTable {
    pub alpha: f64,
    pub rho: f64,
    pub n: usize,
    pub rows: Vec<SaturationRow>,
    /// Closed-form floor; 0 for independent models.
    pub floor: f64,
}

impl SaturationTable {
    /// Columns `m,error,std_error,floor`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,error,std_error,floor\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.m, r.error, r.std_error, self.floor);
        }
        out
    }
}

/// Majority-vote error of `m` equicorrelated models over `n` fresh rows.
///
/// Rows are streamed, so memory does not grow with `n · m`.
pub fn saturation_error(alpha: f64, rho: f64, m: usize, n: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let spec = EquicorrelatedSpec::new(m, rho, alpha)?;
    let mut sampler = EquicorrelatedSampler::new(spec, derive_seed(seed, "saturation", &[m as u64]))?;
    let mut ties = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, "saturation_ties", &[m as u64]));
    let mut errors = vec![0u8; m];
    let mut wrong = 0usize;
    for _ in 0..n {
        sampler.next_row(&mut errors);
        let e = errors.iter().filter(|&&v| v == 1).count();
        let is_wrong = match (2 * e).cmp(&m) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => ties.random::<bool>(),
        };
        wrong += usize::from(is_wrong);
    }
    Ok(wrong as f64 / n as f64)
}

/// Majority-vote error for each `m` in the schedule, beside the closed-form floor.
pub fn run_saturation(s: &SaturationConfig, seed: u64) -> Result<SaturationTable> {
    saturation_spec(s, 1)?;
    if s.n == 0 || s.m_schedule.is_empty() || s.m_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("saturation needs n > 0 and a strictly increasing m_schedule".into()));
    }
    let rows = s
        .m_schedule
        .iter()
        .map(|&m| {
            let error = saturation_error(s.alpha, s.rho, m, s.n, seed)?;
            Ok(SaturationRow {
                m,
                error,
                std_error: (error * (1.0 - error) / s.n as f64).sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let floor = if s.rho == 0.0 {
        0.0
    } else {
        saturation_floor(s.alpha, s.rho)?
    };
    Ok(SaturationTable {
        alpha: s.alpha,
        rho: s.rho,
        n: s.n,
        rows,
        floor,
    })
}

/// Run metadata written next to every report.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub outputs: Vec<String>,
    pub warnings: &'a [String],
    pub wall_time_seconds: f64,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `name -> contents` pairs plus `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    files: &[(&str, String)],
    warnings: &[String],
    wall_time_seconds: f64,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, contents) in files {
        write_file(dir, name, contents)?;
    }
    let manifest = Manifest {
        tool: "ensel",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        outputs: files.iter().map(|(n, _)| n.to_string()).collect(),
        warnings,
        wall_time_seconds,
    };
    write_file(dir, "manifest.json", &(serde_json::to_string_pretty(&manifest)? + "\n"))
}

/// Output files of an error-curve run.
pub fn curve_files(report: &ExperimentReport) -> Vec<(&'static str, String)> {
    vec![
        ("curve_rows.csv", report.rows_csv()),
        ("curve_summary.csv", report.summary_csv()),
        ("selections.json", report.selections_json()),
    ]
}

/// Output files of a copula validation run.
pub fn copula_validation_files(fit: &CopulaFit, diag: &CopulaDiagnostics) -> Result<Vec<(&'static str, String)>> {
    Ok(vec![
        ("copula_model.json", fit.model.to_json()?),
        ("copula_pairs.csv", diag.scatter_csv()),
        ("copula_histogram.csv", diag.histogram_csv()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(DataSource::Equicorrelated {
            m: 4,
            rho: 0.3,
            alpha: 0.7,
            n: 400,
        });
        c.seed = 3;
        c.methods = vec![
            SelectionMethod::GreedyMiDirect,
            SelectionMethod::TopK,
            SelectionMethod::Exhaustive,
        ];
        c.split.num_splits = 3;
        c
    }

    #[test]
    fn derive_seed_separates_components() {
        let a = derive_seed(1, "split", &[]);
        assert_eq!(a, derive_seed(1, "split", &[]));
        assert_ne!(a, derive_seed(2, "split", &[]));
        assert_ne!(a, derive_seed(1, "data", &[]));
        assert_ne!(derive_seed(1, "mv_ties", &[0, 1]), derive_seed(1, "mv_ties", &[1, 0]));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::from_json(r#"{"data": {"kind": "csv", "path": "x.csv"}}"#).unwrap();
        assert_eq!(c.aggregators, Aggregator::ALL.to_vec());
        assert_eq!(c.split, SplitConfig::default());
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        for bad in [
            r#"{"data": {"kind": "csv", "path": "x"}, "methods": []}"#,
            r#"{"data": {"kind": "csv", "path": "x"}, "k_min": 0}"#,
            r#"{"data": {"kind": "csv", "path": "x"}, "bogus": 1}"#,
            r#"{"data": {"kind": "equicorrelated", "m": 3, "rho": 1.5, "alpha": 0.8, "n": 10}}"#,
            r#"{"data": {"kind": "csv", "path": "x"}, "methods": ["nope"]}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn report_shape_and_summary_consistency() {
        let c = small_config();
        let r = run_error_curve(&c).unwrap();
        assert_eq!(r.rows.len(), 3 * 3 * 4 * 3);
        for row in &r.rows {
            assert!((0.0..=1.0).contains(&row.test_error));
        }
        for s in &r.summary {
            let (mean, std) = mean_std(&r.errors_for(s.method, s.aggregator, s.k));
            assert_abs_diff_eq!(mean, s.mean, epsilon = 1e-12);
            assert_abs_diff_eq!(std, s.std, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_budget_is_method_independent() {
        let r = run_error_curve(&small_config()).unwrap();
        for agg in Aggregator::ALL {
            let base = r.errors_for(SelectionMethod::TopK, agg, 4);
            assert_eq!(r.errors_for(SelectionMethod::GreedyMiDirect, agg, 4), base);
            assert_eq!(r.errors_for(SelectionMethod::Exhaustive, agg, 4), base);
        }
    }

    #[test]
    fn exhaustive_over_cap_is_skipped_with_warning() {
        let mut c = small_config();
        c.exhaustive_cap = 4;
        let r = run_error_curve(&c).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.errors_for(SelectionMethod::Exhaustive, Aggregator::Map, 2).is_empty());
        assert_eq!(r.errors_for(SelectionMethod::Exhaustive, Aggregator::Map, 3).len(), 3);
    }

    #[test]
    fn reruns_are_identical() {
        let c = small_config();
        let a = run_error_curve(&c).unwrap();
        let b = run_error_curve(&c).unwrap();
        assert_eq!(a.rows_csv(), b.rows_csv());
        assert_eq!(a.selections_json(), b.selections_json());
    }

    #[test]
    fn k_range_outside_pool_is_config_error() {
        let mut c = small_config();
        c.k_max = Some(9);
        assert!(matches!(run_error_curve(&c), Err(Error::Config(_))));
    }

    #[test]
    fn saturation_single_model_matches_marginal() {
        let n = 100_000;
        let e = saturation_error(0.8, 0.5, 1, n, 4).unwrap();
        assert!((e - 0.2).abs() <= 3.0 * (0.16 / n as f64).sqrt(), "{e}");
    }

    #[test]
    fn saturation_near_independence_falls_well_below_single_model() {
        let e = saturation_error(0.8, 1e-4, 101, 20_000, 5).unwrap();
        assert!(e < 0.01, "{e}");
    }

    #[test]
    fn copula_validation_outputs() {
        let d = sample_equicorrelated(&EquicorrelatedSpec::new(5, 0.4, 0.75).unwrap(), 20_000, 1).unwrap();
        let (fit, diag) = run_copula_validation(&d, 20_000, 2).unwrap();
        assert_eq!(diag.scatter_csv().lines().count(), 1 + 10);
        for hist in [&diag.simultaneous_error_hist_empirical, &diag.simultaneous_error_hist_model] {
            assert_abs_diff_eq!(hist.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        }
        let within = diag
            .pairwise_joint_empirical
            .iter()
            .zip(&diag.pairwise_joint_model)
            .filter(|(e, m)| {
                let se = (*e * (1.0 - *e) / 20_000.0).sqrt() * 2f64.sqrt();
                (*e - *m).abs() <= 3.0 * se
            })
            .count();
        assert!(within as f64 >= 0.95 * 10.0, "{within}");
        assert!(fit.clamped_pairs.is_empty());
    }
}
