//! Monte Carlo engine for the simulation studies.
//!
//! * [`run_rate_study`]: `W₁(μ*_{β̂ₙ}, μ₀)` over replications and sample sizes,
//!   with Monte Carlo moments, the 99% quantile and their log-linear slopes.
//! * [`run_comparison`]: conditional versus unconditional prediction of the
//!   latent `z` on linked test pairs (MSE ratios, coverage, length ratio).
//! * [`run_mse_grid`]: MSE of the conditional mean and mode over `(n, σ²)`.
//!
//! Every replication draws from its own RNG streams keyed by
//! `(master_seed, σ², purpose, n, rep)`, and results are reduced in
//! replication order, so output does not depend on the number of workers.

use serde::{Deserialize, Serialize};

use crate::conditional::{unconditional_baselines, ConditionalEngine, FyVariant};
use crate::criterion::CriterionContext;
use crate::data::{project, sample_setting_with, sample_test_pairs, Setting};
use crate::density::{default_bandwidth, kde};
use crate::dlse::{dist_to_solution_set, fit_dlse, FitOptions};
use crate::empirical::EmpiricalDist;
use crate::kernel::KernelSpec;
use crate::noise::NoiseModel;
use crate::par::map_range;
use crate::rng::{derive_seed, stream_key, stream_rng, Purpose};
use crate::wasserstein::{loglinear_slope, w1_vs_reference_with};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rates,
    Comparison,
    MseGrid,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(ExperimentKind::Rates),
            "comparison" => Ok(ExperimentKind::Comparison),
            "mse-grid" | "mse_grid" => Ok(ExperimentKind::MseGrid),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}` (expected rates, comparison or mse-grid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            other => Err(Error::InvalidArgument(format!("unknown scale `{other}` (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub n_list: Vec<usize>,
    /// Noise variances. The rate and comparison studies use each entry as a
    /// separate cell; both default to `[1.0]`.
    pub sigma2_list: Vec<f64>,
    pub reps: usize,
    /// Index of the first replication, so a run can be split into rep ranges.
    pub rep_offset: usize,
    pub test_size: usize,
    pub reference_size: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub fy_variant: FyVariant,
    /// KDE bandwidth override; `None` uses `1.06 · sd · n^{-1/8}`.
    pub bandwidth: Option<f64>,
    pub fit: FitOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(ExperimentKind::Rates, Scale::Desk, Setting::A)
    }
}

impl ExperimentConfig {
    /// Default grid for an experiment at desk or full scale.
    pub fn preset(kind: ExperimentKind, scale: Scale, setting: Setting) -> Self {
        let reps = match scale {
            Scale::Desk => 100,
            Scale::Full => 500,
        };
        let (n_list, sigma2_list, reference_size) = match (kind, scale) {
            (ExperimentKind::Rates, Scale::Desk) => (vec![500, 1000, 2000, 4000], vec![1.0], 100_000),
            (ExperimentKind::Rates, Scale::Full) => (vec![1000, 2000, 3000, 4000, 5000], vec![1.0], 1_000_000),
            (ExperimentKind::Comparison, _) => (vec![50, 100, 500], vec![1.0], 100_000),
            (ExperimentKind::MseGrid, _) => (vec![50, 100, 500], vec![0.5, 1.0, 1.5, 2.0, 2.5], 100_000),
        };
        ExperimentConfig {
            setting,
            n_list,
            sigma2_list,
            reps,
            rep_offset: 0,
            test_size: 100,
            reference_size,
            alpha: 0.05,
            master_seed: 1,
            fy_variant: FyVariant::Integrated,
            bandwidth: None,
            fit: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.test_size == 0 {
            return bad("test_size must be at least 1".into());
        }
        if self.reference_size == 0 {
            return bad("reference_size must be at least 1".into());
        }
        if self.n_list.is_empty() || self.sigma2_list.is_empty() {
            return bad("n_list and sigma2_list must be nonempty".into());
        }
        let d = self.setting.dim();
        if let Some(&n) = self.n_list.iter().find(|&&n| n < d.max(2) || n >= 1 << 24) {
            return bad(format!("sample size {n} must lie in [max(d, 2), 2^24) for setting {}", self.setting));
        }
        if let Some(s) = self.sigma2_list.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("noise variances must be positive, got {s}"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("bandwidth must be positive, got {h}"));
            }
        }
        if self.rep_offset + self.reps > u32::MAX as usize {
            return bad("replication indices must fit in 32 bits".into());
        }
        Ok(())
    }

    fn tasks(&self) -> Vec<Task> {
        let mut tasks = Vec::new();
        for &sigma2 in &self.sigma2_list {
            for &n in &self.n_list {
                for rep in self.rep_offset..self.rep_offset + self.reps {
                    tasks.push(Task { n, sigma2, rep });
                }
            }
        }
        tasks
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    n: usize,
    sigma2: f64,
    rep: usize,
}

impl Task {
    fn cell_seed(&self, master: u64) -> u64 {
        derive_seed(master, self.sigma2.to_bits())
    }

    fn stream(&self, master: u64, purpose: Purpose) -> crate::rng::StreamRng {
        stream_rng(self.cell_seed(master), stream_key(purpose, self.n as u32, self.rep as u32))
    }

    fn seed(&self, master: u64, purpose: Purpose) -> u64 {
        derive_seed(self.cell_seed(master), stream_key(purpose, self.n as u32, self.rep as u32))
    }
}

/// Monte Carlo moments `(1/J) Σ vⱼᵏ` and an empirical quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub moments: Vec<f64>,
    pub quantile: f64,
}

/// Moments for each `k` in `k_list` and the `q`-quantile at order-statistic
/// rank `⌈qJ⌉` (the 495th of 500 values for `q = 0.99`).
pub fn mc_aggregate(values: &[f64], k_list: &[u32], q: f64) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::Empty("no Monte Carlo values"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in (0, 1], got {q}")));
    }
    let j = values.len() as f64;
    let moments = k_list.iter().map(|&k| values.iter().map(|v| v.powi(k as i32)).sum::<f64>() / j).collect();
    let quantile = EmpiricalDist::new(values.to_vec())?.quantile(q);
    Ok(Aggregate { moments, quantile })
}

/// Stops the run when more than 1% of replications failed.
fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed * 100 > total {
        Err(Error::TooManyFailures { failed, total })
    } else {
        Ok(())
    }
}

fn fit_replication(cfg: &ExperimentConfig, task: &Task) -> Result<(Vec<f64>, EmpiricalDist, bool)> {
    let sigma = task.sigma2.sqrt();
    let mut rng = task.stream(cfg.master_seed, Purpose::Data);
    let ds = sample_setting_with(cfg.setting, task.n, sigma, false, &mut rng)?;
    let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(sigma)?)?;
    let fit = fit_dlse(&ctx, &cfg.fit, task.seed(cfg.master_seed, Purpose::Fit))?;
    let atoms = project(&ds.covariates, &fit.beta_hat)?;
    Ok((fit.beta_hat, atoms, fit.converged))
}

// ---------------------------------------------------------------- rate study

/// One replication of the rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: usize,
    pub rep: usize,
    pub w1: f64,
    /// Distance from `β̂ₙ` to the solution set.
    pub dist: f64,
    pub beta_hat: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub reps_ok: usize,
    pub failures: usize,
    pub nonconverged: usize,
    /// `W̄₁⁽¹⁾, W̄₁⁽²⁾, W̄₁⁽³⁾`.
    pub moments: [f64; 3],
    pub q99: f64,
    /// Median over replications of `√n · d(β̂ₙ, 𝓑₀)`.
    pub median_scaled_dist: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    pub setting: Setting,
    pub sigma2: f64,
    pub rows: Vec<RateRow>,
    /// `None` with fewer than two sample sizes.
    pub slopes: Option<Slopes>,
    pub records: Vec<RateRecord>,
}

impl RateStudyResult {
    /// Aggregates per-replication records; `failures` counts failed replications per `n`.
    pub fn from_records(
        setting: Setting,
        sigma2: f64,
        mut records: Vec<RateRecord>,
        failures: &[(usize, usize)],
    ) -> Result<Self> {
        records.sort_by_key(|r| (r.n, r.rep));
        let mut ns: Vec<usize> = records.iter().map(|r| r.n).chain(failures.iter().map(|f| f.0)).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut rows = Vec::with_capacity(ns.len());
        for &n in &ns {
            let recs: Vec<&RateRecord> = records.iter().filter(|r| r.n == n).collect();
            let failed: usize = failures.iter().filter(|f| f.0 == n).map(|f| f.1).sum();
            if recs.is_empty() {
                return Err(Error::TooManyFailures { failed, total: failed });
            }
            let w1: Vec<f64> = recs.iter().map(|r| r.w1).collect();
            let agg = mc_aggregate(&w1, &[1, 2, 3], 0.99)?;
            let mut scaled: Vec<f64> = recs.iter().map(|r| (n as f64).sqrt() * r.dist).collect();
            scaled.sort_by(f64::total_cmp);
            rows.push(RateRow {
                n,
                reps_ok: recs.len(),
                failures: failed,
                nonconverged: recs.iter().filter(|r| !r.converged).count(),
                moments: [agg.moments[0], agg.moments[1], agg.moments[2]],
                q99: agg.quantile,
                median_scaled_dist: median_sorted(&scaled),
            });
        }
        let slopes = if rows.len() >= 2 {
            let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let col = |f: &dyn Fn(&RateRow) -> f64| loglinear_slope(&x, &rows.iter().map(f).collect::<Vec<_>>());
            Some(Slopes {
                m1: col(&|r| r.moments[0])?,
                m2: col(&|r| r.moments[1])?,
                m3: col(&|r| r.moments[2])?,
                q99: col(&|r| r.q99)?,
            })
        } else {
            None
        };
        Ok(RateStudyResult { setting, sigma2, rows, slopes, records })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn rate_replication(cfg: &ExperimentConfig, task: &Task) -> Result<RateRecord> {
    let (beta_hat, atoms, converged) = fit_replication(cfg, task)?;
    let mut rng = task.stream(cfg.master_seed, Purpose::Reference);
    let setting = cfg.setting;
    let w1 = w1_vs_reference_with(&atoms, |r| setting.sample_latent(r), cfg.reference_size, &mut rng)?;
    Ok(RateRecord { n: task.n, rep: task.rep, w1, dist: dist_to_solution_set(&beta_hat, setting)?, beta_hat, converged })
}

/// Rate study for the first entry of `sigma2_list`.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<RateStudyResult> {
    cfg.validate()?;
    let sigma2 = cfg.sigma2_list[0];
    let cfg1 = ExperimentConfig { sigma2_list: vec![sigma2], ..cfg.clone() };
    let tasks = cfg1.tasks();
    let out = map_range(tasks.len(), 1, |k| rate_replication(&cfg1, &tasks[k]));
    let mut records = Vec::new();
    let mut failures: Vec<(usize, usize)> = Vec::new();
    for (task, res) in tasks.iter().zip(out) {
        match res {
            Ok(r) => records.push(r),
            Err(Error::NonFinite(_)) => failures.push((task.n, 1)),
            Err(e) => return Err(e),
        }
    }
    check_failures(failures.len(), tasks.len())?;
    RateStudyResult::from_records(cfg.setting, sigma2, records, &failures)
}

// ------------------------------------------------------ prediction studies

/// Per-replication prediction metrics on `T` linked test pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub n: usize,
    pub sigma2: f64,
    pub rep: usize,
    pub mse_mean_cond: f64,
    pub mse_mode_cond: f64,
    pub mse_mean_uncond: f64,
    pub mse_mode_uncond: f64,
    pub coverage_cond: f64,
    pub coverage_uncond: f64,
    pub len_cond: f64,
    pub len_uncond: f64,
    /// Test responses outside the estimated support of `f̂_Y`, left out of the averages.
    pub skipped: usize,
}

/// Which predictors fill the conditional columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Predictor {
    /// Mean, mode and interval of `f̂_{Z|Y}(·|y)`.
    Conditional,
    /// The unconditional baselines; the ratios are then 1 by construction.
    Unconditional,
}

fn prediction_replication(cfg: &ExperimentConfig, task: &Task, predictor: Predictor) -> Result<PredictionRecord> {
    let (_, atoms, _) = fit_replication(cfg, task)?;
    let sigma = task.sigma2.sqrt();
    let noise = NoiseModel::gaussian(sigma)?;
    let h = match cfg.bandwidth {
        Some(h) => h,
        None => default_bandwidth(&atoms)?.value,
    };
    let fz = kde(&atoms, KernelSpec::gaussian(h)?)?;
    let base = unconditional_baselines(&atoms, &fz, cfg.alpha)?;
    let engine = ConditionalEngine::new(&fz, noise, cfg.fy_variant)?;
    let mut rng = task.stream(cfg.master_seed, Purpose::TestPairs);
    let pairs = sample_test_pairs(cfg.setting, cfg.test_size, sigma, &mut rng);

    let mut acc = [0.0f64; 8];
    let mut used = 0usize;
    for &(z, y) in &pairs {
        let (mean, mode, lo, hi) = match predictor {
            Predictor::Unconditional => (base.mean, base.mode, base.lo, base.hi),
            Predictor::Conditional => match engine.summarize(y, cfg.alpha) {
                Ok(s) => (s.mean, s.mode, s.lo, s.hi),
                Err(Error::OutsideSupport { .. }) => continue,
                Err(e) => return Err(e),
            },
        };
        used += 1;
        let terms = [
            (mean - z).powi(2),
            (mode - z).powi(2),
            (base.mean - z).powi(2),
            (base.mode - z).powi(2),
            f64::from(u8::from(lo <= z && z <= hi)),
            f64::from(u8::from(base.lo <= z && z <= base.hi)),
            hi - lo,
            base.hi - base.lo,
        ];
        acc.iter_mut().zip(terms).for_each(|(a, t)| *a += t);
    }
    if used == 0 {
        return Err(Error::NonFinite("every test response fell outside the estimated support".into()));
    }
    let t = used as f64;
    Ok(PredictionRecord {
        n: task.n,
        sigma2: task.sigma2,
        rep: task.rep,
        mse_mean_cond: acc[0] / t,
        mse_mode_cond: acc[1] / t,
        mse_mean_uncond: acc[2] / t,
        mse_mode_uncond: acc[3] / t,
        coverage_cond: acc[4] / t,
        coverage_uncond: acc[5] / t,
        len_cond: acc[6] / t,
        len_uncond: acc[7] / t,
        skipped: pairs.len() - used,
    })
}

fn run_predictions(cfg: &ExperimentConfig, predictor: Predictor) -> Result<(Vec<PredictionRecord>, Vec<(usize, f64)>)> {
    cfg.validate()?;
    let tasks = cfg.tasks();
    let out = map_range(tasks.len(), 1, |k| prediction_replication(cfg, &tasks[k], predictor));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (task, res) in tasks.iter().zip(out) {
        match res {
            Ok(r) => records.push(r),
            Err(Error::NonFinite(_)) => failures.push((task.n, task.sigma2)),
            Err(e) => return Err(e),
        }
    }
    check_failures(failures.len(), tasks.len())?;
    Ok((records, failures))
}

/// Averages of the per-replication metrics for one `(n, σ²)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub n: usize,
    pub sigma2: f64,
    pub reps_ok: usize,
    pub failures: usize,
    pub skipped: usize,
    pub mse_mean_cond: f64,
    pub mse_mode_cond: f64,
    pub mse_mean_uncond: f64,
    pub mse_mode_uncond: f64,
    /// `R_Ê`: conditional over unconditional mean-estimator MSE.
    pub r_mean: f64,
    /// `R_M̂`: conditional over unconditional mode-estimator MSE.
    pub r_mode: f64,
    pub coverage_cond: f64,
    pub coverage_uncond: f64,
    /// Mean conditional interval length over mean unconditional length.
    pub length_ratio: f64,
}

fn summarize_cells(mut records: Vec<PredictionRecord>, failures: &[(usize, f64)]) -> Result<Vec<PredictionRow>> {
    records.sort_by(|a, b| a.sigma2.total_cmp(&b.sigma2).then(a.n.cmp(&b.n)).then(a.rep.cmp(&b.rep)));
    let mut cells: Vec<(usize, f64)> = records.iter().map(|r| (r.n, r.sigma2)).chain(failures.iter().copied()).collect();
    cells.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    cells.dedup();
    let mut rows = Vec::with_capacity(cells.len());
    for (n, sigma2) in cells {
        let recs: Vec<&PredictionRecord> = records.iter().filter(|r| r.n == n && r.sigma2 == sigma2).collect();
        let failed = failures.iter().filter(|f| f.0 == n && f.1 == sigma2).count();
        if recs.is_empty() {
            return Err(Error::TooManyFailures { failed, total: failed });
        }
        let j = recs.len() as f64;
        let avg = |f: fn(&PredictionRecord) -> f64| recs.iter().map(|r| f(r)).sum::<f64>() / j;
        let mse_mean_cond = avg(|r| r.mse_mean_cond);
        let mse_mode_cond = avg(|r| r.mse_mode_cond);
        let mse_mean_uncond = avg(|r| r.mse_mean_uncond);
        let mse_mode_uncond = avg(|r| r.mse_mode_uncond);
        rows.push(PredictionRow {
            n,
            sigma2,
            reps_ok: recs.len(),
            failures: failed,
            skipped: recs.iter().map(|r| r.skipped).sum(),
            mse_mean_cond,
            mse_mode_cond,
            mse_mean_uncond,
            mse_mode_uncond,
            r_mean: mse_mean_cond / mse_mean_uncond,
            r_mode: mse_mode_cond / mse_mode_uncond,
            coverage_cond: avg(|r| r.coverage_cond),
            coverage_uncond: avg(|r| r.coverage_uncond),
            length_ratio: avg(|r| r.len_cond) / avg(|r| r.len_uncond),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub setting: Setting,
    pub rows: Vec<PredictionRow>,
    pub records: Vec<PredictionRecord>,
}

impl ComparisonResult {
    pub fn from_records(setting: Setting, records: Vec<PredictionRecord>, failures: &[(usize, f64)]) -> Result<Self> {
        let rows = summarize_cells(records.clone(), failures)?;
        let mut records = records;
        records.sort_by(|a, b| a.sigma2.total_cmp(&b.sigma2).then(a.n.cmp(&b.n)).then(a.rep.cmp(&b.rep)));
        Ok(ComparisonResult { setting, rows, records })
    }
}

/// Conditional against unconditional prediction for every `(n, σ²)` cell.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonResult> {
    run_comparison_with(cfg, Predictor::Conditional)
}

pub fn run_comparison_with(cfg: &ExperimentConfig, predictor: Predictor) -> Result<ComparisonResult> {
    let (records, failures) = run_predictions(cfg, predictor)?;
    ComparisonResult::from_records(cfg.setting, records, &failures)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    pub sigma2: f64,
    pub reps_ok: usize,
    pub failures: usize,
    pub mse_mean: f64,
    pub mse_mode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseGridResult {
    pub setting: Setting,
    pub rows: Vec<MseRow>,
    pub records: Vec<PredictionRecord>,
}

/// MSE of the conditional mean and mode over the `(n, σ²)` grid.
pub fn run_mse_grid(cfg: &ExperimentConfig) -> Result<MseGridResult> {
    let cmp = run_comparison(cfg)?;
    let rows = cmp
        .rows
        .iter()
        .map(|r| MseRow {
            n: r.n,
            sigma2: r.sigma2,
            reps_ok: r.reps_ok,
            failures: r.failures,
            mse_mean: r.mse_mean_cond,
            mse_mode: r.mse_mode_cond,
        })
        .collect();
    Ok(MseGridResult { setting: cfg.setting, rows, records: cmp.records })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            n_list: vec![60, 120],
            reps: 3,
            test_size: 10,
            reference_size: 2000,
            master_seed: 11,
            ..ExperimentConfig::preset(kind, Scale::Desk, Setting::A)
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = mc_aggregate(&[1.0, 2.0, 3.0], &[1, 2], 0.5).unwrap();
        assert_eq!(a.moments[0], 2.0);
        assert!((a.moments[1] - 14.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.quantile, 2.0);
        let v: Vec<f64> = (1..=500).rev().map(f64::from).collect();
        assert_eq!(mc_aggregate(&v, &[1], 0.99).unwrap().quantile, 495.0);
        assert!(mc_aggregate(&[], &[1], 0.5).is_err());
    }

    #[test]
    fn injected_power_law_gives_exact_slopes() {
        let records: Vec<RateRecord> = [500usize, 1000, 2000, 4000]
            .iter()
            .flat_map(|&n| {
                (0..5).map(move |rep| RateRecord {
                    n,
                    rep,
                    w1: 3.0 / (n as f64).sqrt(),
                    dist: 0.0,
                    beta_hat: vec![],
                    converged: true,
                })
            })
            .collect();
        let res = RateStudyResult::from_records(Setting::A, 1.0, records, &[]).unwrap();
        let s = res.slopes.unwrap();
        assert!((s.m1 + 0.5).abs() < 1e-12);
        assert!((s.m2 + 1.0).abs() < 1e-12);
        assert!((s.m3 + 1.5).abs() < 1e-12);
        assert!((s.q99 + 0.5).abs() < 1e-12);
    }

    #[test]
    fn failure_threshold() {
        assert!(check_failures(1, 100).is_ok());
        assert!(matches!(check_failures(2, 100), Err(Error::TooManyFailures { failed: 2, total: 100 })));
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny(ExperimentKind::Rates);
        assert!(cfg.validate().is_ok());
        cfg.n_list = vec![1];
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { reps: 0, ..tiny(ExperimentKind::Rates) };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { sigma2_list: vec![-1.0], ..tiny(ExperimentKind::Rates) };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rate_study_is_deterministic_and_splits_by_rep_range() {
        let cfg = tiny(ExperimentKind::Rates);
        let a = run_rate_study(&cfg).unwrap();
        assert_eq!(a, run_rate_study(&cfg).unwrap());
        let first = run_rate_study(&ExperimentConfig { reps: 2, ..cfg.clone() }).unwrap();
        let second = run_rate_study(&ExperimentConfig { reps: 1, rep_offset: 2, ..cfg.clone() }).unwrap();
        let merged = RateStudyResult::from_records(
            Setting::A,
            1.0,
            first.records.into_iter().chain(second.records).collect(),
            &[],
        )
        .unwrap();
        assert_eq!(merged, a);
    }

    #[test]
    fn unconditional_injection_gives_unit_ratios() {
        let cfg = ExperimentConfig { n_list: vec![80], ..tiny(ExperimentKind::Comparison) };
        let res = run_comparison_with(&cfg, Predictor::Unconditional).unwrap();
        let row = &res.rows[0];
        assert_eq!(row.r_mean, 1.0);
        assert_eq!(row.r_mode, 1.0);
        assert_eq!(row.length_ratio, 1.0);
        assert_eq!(row.coverage_cond, row.coverage_uncond);
    }

    #[test]
    fn comparison_favours_conditional_prediction() {
        let cfg = ExperimentConfig { n_list: vec![80], ..tiny(ExperimentKind::Comparison) };
        let res = run_comparison(&cfg).unwrap();
        let row = &res.rows[0];
        assert!(row.r_mean < 0.2 && row.r_mode < 0.2, "{row:?}");
        assert!(row.length_ratio < 0.5);
        assert_eq!(res.records.len(), 3);
    }
}
