//! Multi-start minimisation of `Dₙ` (the DLSE fit) and the distance to the
//! solution set `𝓑₀` for the simulation designs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::criterion::{CriterionContext, Surrogate};
use crate::data::Setting;
use crate::optim::{bfgs, nelder_mead, Outcome, Tolerances};
use crate::par::map_range;
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScale {
    /// Scale random directions so that `Var(βᵀX) ≈ Var(Y) − Var(ε)`.
    VarianceMatched,
    /// Unit-norm random directions.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub n_starts: usize,
    /// Nelder–Mead iteration cap; `None` means `500·d`.
    pub max_iters: Option<usize>,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Polish the selected starts with BFGS on the analytic gradient.
    pub refine_with_gradient: bool,
    pub init_scale_rule: InitScale,
    /// Run the multi-start search on a cheap surrogate of `Dₙ` with residuals
    /// at this many rank-spaced responses and binned projections, then refine
    /// on the full data. `None`, or `n <= 100`, searches on `Dₙ` directly.
    pub screen_size: Option<usize>,
    /// Number of best screened starts refined on the full data.
    pub refine_top: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 8,
            max_iters: None,
            f_tol: 1e-10,
            x_tol: 1e-8,
            refine_with_gradient: true,
            init_scale_rule: InitScale::VarianceMatched,
            screen_size: Some(400),
            refine_top: 1,
        }
    }
}

impl FitOptions {
    /// Every start is optimised on the full data.
    pub fn exhaustive() -> Self {
        FitOptions { screen_size: None, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
        }
        if !(self.f_tol > 0.0 && self.x_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.refine_top == 0 {
            return Err(Error::InvalidArgument("refine_top must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub initial: Vec<f64>,
    /// Minimiser found by Nelder–Mead from `initial`.
    pub local_beta: Vec<f64>,
    /// Criterion at `local_beta`; the surrogate value if `screened`.
    pub local_value: f64,
    pub screened: bool,
    /// Full-data refinement, when this start was selected for it.
    pub refined_beta: Option<Vec<f64>>,
    pub refined_value: Option<f64>,
    pub converged: bool,
}

impl StartRecord {
    /// Criterion on the full data, if this start was evaluated there.
    pub fn full_value(&self) -> Option<f64> {
        self.refined_value.or(if self.screened { None } else { Some(self.local_value) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub criterion_value: f64,
    pub starts_tried: usize,
    pub converged: bool,
    pub best_start_index: usize,
    pub starts: Vec<StartRecord>,
    pub warnings: Vec<String>,
    /// Full-data criterion evaluations spent.
    pub evaluations: usize,
}

fn degenerate_warnings(ctx: &CriterionContext) -> Vec<String> {
    let mut warnings = Vec::new();
    let (_, cov) = ctx.covariates().mean_and_covariance();
    let d = ctx.d();
    for k in 0..d {
        if cov[k * d + k] == 0.0 {
            warnings.push(format!("covariate column {k} is constant"));
        }
    }
    if variance(ctx.sorted_responses()) == 0.0 {
        warnings.push("responses have zero variance".to_string());
    }
    warnings
}

fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn initial_points(ctx: &CriterionContext, opts: &FitOptions, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let d = ctx.d();
    let (_, cov) = ctx.covariates().mean_and_covariance();
    let var_y = variance(ctx.sorted_responses());
    let target = (var_y - ctx.noise().variance()).max(1e-6 * var_y.max(1e-12));
    (0..opts.n_starts)
        .map(|_| {
            let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            u.iter_mut().for_each(|x| *x /= norm);
            match opts.init_scale_rule {
                InitScale::Unit => u,
                InitScale::VarianceMatched => {
                    let mut q = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            q += u[a] * cov[a * d + b] * u[b];
                        }
                    }
                    let s = if q > 0.0 { (target / q).sqrt() } else { 1.0 };
                    u.iter().map(|x| x * s).collect()
                }
            }
        })
        .collect()
}

const SCREEN_MIN_N: usize = 100;

fn same_point(a: &[f64], b: &[f64]) -> bool {
    let scale = a.iter().map(|v| v.abs()).fold(1.0, f64::max);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-3 * scale)
}

fn simplex_step(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    vec![0.1 * norm.max(1e-3); x.len()]
}

fn local_search(ctx: &CriterionContext, x0: &[f64], tol: Tolerances) -> Outcome {
    nelder_mead(|b| ctx.value(b).unwrap_or(f64::INFINITY), x0, &simplex_step(x0), tol)
}

fn refine(ctx: &CriterionContext, x0: &[f64], opts: &FitOptions, tol: Tolerances) -> Result<Outcome> {
    if opts.refine_with_gradient {
        let scale = x0.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let tol = Tolerances { max_iters: 200 * x0.len(), ..tol };
        bfgs(|b| ctx.value_and_gradient(b).ok(), x0, 0.01 * scale, tol)
            .ok_or_else(|| Error::NonFinite(format!("criterion at refinement start {x0:?}")))
    } else {
        let step: Vec<f64> = simplex_step(x0).iter().map(|s| 0.2 * s).collect();
        Ok(nelder_mead(|b| ctx.value(b).unwrap_or(f64::INFINITY), x0, &step, tol))
    }
}

/// Minimises `Dₙ` from `n_starts` random starting points.
///
/// Starts are random directions, scaled per `init_scale_rule`. Each start is
/// optimised with Nelder–Mead; the best ones are polished on the full data
/// (BFGS when `refine_with_gradient`). The returned `beta_hat` has the
/// smallest full-data criterion value among refined starts, ties going to the
/// lower start index. `converged` reports whether that run met its tolerance.
pub fn fit_dlse(ctx: &CriterionContext, opts: &FitOptions, seed: u64) -> Result<FitResult> {
    opts.validate()?;
    let (n, d) = (ctx.n(), ctx.d());
    if n < d {
        return Err(Error::InvalidArgument(format!("need n >= d, got n = {n}, d = {d}")));
    }
    let warnings = degenerate_warnings(ctx);
    let mut rng = stream_rng(seed, 0);
    let starts = initial_points(ctx, opts, &mut rng);
    let tol = Tolerances {
        max_iters: opts.max_iters.unwrap_or(500 * d),
        f_tol: opts.f_tol,
        x_tol: opts.x_tol,
    };

    let surrogate = opts.screen_size.filter(|_| n > SCREEN_MIN_N).map(|m| Surrogate::new(ctx, m));
    let screen = surrogate.is_some();
    // the surrogate only has to rank basins; refinement restores full precision
    let screen_tol = Tolerances { f_tol: tol.f_tol.max(1e-9), x_tol: tol.x_tol.max(1e-4), ..tol };
    let locals: Vec<Outcome> = match &surrogate {
        Some(sur) => map_range(starts.len(), 2, |k| {
            nelder_mead(|b| sur.value(b), &starts[k], &simplex_step(&starts[k]), screen_tol)
        }),
        None => map_range(starts.len(), 2, |k| local_search(ctx, &starts[k], tol)),
    };
    let mut evaluations = if screen { 0 } else { locals.iter().map(|o| o.evaluations).sum() };

    let mut records: Vec<StartRecord> = starts
        .iter()
        .zip(&locals)
        .enumerate()
        .map(|(index, (initial, out))| StartRecord {
            index,
            initial: initial.clone(),
            local_beta: out.x.clone(),
            local_value: out.f,
            screened: screen,
            refined_beta: None,
            refined_value: None,
            converged: out.converged,
        })
        .collect();

    let mut ranked: Vec<usize> = (0..records.len()).collect();
    ranked.sort_by(|&a, &b| records[a].local_value.total_cmp(&records[b].local_value).then(a.cmp(&b)));
    let n_refine = if screen { opts.refine_top.min(ranked.len()) } else { 1 };
    let needs_refine = screen || opts.refine_with_gradient;

    if needs_refine {
        // skip starts that landed on an already chosen local minimum
        let mut chosen: Vec<usize> = Vec::with_capacity(n_refine);
        for &k in &ranked {
            if chosen.len() == n_refine {
                break;
            }
            let b = &records[k].local_beta;
            if chosen.iter().all(|&c| !same_point(&records[c].local_beta, b)) {
                chosen.push(k);
            }
        }
        let refined: Vec<Result<Outcome>> =
            map_range(chosen.len(), 2, |k| refine(ctx, &records[chosen[k]].local_beta, opts, tol));
        for (&k, out) in chosen.iter().zip(refined) {
            let out = out?;
            evaluations += out.evaluations;
            let rec = &mut records[k];
            // the refinement never moves uphill from an unscreened local minimum
            let keep_local = !rec.screened && rec.local_value < out.f;
            let (beta, value) = if keep_local { (rec.local_beta.clone(), rec.local_value) } else { (out.x, out.f) };
            rec.refined_beta = Some(beta);
            rec.refined_value = Some(value);
            rec.converged = out.converged || (keep_local && rec.converged);
        }
    }

    let best = records
        .iter()
        .filter_map(|r| r.full_value().map(|v| (r.index, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NonFinite("no start produced a finite criterion".into()))?;
    let rec = &records[best];
    let beta_hat = rec.refined_beta.clone().unwrap_or_else(|| rec.local_beta.clone());
    let criterion_value = rec.full_value().expect("best start has a full-data value");
    Ok(FitResult {
        converged: rec.converged,
        best_start_index: best,
        beta_hat,
        criterion_value,
        starts_tried: records.len(),
        starts: records,
        warnings,
        evaluations,
    })
}

/// Euclidean distance from `beta` to `𝓑₀`.
///
/// For the Gaussian designs `𝓑₀` is the sphere `‖β‖ = ‖β₀‖`; for the Gamma
/// designs it is the single point `β₀`.
pub fn dist_to_solution_set(beta: &[f64], setting: Setting) -> Result<f64> {
    let b0 = setting.beta0();
    if beta.len() != b0.len() {
        return Err(Error::DimensionMismatch { expected: b0.len(), got: beta.len() });
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(if setting.identifiable() {
        let diff: Vec<f64> = beta.iter().zip(b0).map(|(a, b)| a - b).collect();
        norm(&diff)
    } else {
        (norm(beta) - norm(b0)).abs()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_setting, Covariates, Dataset};
    use crate::noise::NoiseModel;

    #[test]
    fn distance_examples() {
        let r = 34f64.sqrt();
        assert!(dist_to_solution_set(&[r, 0.0], Setting::A).unwrap() < 1e-15);
        assert_eq!(dist_to_solution_set(&[1.0, 2.0], Setting::C).unwrap(), 0.0);
        assert!((dist_to_solution_set(&[0.0, 0.0], Setting::A).unwrap() - 5.830_951_894_845_301).abs() < 1e-12);
        assert!(dist_to_solution_set(&[0.0], Setting::B).is_err());
    }

    #[test]
    fn rejects_bad_options_and_small_n() {
        let ds = sample_setting(Setting::B, 2, 1.0, 1, false).unwrap();
        let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        assert!(fit_dlse(&ctx, &FitOptions::default(), 0).is_err());
        let bad = FitOptions { n_starts: 0, ..FitOptions::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn best_is_minimum_over_full_data_records() {
        let ds = sample_setting(Setting::C, 300, 0.5, 4, false).unwrap();
        let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(0.5).unwrap()).unwrap();
        for opts in [FitOptions::default(), FitOptions { screen_size: Some(120), ..FitOptions::default() }] {
            let fit = fit_dlse(&ctx, &opts, 9).unwrap();
            assert_eq!(fit.starts_tried, 8);
            let min = fit.starts.iter().filter_map(StartRecord::full_value).fold(f64::INFINITY, f64::min);
            assert!(fit.criterion_value <= min + 1e-15);
            assert!((fit.criterion_value - ctx.value(&fit.beta_hat).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_data_warns_but_fits() {
        let x = Covariates::from_rows(&(0..20).map(|i| vec![1.0, i as f64]).collect::<Vec<_>>()).unwrap();
        let ds = Dataset::new(x, vec![2.0; 20]).unwrap();
        let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        let fit = fit_dlse(&ctx, &FitOptions::default(), 3).unwrap();
        assert_eq!(fit.warnings.len(), 2);
        assert!(fit.criterion_value.is_finite());
    }

    #[test]
    fn fit_is_deterministic() {
        let ds = sample_setting(Setting::A, 200, 1.0, 2, false).unwrap();
        let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        let a = fit_dlse(&ctx, &FitOptions::default(), 5).unwrap();
        let b = fit_dlse(&ctx, &FitOptions::default(), 5).unwrap();
        assert_eq!(a, b);
    }
}
