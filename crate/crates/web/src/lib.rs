//! Browser bindings: simulate and fit a setting, condition on a response,
//! and map the criterion surface for two-dimensional settings.
//!
//! Every method returns a JSON string for the page script to parse.

use serde::Serialize;
use unlinked_deconv::conditional::ConditionalEngine;
use unlinked_deconv::data::{project, sample_setting};
use unlinked_deconv::density::{default_bandwidth, kde};
use unlinked_deconv::dlse::dist_to_solution_set;
use unlinked_deconv::{
    fit_dlse, CriterionContext, Dataset, DensityEstimate, FitOptions, FyVariant, KernelSpec,
    NoiseModel, Setting,
};
use wasm_bindgen::prelude::*;

fn err_text(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

#[derive(Serialize)]
struct FitView {
    setting: String,
    n: usize,
    sigma: f64,
    beta0: Vec<f64>,
    beta_hat: Vec<f64>,
    dist: f64,
    criterion: f64,
    converged: bool,
    bandwidth: f64,
    /// KDE of the fitted projections on a grid.
    kde: Vec<(f64, f64)>,
    /// Histogram of the true latent values `β₀ᵀXᵢ` as (left edge, density).
    hist: Vec<(f64, f64)>,
    hist_width: f64,
}

#[derive(Serialize)]
struct ConditionalView {
    y0: f64,
    mean: f64,
    mode: f64,
    lo: f64,
    hi: f64,
    curve: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct Landscape {
    b1: Vec<f64>,
    b2: Vec<f64>,
    /// Row-major values, `values[i * b1.len() + j]` at `(b1[j], b2[i])`.
    values: Vec<f64>,
    beta0: Vec<f64>,
    beta_hat: Vec<f64>,
    /// False when only `±β₀` is determined.
    identifiable: bool,
}

fn histogram(values: &[f64], bins: usize) -> (Vec<(f64, f64)>, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(1e-12);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let scale = 1.0 / (values.len() as f64 * width);
    let out = counts.iter().enumerate().map(|(k, &c)| (lo + k as f64 * width, c as f64 * scale)).collect();
    (out, width)
}

/// One simulated dataset with its fit and the estimated latent density.
#[wasm_bindgen]
pub struct Demo {
    setting: Setting,
    dataset: Dataset,
    noise: NoiseModel,
    beta_hat: Vec<f64>,
    fz: DensityEstimate,
    view: FitView,
}

impl Demo {
    /// Simulates `n` unlinked observations from `setting` with noise sd
    /// `sigma`, fits the estimator and builds the kernel density estimate.
    pub fn build(setting: &str, n: usize, sigma: f64, seed: u64) -> Result<Demo, String> {
        let setting: Setting = setting.parse().map_err(err_text)?;
        let dataset = sample_setting(setting, n, sigma, seed, false).map_err(err_text)?;
        let noise = NoiseModel::gaussian(sigma).map_err(err_text)?;
        let ctx = CriterionContext::new(&dataset, noise).map_err(err_text)?;
        let fit = fit_dlse(&ctx, &FitOptions::default(), seed).map_err(err_text)?;
        let atoms = project(&dataset.covariates, &fit.beta_hat).map_err(err_text)?;
        let h = default_bandwidth(&atoms).map_err(err_text)?.value;
        let fz = kde(&atoms, KernelSpec::gaussian(h).map_err(err_text)?).map_err(err_text)?;
        let truth = project(&dataset.covariates, setting.beta0()).map_err(err_text)?;
        let (hist, hist_width) = histogram(truth.atoms(), 40);
        let (lo, hi) = fz.support_hint();
        let view = FitView {
            setting: setting.to_string(),
            n,
            sigma,
            beta0: setting.beta0().to_vec(),
            dist: dist_to_solution_set(&fit.beta_hat, setting).map_err(err_text)?,
            beta_hat: fit.beta_hat.clone(),
            criterion: fit.criterion_value,
            converged: fit.converged,
            bandwidth: h,
            kde: fz.tabulate(lo, hi, 300),
            hist,
            hist_width,
        };
        Ok(Demo { setting, dataset, noise, beta_hat: fit.beta_hat, fz, view })
    }

    /// Conditional mean, mode, `1 - alpha` credible interval and density
    /// of the latent value given the response `y0`.
    pub fn conditional_json(&self, y0: f64, alpha: f64) -> Result<String, String> {
        let engine = ConditionalEngine::new(&self.fz, self.noise, FyVariant::Integrated).map_err(err_text)?;
        let cd = engine.condition(y0).map_err(err_text)?;
        let ci = cd.credible_interval(alpha).map_err(err_text)?;
        let (lo, hi) = cd.support_hint();
        let curve = (0..300)
            .map(|i| {
                let z = lo + (hi - lo) * i as f64 / 299.0;
                (z, cd.density(z))
            })
            .collect();
        Ok(to_json(&ConditionalView { y0, mean: cd.mean(), mode: cd.mode(), lo: ci.lo, hi: ci.hi, curve }))
    }

    /// Criterion values on a `k × k` grid covering `±radius` around the
    /// origin. Only for two-dimensional settings.
    pub fn landscape_json(&self, k: usize, radius: f64) -> Result<String, String> {
        if self.setting.dim() != 2 {
            return Err(err_text("the criterion surface is only drawn for two-dimensional settings"));
        }
        if k < 2 || !(radius > 0.0) {
            return Err(err_text("grid needs k >= 2 and a positive radius"));
        }
        let ctx = CriterionContext::new(&self.dataset, self.noise).map_err(err_text)?;
        let axis: Vec<f64> = (0..k).map(|i| -radius + 2.0 * radius * i as f64 / (k - 1) as f64).collect();
        let mut values = Vec::with_capacity(k * k);
        for &b2 in &axis {
            for &b1 in &axis {
                values.push(ctx.value(&[b1, b2]).map_err(err_text)?);
            }
        }
        Ok(to_json(&Landscape {
            b1: axis.clone(),
            b2: axis,
            values,
            beta0: self.setting.beta0().to_vec(),
            beta_hat: self.beta_hat.clone(),
            identifiable: self.setting.identifiable(),
        }))
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(setting: &str, n: usize, sigma: f64, seed: u64) -> Result<Demo, JsValue> {
        Demo::build(setting, n, sigma, seed).map_err(|e| JsValue::from_str(&e))
    }

    /// Fitted coefficients, distance to the truth and the density curves.
    pub fn summary(&self) -> String {
        to_json(&self.view)
    }

    pub fn conditional(&self, y0: f64, alpha: f64) -> Result<String, JsValue> {
        self.conditional_json(y0, alpha).map_err(|e| JsValue::from_str(&e))
    }

    pub fn landscape(&self, k: usize, radius: f64) -> Result<String, JsValue> {
        self.landscape_json(k, radius).map_err(|e| JsValue::from_str(&e))
    }
}
