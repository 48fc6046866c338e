//! Conditional inference on the latent predictor given a response.
//!
//! By Bayes' rule `f_{Z|Y}(z|y₀) = fᵋ(y₀ − z) f_Z(z) / f_Y(y₀)`. Plugging in
//! `f̂_Z` and one of the three `f̂_Y` estimators gives [`ConditionalDensity`].
//! Point and interval estimators work on a quadrature grid that is fitted to
//! the region where the unnormalised log density is within `e^-50` of its
//! maximum.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{self, grid, DensityEstimate, DensityKind};
use crate::empirical::{ceil_rank, EmpiricalDist};
use crate::noise::{NoiseModel, LN_SQRT_2PI};
use crate::par::map_range;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Points in the scan grid and in the refined quadrature grid.
pub const GRID_POINTS: usize = 4096;
const REGION_LOG_DROP: f64 = 50.0;
/// A scan-grid region at least this many points wide is used for quadrature as is.
const MIN_REGION_POINTS: usize = 512;
const LOG_FLOOR: f64 = -745.0;
const LOG_TINY: f64 = -690.775_527_898_213_7; // ln(1e-300)
const MIN_ESS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FyVariant {
    Empirical,
    GaussConv,
    Integrated,
}

impl std::str::FromStr for FyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(FyVariant::Empirical),
            "gauss" | "gauss_conv" | "gauss-conv" => Ok(FyVariant::GaussConv),
            "integrated" => Ok(FyVariant::Integrated),
            other => Err(Error::InvalidArgument(format!(
                "unknown f_Y variant `{other}` (expected empirical, gauss or integrated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMethod {
    Quadrature,
    ImportanceSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    /// Inversion of the quadrature CDF.
    Quadrature,
    /// Weighted quantiles of a self-normalised importance sample.
    ImportanceSampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub method: IntervalMethod,
}

impl CredibleInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

/// `log f̂_Z` tabulated once per estimate and shared by many conditionals.
#[derive(Debug)]
struct ScanGrid {
    zs: Vec<f64>,
    log_fz: Vec<f64>,
}

/// `f̂_Z`, the noise law and an `f̂_Y` estimator, ready to condition on many responses.
#[derive(Debug, Clone)]
pub struct ConditionalEngine {
    fz: DensityEstimate,
    noise: NoiseModel,
    variant: FyVariant,
    fy: DensityEstimate,
    scan: Arc<ScanGrid>,
}

impl ConditionalEngine {
    pub fn new(fz: &DensityEstimate, noise: NoiseModel, variant: FyVariant) -> Result<Self> {
        let fy = match variant {
            FyVariant::Empirical => {
                let atoms = fz.atoms().filter(|_| fz.kind() == DensityKind::Kde).ok_or_else(|| {
                    Error::Unsupported("empirical f_Y needs a KDE built from atoms".into())
                })?;
                density::fy_empirical(&EmpiricalDist::new(atoms.to_vec())?, noise)
            }
            FyVariant::GaussConv => density::fy_gauss_conv_from(fz, noise)?,
            FyVariant::Integrated => density::fy_integrated(fz, noise)?,
        };
        let (lo, hi) = fz.support_hint();
        let zs = grid(lo, hi, GRID_POINTS);
        let log_fz = map_range(zs.len(), 1024, |k| fz.log_evaluate(zs[k]));
        Ok(ConditionalEngine { fz: fz.clone(), noise, variant, fy, scan: Arc::new(ScanGrid { zs, log_fz }) })
    }

    pub fn fy(&self) -> &DensityEstimate {
        &self.fy
    }

    pub fn fz(&self) -> &DensityEstimate {
        &self.fz
    }

    /// `f̂_{Z|Y}(· | y₀)`.
    pub fn condition(&self, y0: f64) -> Result<ConditionalDensity> {
        if !y0.is_finite() {
            return Err(Error::NonFinite(format!("response {y0}")));
        }
        let log_normalizer = self.fy.log_evaluate(y0);
        if !(log_normalizer > LOG_TINY) {
            return Err(Error::OutsideSupport { y0 });
        }
        let ulog = |z: f64| self.noise.log_pdf(y0 - z) + self.fz.log_evaluate(z);

        let scan = &self.scan;
        let scan_vals: Vec<f64> =
            scan.zs.iter().zip(&scan.log_fz).map(|(&z, &lf)| self.noise.log_pdf(y0 - z) + lf).collect();
        let (k_max, m) = argmax(&scan_vals);
        if m == f64::NEG_INFINITY {
            return Err(Error::OutsideSupport { y0 });
        }
        let first = scan_vals.iter().position(|&v| v >= m - REGION_LOG_DROP).unwrap_or(k_max);
        let last = scan_vals.iter().rposition(|&v| v >= m - REGION_LOG_DROP).unwrap_or(k_max);
        let (a, b) = (first.saturating_sub(1), (last + 1).min(scan.zs.len() - 1));
        let (zs, vals) = if b - a + 1 >= MIN_REGION_POINTS {
            (scan.zs[a..=b].to_vec(), scan_vals[a..=b].to_vec())
        } else {
            let zs = grid(scan.zs[a], scan.zs[b], GRID_POINTS);
            let vals = zs.iter().map(|&z| ulog(z)).collect();
            (zs, vals)
        };
        let (k_max, m) = argmax(&vals);
        let rel: Vec<f64> = vals.iter().map(|v| (v - m).max(LOG_FLOOR).exp()).collect();
        let mut cum = Vec::with_capacity(zs.len());
        let mut acc = 0.0;
        let mut first_moment = 0.0;
        cum.push(0.0);
        for k in 1..zs.len() {
            let dz = zs[k] - zs[k - 1];
            acc += 0.5 * dz * (rel[k] + rel[k - 1]);
            first_moment += 0.5 * dz * (zs[k] * rel[k] + zs[k - 1] * rel[k - 1]);
            cum.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::OutsideSupport { y0 });
        }
        cum.iter_mut().for_each(|c| *c /= acc);
        Ok(ConditionalDensity {
            y0,
            fy_variant: self.variant,
            log_normalizer,
            log_mass: m + acc.ln(),
            quad_mean: first_moment / acc,
            fz: self.fz.clone(),
            noise: self.noise,
            zs,
            cdf: cum,
            peak: k_max,
        })
    }

    /// Mean, mode and quadrature credible interval for one response.
    pub fn summarize(&self, y0: f64, alpha: f64) -> Result<ConditionalSummary> {
        let cd = self.condition(y0)?;
        let ci = cd.credible_interval(alpha)?;
        Ok(ConditionalSummary { y0, mean: cd.mean(), mode: cd.mode(), lo: ci.lo, hi: ci.hi })
    }

    /// [`Self::summarize`] over many responses; failures are reported per entry.
    pub fn batch(&self, y0s: &[f64], alpha: f64) -> Vec<Result<ConditionalSummary>> {
        map_range(y0s.len(), 16, |k| self.summarize(y0s[k], alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub y0: f64,
    pub mean: f64,
    pub mode: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Self-normalised importance-sampling estimate of the conditional mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ess: f64,
    pub proposal_mean: f64,
    pub proposal_sd: f64,
    /// Draws sorted ascending with their normalised weights.
    pub draws: Vec<(f64, f64)>,
}

/// `f̂_{Z|Y}(z|y₀) = fᵋ(y₀ − z) f̂_Z(z) / f̂_Y(y₀)`.
#[derive(Debug, Clone)]
pub struct ConditionalDensity {
    pub y0: f64,
    pub fy_variant: FyVariant,
    log_normalizer: f64,
    /// log ∫ fᵋ(y₀ − z) f̂_Z(z) dz by quadrature.
    log_mass: f64,
    quad_mean: f64,
    fz: DensityEstimate,
    noise: NoiseModel,
    zs: Vec<f64>,
    /// Normalised cumulative trapezoid on `zs`.
    cdf: Vec<f64>,
    peak: usize,
}

impl ConditionalDensity {
    /// `log fᵋ(y₀ − z) + log f̂_Z(z)`.
    pub fn unnormalized_log(&self, z: f64) -> f64 {
        self.noise.log_pdf(self.y0 - z) + self.fz.log_evaluate(z)
    }

    /// `f̂_Y(y₀)` from the selected estimator.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    pub fn log_density(&self, z: f64) -> f64 {
        self.unnormalized_log(z) - self.log_normalizer
    }

    pub fn density(&self, z: f64) -> f64 {
        let l = self.log_density(z);
        if l < LOG_FLOOR {
            0.0
        } else {
            l.exp()
        }
    }

    /// `∫ f̂_{Z|Y}(z|y₀) dz`; one up to quadrature error for the integrated `f̂_Y`.
    pub fn mass(&self) -> f64 {
        (self.log_mass - self.log_normalizer).exp()
    }

    /// Interval carrying all but a negligible part of the mass.
    pub fn support_hint(&self) -> (f64, f64) {
        (self.zs[0], self.zs[self.zs.len() - 1])
    }

    /// Normalised conditional CDF, linearly interpolated on the quadrature grid.
    pub fn cdf(&self, z: f64) -> f64 {
        let zs = &self.zs;
        if z <= zs[0] {
            return 0.0;
        }
        if z >= zs[zs.len() - 1] {
            return 1.0;
        }
        let k = zs.partition_point(|&v| v <= z);
        let t = (z - zs[k - 1]) / (zs[k] - zs[k - 1]);
        self.cdf[k - 1] + t * (self.cdf[k] - self.cdf[k - 1])
    }

    /// `∫ z f̂_{Z|Y}(z|y₀) dz`, self-normalised by trapezoid.
    pub fn mean(&self) -> f64 {
        self.quad_mean
    }

    /// `argmax_z fᵋ(y₀ − z) f̂_Z(z)`: grid argmax refined by golden section.
    pub fn mode(&self) -> f64 {
        let zs = &self.zs;
        let lo = zs[self.peak.saturating_sub(1)];
        let hi = zs[(self.peak + 1).min(zs.len() - 1)];
        let range = self.fz.support_hint().1 - self.fz.support_hint().0;
        golden_max(|z| self.unnormalized_log(z), lo, hi, 1e-8 * range.max(hi - lo))
    }

    /// Quantile `inf{x : F̂(x) ≥ p}` with linear inversion between grid nodes.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("probability must lie in (0, 1), got {p}")));
        }
        let k = self.cdf.partition_point(|&c| c < p).max(1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 1.0 };
        Ok(self.zs[k - 1] + t * (self.zs[k] - self.zs[k - 1]))
    }

    /// Equal-tailed `1 − α` credible interval from the quadrature CDF.
    pub fn credible_interval(&self, alpha: f64) -> Result<CredibleInterval> {
        check_alpha(alpha)?;
        Ok(CredibleInterval {
            lo: self.quantile(alpha / 2.0)?,
            hi: self.quantile(1.0 - alpha / 2.0)?,
            method: IntervalMethod::Quadrature,
        })
    }

    /// Self-normalised importance sampling with a Gaussian proposal centred at
    /// the grid argmax and scaled at twice the Laplace curvature scale.
    pub fn importance_sample(&self, n_is: usize, seed: u64) -> Result<ImportanceEstimate> {
        if n_is == 0 {
            return Err(Error::InvalidArgument("importance sample size must be positive".into()));
        }
        let center = self.zs[self.peak];
        let (lo, hi) = self.support_hint();
        let step = ((hi - lo) / (self.zs.len() - 1) as f64).max(1e-6 * (hi - lo));
        let f0 = self.unnormalized_log(center);
        let curv = -(self.unnormalized_log(center + step) - 2.0 * f0 + self.unnormalized_log(center - step))
            / (step * step);
        let mut sd = if curv > 0.0 && curv.is_finite() { 2.0 / curv.sqrt() } else { (hi - lo) / 6.0 };
        let mut rng = stream_rng(seed, 0);
        let mut last_ess = 0.0;
        for _attempt in 0..2 {
            let draws: Vec<f64> = (0..n_is).map(|_| center + sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let logw: Vec<f64> = draws
                .iter()
                .map(|&z| {
                    let u = (z - center) / sd;
                    self.unnormalized_log(z) - (-0.5 * u * u - sd.ln() - LN_SQRT_2PI)
                })
                .collect();
            let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
            let total: f64 = w.iter().sum();
            let wn: Vec<f64> = w.iter().map(|x| x / total).collect();
            let ess = 1.0 / wn.iter().map(|x| x * x).sum::<f64>();
            last_ess = if ess.is_finite() { ess } else { 0.0 };
            if last_ess >= MIN_ESS {
                let mean: f64 = draws.iter().zip(&wn).map(|(z, w)| z * w).sum();
                let var: f64 = draws.iter().zip(&wn).map(|(z, w)| w * w * (z - mean) * (z - mean)).sum();
                let mut pairs: Vec<(f64, f64)> = draws.into_iter().zip(wn).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                return Ok(ImportanceEstimate {
                    mean,
                    std_error: var.sqrt(),
                    ess,
                    proposal_mean: center,
                    proposal_sd: sd,
                    draws: pairs,
                });
            }
            sd *= 3.0;
        }
        Err(Error::DegenerateImportance { ess: last_ess })
    }

    /// Equal-tailed interval from weighted quantiles of an importance sample.
    pub fn credible_interval_is(&self, alpha: f64, n_is: usize, seed: u64) -> Result<CredibleInterval> {
        check_alpha(alpha)?;
        let is = self.importance_sample(n_is, seed)?;
        Ok(CredibleInterval {
            lo: weighted_quantile(&is.draws, alpha / 2.0),
            hi: weighted_quantile(&is.draws, 1.0 - alpha / 2.0),
            method: IntervalMethod::ImportanceSampling,
        })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn weighted_quantile(sorted: &[(f64, f64)], p: f64) -> f64 {
    let mut acc = 0.0;
    for &(z, w) in sorted {
        acc += w;
        if acc >= p {
            return z;
        }
    }
    sorted[sorted.len() - 1].0
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iters = 0;
    while hi - lo > tol && iters < 200 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        iters += 1;
    }
    0.5 * (lo + hi)
}

/// Builds the conditional density for a single response.
pub fn conditional_density(
    fz: &DensityEstimate,
    noise: NoiseModel,
    y0: f64,
    fy_variant: FyVariant,
) -> Result<ConditionalDensity> {
    ConditionalEngine::new(fz, noise, fy_variant)?.condition(y0)
}

pub fn cond_mean(cd: &ConditionalDensity, method: MeanMethod, n_is: usize, seed: u64) -> Result<f64> {
    match method {
        MeanMethod::Quadrature => Ok(cd.mean()),
        MeanMethod::ImportanceSampling => cd.importance_sample(n_is, seed).map(|e| e.mean),
    }
}

pub fn cond_mode(cd: &ConditionalDensity) -> f64 {
    cd.mode()
}

pub fn cond_quantile(cd: &ConditionalDensity, p: f64) -> Result<f64> {
    cd.quantile(p)
}

pub fn credible_interval(cd: &ConditionalDensity, alpha: f64) -> Result<CredibleInterval> {
    cd.credible_interval(alpha)
}

/// Point and interval estimates of `Z` that ignore the observed response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub mean: f64,
    pub mode: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Sample mean of the atoms, argmax of `f̂_Z`, and the empirical
/// `[q_{α/2}, q_{1−α/2}]` interval at order-statistic ranks `⌈nα/2⌉`, `⌈n(1−α/2)⌉`.
pub fn unconditional_baselines(atoms: &EmpiricalDist, fz: &DensityEstimate, alpha: f64) -> Result<Baselines> {
    check_alpha(alpha)?;
    let n = atoms.len();
    let (lo, hi) = fz.support_hint();
    let zs = grid(lo, hi, GRID_POINTS);
    let vals: Vec<f64> = zs.iter().map(|&z| fz.log_evaluate(z)).collect();
    let (k, _) = argmax(&vals);
    let mode = golden_max(
        |z| fz.log_evaluate(z),
        zs[k.saturating_sub(1)],
        zs[(k + 1).min(zs.len() - 1)],
        1e-8 * (hi - lo),
    );
    Ok(Baselines {
        mean: atoms.mean(),
        mode,
        lo: atoms.order_stat(ceil_rank(alpha / 2.0, n)),
        hi: atoms.order_stat(ceil_rank(1.0 - alpha / 2.0, n)),
    })
}
