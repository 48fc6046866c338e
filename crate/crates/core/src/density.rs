//! Density estimates for the latent predictor `Z` and the response `Y`.
//!
//! * [`kde`]: `f̂_Z(z) = (1/n) Σ K_h(z − zᵢ)` from the projected covariates,
//! * [`fy_empirical`]: `f̂_Y(y) = (1/n) Σ fᵋ(y − zᵢ)`,
//! * [`fy_gauss_conv`]: `f̂_Y` as a mixture of `N(zᵢ, h² + σ²)`,
//! * [`fy_integrated`]: `f̂_Y(y) = ∫ fᵋ(y − z) f̂_Z(z) dz` by trapezoid.
//!
//! All estimates evaluate on the log scale with log-sum-exp. Mixture terms
//! more than `e^-40` below the largest term are skipped.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalDist;
use crate::kernel::{KernelShape, KernelSpec};
use crate::noise::{NoiseModel, LN_SQRT_2PI};
use crate::{Error, Result};

const LOG_BUDGET: f64 = 40.0;
const MIN_QUAD_NODES: usize = 2048;
const MAX_QUAD_NODES: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Kde,
    FyEmpirical,
    FyGaussConv,
    FyIntegrated,
    Conditional,
    /// Closed-form Gaussian, used to plug in a known `f_Z`.
    Parametric,
}

/// Symmetric, unimodal location component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Component {
    Gaussian { scale: f64 },
    Epanechnikov { h: f64 },
    Laplace { scale: f64 },
}

impl Component {
    fn from_noise(noise: NoiseModel) -> Self {
        match noise {
            NoiseModel::Gaussian { sigma } => Component::Gaussian { scale: sigma },
            NoiseModel::Laplace { scale } => Component::Laplace { scale },
        }
    }

    fn from_kernel(k: KernelSpec) -> Self {
        match k.shape {
            KernelShape::Gaussian => Component::Gaussian { scale: k.bandwidth },
            KernelShape::Epanechnikov => Component::Epanechnikov { h: k.bandwidth },
        }
    }

    fn log_eval(self, d: f64) -> f64 {
        match self {
            Component::Gaussian { scale } => {
                let u = d / scale;
                -0.5 * u * u - scale.ln() - LN_SQRT_2PI
            }
            Component::Epanechnikov { h } => KernelShape::Epanechnikov.log_eval(d / h) - h.ln(),
            Component::Laplace { scale } => -d.abs() / scale - (2.0 * scale).ln(),
        }
    }

    /// `|d|` up to which terms are within `e^-budget` of a term at offset `d0`.
    fn reach(self, d0: f64, budget: f64) -> f64 {
        match self {
            Component::Gaussian { scale } => (d0 * d0 + 2.0 * budget * scale * scale).sqrt(),
            Component::Epanechnikov { h } => h,
            Component::Laplace { scale } => d0 + budget * scale,
        }
    }

    fn tail_radius(self) -> f64 {
        match self {
            Component::Gaussian { scale } => 8.0 * scale,
            Component::Epanechnikov { h } => h,
            Component::Laplace { scale } => 40.0 * scale,
        }
    }

    fn scale(self) -> f64 {
        match self {
            Component::Gaussian { scale } | Component::Laplace { scale } => scale,
            Component::Epanechnikov { h } => h,
        }
    }
}

#[derive(Debug)]
struct Mixture {
    atoms: Vec<f64>,
    comp: Component,
}

impl Mixture {
    fn log_eval(&self, y: f64) -> f64 {
        let a = &self.atoms;
        let p = a.partition_point(|&v| v < y);
        let d0 = match (p.checked_sub(1).map(|i| a[i]), a.get(p)) {
            (Some(l), Some(&r)) => (y - l).min(r - y),
            (Some(l), None) => y - l,
            (None, Some(&r)) => r - y,
            (None, None) => return f64::NEG_INFINITY,
        };
        let reach = self.comp.reach(d0, LOG_BUDGET);
        let lo = a.partition_point(|&v| v < y - reach);
        let hi = a.partition_point(|&v| v <= y + reach);
        let window = &a[lo..hi];
        let ln_n = (a.len() as f64).ln();
        match self.comp {
            Component::Epanechnikov { h } => {
                let s: f64 = window.iter().map(|&v| KernelShape::Epanechnikov.eval((y - v) / h)).sum();
                (s / h).ln() - ln_n
            }
            Component::Gaussian { scale } => {
                let inv2 = 0.5 / (scale * scale);
                let s: f64 = window.iter().map(|&v| (-((y - v) * (y - v) - d0 * d0) * inv2).exp()).sum();
                self.comp.log_eval(d0) + s.ln() - ln_n
            }
            Component::Laplace { scale } => {
                let s: f64 = window.iter().map(|&v| (-((y - v).abs() - d0) / scale).exp()).sum();
                self.comp.log_eval(d0) + s.ln() - ln_n
            }
        }
    }
}

#[derive(Debug)]
struct Quadrature {
    nodes: Vec<f64>,
    /// log of (trapezoid weight × `f̂_Z`) at each node.
    log_weights: Vec<f64>,
    noise: NoiseModel,
}

impl Quadrature {
    fn log_eval(&self, y: f64) -> f64 {
        let terms = self.nodes.iter().zip(&self.log_weights).map(|(&z, &lw)| lw + self.noise.log_pdf(y - z));
        log_sum_exp(terms)
    }
}

#[derive(Debug)]
enum Repr {
    Mixture(Mixture),
    Gaussian { mean: f64, sd: f64 },
    Quadrature(Quadrature),
}

/// A one-dimensional density with point evaluation.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    kind: DensityKind,
    support: (f64, f64),
    /// Smallest length scale of the density, used to size quadrature grids.
    resolution: f64,
    repr: Arc<Repr>,
    /// Kernel used, for KDEs.
    kernel: Option<KernelSpec>,
}

impl DensityEstimate {
    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    /// Interval outside which the density is numerically negligible.
    pub fn support_hint(&self) -> (f64, f64) {
        self.support
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn kernel(&self) -> Option<KernelSpec> {
        self.kernel
    }

    /// Atoms of a mixture-type estimate.
    pub fn atoms(&self) -> Option<&[f64]> {
        match &*self.repr {
            Repr::Mixture(m) => Some(&m.atoms),
            _ => None,
        }
    }

    pub fn log_evaluate(&self, x: f64) -> f64 {
        match &*self.repr {
            Repr::Mixture(m) => m.log_eval(x),
            Repr::Gaussian { mean, sd } => {
                let u = (x - mean) / sd;
                -0.5 * u * u - sd.ln() - LN_SQRT_2PI
            }
            Repr::Quadrature(q) => q.log_eval(x),
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.log_evaluate(x).exp()
    }

    /// Exact Gaussian density, standing in for an estimate.
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid gaussian N({mean}, {sd}²)")));
        }
        Ok(DensityEstimate {
            kind: DensityKind::Parametric,
            support: (mean - 12.0 * sd, mean + 12.0 * sd),
            resolution: sd,
            repr: Arc::new(Repr::Gaussian { mean, sd }),
            kernel: None,
        })
    }

    fn mixture(kind: DensityKind, atoms: &EmpiricalDist, comp: Component, kernel: Option<KernelSpec>) -> Self {
        let r = comp.tail_radius();
        DensityEstimate {
            kind,
            support: (atoms.min() - r, atoms.max() + r),
            resolution: comp.scale(),
            repr: Arc::new(Repr::Mixture(Mixture { atoms: atoms.atoms().to_vec(), comp })),
            kernel,
        }
    }

    /// `(x, f(x))` at `k` equally spaced points of `[lo, hi]`.
    pub fn tabulate(&self, lo: f64, hi: f64, k: usize) -> Vec<(f64, f64)> {
        grid(lo, hi, k).into_iter().map(|x| (x, self.evaluate(x))).collect()
    }

    /// Trapezoid integral of the density over its support hint.
    pub fn integral(&self, k: usize) -> f64 {
        let (lo, hi) = self.support;
        trapezoid(&self.tabulate(lo, hi, k))
    }
}

pub(crate) fn grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k < 2 {
        return vec![lo];
    }
    let dx = (hi - lo) / (k - 1) as f64;
    (0..k).map(|i| if i + 1 == k { hi } else { lo + i as f64 * dx }).collect()
}

pub(crate) fn trapezoid(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

pub(crate) fn log_sum_exp<I: Iterator<Item = f64> + Clone>(terms: I) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Kernel density estimate `f̂_Z(z) = (1/n) Σ K_h(z − zᵢ)`.
pub fn kde(atoms: &EmpiricalDist, kernel: KernelSpec) -> Result<DensityEstimate> {
    let kernel = KernelSpec::new(kernel.shape, kernel.bandwidth)?;
    Ok(DensityEstimate::mixture(DensityKind::Kde, atoms, Component::from_kernel(kernel), Some(kernel)))
}

/// Bandwidth chosen by [`default_bandwidth`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth {
    pub value: f64,
    pub warning: Option<String>,
}

/// `h = 1.06 · sd · n^{-1/8}`.
///
/// For atoms with no spread the bandwidth falls back to `1e-6 · max(1, |mean|)`.
pub fn default_bandwidth(atoms: &EmpiricalDist) -> Result<Bandwidth> {
    let n = atoms.len();
    if n < 2 {
        return Err(Error::InvalidArgument("default bandwidth needs at least two atoms".into()));
    }
    let sd = atoms.sd();
    if sd > 0.0 {
        Ok(Bandwidth { value: 1.06 * sd * (n as f64).powf(-0.125), warning: None })
    } else {
        Ok(Bandwidth {
            value: 1e-6 * atoms.mean().abs().max(1.0),
            warning: Some("atoms have zero spread; using floor bandwidth".into()),
        })
    }
}

/// Gaussian KDE with the default bandwidth.
pub fn kde_default(atoms: &EmpiricalDist) -> Result<DensityEstimate> {
    kde(atoms, KernelSpec::gaussian(default_bandwidth(atoms)?.value)?)
}

/// `f̂_Y(y) = (1/n) Σ fᵋ(y − zᵢ)`.
pub fn fy_empirical(atoms: &EmpiricalDist, noise: NoiseModel) -> DensityEstimate {
    DensityEstimate::mixture(DensityKind::FyEmpirical, atoms, Component::from_noise(noise), None)
}

/// `f̂_Y` as the mixture of `N(zᵢ, h² + σ²)`: a Gaussian KDE convolved with Gaussian noise.
pub fn fy_gauss_conv(atoms: &EmpiricalDist, h: f64, sigma: f64) -> Result<DensityEstimate> {
    if !(h >= 0.0 && sigma >= 0.0 && (h > 0.0 || sigma > 0.0)) {
        return Err(Error::InvalidArgument(format!("need h, sigma >= 0 not both zero, got {h}, {sigma}")));
    }
    let scale = (h * h + sigma * sigma).sqrt();
    Ok(DensityEstimate::mixture(DensityKind::FyGaussConv, atoms, Component::Gaussian { scale }, None))
}

/// [`fy_gauss_conv`] from a KDE and a noise model, both of which must be Gaussian.
pub fn fy_gauss_conv_from(fz: &DensityEstimate, noise: NoiseModel) -> Result<DensityEstimate> {
    let kernel = fz
        .kernel()
        .filter(|k| k.shape == KernelShape::Gaussian)
        .ok_or_else(|| Error::Unsupported("Gaussian-convolution f_Y needs a Gaussian-kernel KDE".into()))?;
    let sigma = noise
        .gaussian_sigma()
        .ok_or_else(|| Error::Unsupported("Gaussian-convolution f_Y needs Gaussian noise".into()))?;
    let atoms = EmpiricalDist::new(fz.atoms().expect("KDE has atoms").to_vec())?;
    fy_gauss_conv(&atoms, kernel.bandwidth, sigma)
}

/// `f̂_Y(y) = ∫ fᵋ(y − z) f̂_Z(z) dz` by composite trapezoid.
///
/// The nodes cover the support of `f̂_Z`, where the integrand lives, with at
/// least 2048 nodes and spacing at most a third of the finer of the two
/// length scales.
pub fn fy_integrated(fz: &DensityEstimate, noise: NoiseModel) -> Result<DensityEstimate> {
    let s = noise.sd();
    let (lo, hi) = fz.support_hint();
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("support of f_Z".into()));
    }
    let spacing = fz.resolution().min(s) / 3.0;
    let k = (((hi - lo) / spacing).ceil() as usize + 1).clamp(MIN_QUAD_NODES, MAX_QUAD_NODES);
    let nodes = grid(lo, hi, k);
    let dx = (hi - lo) / (k - 1) as f64;
    let mut keep_nodes = Vec::with_capacity(k);
    let mut log_weights = Vec::with_capacity(k);
    for (i, &z) in nodes.iter().enumerate() {
        let w = if i == 0 || i + 1 == k { 0.5 * dx } else { dx };
        let lf = fz.log_evaluate(z);
        if lf.is_nan() {
            return Err(Error::NonFinite(format!("f_Z at {z}")));
        }
        if lf > f64::NEG_INFINITY {
            keep_nodes.push(z);
            log_weights.push(lf + w.ln());
        }
    }
    if keep_nodes.is_empty() {
        return Err(Error::NonFinite("f_Z vanishes on its support".into()));
    }
    let r = noise.negligible_radius();
    Ok(DensityEstimate {
        kind: DensityKind::FyIntegrated,
        support: (fz.support_hint().0 - r, fz.support_hint().1 + r),
        resolution: fz.resolution().max(s),
        repr: Arc::new(Repr::Quadrature(Quadrature { nodes: keep_nodes, log_weights, noise })),
        kernel: None,
    })
}
