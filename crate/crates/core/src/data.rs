//! Unlinked samples, the four simulation designs, and projection onto a
//! coefficient vector.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalDist;
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

/// Law of one covariate coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    StdNormal,
    /// Shape–scale parameterisation.
    Gamma { shape: f64, scale: f64 },
}

impl Marginal {
    fn sample(&self, rng: &mut StreamRng) -> f64 {
        match *self {
            Marginal::StdNormal => rng.sample(StandardNormal),
            Marginal::Gamma { shape, scale } => {
                Gamma::new(shape, scale).expect("valid gamma parameters").sample(rng)
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Marginal::StdNormal => 0.0,
            Marginal::Gamma { shape, scale } => shape * scale,
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Marginal::StdNormal => 1.0,
            Marginal::Gamma { shape, scale } => shape * scale * scale,
        }
    }
}

/// The four simulation designs. Covariate coordinates are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    A,
    B,
    C,
    D,
}

const MARGINALS_A: [Marginal; 2] = [Marginal::StdNormal, Marginal::StdNormal];
const MARGINALS_B: [Marginal; 3] = [Marginal::StdNormal, Marginal::StdNormal, Marginal::StdNormal];
const MARGINALS_C: [Marginal; 2] = [
    Marginal::Gamma { shape: 1.0, scale: 1.0 },
    Marginal::Gamma { shape: 2.0, scale: 4.0 },
];
const MARGINALS_D: [Marginal; 3] = [
    Marginal::Gamma { shape: 1.0, scale: 1.0 },
    Marginal::Gamma { shape: 2.0, scale: 4.0 },
    Marginal::Gamma { shape: 1.5, scale: 3.0 },
];

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::B, Setting::C, Setting::D];

    pub fn dim(self) -> usize {
        self.marginals().len()
    }

    pub fn beta0(self) -> &'static [f64] {
        match self {
            Setting::A => &[3.0, -5.0],
            Setting::B => &[-1.5, 2.0, 7.0],
            Setting::C => &[1.0, 2.0],
            Setting::D => &[0.5, 2.0, 3.0],
        }
    }

    pub fn marginals(self) -> &'static [Marginal] {
        match self {
            Setting::A => &MARGINALS_A,
            Setting::B => &MARGINALS_B,
            Setting::C => &MARGINALS_C,
            Setting::D => &MARGINALS_D,
        }
    }

    /// Whether `β₀` is identified. In the Gaussian designs only `‖β₀‖` is.
    pub fn identifiable(self) -> bool {
        matches!(self, Setting::C | Setting::D)
    }

    pub fn latent_mean(self) -> f64 {
        self.beta0().iter().zip(self.marginals()).map(|(b, m)| b * m.mean()).sum()
    }

    pub fn latent_variance(self) -> f64 {
        self.beta0().iter().zip(self.marginals()).map(|(b, m)| b * b * m.variance()).sum()
    }

    /// One draw from the law `μ₀` of `Z = β₀ᵀX`.
    ///
    /// Gaussian designs draw `N(0, ‖β₀‖²)` directly, Gamma designs sum the
    /// scaled independent Gamma coordinates.
    pub fn sample_latent(self, rng: &mut StreamRng) -> f64 {
        match self {
            Setting::A | Setting::B => {
                let s = self.latent_variance().sqrt();
                s * rng.sample::<f64, _>(StandardNormal)
            }
            Setting::C | Setting::D => self
                .beta0()
                .iter()
                .zip(self.marginals())
                .map(|(b, m)| b * m.sample(rng))
                .sum(),
        }
    }

    fn sample_row(self, rng: &mut StreamRng, row: &mut [f64]) {
        for (x, m) in row.iter_mut().zip(self.marginals()) {
            *x = m.sample(rng);
        }
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(Setting::A),
            "b" => Ok(Setting::B),
            "c" => Ok(Setting::C),
            "d" => Ok(Setting::D),
            other => Err(Error::UnknownSetting(other.to_string())),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Setting::A => "a",
            Setting::B => "b",
            Setting::C => "c",
            Setting::D => "d",
        };
        f.write_str(c)
    }
}

/// Row-major `n × d` covariate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    values: Vec<f64>,
    d: usize,
}

impl Covariates {
    pub fn new(values: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("covariate dimension must be at least 1".into()));
        }
        if values.is_empty() {
            return Err(Error::Empty("covariate matrix has no rows"));
        }
        if values.len() % d != 0 {
            return Err(Error::DimensionMismatch { expected: d, got: values.len() % d });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("covariate entry {bad}")));
        }
        Ok(Covariates { values, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Covariates::new(rows.iter().flatten().copied().collect(), d)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `βᵀXᵢ` for every row, in row order.
    pub fn dot_all(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: beta.len() });
        }
        Ok(self.rows().map(|r| r.iter().zip(beta).map(|(x, b)| x * b).sum()).collect())
    }

    /// Column means and the `d × d` sample covariance (divisor `n - 1`, row-major).
    pub fn mean_and_covariance(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, d) = (self.n(), self.d);
        let mut mean = vec![0.0; d];
        for r in self.rows() {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                for b in 0..d {
                    cov[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        let denom = (n.max(2) - 1) as f64;
        cov.iter_mut().for_each(|c| *c /= denom);
        (mean, cov)
    }

    /// Rows picked by index.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Covariates::new(values, self.d)
    }
}

/// Covariate and response samples observed without linkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub covariates: Covariates,
    pub responses: Vec<f64>,
    /// Generating design; `None` for user-provided ("custom") data.
    pub setting: Option<Setting>,
    /// Noise standard deviation used at generation, if synthetic.
    pub sigma: Option<f64>,
}

impl Dataset {
    pub fn new(covariates: Covariates, responses: Vec<f64>) -> Result<Self> {
        if responses.len() != covariates.n() {
            return Err(Error::SampleSizeMismatch {
                covariates: covariates.n(),
                responses: responses.len(),
            });
        }
        if let Some(bad) = responses.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("response {bad}")));
        }
        Ok(Dataset { covariates, responses, setting: None, sigma: None })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn d(&self) -> usize {
        self.covariates.d()
    }
}

/// Draws `n` covariate rows and responses `Yᵢ = β₀ᵀXᵢ + εᵢ`, `εᵢ ~ N(0, σ²)`.
///
/// With `linked = false` the responses are shuffled so that row alignment
/// carries no information. `sigma = 0` gives noiseless responses.
pub fn sample_setting(
    setting: Setting,
    n: usize,
    sigma: f64,
    seed: u64,
    linked: bool,
) -> Result<Dataset> {
    sample_setting_with(setting, n, sigma, linked, &mut stream_rng(seed, 0))
}

pub fn sample_setting_with(
    setting: Setting,
    n: usize,
    sigma: f64,
    linked: bool,
    rng: &mut StreamRng,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let d = setting.dim();
    let beta0 = setting.beta0();
    let mut values = vec![0.0; n * d];
    let mut responses = Vec::with_capacity(n);
    for row in values.chunks_exact_mut(d) {
        setting.sample_row(rng, row);
        let z: f64 = row.iter().zip(beta0).map(|(x, b)| x * b).sum();
        let eps = if sigma > 0.0 { sigma * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        responses.push(z + eps);
    }
    if !linked {
        responses.shuffle(rng);
    }
    let mut ds = Dataset::new(Covariates::new(values, d)?, responses)?;
    ds.setting = Some(setting);
    ds.sigma = Some(sigma);
    Ok(ds)
}

/// Linked test pairs `(zₜ, yₜ)` with `zₜ ~ μ₀` and `yₜ = zₜ + εₜ`.
pub fn sample_test_pairs(
    setting: Setting,
    t: usize,
    sigma: f64,
    rng: &mut StreamRng,
) -> Vec<(f64, f64)> {
    (0..t)
        .map(|_| {
            let z = setting.sample_latent(rng);
            let eps: f64 = rng.sample(StandardNormal);
            (z, z + sigma * eps)
        })
        .collect()
}

/// Sorted projections `{βᵀXᵢ}`.
pub fn project(covariates: &Covariates, beta: &[f64]) -> Result<EmpiricalDist> {
    EmpiricalDist::new(covariates.dot_all(beta)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_parsing_and_dims() {
        assert_eq!("a".parse::<Setting>().unwrap(), Setting::A);
        assert_eq!(" D ".parse::<Setting>().unwrap(), Setting::D);
        assert!(matches!("e".parse::<Setting>(), Err(Error::UnknownSetting(_))));
        assert_eq!(Setting::A.dim(), 2);
        assert_eq!(Setting::B.dim(), 3);
        assert_eq!(Setting::A.latent_variance(), 34.0);
        assert_eq!(Setting::B.latent_variance(), 55.25);
        assert_eq!(Setting::C.latent_mean(), 17.0);
        assert_eq!(Setting::C.latent_variance(), 129.0);
    }

    #[test]
    fn linked_setting_a_residuals_are_noise() {
        let ds = sample_setting(Setting::A, 5, 1.0, 42, true).unwrap();
        assert_eq!(ds.d(), 2);
        assert_eq!(ds.n(), 5);
        let big = sample_setting(Setting::A, 20_000, 1.0, 42, true).unwrap();
        let res: Vec<f64> = big
            .covariates
            .rows()
            .zip(&big.responses)
            .map(|(x, y)| y - (3.0 * x[0] - 5.0 * x[1]))
            .collect();
        let m = res.iter().sum::<f64>() / res.len() as f64;
        let v = res.iter().map(|r| (r - m).powi(2)).sum::<f64>() / res.len() as f64;
        assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.04, "mean {m} var {v}");
    }

    #[test]
    fn zero_noise_is_exact() {
        let ds = sample_setting(Setting::A, 100, 0.0, 7, true).unwrap();
        for (x, y) in ds.covariates.rows().zip(&ds.responses) {
            assert_eq!(*y, 3.0 * x[0] + -5.0 * x[1]);
        }
    }

    #[test]
    fn gamma_covariates_are_nonnegative() {
        let ds = sample_setting(Setting::C, 100, 1.0, 1, false).unwrap();
        assert!(ds.covariates.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn generation_is_reproducible() {
        for s in Setting::ALL {
            let a = sample_setting(s, 50, 0.5, 99, false).unwrap();
            let b = sample_setting(s, 50, 0.5, 99, false).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unlinked_responses_are_a_permutation_of_linked() {
        let a = sample_setting(Setting::B, 200, 1.0, 3, true).unwrap();
        let b = sample_setting(Setting::B, 200, 1.0, 3, false).unwrap();
        assert_eq!(a.covariates, b.covariates);
        assert_ne!(a.responses, b.responses);
        let mut ya = a.responses.clone();
        let mut yb = b.responses.clone();
        ya.sort_by(f64::total_cmp);
        yb.sort_by(f64::total_cmp);
        assert_eq!(ya, yb);
    }

    #[test]
    fn projection_examples() {
        let x = Covariates::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(project(&x, &[3.0, -5.0]).unwrap().atoms(), &[-5.0, 3.0]);
        assert_eq!(project(&x, &[0.0, 0.0]).unwrap().atoms(), &[0.0, 0.0]);
        assert!(matches!(
            project(&x, &[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let col = Covariates::new(vec![4.0, -1.0, 2.5], 1).unwrap();
        assert_eq!(project(&col, &[1.0]).unwrap().atoms(), &[-1.0, 2.5, 4.0]);
    }

    #[test]
    fn dataset_rejects_mismatched_sizes() {
        let x = Covariates::new(vec![1.0, 2.0, 3.0], 1).unwrap();
        assert!(matches!(
            Dataset::new(x, vec![1.0, 2.0]),
            Err(Error::SampleSizeMismatch { covariates: 3, responses: 2 })
        ));
    }

    #[test]
    fn latent_sampler_moments() {
        let mut rng = stream_rng(8, 1);
        for s in Setting::ALL {
            let k = 100_000;
            let zs: Vec<f64> = (0..k).map(|_| s.sample_latent(&mut rng)).collect();
            let m = zs.iter().sum::<f64>() / k as f64;
            let v = zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / k as f64;
            let se = (s.latent_variance() / k as f64).sqrt();
            assert!((m - s.latent_mean()).abs() < 5.0 * se, "{s}: mean {m}");
            assert!((v / s.latent_variance() - 1.0).abs() < 0.03, "{s}: var {v}");
        }
    }
}
