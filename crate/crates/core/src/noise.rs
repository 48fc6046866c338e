//! Known noise distributions.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn std_normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Distribution of the additive noise `ε`, assumed known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum NoiseModel {
    Gaussian { sigma: f64 },
    Laplace { scale: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(NoiseModel::Gaussian { sigma })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "laplace scale must be positive and finite, got {scale}"
            )));
        }
        Ok(NoiseModel::Laplace { scale })
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => std_normal_cdf(x / sigma),
            NoiseModel::Laplace { scale } => {
                if x < 0.0 {
                    0.5 * (x / scale).exp()
                } else {
                    1.0 - 0.5 * (-x / scale).exp()
                }
            }
        }
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => std_normal_pdf(x / sigma) / sigma,
            NoiseModel::Laplace { scale } => 0.5 * (-x.abs() / scale).exp() / scale,
        }
    }

    #[inline]
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => std_normal_log_pdf(x / sigma) - sigma.ln(),
            NoiseModel::Laplace { scale } => -x.abs() / scale - (2.0 * scale).ln(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseModel::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => sigma * sigma,
            NoiseModel::Laplace { scale } => 2.0 * scale * scale,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `σ` when the noise is Gaussian.
    pub fn gaussian_sigma(&self) -> Option<f64> {
        match *self {
            NoiseModel::Gaussian { sigma } => Some(sigma),
            NoiseModel::Laplace { .. } => None,
        }
    }

    /// Radius beyond which `cdf` is 0 or 1 and `pdf` is 0 to below 1e-20.
    pub fn negligible_radius(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => 10.0 * sigma,
            NoiseModel::Laplace { scale } => 46.0 * scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn models() -> Vec<NoiseModel> {
        vec![
            NoiseModel::gaussian(1.0).unwrap(),
            NoiseModel::gaussian(0.3).unwrap(),
            NoiseModel::laplace(0.7).unwrap(),
        ]
    }

    #[test]
    fn cdf_is_monotone_with_correct_limits() {
        for m in models() {
            let s = m.sd();
            let mut prev = 0.0;
            for k in -400..=400 {
                let x = k as f64 * s / 20.0;
                let c = m.cdf(x);
                assert!(c >= prev, "{m:?} not monotone at {x}");
                prev = c;
            }
            assert!(m.cdf(-60.0 * s) < 1e-20);
            assert_eq!(m.cdf(60.0 * s), 1.0);
        }
    }

    #[test]
    fn log_pdf_matches_pdf() {
        for m in models() {
            for k in -50..=50 {
                let x = k as f64 * 0.37;
                let p = m.pdf(x);
                assert!(p >= 0.0);
                assert!((m.log_pdf(x).exp() - p).abs() <= 1e-12, "{m:?} at {x}");
            }
        }
    }

    #[test]
    fn gaussian_pdf_integrates_to_one() {
        for sigma in [0.05, 1.0, 7.0] {
            let m = NoiseModel::gaussian(sigma).unwrap();
            let (lo, hi) = (-10.0 * sigma, 10.0 * sigma);
            let k = 20_000;
            let dx = (hi - lo) / k as f64;
            let mut total = 0.5 * (m.pdf(lo) + m.pdf(hi));
            for i in 1..k {
                total += m.pdf(lo + i as f64 * dx);
            }
            assert!((total * dx - 1.0).abs() < 1e-8, "sigma={sigma}: {}", total * dx);
        }
    }

    #[test]
    fn cdf_matches_known_values() {
        let m = NoiseModel::gaussian(1.0).unwrap();
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((m.cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((m.cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
    }

    #[test]
    fn sample_moments_match_variance() {
        for m in models() {
            let mut rng = stream_rng(5, 0);
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 5.0 * m.sd() / (n as f64).sqrt());
            assert!((var / m.variance() - 1.0).abs() < 0.02, "{m:?}: {var}");
        }
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(NoiseModel::gaussian(0.0).is_err());
        assert!(NoiseModel::gaussian(f64::NAN).is_err());
        assert!(NoiseModel::laplace(-1.0).is_err());
    }
}
