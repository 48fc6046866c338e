//! Smoothing kernels `K` and their scaled versions `K_h(z) = K(z/h)/h`.

use serde::{Deserialize, Serialize};

use crate::noise::{std_normal_log_pdf, std_normal_pdf};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelShape {
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: KernelShape,
    pub bandwidth: f64,
}

impl KernelShape {
    /// Unscaled kernel `K(u)`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelShape::Gaussian => std_normal_pdf(u),
            KernelShape::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn log_eval(self, u: f64) -> f64 {
        match self {
            KernelShape::Gaussian => std_normal_log_pdf(u),
            KernelShape::Epanechnikov => self.eval(u).ln(),
        }
    }

    /// `∫ u² K(u) du`.
    pub fn second_moment(self) -> f64 {
        match self {
            KernelShape::Gaussian => 1.0,
            KernelShape::Epanechnikov => 0.2,
        }
    }

    /// Lipschitz constant of `K`.
    pub fn lipschitz(self) -> f64 {
        match self {
            KernelShape::Gaussian => 1.0 / (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt(),
            KernelShape::Epanechnikov => 1.5,
        }
    }

    /// `|u|` beyond which the kernel is zero, or below 1e-14 of its peak for the Gaussian.
    pub fn support_radius(self) -> f64 {
        match self {
            KernelShape::Gaussian => 8.0,
            KernelShape::Epanechnikov => 1.0,
        }
    }
}

impl KernelSpec {
    pub fn new(shape: KernelShape, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { shape, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelShape::Gaussian, bandwidth)
    }

    /// `K_h(z) = K(z/h) / h`.
    pub fn eval(&self, z: f64) -> f64 {
        self.shape.eval(z / self.bandwidth) / self.bandwidth
    }
}
