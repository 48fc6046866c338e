//! Deconvolution in unlinked linear models.
//!
//! Covariates `X` and responses `Y = β₀ᵀX + ε` are observed as two separate,
//! unpaired samples and the noise law of `ε` is known. This crate fits the
//! deconvolution least-squares estimator (DLSE) `β̂`, estimates the law of the
//! latent predictor `Z = β₀ᵀX` from the projected covariates `β̂ᵀXᵢ`, and
//! performs conditional inference on `Z` given a new response `y₀`.
//!
//! The main entry points are:
//!
//! * [`data::sample_setting`] and [`data::Dataset`] for data,
//! * [`criterion::CriterionContext`] for the DLSE objective and its gradient,
//! * [`dlse::fit_dlse`] for the multi-start fit,
//! * [`density`] for `f̂_Z` and the three `f̂_Y` estimators,
//! * [`conditional`] for `f̂_{Z|Y}` and its point and interval estimators,
//! * [`experiments`] for the Monte Carlo studies.

pub mod conditional;
pub mod criterion;
pub mod data;
pub mod density;
pub mod dlse;
pub mod empirical;
mod error;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod noise;
mod normal_table;
pub mod optim;
mod par;
pub mod report;
pub mod rng;
pub mod wasserstein;

pub use conditional::{ConditionalDensity, ConditionalEngine, FyVariant};
pub use criterion::CriterionContext;
pub use data::{Covariates, Dataset, Setting};
pub use density::{DensityEstimate, DensityKind};
pub use dlse::{fit_dlse, FitOptions, FitResult};
pub use empirical::EmpiricalDist;
pub use error::{Error, Result};
pub use kernel::{KernelShape, KernelSpec};
pub use noise::NoiseModel;
