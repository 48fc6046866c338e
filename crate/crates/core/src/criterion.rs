//! The deconvolution least-squares criterion
//!
//! ```text
//! Dₙ(β) = (1/n) Σⱼ ( Fₙʸ(Yⱼ) − Cₙ,β(Yⱼ) )²,   Cₙ,β(y) = (1/n) Σᵢ Fᵋ(y − βᵀXᵢ)
//! ```
//!
//! and its analytic gradient. Both are exact double sums up to rounding: noise
//! terms at distance beyond [`NoiseModel::negligible_radius`] are taken as
//! exactly 0 or 1, and Gaussian terms come from a Taylor table accurate to
//! about 1e-15.

use crate::data::{Covariates, Dataset};
use crate::noise::NoiseModel;
use crate::normal_table;
use crate::par::map_range;
use crate::{Error, Result};

const PAR_MIN_LEN: usize = 512;

/// Immutable data needed to evaluate `Dₙ` repeatedly.
#[derive(Debug, Clone)]
pub struct CriterionContext {
    covariates: Covariates,
    /// Responses sorted ascending.
    responses: Vec<f64>,
    /// `Fₙʸ(Yⱼ)` for the sorted responses, ties at max rank.
    ecdf: Vec<f64>,
    noise: NoiseModel,
    radius: f64,
}

impl CriterionContext {
    pub fn new(dataset: &Dataset, noise: NoiseModel) -> Result<Self> {
        Self::from_parts(dataset.covariates.clone(), dataset.responses.clone(), noise)
    }

    pub fn from_parts(covariates: Covariates, mut responses: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if covariates.n() != responses.len() {
            return Err(Error::SampleSizeMismatch {
                covariates: covariates.n(),
                responses: responses.len(),
            });
        }
        if responses.is_empty() {
            return Err(Error::Empty("no responses"));
        }
        responses.sort_unstable_by(f64::total_cmp);
        let n = responses.len();
        let mut ecdf = vec![0.0; n];
        let mut j = 0;
        while j < n {
            let mut k = j;
            while k + 1 < n && responses[k + 1] == responses[j] {
                k += 1;
            }
            let f = (k + 1) as f64 / n as f64;
            ecdf[j..=k].iter_mut().for_each(|e| *e = f);
            j = k + 1;
        }
        Ok(CriterionContext { covariates, responses, ecdf, radius: noise.negligible_radius(), noise })
    }

    pub fn n(&self) -> usize {
        self.responses.len()
    }

    pub fn d(&self) -> usize {
        self.covariates.d()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn sorted_responses(&self) -> &[f64] {
        &self.responses
    }

    /// `Fₙʸ` at the sorted responses.
    pub fn response_ecdf(&self) -> &[f64] {
        &self.ecdf
    }

    fn sorted_projection(&self, beta: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let z = self.covariates.dot_all(beta)?;
        if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("projection {bad} at beta {beta:?}")));
        }
        let mut perm: Vec<usize> = (0..z.len()).collect();
        perm.sort_unstable_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
        let sorted = perm.iter().map(|&i| z[i]).collect();
        Ok((sorted, perm))
    }

    /// `n · Cₙ,β(y)` for sorted projections.
    fn conv_sum(&self, z: &[f64], y: f64) -> f64 {
        let lo = z.partition_point(|&v| v < y - self.radius);
        let hi = z.partition_point(|&v| v <= y + self.radius);
        let window = &z[lo..hi];
        let inner: f64 = match self.noise {
            NoiseModel::Gaussian { sigma } => {
                let inv = 1.0 / sigma;
                normal_table::cdf_sum(y * inv, inv, window)
            }
            noise => window.iter().map(|&v| noise.cdf(y - v)).sum(),
        };
        lo as f64 + inner
    }

    /// `Σⱼ rⱼ fᵋ(Yⱼ − z)` over sorted responses.
    fn weighted_density_sum(&self, residuals: &[f64], z: f64) -> f64 {
        let y = &self.responses;
        let lo = y.partition_point(|&v| v < z - self.radius);
        let hi = y.partition_point(|&v| v <= z + self.radius);
        match self.noise {
            NoiseModel::Gaussian { sigma } => {
                let inv = 1.0 / sigma;
                inv * normal_table::weighted_pdf_sum(z * inv, inv, &y[lo..hi], &residuals[lo..hi])
            }
            noise => y[lo..hi]
                .iter()
                .zip(&residuals[lo..hi])
                .map(|(&yj, &r)| r * noise.pdf(yj - z))
                .sum(),
        }
    }

    fn residuals(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n() as f64;
        map_range(self.n(), PAR_MIN_LEN, |j| self.ecdf[j] - self.conv_sum(z, self.responses[j]) / n)
    }

    /// `Cₙ,β(y)`.
    pub fn conv_cdf(&self, beta: &[f64], y: f64) -> Result<f64> {
        let (z, _) = self.sorted_projection(beta)?;
        Ok(self.conv_sum(&z, y) / self.n() as f64)
    }

    /// `Dₙ(β)`.
    pub fn value(&self, beta: &[f64]) -> Result<f64> {
        let (z, _) = self.sorted_projection(beta)?;
        let r = self.residuals(&z);
        let v = r.iter().map(|r| r * r).sum::<f64>() / self.n() as f64;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("criterion at beta {beta:?}")));
        }
        Ok(v)
    }

    /// `∇Dₙ(β) = (2/n) Σⱼ rⱼ (1/n) Σᵢ fᵋ(Yⱼ − βᵀXᵢ) Xᵢ` with `rⱼ = Fₙʸ(Yⱼ) − Cₙ,β(Yⱼ)`.
    pub fn gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(beta).map(|(_, g)| g)
    }

    pub fn value_and_gradient(&self, beta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (z, perm) = self.sorted_projection(beta)?;
        let r = self.residuals(&z);
        let n = self.n() as f64;
        let value = r.iter().map(|r| r * r).sum::<f64>() / n;
        // regroup the double sum by atom: w_i = Σⱼ rⱼ fᵋ(Yⱼ − zᵢ)
        let w = map_range(z.len(), PAR_MIN_LEN, |i| self.weighted_density_sum(&r, z[i]));
        let mut grad = vec![0.0; self.d()];
        for (wi, &row) in w.iter().zip(&perm) {
            for (g, x) in grad.iter_mut().zip(self.covariates.row(row)) {
                *g += wi * x;
            }
        }
        let scale = 2.0 / (n * n);
        grad.iter_mut().for_each(|g| *g *= scale);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("criterion or gradient at beta {beta:?}")));
        }
        Ok((value, grad))
    }
}

/// Cheap stand-in for `Dₙ` used to rank starting points.
///
/// Residuals are taken at `m` rank-spaced responses only, and the projections
/// are linearly binned on a grid of spacing `scale/8` before convolving with
/// the noise CDF. All covariate rows are kept, so the coupling between the
/// projected covariates and the responses that makes `Dₙ` small near `𝓑₀` is
/// preserved.
#[derive(Debug, Clone)]
pub(crate) struct Surrogate<'a> {
    ctx: &'a CriterionContext,
    ys: Vec<f64>,
    targets: Vec<f64>,
    delta: f64,
}

impl<'a> Surrogate<'a> {
    pub(crate) fn new(ctx: &'a CriterionContext, m: usize) -> Self {
        let n = ctx.n();
        let m = m.clamp(1, n);
        let picks: Vec<usize> = (0..m).map(|k| ((2 * k + 1) * n / (2 * m)).min(n - 1)).collect();
        let ys = picks.iter().map(|&j| ctx.responses[j]).collect();
        let targets = picks.iter().map(|&j| ctx.ecdf[j]).collect();
        let scale = ctx.noise.gaussian_sigma().unwrap_or_else(|| ctx.noise.sd() / std::f64::consts::SQRT_2);
        Surrogate { ctx, ys, targets, delta: scale / 8.0 }
    }

    pub(crate) fn value(&self, beta: &[f64]) -> f64 {
        let Ok(z) = self.ctx.covariates.dot_all(beta) else { return f64::INFINITY };
        let (zmin, zmax) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(zmin.is_finite() && zmax.is_finite()) {
            return f64::INFINITY;
        }
        let delta = self.delta.max((zmax - zmin) / 100_000.0);
        let g = ((zmax - zmin) / delta) as usize + 2;
        let mut w = vec![0.0; g + 1];
        for &v in &z {
            let pos = (v - zmin) / delta;
            let k = (pos as usize).min(g - 1);
            let t = pos - k as f64;
            w[k] += 1.0 - t;
            w[k + 1] += t;
        }
        let mut below = vec![0.0; g + 2];
        for k in 0..=g {
            below[k + 1] = below[k] + w[k];
        }
        let n = self.ctx.n() as f64;
        let radius = self.ctx.radius;
        let mut total = 0.0;
        for (&y, &target) in self.ys.iter().zip(&self.targets) {
            let lo = (((y - radius - zmin) / delta).ceil().max(0.0) as usize).min(g + 1);
            let hi = (((y + radius - zmin) / delta).floor().max(-1.0) + 1.0).min((g + 1) as f64) as usize;
            let mut c = below[lo];
            if hi > lo {
                c += match self.ctx.noise {
                    NoiseModel::Gaussian { sigma } => {
                        let inv = 1.0 / sigma;
                        (lo..hi).map(|k| w[k] * normal_table::cdf((y - zmin - k as f64 * delta) * inv)).sum::<f64>()
                    }
                    noise => (lo..hi).map(|k| w[k] * noise.cdf(y - zmin - k as f64 * delta)).sum::<f64>(),
                };
            }
            let r = target - c / n;
            total += r * r;
        }
        total / self.ys.len() as f64
    }
}

pub fn conv_cdf(ctx: &CriterionContext, beta: &[f64], y: f64) -> Result<f64> {
    ctx.conv_cdf(beta, y)
}

pub fn dn_criterion(ctx: &CriterionContext, beta: &[f64]) -> Result<f64> {
    ctx.value(beta)
}

pub fn dn_gradient(ctx: &CriterionContext, beta: &[f64]) -> Result<Vec<f64>> {
    ctx.gradient(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surrogate_tracks_criterion() {
        let ds = crate::data::sample_setting(crate::data::Setting::D, 600, 1.0, 7, false).unwrap();
        let ctx = CriterionContext::new(&ds, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        let full = Surrogate::new(&ctx, 600);
        for beta in [[0.5, 2.0, 3.0], [8.1, 1.95, 1.29], [1.0, 1.0, 1.0]] {
            let (a, b) = (full.value(&beta), ctx.value(&beta).unwrap());
            assert!((a - b).abs() < 2e-6 + 0.02 * b, "{beta:?}: {a} vs {b}");
        }
        let sub = Surrogate::new(&ctx, 200);
        assert!(sub.value(&[0.5, 2.0, 3.0]) < sub.value(&[8.1, 1.95, 1.29]));
    }

    fn ctx(rows: &[Vec<f64>], y: &[f64], sigma: f64) -> CriterionContext {
        let ds = Dataset::new(Covariates::from_rows(rows).unwrap(), y.to_vec()).unwrap();
        CriterionContext::new(&ds, NoiseModel::gaussian(sigma).unwrap()).unwrap()
    }

    #[test]
    fn single_centered_atom_gives_noise_cdf() {
        let c = ctx(&[vec![1.3]], &[0.4], 1.0);
        let noise = NoiseModel::gaussian(1.0).unwrap();
        for y in [-2.0, 0.0, 0.7, 3.0] {
            assert!((c.conv_cdf(&[0.0], y).unwrap() - noise.cdf(y)).abs() < 1e-15);
        }
        assert_eq!(c.conv_cdf(&[0.0], 1e6).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let c = ctx(&[vec![0.0], vec![2.0]], &[0.0, 0.0], 1.0);
        assert!((c.conv_cdf(&[1.0], 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_observation_criterion_and_gradient() {
        let c = ctx(&[vec![0.8, -1.1]], &[0.25], 0.7);
        let noise = NoiseModel::gaussian(0.7).unwrap();
        let beta = [0.4, 0.9];
        let r = 0.25 - (0.4 * 0.8 - 0.9 * 1.1);
        let expect = (1.0 - noise.cdf(r)).powi(2);
        assert!((c.value(&beta).unwrap() - expect).abs() < 1e-15);
        let g = c.gradient(&beta).unwrap();
        let k = 2.0 * (1.0 - noise.cdf(r)) * noise.pdf(r);
        assert!((g[0] - k * 0.8).abs() < 1e-15);
        assert!((g[1] - k * -1.1).abs() < 1e-15);
    }

    #[test]
    fn ties_use_max_rank() {
        let c = ctx(&[vec![0.0], vec![0.0], vec![0.0]], &[1.0, 0.5, 1.0], 1.0);
        assert_eq!(c.response_ecdf(), &[1.0 / 3.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_mismatch() {
        let c = ctx(&[vec![0.0, 1.0]], &[1.0], 1.0);
        assert!(matches!(c.value(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(c.gradient(&[1.0, 2.0, 3.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn laplace_noise_matches_direct_sum() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).sin() * 3.0]).collect();
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.91).cos() * 4.0).collect();
        let ds = Dataset::new(Covariates::from_rows(&rows).unwrap(), y.clone()).unwrap();
        let noise = NoiseModel::laplace(0.5).unwrap();
        let c = CriterionContext::new(&ds, noise).unwrap();
        let beta = [1.2];
        let mut direct = 0.0;
        for &yj in &y {
            let f = y.iter().filter(|&&v| v <= yj).count() as f64 / 30.0;
            let cc = rows.iter().map(|x| noise.cdf(yj - 1.2 * x[0])).sum::<f64>() / 30.0;
            direct += (f - cc).powi(2);
        }
        assert!((c.value(&beta).unwrap() - direct / 30.0).abs() < 1e-14);
    }
}
