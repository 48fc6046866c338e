//! Wasserstein-1 distance between one-dimensional empirical measures.

use crate::empirical::EmpiricalDist;
use crate::rng::{stream_rng, StreamRng};
use crate::{Error, Result};

/// Exact `W₁` between two empirical measures.
pub fn w1_empirical(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    if a.len() == b.len() {
        w1_equal_size(a, b)
    } else {
        w1_cdf_integral(a, b)
    }
}

/// `(1/n) Σ |a₍ᵢ₎ − b₍ᵢ₎|` for two samples of equal size.
///
/// # Panics
/// If the sizes differ.
pub fn w1_equal_size(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    assert_eq!(a.len(), b.len(), "equal-size path needs equal sample sizes");
    let s: f64 = a.atoms().iter().zip(b.atoms()).map(|(x, y)| (x - y).abs()).sum();
    s / a.len() as f64
}

/// `∫ |F_a − F_b| dx` computed exactly over the merged breakpoints.
pub fn w1_cdf_integral(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    let (xa, xb) = (a.atoms(), b.atoms());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = xa[0].min(xb[0]);
    let mut total = 0.0;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        let gap = (i as f64 / na - j as f64 / nb).abs();
        total += gap * (x - prev);
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        prev = x;
    }
    total
}

/// `W₁` between `est` and an empirical sample of size `m` drawn from the
/// reference law with stream `(seed, 0)`.
pub fn w1_vs_reference<S>(est: &EmpiricalDist, reference_sampler: S, m: usize, seed: u64) -> Result<f64>
where
    S: FnMut(&mut StreamRng) -> f64,
{
    w1_vs_reference_with(est, reference_sampler, m, &mut stream_rng(seed, 0))
}

pub fn w1_vs_reference_with<S>(
    est: &EmpiricalDist,
    mut reference_sampler: S,
    m: usize,
    rng: &mut StreamRng,
) -> Result<f64>
where
    S: FnMut(&mut StreamRng) -> f64,
{
    if m == 0 {
        return Err(Error::InvalidArgument("reference sample size must be at least 1".into()));
    }
    let reference = EmpiricalDist::new((0..m).map(|_| reference_sampler(rng)).collect())?;
    Ok(w1_empirical(est, &reference))
}

/// Least-squares slope of `ln(values)` against `ln(ns)`.
pub fn loglinear_slope(ns: &[f64], values: &[f64]) -> Result<f64> {
    if ns.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: ns.len(), got: values.len() });
    }
    if ns.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points for a slope".into()));
    }
    if let Some(v) = values.iter().chain(ns).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("log-linear fit needs positive finite values, got {v}")));
    }
    let lx: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all sample sizes are equal".into()));
    }
    Ok(sxy / sxx)
}
