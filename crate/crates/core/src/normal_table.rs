//! Tabulated standard normal CDF and density for the criterion's inner loops.
//!
//! Each node `xₖ = k/32 − 10` stores the Taylor coefficients `Φ⁽ᵐ⁾(xₖ)/m!`,
//! `m = 0..=7`, using `φ⁽ᵐ⁾ = (−1)ᵐ Heₘ φ`. Evaluation expands around the
//! nearest node, so `|t| ≤ 1/64` and the truncation error is below 1e-17.

use std::sync::OnceLock;

use crate::noise::{std_normal_cdf, std_normal_pdf};

pub(crate) const RANGE: f64 = 10.0;
const PER_UNIT: f64 = 32.0;
const ORDER: usize = 8;
const NODES: usize = (2.0 * RANGE * PER_UNIT) as usize + 1;

struct Table {
    coef: Vec<[f64; ORDER]>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let coef = (0..NODES)
            .map(|k| {
                let x = k as f64 / PER_UNIT - RANGE;
                let phi = std_normal_pdf(x);
                let mut c = [0.0; ORDER];
                c[0] = std_normal_cdf(x);
                // He_{m-1}(x) via the probabilists' recurrence
                let (mut he_prev, mut he) = (0.0, 1.0);
                let mut fact = 1.0;
                for (m, cm) in c.iter_mut().enumerate().skip(1) {
                    fact *= m as f64;
                    let sign = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
                    *cm = sign * he * phi / fact;
                    let next = x * he - (m - 1) as f64 * he_prev;
                    he_prev = he;
                    he = next;
                }
                c
            })
            .collect();
        Table { coef }
    })
}

#[inline(always)]
fn locate(coef: &[[f64; ORDER]], u: f64) -> (&[f64; ORDER], f64) {
    let pos = ((u + RANGE) * PER_UNIT + 0.5).clamp(0.0, (NODES - 1) as f64);
    let k = pos as usize;
    let t = u - (k as f64 * (1.0 / PER_UNIT) - RANGE);
    (&coef[k], t)
}

#[inline(always)]
fn cdf_poly(c: &[f64; ORDER], t: f64) -> f64 {
    let t2 = t * t;
    let t4 = t2 * t2;
    let a = c[0] + c[1] * t + (c[2] + c[3] * t) * t2;
    let b = c[4] + c[5] * t + (c[6] + c[7] * t) * t2;
    a + b * t4
}

#[inline(always)]
fn pdf_poly(c: &[f64; ORDER], t: f64) -> f64 {
    let t2 = t * t;
    let t4 = t2 * t2;
    let a = c[1] + 2.0 * c[2] * t + (3.0 * c[3] + 4.0 * c[4] * t) * t2;
    let b = 5.0 * c[5] + 6.0 * c[6] * t + 7.0 * c[7] * t2;
    a + b * t4
}

/// `Σᵢ Φ(u₀ − s·vᵢ)` for `vᵢ` with `|u₀ − s·vᵢ| ≤ 10`.
pub(crate) fn cdf_sum(u0: f64, s: f64, v: &[f64]) -> f64 {
    let coef = &table().coef[..];
    v.iter()
        .map(|&x| {
            let (c, t) = locate(coef, u0 - s * x);
            cdf_poly(c, t)
        })
        .sum()
}

/// `Σⱼ wⱼ φ(s·vⱼ − u₀)` for `vⱼ` with `|s·vⱼ − u₀| ≤ 10`.
pub(crate) fn weighted_pdf_sum(u0: f64, s: f64, v: &[f64], w: &[f64]) -> f64 {
    let coef = &table().coef[..];
    v.iter()
        .zip(w)
        .map(|(&x, &wj)| {
            let (c, t) = locate(coef, s * x - u0);
            wj * pdf_poly(c, t)
        })
        .sum()
}

/// `Φ(u)`, clamped to 0 and 1 outside `[−10, 10]`.
#[inline]
pub(crate) fn cdf(u: f64) -> f64 {
    if u <= -RANGE {
        return if u < -RANGE { 0.0 } else { table().coef[0][0] };
    }
    if u > RANGE {
        return 1.0;
    }
    let (c, t) = locate(&table().coef, u);
    cdf_poly(c, t)
}

/// `φ(u)` for `|u| ≤ 10`, zero outside.
#[cfg(test)]
pub(crate) fn pdf(u: f64) -> f64 {
    if !(-RANGE..=RANGE).contains(&u) {
        return 0.0;
    }
    let (c, t) = locate(&table().coef, u);
    pdf_poly(c, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_evaluation() {
        let mut worst_cdf: f64 = 0.0;
        let mut worst_pdf: f64 = 0.0;
        for i in 0..=200_000 {
            let u = -10.0 + 20.0 * i as f64 / 200_000.0 + 1.3e-7;
            worst_cdf = worst_cdf.max((cdf(u) - std_normal_cdf(u)).abs());
            worst_pdf = worst_pdf.max((pdf(u) - std_normal_pdf(u)).abs());
        }
        assert!(worst_cdf < 1e-15, "{worst_cdf}");
        assert!(worst_pdf < 1e-15, "{worst_pdf}");
    }

    #[test]
    fn sums_match_pointwise() {
        let v: Vec<f64> = (0..50).map(|i| i as f64 * 0.37 - 9.0).collect();
        let w: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let direct: f64 = v.iter().map(|&x| cdf(0.3 - 0.5 * x)).sum();
        assert!((cdf_sum(0.3, 0.5, &v) - direct).abs() < 1e-13);
        let direct: f64 = v.iter().zip(&w).map(|(&x, &wj)| wj * pdf(0.5 * x - 0.3)).sum();
        assert!((weighted_pdf_sum(0.3, 0.5, &v, &w) - direct).abs() < 1e-13);
    }

    #[test]
    fn clamps_outside_range() {
        assert_eq!(cdf(-11.0), 0.0);
        assert_eq!(cdf(11.0), 1.0);
        assert_eq!(pdf(12.0), 0.0);
        assert!(cdf(-10.0) < 1e-22);
    }
}
