//! Closed-form and brute-force oracles for the criterion, the densities and
//! conditional inference.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use statrs::distribution::{Continuous, ContinuousCDF, Laplace, Normal};
use unlinked_deconv::conditional::{
    cond_mean, cond_mode, cond_quantile, conditional_density, credible_interval, unconditional_baselines, MeanMethod,
};
use unlinked_deconv::density::{fy_empirical, fy_gauss_conv, fy_integrated, kde};
use unlinked_deconv::{
    Covariates, CriterionContext, DensityEstimate, EmpiricalDist, FyVariant, KernelSpec, NoiseModel,
};

fn hand_context() -> CriterionContext {
    let x = Covariates::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    CriterionContext::from_parts(x, vec![0.2, -0.3, 1.1], NoiseModel::gaussian(1.0).unwrap()).unwrap()
}

/// `(1/n) Σⱼ (Fₙʸ(Yⱼ) − (1/n) Σᵢ Φ((Yⱼ − βᵀXᵢ)/σ))²` with a double loop.
fn brute_criterion(x: &[[f64; 2]], y: &[f64], beta: [f64; 2], sigma: f64) -> f64 {
    let phi = Normal::new(0.0, 1.0).unwrap();
    let n = y.len() as f64;
    let mut total = 0.0;
    for &yj in y {
        let ecdf = y.iter().filter(|&&v| v <= yj).count() as f64 / n;
        let conv: f64 = x.iter().map(|xi| phi.cdf((yj - beta[0] * xi[0] - beta[1] * xi[1]) / sigma)).sum::<f64>() / n;
        total += (ecdf - conv).powi(2);
    }
    total / n
}

#[test]
fn criterion_matches_double_loop() {
    let ctx = hand_context();
    let x = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
    let y = [0.2, -0.3, 1.1];
    for beta in [[0.0, 0.0], [0.7, -1.3], [-2.0, 0.4], [5.0, 5.0]] {
        assert_abs_diff_eq!(ctx.value(&beta).unwrap(), brute_criterion(&x, &y, beta, 1.0), epsilon = 1e-12);
    }
}

#[test]
fn hand_dataset_gradient_matches_finite_differences() {
    let ctx = hand_context();
    let mut seed = 0x9e37_79b9_7f4a_7c15u64;
    let mut unif = || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20 {
        let beta = [6.0 * unif() - 3.0, 6.0 * unif() - 3.0];
        let g = ctx.gradient(&beta).unwrap();
        for j in 0..2 {
            let h = 1e-5;
            let mut p = beta;
            let mut m = beta;
            p[j] += h;
            m[j] -= h;
            let fd = (ctx.value(&p).unwrap() - ctx.value(&m).unwrap()) / (2.0 * h);
            assert_relative_eq!(g[j], fd, max_relative = 1e-5, epsilon = 1e-11);
        }
    }
}

#[test]
fn noise_models_match_statrs() {
    let g = NoiseModel::gaussian(1.7).unwrap();
    let gn = Normal::new(0.0, 1.7).unwrap();
    let l = NoiseModel::laplace(0.6).unwrap();
    let ln = Laplace::new(0.0, 0.6).unwrap();
    for k in -40..=40 {
        let x = k as f64 * 0.25;
        assert_relative_eq!(g.cdf(x), gn.cdf(x), max_relative = 1e-9, epsilon = 1e-15);
        assert_relative_eq!(g.pdf(x), gn.pdf(x), max_relative = 1e-13);
        assert_relative_eq!(l.cdf(x), ln.cdf(x), max_relative = 1e-9, epsilon = 1e-15);
        assert_relative_eq!(l.pdf(x), ln.pdf(x), max_relative = 1e-13);
    }
}

#[test]
fn fy_examples() {
    let noise = NoiseModel::gaussian(1.0).unwrap();
    let std = Normal::new(0.0, 1.0).unwrap();
    let pair = EmpiricalDist::new(vec![-1.0, 1.0]).unwrap();
    assert_abs_diff_eq!(fy_empirical(&pair, noise).evaluate(0.0), std.pdf(1.0), epsilon = 1e-14);

    let zero = EmpiricalDist::new(vec![0.0]).unwrap();
    let conv = fy_gauss_conv(&zero, 1.0, 1.0).unwrap();
    assert_abs_diff_eq!(conv.evaluate(0.0), 1.0 / (2.0 * std::f64::consts::PI.sqrt()), epsilon = 1e-14);

    let atoms = EmpiricalDist::new(vec![-2.3, -0.4, 0.1, 0.9, 3.3]).unwrap();
    let emp = fy_empirical(&atoms, noise);
    let tiny = fy_gauss_conv(&atoms, 1e-7, 1.0).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.8).unwrap()).unwrap();
    let wide = fy_gauss_conv(&atoms, 0.8, 1.0).unwrap();
    let integrated = fy_integrated(&fz, noise).unwrap();
    for k in -60..=60 {
        let y = k as f64 * 0.125;
        assert_abs_diff_eq!(tiny.evaluate(y), emp.evaluate(y), epsilon = 1e-6);
        assert_abs_diff_eq!(wide.evaluate(y), integrated.evaluate(y), epsilon = 1e-4);
    }
    assert_abs_diff_eq!(integrated.integral(4096), 1.0, epsilon = 2e-3);
    assert_abs_diff_eq!(emp.integral(4096), 1.0, epsilon = 1e-3);

    let spike = kde(&EmpiricalDist::new(vec![0.7]).unwrap(), KernelSpec::gaussian(1e-4).unwrap()).unwrap();
    let spike_y = fy_integrated(&spike, noise).unwrap();
    for y in [-1.0, 0.0, 0.7, 2.5] {
        assert_abs_diff_eq!(spike_y.evaluate(y), std.pdf(y - 0.7), epsilon = 1e-4);
    }
}

fn posterior(tau: f64, sigma: f64, y0: f64) -> Normal {
    let (t2, s2) = (tau * tau, sigma * sigma);
    Normal::new(t2 / (t2 + s2) * y0, (t2 * s2 / (t2 + s2)).sqrt()).unwrap()
}

#[test]
fn conjugate_density_mean_mode_quantiles() {
    for (tau, sigma, y0) in [(1.0, 1.0, 2.0), (2.0, 0.5, -1.0), (0.5, 2.0, 0.0), (3.0, 1.5, 4.0)] {
        let fz = DensityEstimate::gaussian(0.0, tau).unwrap();
        let cd = conditional_density(&fz, NoiseModel::gaussian(sigma).unwrap(), y0, FyVariant::Integrated).unwrap();
        let post = posterior(tau, sigma, y0);
        let (m, s) = (post.inverse_cdf(0.5), post.inverse_cdf(0.8413447460685429) - post.inverse_cdf(0.5));
        for k in -80..=80 {
            let z = m + s * k as f64 * 0.1;
            assert_abs_diff_eq!(cd.density(z), post.pdf(z), epsilon = 1e-6);
        }
        assert_abs_diff_eq!(cd.mass(), 1.0, epsilon = 2e-3);
        assert_abs_diff_eq!(cond_mean(&cd, MeanMethod::Quadrature, 0, 0).unwrap(), m, epsilon = 1e-3);
        assert_abs_diff_eq!(cond_mode(&cd), m, epsilon = 1e-4);
        for p in [0.025, 0.25, 0.5, 0.75, 0.975] {
            assert_abs_diff_eq!(cond_quantile(&cd, p).unwrap(), post.inverse_cdf(p), epsilon = 1e-3);
        }
        let ci = credible_interval(&cd, 0.05).unwrap();
        assert_abs_diff_eq!(ci.lo, m - 1.959964 * s, epsilon = 2e-3);
        assert_abs_diff_eq!(ci.hi, m + 1.959964 * s, epsilon = 2e-3);
        assert!(ci.contains(cond_quantile(&cd, 0.5).unwrap()));
    }
}

#[test]
fn flat_likelihood_returns_prior() {
    let atoms = EmpiricalDist::new(vec![-1.2, -0.3, 0.0, 0.4, 1.5, 2.2]).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.5).unwrap()).unwrap();
    let cd = conditional_density(&fz, NoiseModel::gaussian(1e6).unwrap(), 0.3, FyVariant::Integrated).unwrap();
    assert_abs_diff_eq!(cd.mass(), 1.0, epsilon = 2e-3);
    let (lo, hi) = fz.support_hint();
    for k in 0..=400 {
        let z = lo + (hi - lo) * k as f64 / 400.0;
        assert_abs_diff_eq!(cd.density(z), fz.evaluate(z), epsilon = 1e-4);
    }
}

#[test]
fn symmetric_prior_at_zero_response() {
    let atoms = EmpiricalDist::new(vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.9).unwrap()).unwrap();
    let cd = conditional_density(&fz, NoiseModel::gaussian(1.0).unwrap(), 0.0, FyVariant::Integrated).unwrap();
    assert_abs_diff_eq!(cd.mean(), 0.0, epsilon = 1e-3);
    assert_abs_diff_eq!(cd.mode(), 0.0, epsilon = 1e-4);
    assert_abs_diff_eq!(cd.quantile(0.5).unwrap(), 0.0, epsilon = 1e-3);
    let q = [0.25, 0.5, 0.75].map(|p| cd.quantile(p).unwrap());
    assert!(q[0] <= q[1] && q[1] <= q[2]);
    let (lo, hi) = cd.support_hint();
    for k in 0..10_000 {
        assert!(cd.density(lo + (hi - lo) * k as f64 / 9_999.0) >= 0.0);
    }
}

#[test]
fn mode_matches_fine_grid_argmax() {
    let atoms = EmpiricalDist::new(vec![-3.0, -2.6, -2.5, 0.2, 1.0, 1.1, 1.3, 4.0]).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.6).unwrap()).unwrap();
    for y0 in [-2.0, 0.5, 3.0] {
        let cd = conditional_density(&fz, NoiseModel::gaussian(0.8).unwrap(), y0, FyVariant::Integrated).unwrap();
        let (lo, hi) = cd.support_hint();
        let k = 1_000_000;
        let step = (hi - lo) / (k - 1) as f64;
        let (mut best, mut arg) = (f64::NEG_INFINITY, lo);
        for i in 0..k {
            let z = lo + step * i as f64;
            let v = cd.unnormalized_log(z);
            if v > best {
                best = v;
                arg = z;
            }
        }
        assert_abs_diff_eq!(cd.mode(), arg, epsilon = step);
    }
}

#[test]
fn importance_sampling_agrees_with_quadrature() {
    let atoms = EmpiricalDist::new((0..40).map(|i| ((i * 37) % 40) as f64 * 0.3 - 6.0).collect()).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.9).unwrap()).unwrap();
    for (y0, seed) in [(-3.0, 1), (0.4, 2), (5.0, 3)] {
        let cd = conditional_density(&fz, NoiseModel::gaussian(1.0).unwrap(), y0, FyVariant::Integrated).unwrap();
        let is = cd.importance_sample(100_000, seed).unwrap();
        assert!((is.mean - cd.mean()).abs() <= 3.0 * is.std_error, "{} vs {} (se {})", is.mean, cd.mean(), is.std_error);
        assert_abs_diff_eq!(cond_mean(&cd, MeanMethod::ImportanceSampling, 100_000, seed).unwrap(), is.mean);
    }
}

#[test]
fn baseline_examples() {
    let atoms = EmpiricalDist::new(vec![1.0, 2.0, 3.0]).unwrap();
    let fz = kde(&atoms, KernelSpec::gaussian(0.5).unwrap()).unwrap();
    let b = unconditional_baselines(&atoms, &fz, 0.05).unwrap();
    assert_eq!(b.mean, 2.0);
    assert_abs_diff_eq!(b.mode, 2.0, epsilon = 1e-6);

    let sym = EmpiricalDist::new(vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
    let h = 1.2;
    let b = unconditional_baselines(&sym, &kde(&sym, KernelSpec::gaussian(h).unwrap()).unwrap(), 0.5).unwrap();
    assert!(b.mode.abs() <= h);
    // ranks ⌈4·0.25⌉ = 1 and ⌈4·0.75⌉ = 3.
    assert_eq!((b.lo, b.hi), (-3.0, 1.0));
}
