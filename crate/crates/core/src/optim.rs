//! Small unconstrained minimisers: Nelder–Mead and BFGS with backtracking.

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub max_iters: usize,
    /// Absolute tolerance on objective values.
    pub f_tol: f64,
    /// Tolerance on the iterate, relative to `max(1, |x|∞)`.
    pub x_tol: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Nelder–Mead with standard coefficients (reflection 1, expansion 2,
/// contraction ½, shrink ½). The initial simplex is `x0` plus `step[k]·e_k`.
///
/// Stops when the spread of simplex values drops to `f_tol` or the simplex
/// collapses to `x_tol`. A non-finite objective value is treated as `+∞`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], tol: Tolerances) -> Outcome
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for k in 0..d {
        let mut v = x0.to_vec();
        v[k] += if step[k] != 0.0 { step[k] } else { 0.05 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();
    let mut iterations = 0;
    let mut converged = false;

    loop {
        // order: best first; ties broken by vertex age via stable sort
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let scale = inf_norm(&simplex[0]).max(1.0);
        let size = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0, f64::max);
        if spread.is_finite() && (spread <= tol.f_tol || size <= tol.x_tol * scale) {
            converged = true;
            break;
        }
        if iterations >= tol.max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let worst = simplex[d].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for k in 1..=d {
            for (x, b) in simplex[k].iter_mut().zip(&best) {
                *x = b + 0.5 * (*x - b);
            }
            values[k] = eval(&simplex[k]);
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Outcome {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations: evals,
        converged,
    }
}

/// BFGS on the inverse Hessian with an Armijo backtracking line search.
///
/// `fg` returns the value and gradient, or `None` where the objective is not
/// finite. `initial_step` sets the length of the first trial step.
pub fn bfgs<F>(mut fg: F, x0: &[f64], initial_step: f64, tol: Tolerances) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let d = x0.len();
    let mut evals = 1usize;
    let mut x = x0.to_vec();
    let (mut f, mut g) = fg(&x)?;
    let gnorm0 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = identity(d, if gnorm0 > 0.0 { initial_step / gnorm0 } else { 1.0 });
    let mut iterations = 0;
    let mut converged = false;
    let mut reset = false;

    while iterations < tol.max_iters {
        if inf_norm(&g) <= 1e-14 {
            converged = true;
            break;
        }
        iterations += 1;
        let mut p: Vec<f64> = (0..d).map(|i| -(0..d).map(|j| h[i * d + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(d, if gnorm0 > 0.0 { initial_step / gnorm0 } else { 1.0 });
            p = g.iter().map(|v| -v * h[0]).collect();
            slope = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            evals += 1;
            if let Some((fnew, gnew)) = fg(&xn) {
                if fnew <= f + 1e-4 * t * slope {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if reset {
                break;
            }
            // retry once along steepest descent
            reset = true;
            h = identity(d, if gnorm0 > 0.0 { initial_step / gnorm0 } else { 1.0 });
            continue;
        };
        reset = false;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let df = f - fnew;
        let step = inf_norm(&s);
        x = xn;
        f = fnew;
        g = gnew;
        if step <= tol.x_tol * inf_norm(&x).max(1.0) || (df <= tol.f_tol && step <= tol.x_tol.sqrt()) {
            converged = true;
            break;
        }
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-300 {
            if iterations == 1 {
                let yy: f64 = y.iter().map(|v| v * v).sum();
                h = identity(d, sy / yy);
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| h[i * d + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
    }
    Some(Outcome { x, f, iterations, evaluations: evals, converged })
}

fn identity(d: usize, scale: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = scale;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn rosenbrock_grad(x: &[f64]) -> Vec<f64> {
        vec![
            -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
            200.0 * (x[1] - x[0] * x[0]),
        ]
    }

    const TOL: Tolerances = Tolerances { max_iters: 5000, f_tol: 1e-16, x_tol: 1e-10 };

    #[test]
    fn nelder_mead_solves_rosenbrock() {
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.1, 0.1], TOL);
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-4 && (out.x[1] - 1.0).abs() < 1e-4, "{:?}", out.x);
    }

    #[test]
    fn nelder_mead_quadratic_3d() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 2.0).powi(2) + 3.0 * x[2] * x[2];
        let out = nelder_mead(f, &[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5], TOL);
        assert!(out.f < 1e-12);
    }

    #[test]
    fn nelder_mead_respects_iteration_cap() {
        let tol = Tolerances { max_iters: 3, f_tol: 0.0, x_tol: 0.0 };
        let out = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.1, 0.1], tol);
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
    }

    #[test]
    fn bfgs_solves_rosenbrock() {
        let out = bfgs(|x| Some((rosenbrock(x), rosenbrock_grad(x))), &[-1.2, 1.0], 0.1, TOL).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out);
    }

    #[test]
    fn bfgs_avoids_undefined_region() {
        // objective undefined for x < 0
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                None
            } else {
                Some(((x[0] - 0.3).powi(2), vec![2.0 * (x[0] - 0.3)]))
            }
        };
        let out = bfgs(f, &[2.0], 10.0, TOL).unwrap();
        assert!((out.x[0] - 0.3).abs() < 1e-7);
    }
}
