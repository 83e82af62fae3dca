//! Derivative-free minimization used by the likelihood fits.
//!
//! Nelder–Mead with automatic restarts from the best vertex, followed by a
//! guarded Newton polish on finite-difference derivatives. Objectives may
//! return `+inf` for infeasible points; the search treats them as worse than
//! any finite value.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Convergence tolerance on the spread of objective values in the simplex.
    pub ftol: f64,
    pub max_iter: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn run_simplex<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: &[f64], opts: Options, budget: usize) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut fv: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let (best, worst) = (fv[0], fv[n]);
        if best.is_finite() && worst - best <= opts.ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let towards = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = towards(alpha);
        let fr = f(&xr);
        if fr < fv[0] {
            let xe = towards(gamma);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                fv[n] = fe;
            } else {
                pts[n] = xr;
                fv[n] = fr;
            }
            continue;
        }
        if fr < fv[n - 1] {
            pts[n] = xr;
            fv[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[n] {
            let xc = towards(rho);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = towards(-rho);
            let fc = f(&xc);
            (xc, fc)
        };
        if fc < fv[n].min(fr) {
            pts[n] = xc;
            fv[n] = fc;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, v)| b + shrink * (v - b)).collect();
            fv[i] = f(&p);
            pts[i] = p;
        }
    }

    let ib = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    Minimum {
        x: pts[ib].clone(),
        f: fv[ib],
        iterations,
        converged,
    }
}

/// Minimize `f` from `x0` with initial simplex edge lengths `step`.
///
/// After each converged simplex run the search restarts around the best
/// vertex with a smaller simplex; it stops once a restart no longer improves
/// the objective by more than `ftol`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: &[f64], opts: Options) -> Minimum {
    let mut cur = run_simplex(f, x0, step, opts, opts.max_iter);
    let mut scale = 0.1;
    while cur.converged && cur.iterations < opts.max_iter {
        let step2: Vec<f64> = step.iter().map(|s| s * scale).collect();
        let next = run_simplex(f, &cur.x, &step2, opts, opts.max_iter - cur.iterations);
        let improved = cur.f - next.f > opts.ftol * (1.0 + cur.f.abs());
        let total = cur.iterations + next.iterations;
        if next.f < cur.f {
            cur = Minimum {
                iterations: total,
                ..next
            };
        } else {
            cur.iterations = total;
            cur.converged = next.converged;
        }
        if !improved {
            break;
        }
        scale *= 0.5;
    }
    cur
}

/// Central-difference gradient and Hessian; `None` if any probe is infeasible.
pub fn fd_derivatives<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: &[f64]) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return None;
    }
    let eval = |d: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in d {
            p[i] += s;
        }
        f(&p)
    };
    let mut g = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let fp = eval(&[(i, h[i])]);
        let fm = eval(&[(i, -h[i])]);
        if !fp.is_finite() || !fm.is_finite() {
            return None;
        }
        g[i] = (fp - fm) / (2.0 * h[i]);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let fpp = eval(&[(i, h[i]), (j, h[j])]);
            let fpm = eval(&[(i, h[i]), (j, -h[j])]);
            let fmp = eval(&[(i, -h[i]), (j, h[j])]);
            let fmm = eval(&[(i, -h[i]), (j, -h[j])]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            if !v.is_finite() {
                return None;
            }
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Some((g, hess))
}

/// Newton iterations from `start`, accepting only steps that lower `f`.
pub fn newton_polish<F: Fn(&[f64]) -> f64>(f: &F, start: Minimum, max_steps: usize) -> Minimum {
    let mut cur = start;
    for _ in 0..max_steps {
        let h: Vec<f64> = cur.x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
        let Some((g, hess)) = fd_derivatives(f, &cur.x, &h) else {
            break;
        };
        let Some(chol) = hess.cholesky() else {
            break;
        };
        let dir = chol.solve(&(-g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let cand: Vec<f64> = cur.x.iter().zip(dir.iter()).map(|(x, d)| x + t * d).collect();
            let fc = f(&cand);
            if fc < cur.f {
                let gain = cur.f - fc;
                cur.x = cand;
                cur.f = fc;
                accepted = gain > 1e-14 * (1.0 + fc.abs());
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    cur
}
