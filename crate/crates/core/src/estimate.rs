//! Parameter estimation for annual-maxima samples.
//!
//! Maximum likelihood runs a simplex search on `(μ, ln σ, ξ)`; sign-constrained
//! shapes are reparameterized as `ξ = ±exp(η)` and the Gumbel fit drops the
//! shape coordinate entirely. Probability-weighted moments provide both a
//! standalone estimator and the starting point of every likelihood search.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::gev::{Family, GevParams};
use crate::optimize::{self, Minimum, Options};
use crate::stats::{self, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Pwm,
}

/// Restriction on the shape parameter during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Free,
    Gumbel,
    Frechet,
    Weibull,
}

impl From<Family> for Constraint {
    fn from(f: Family) -> Self {
        match f {
            Family::Gumbel => Constraint::Gumbel,
            Family::Frechet => Constraint::Frechet,
            Family::Weibull => Constraint::Weibull,
        }
    }
}

impl Constraint {
    pub fn admits(&self, xi: f64) -> bool {
        match self {
            Constraint::Free => xi > MIN_SHAPE,
            Constraint::Gumbel => xi == 0.0,
            Constraint::Frechet => xi > 0.0,
            Constraint::Weibull => xi < 0.0 && xi > MIN_SHAPE,
        }
    }
}

/// Shapes at or below -1 make the likelihood unbounded near the upper
/// endpoint; they are treated as infeasible.
pub const MIN_SHAPE: f64 = -1.0;

// ln of the smallest positive shape reachable by a sign-constrained fit
const MIN_LOG_SHAPE: f64 = -40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GevParams,
    pub method: Method,
    pub constraint: Constraint,
    pub loglik: f64,
    /// Standard errors of (μ, σ, ξ) from the observed information; the shape
    /// entry is zero for a Gumbel fit.
    pub std_errors: Option<[f64; 3]>,
    pub converged: bool,
    pub iterations: usize,
}

fn check_distinct(data: &[f64], min: usize) -> Result<()> {
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Validation("sample contains non-finite values".into()));
    }
    let d = stats::distinct_count(data);
    if d < min {
        return Err(Error::Degenerate(format!(
            "need at least {min} distinct values, got {d}"
        )));
    }
    Ok(())
}

/// Sample probability-weighted moments b₀, b₁, b₂.
pub fn sample_pwm(data: &[f64]) -> [f64; 3] {
    let s = stats::sorted(data);
    let n = s.len() as f64;
    let mut b = [0.0; 3];
    for (k, x) in s.iter().enumerate() {
        let i = k as f64; // i - 1 in 1-based terms
        b[0] += x;
        b[1] += x * i / (n - 1.0);
        b[2] += x * i * (i - 1.0) / ((n - 1.0) * (n - 2.0));
    }
    b.map(|v| v / n)
}

pub fn fit_pwm(data: &[f64]) -> Result<FitResult> {
    check_distinct(data, 3)?;
    let [b0, b1, b2] = sample_pwm(data);
    let l2 = 2.0 * b1 - b0;
    let c = l2 / (3.0 * b2 - b0) - 2f64.ln() / 3f64.ln();
    // k is the negated shape in Hosking's parameterization
    let k = 7.8590 * c + 2.9554 * c * c;
    let params = if k.abs() < 1e-8 {
        let sigma = l2 / 2f64.ln();
        GevParams::new(b0 - EULER_GAMMA * sigma, sigma, 0.0)?
    } else {
        if k <= -1.0 {
            return Err(Error::Degenerate(format!(
                "moment shape {} lies outside the range where probability-weighted moments exist",
                -k
            )));
        }
        let g = gamma(1.0 + k);
        let sigma = l2 * k / (g * (1.0 - 2f64.powf(-k)));
        GevParams::new(b0 + sigma * (g - 1.0) / k, sigma, -k)?
    };
    Ok(FitResult {
        params,
        method: Method::Pwm,
        constraint: Constraint::Free,
        loglik: params.log_likelihood(data),
        std_errors: None,
        converged: true,
        iterations: 0,
    })
}

/// Maps between optimizer coordinates and `GevParams` for one constraint.
#[derive(Debug, Clone, Copy)]
struct Coords(Constraint);

impl Coords {
    fn dim(&self) -> usize {
        if self.0 == Constraint::Gumbel {
            2
        } else {
            3
        }
    }

    fn decode(self, t: &[f64]) -> Option<GevParams> {
        let xi = match self.0 {
            Constraint::Free => t[2],
            Constraint::Gumbel => 0.0,
            Constraint::Frechet | Constraint::Weibull => {
                if t[2] < MIN_LOG_SHAPE {
                    return None;
                }
                let m = t[2].exp();
                if self.0 == Constraint::Frechet {
                    m
                } else {
                    -m
                }
            }
        };
        if xi <= MIN_SHAPE || !t[1].is_finite() {
            return None;
        }
        let p = GevParams {
            mu: t[0],
            sigma: t[1].exp(),
            xi,
        };
        p.validate().ok().map(|_| p)
    }

    fn encode(self, p: &GevParams) -> Vec<f64> {
        let mut t = vec![p.mu, p.sigma.ln()];
        match self.0 {
            Constraint::Free => t.push(p.xi),
            Constraint::Gumbel => {}
            Constraint::Frechet | Constraint::Weibull => t.push(p.xi.abs().ln().max(MIN_LOG_SHAPE)),
        }
        t
    }
}

fn neg_loglik(data: &[f64], coords: Coords, t: &[f64]) -> f64 {
    match coords.decode(t) {
        Some(p) => -p.log_likelihood(data),
        None => f64::INFINITY,
    }
}

/// Widen the scale until every observation lies inside the support.
fn make_feasible(data: &[f64], mut p: GevParams) -> Option<GevParams> {
    for _ in 0..80 {
        if p.log_likelihood(data).is_finite() {
            return Some(p);
        }
        p.sigma *= 1.5;
    }
    None
}

fn moment_gumbel(data: &[f64]) -> GevParams {
    let sigma = (stats::sd(data) * 6f64.sqrt() / std::f64::consts::PI).max(1e-8);
    GevParams {
        mu: stats::mean(data) - EULER_GAMMA * sigma,
        sigma,
        xi: 0.0,
    }
}

fn shaped_start(base: GevParams, constraint: Constraint, xi0: f64) -> GevParams {
    let xi = match constraint {
        Constraint::Free => xi0.clamp(-0.9, 1.5),
        Constraint::Gumbel => 0.0,
        Constraint::Frechet => xi0.abs().clamp(0.01, 1.5),
        Constraint::Weibull => -xi0.abs().clamp(0.01, 0.9),
    };
    GevParams { xi, ..base }
}

fn search(data: &[f64], coords: Coords, start: GevParams, opts: Options) -> Option<Minimum> {
    let start = make_feasible(data, start)?;
    let x0 = coords.encode(&start);
    let scale = start.sigma;
    let step: Vec<f64> = [0.1 * scale, 0.1, 0.1][..coords.dim()].to_vec();
    let f = |t: &[f64]| neg_loglik(data, coords, t);
    let m = optimize::nelder_mead(&f, &x0, &step, opts);
    Some(optimize::newton_polish(&f, m, 20))
}

fn standard_errors(data: &[f64], params: &GevParams, constraint: Constraint) -> Option<[f64; 3]> {
    let with_shape = constraint != Constraint::Gumbel;
    let x: Vec<f64> = if with_shape {
        vec![params.mu, params.sigma, params.xi]
    } else {
        vec![params.mu, params.sigma]
    };
    let f = |t: &[f64]| {
        let p = GevParams {
            mu: t[0],
            sigma: t[1],
            xi: if with_shape { t[2] } else { 0.0 },
        };
        if p.sigma <= 0.0 {
            return f64::INFINITY;
        }
        -p.log_likelihood(data)
    };
    let h: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 2 { 1e-4 } else { 1e-4 * v.abs().max(1.0) })
        .collect();
    let (_, hess) = optimize::fd_derivatives(&f, &x, &h)?;
    let inv = hess.cholesky()?.inverse();
    let mut se = [0.0; 3];
    for i in 0..x.len() {
        se[i] = inv[(i, i)].sqrt();
    }
    se.iter().all(|v| v.is_finite()).then_some(se)
}

fn consider(best: &mut Option<Minimum>, trace: &mut Vec<String>, label: &str, m: Option<Minimum>) {
    let Some(m) = m else {
        trace.push(format!("{label}: no feasible start"));
        return;
    };
    trace.push(format!(
        "{label}: f={:.6} iters={} converged={}",
        m.f, m.iterations, m.converged
    ));
    let better = match best {
        None => true,
        Some(b) => (m.converged && !b.converged) || (m.converged == b.converged && m.f < b.f),
    };
    if better {
        *best = Some(m);
    }
}

/// Maximum likelihood fit under `constraint`.
pub fn fit_mle(data: &[f64], constraint: Constraint) -> Result<FitResult> {
    fit_mle_with(data, constraint, Options::default())
}

pub fn fit_mle_with(data: &[f64], constraint: Constraint, opts: Options) -> Result<FitResult> {
    check_distinct(data, 5)?;
    let coords = Coords(constraint);
    let base = fit_pwm(data).map(|f| f.params).unwrap_or_else(|_| moment_gumbel(data));

    let mut trace = Vec::new();
    let mut best: Option<Minimum> = None;

    consider(
        &mut best,
        &mut trace,
        "pwm start",
        search(data, coords, shaped_start(base, constraint, base.xi), opts),
    );
    if constraint == Constraint::Free {
        // nesting guarantee: the free fit never does worse than the Gumbel fit
        let g = search(data, Coords(Constraint::Gumbel), base.with_gumbel_shape(), opts);
        if let Some(g) = g.filter(|g| g.converged) {
            let p = Coords(Constraint::Gumbel).decode(&g.x).unwrap();
            consider(&mut best, &mut trace, "gumbel start", search(data, coords, p, opts));
        }
    }
    if !best.as_ref().is_some_and(|b| b.converged) {
        for xi0 in [-0.3, 0.0, 0.3] {
            let start = shaped_start(moment_gumbel(data), constraint, xi0);
            let label = format!("grid start xi0={xi0}");
            consider(&mut best, &mut trace, &label, search(data, coords, start, opts));
        }
    }

    let attempts = trace.len();
    let best = match best {
        Some(b) if b.converged && b.f.is_finite() => b,
        _ => {
            return Err(Error::NonConvergence {
                attempts,
                trace: trace.join("; "),
            })
        }
    };
    let params = coords.decode(&best.x).expect("converged point is feasible");
    Ok(FitResult {
        params,
        method: Method::Mle,
        constraint,
        loglik: params.log_likelihood(data),
        std_errors: standard_errors(data, &params, constraint),
        converged: true,
        iterations: best.iterations,
    })
}

/// Confidence interval for the shape from the profile likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ProfileInterval {
    pub fn contains(&self, xi: f64) -> bool {
        self.lower <= xi && xi <= self.upper
    }
}

/// Profile log-likelihood at a fixed shape, maximized over (μ, ln σ).
#[derive(Debug, Clone, Copy)]
pub struct ProfilePoint {
    pub xi: f64,
    pub loglik: f64,
    pub params: GevParams,
}

pub fn profile_loglik(data: &[f64], xi: f64, warm: Option<GevParams>) -> Option<ProfilePoint> {
    let start = GevParams {
        xi,
        ..warm.unwrap_or_else(|| moment_gumbel(data))
    };
    let start = make_feasible(data, start)?;
    let f = |t: &[f64]| {
        if !t[1].is_finite() {
            return f64::INFINITY;
        }
        let p = GevParams {
            mu: t[0],
            sigma: t[1].exp(),
            xi,
        };
        -p.log_likelihood(data)
    };
    let x0 = [start.mu, start.sigma.ln()];
    let m = optimize::nelder_mead(&f, &x0, &[0.1 * start.sigma, 0.1], Options::default());
    let m = optimize::newton_polish(&f, m, 20);
    if !m.f.is_finite() {
        return None;
    }
    Some(ProfilePoint {
        xi,
        loglik: -m.f,
        params: GevParams {
            mu: m.x[0],
            sigma: m.x[1].exp(),
            xi,
        },
    })
}

const PROFILE_XI_MIN: f64 = -1.0;
const PROFILE_XI_MAX: f64 = 2.0;
const PROFILE_STEP: f64 = 0.05;

pub fn profile_ci_xi(data: &[f64], level: f64) -> Result<ProfileInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let fit = fit_mle(data, Constraint::Free)?;
    profile_ci_from_fit(data, &fit, level)
}

pub fn profile_ci_from_fit(data: &[f64], fit: &FitResult, level: f64) -> Result<ProfileInterval> {
    let crit = stats::chi2_1_quantile(level);
    let lmax = fit.loglik;
    let lower = profile_endpoint(data, fit.params, lmax, crit, -1.0)?;
    let upper = profile_endpoint(data, fit.params, lmax, crit, 1.0)?;
    Ok(ProfileInterval { lower, upper, level })
}

fn profile_endpoint(data: &[f64], mle: GevParams, lmax: f64, crit: f64, dir: f64) -> Result<f64> {
    let side = if dir < 0.0 { "lower" } else { "upper" };
    let limit = if dir < 0.0 { PROFILE_XI_MIN } else { PROFILE_XI_MAX };
    let deviance = |p: &ProfilePoint| 2.0 * (lmax - p.loglik);

    // walk outward until the deviance crosses the threshold
    let mut inside = ProfilePoint {
        xi: mle.xi,
        loglik: lmax,
        params: mle,
    };
    let outside = loop {
        let xi = inside.xi + dir * PROFILE_STEP;
        let at_limit = (xi - limit) * dir >= 0.0;
        let xi = if at_limit { limit - dir * 1e-6 } else { xi };
        let p = profile_loglik(data, xi, Some(inside.params));
        match p {
            Some(p) if deviance(&p) > crit => break p,
            Some(p) if !at_limit => inside = p,
            None if !at_limit => {
                // infeasible warm start; retry cold
                match profile_loglik(data, xi, None) {
                    Some(p) if deviance(&p) > crit => break p,
                    Some(p) => inside = p,
                    None => return Err(Error::UnboundedInterval { side }),
                }
            }
            _ => return Err(Error::UnboundedInterval { side }),
        }
    };

    let (mut a, mut b) = (inside, outside);
    for _ in 0..60 {
        let xi = 0.5 * (a.xi + b.xi);
        let Some(m) = profile_loglik(data, xi, Some(a.params)) else {
            break;
        };
        let d = deviance(&m);
        if (d - crit).abs() < 1e-5 {
            return Ok(m.xi);
        }
        if d > crit {
            b = m;
        } else {
            a = m;
        }
        if (b.xi - a.xi).abs() < 1e-10 {
            break;
        }
    }
    Ok(0.5 * (a.xi + b.xi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(mu: f64, sigma: f64, xi: f64, n: usize, seed: u64) -> Vec<f64> {
        GevParams::new(mu, sigma, xi).unwrap().sample(n, seed).unwrap()
    }

    #[test]
    fn pwm_hand_evaluated() {
        // b1 = (1/3)(1·0 + 2·1/2 + 3·1) = 4/3, b2 = (1/3)(3·1) = 1
        let b = sample_pwm(&[3.0, 1.0, 2.0]);
        assert!((b[0] - 2.0).abs() < 1e-15);
        assert!((b[1] - 4.0 / 3.0).abs() < 1e-15);
        assert!((b[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pwm_recovers_gumbel() {
        let f = fit_pwm(&sample(0.0, 1.0, 0.0, 100_000, 3)).unwrap();
        assert!(f.params.mu.abs() < 0.02, "{:?}", f.params);
        assert!((f.params.sigma - 1.0).abs() < 0.02, "{:?}", f.params);
    }

    #[test]
    fn pwm_affine_equivariance() {
        let x = sample(10.0, 3.0, 0.2, 200, 5);
        let y: Vec<f64> = x.iter().map(|v| 7.0 + 2.5 * v).collect();
        let (a, b) = (fit_pwm(&x).unwrap().params, fit_pwm(&y).unwrap().params);
        assert!((b.mu - (7.0 + 2.5 * a.mu)).abs() < 1e-9);
        assert!((b.sigma - 2.5 * a.sigma).abs() < 1e-9);
        assert!((b.xi - a.xi).abs() < 1e-12);
    }

    #[test]
    fn degenerate_data_rejected() {
        assert!(matches!(
            fit_mle(&[50.0; 20], Constraint::Free),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(fit_pwm(&[50.0; 20]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mle_recovers_gumbel_truth() {
        let x = sample(80.0, 25.0, 0.0, 5000, 1);
        let f = fit_mle(&x, Constraint::Free).unwrap();
        assert!((f.params.mu - 80.0).abs() < 1.5, "{:?}", f.params);
        assert!((f.params.sigma - 25.0).abs() < 1.5, "{:?}", f.params);
        assert!(f.params.xi.abs() < 0.05, "{:?}", f.params);
        assert!(f.std_errors.is_some());
        assert_eq!(f.loglik, f.params.log_likelihood(&x));
    }

    #[test]
    fn gumbel_constraint_nests() {
        let x = sample(0.0, 1.0, 0.0, 5000, 2);
        let g = fit_mle(&x, Constraint::Gumbel).unwrap();
        let free = fit_mle(&x, Constraint::Free).unwrap();
        assert_eq!(g.params.xi, 0.0);
        assert!(g.loglik <= free.loglik);
    }

    #[test]
    fn sign_constrained_fits_respect_sign() {
        let x = sample(80.0, 20.0, 0.2, 60, 11);
        let fr = fit_mle(&x, Constraint::Frechet).unwrap();
        let wb = fit_mle(&x, Constraint::Weibull).unwrap();
        assert!(fr.params.xi > 0.0);
        assert!(wb.params.xi < 0.0);
        assert!(fr.loglik >= wb.loglik);
    }

    #[test]
    fn converged_fit_is_local_maximum() {
        for (seed, xi) in [(1, 0.0), (2, 0.2), (3, -0.2)] {
            let x = sample(80.0, 25.0, xi, 33, seed);
            for c in [Constraint::Free, Constraint::Gumbel] {
                let f = fit_mle(&x, c).unwrap();
                let base = f.params;
                for d in [1e-4, -1e-4] {
                    let mut probes = vec![
                        GevParams {
                            mu: base.mu + d,
                            ..base
                        },
                        GevParams {
                            sigma: base.sigma + d,
                            ..base
                        },
                    ];
                    if c == Constraint::Free {
                        probes.push(GevParams {
                            xi: base.xi + d,
                            ..base
                        });
                    }
                    for p in probes {
                        assert!(p.log_likelihood(&x) <= f.loglik + 1e-9, "{c:?} seed {seed}");
                    }
                }
            }
        }
    }

    #[test]
    fn profile_interval_contains_truth_and_is_narrow() {
        let x = sample(0.0, 1.0, 0.1, 5000, 4);
        let ci = profile_ci_xi(&x, 0.95).unwrap();
        assert!(ci.contains(0.1), "{ci:?}");
        assert!(ci.upper - ci.lower < 0.1, "{ci:?}");
    }

    #[test]
    fn profile_interval_nests_in_level_and_hits_threshold() {
        let x = sample(80.0, 25.0, 0.0, 33, 9);
        let fit = fit_mle(&x, Constraint::Free).unwrap();
        let c95 = profile_ci_from_fit(&x, &fit, 0.95).unwrap();
        let c99 = profile_ci_from_fit(&x, &fit, 0.99).unwrap();
        assert!(c99.lower < c95.lower && c95.upper < c99.upper);
        assert!(c95.lower < fit.params.xi && fit.params.xi < c95.upper);
        let crit = stats::chi2_1_quantile(0.95);
        for end in [c95.lower, c95.upper] {
            let p = profile_loglik(&x, end, Some(fit.params)).unwrap();
            let dev = 2.0 * (fit.loglik - p.loglik);
            assert!((dev - crit).abs() < 1e-3, "deviance {dev} at {end}");
        }
    }
}
