//! Goodness-of-fit testing for the Gumbel, Fréchet and Weibull families.
//!
//! The truncated Cramér–von Mises statistic integrates the squared gap
//! between the empirical and fitted CDF over the central probability window
//! `[δ, 1 - δ]`:
//!
//! ```text
//! W²_δ = n ∫_{F ∈ [δ, 1-δ]} (F_n(x) - F(x; θ̂))² dF(x; θ̂)
//!      = n ∫_δ^{1-δ} (G_n(u) - u)² du,   u_i = F(x_i; θ̂)
//! ```
//!
//! Its null distribution depends on the estimated parameters, so p-values
//! come from a parametric bootstrap that refits the family on every
//! replicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{fit_mle, Constraint, FitResult};
use crate::gev::{Family, GevParams};
use crate::seed;
use crate::stats;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_BOOTSTRAP: usize = 999;
pub const MIN_BOOTSTRAP: usize = 99;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Family under the null hypothesis.
    pub family: Family,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDecision {
    pub chosen: Family,
    pub gumbel_p: f64,
    pub second_p: Option<f64>,
    pub alpha: f64,
    /// Shape of the unconstrained fit, used for routing after a rejection.
    pub xi_hat: f64,
    pub gumbel_test: TestResult,
    pub second_test: Option<TestResult>,
}

/// `(1 + #{replicates ≥ observed}) / (replicates + 1)`.
pub fn resampling_p_value(observed: f64, replicates: &[f64]) -> f64 {
    let exceed = replicates.iter().filter(|&&w| w >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

pub fn tcvm_statistic(data: &[f64], params: &GevParams, delta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Domain(format!(
            "truncation fraction must lie in [0, 0.5), got {delta}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Validation("empty sample".into()));
    }
    params.validate()?;
    let mut u: Vec<f64> = data.iter().map(|&x| params.cdf(x)).collect();
    u.sort_by(f64::total_cmp);
    Ok(truncated_cvm(&u, delta))
}

/// Exact integral of the squared step-function gap over `[δ, 1 - δ]` for
/// sorted probability-integral transforms `u`.
fn truncated_cvm(u: &[f64], delta: f64) -> f64 {
    let n = u.len() as f64;
    let (lo, hi) = (delta, 1.0 - delta);
    // ∫_l^r (c - v)² dv
    let piece = |l: f64, r: f64, c: f64| ((r - c).powi(3) - (l - c).powi(3)) / 3.0;

    let mut below = u.iter().take_while(|&&v| v <= lo).count();
    let mut left = lo;
    let mut w = 0.0;
    for &v in &u[below..] {
        if v >= hi {
            break;
        }
        w += piece(left, v, below as f64 / n);
        below += 1;
        left = v;
    }
    w += piece(left, hi, below as f64 / n);
    n * w
}

fn check_bootstrap(b: usize) -> Result<()> {
    if b < MIN_BOOTSTRAP {
        return Err(Error::Validation(format!(
            "bootstrap count must be at least {MIN_BOOTSTRAP}, got {b}"
        )));
    }
    Ok(())
}

pub fn tcvm_test(data: &[f64], family: Family, delta: f64, replicates: usize, seed: u64) -> Result<TestResult> {
    check_bootstrap(replicates)?;
    let fit = fit_mle(data, family.into())?;
    tcvm_test_fitted(data, &fit, family, delta, replicates, seed)
}

/// Bootstrap test given an existing fit of `family` to `data`.
pub fn tcvm_test_fitted(
    data: &[f64],
    fit: &FitResult,
    family: Family,
    delta: f64,
    replicates: usize,
    seed: u64,
) -> Result<TestResult> {
    check_bootstrap(replicates)?;
    let observed = tcvm_statistic(data, &fit.params, delta)?;
    let n = data.len();
    let constraint = Constraint::from(family);
    let max_draws = 10 * replicates;

    let boot: Vec<(Option<f64>, usize)> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let stream = seed::derive(seed, "tcvm-replicate", b as u64);
            for attempt in 0..max_draws {
                let mut rng = seed::rng(seed::derive(stream, "draw", attempt as u64));
                let sim = fit.params.sample_with(n, &mut rng);
                if let Ok(refit) = fit_mle(&sim, constraint) {
                    if let Ok(w) = tcvm_statistic(&sim, &refit.params, delta) {
                        return (Some(w), attempt + 1);
                    }
                }
            }
            (None, max_draws)
        })
        .collect();

    let draws: usize = boot.iter().map(|(_, d)| d).sum();
    let stats: Option<Vec<f64>> = boot.iter().map(|(w, _)| *w).collect();
    let stats = match stats {
        Some(s) if draws <= max_draws => s,
        _ => return Err(Error::BootstrapExhausted { draws, replicates }),
    };
    Ok(TestResult {
        statistic: observed,
        p_value: resampling_p_value(observed, &stats),
        family,
        replicates,
        seed,
    })
}

/// Deviance test of the Gumbel sub-model against the full GEV, calibrated
/// with the asymptotic χ²₁ law.
pub fn lrt_gumbel_vs_gev(data: &[f64]) -> Result<TestResult> {
    let free = fit_mle(data, Constraint::Free)?;
    let gumbel = fit_mle(data, Constraint::Gumbel)?;
    Ok(lrt_from_fits(&free, &gumbel))
}

pub fn lrt_from_fits(free: &FitResult, gumbel: &FitResult) -> TestResult {
    let d = (2.0 * (free.loglik - gumbel.loglik)).max(0.0);
    let d = if free.params.xi == 0.0 { 0.0 } else { d };
    TestResult {
        statistic: d,
        p_value: stats::chi2_1_sf(d),
        family: Family::Gumbel,
        replicates: 0,
        seed: 0,
    }
}

/// Second-stage family after the Gumbel test, or `None` when Gumbel stands.
pub fn route(gumbel_p: f64, alpha: f64, xi_hat: f64) -> Option<Family> {
    if gumbel_p >= alpha {
        None
    } else if xi_hat > 0.0 {
        Some(Family::Frechet)
    } else {
        Some(Family::Weibull)
    }
}

pub fn select_family(data: &[f64], alpha: f64, delta: f64, replicates: usize, seed: u64) -> Result<FamilyDecision> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!(
            "significance level must lie in [0, 1], got {alpha}"
        )));
    }
    check_bootstrap(replicates)?;
    let free = fit_mle(data, Constraint::Free)?;
    let gumbel_test = tcvm_test(
        data,
        Family::Gumbel,
        delta,
        replicates,
        seed::derive(seed, "gof-gumbel", 0),
    )?;
    let second_test = match route(gumbel_test.p_value, alpha, free.params.xi) {
        None => None,
        Some(fam) => Some(tcvm_test(
            data,
            fam,
            delta,
            replicates,
            seed::derive(seed, "gof-second", 0),
        )?),
    };
    Ok(FamilyDecision {
        chosen: second_test.as_ref().map_or(Family::Gumbel, |t| t.family),
        gumbel_p: gumbel_test.p_value,
        second_p: second_test.as_ref().map(|t| t.p_value),
        alpha,
        xi_hat: free.params.xi,
        gumbel_test,
        second_test,
    })
}
