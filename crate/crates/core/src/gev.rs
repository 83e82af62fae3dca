//! Generalized extreme value distribution.
//!
//! ```text
//! H(x; μ, σ, ξ) = exp(-(1 + ξ (x - μ)/σ)^(-1/ξ))     1 + ξ (x - μ)/σ > 0
//! H(x; μ, σ, 0) = exp(-exp(-(x - μ)/σ))               Gumbel limit
//! ```
//!
//! ξ > 0 is Fréchet-type (finite lower endpoint μ - σ/ξ), ξ < 0 is
//! Weibull-type (finite upper endpoint μ - σ/ξ). Shapes with |ξ| below
//! [`GUMBEL_EPS`] are evaluated on the Gumbel branch; all other shapes go
//! through `ln_1p`/`exp_m1` so the two branches join smoothly.

use rand::distr::Open01;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Shapes closer to zero than this are treated as exactly Gumbel.
pub const GUMBEL_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gumbel,
    Frechet,
    Weibull,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gumbel => "gumbel",
            Family::Frechet => "frechet",
            Family::Weibull => "weibull",
        })
    }
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        let p = Self { mu, sigma, xi };
        p.validate()?;
        Ok(p)
    }

    pub fn gumbel(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(mu, sigma, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Validation(format!(
                "scale must be positive and finite, got {}",
                self.sigma
            )));
        }
        if !self.mu.is_finite() || !self.xi.is_finite() {
            return Err(Error::Validation(format!(
                "location and shape must be finite, got mu={} xi={}",
                self.mu, self.xi
            )));
        }
        Ok(())
    }

    pub fn family(&self) -> Family {
        if self.xi > 0.0 {
            Family::Frechet
        } else if self.xi < 0.0 {
            Family::Weibull
        } else {
            Family::Gumbel
        }
    }

    fn is_gumbel(&self) -> bool {
        self.xi.abs() < GUMBEL_EPS
    }

    /// Finite support endpoint μ - σ/ξ, lower for ξ > 0 and upper for ξ < 0.
    pub fn endpoint(&self) -> Option<f64> {
        (!self.is_gumbel()).then(|| self.mu - self.sigma / self.xi)
    }

    /// Same location and scale with the shape forced to zero.
    pub fn with_gumbel_shape(&self) -> Self {
        Self { xi: 0.0, ..*self }
    }

    /// `-ln H(x)` i.e. `(1 + ξz)^(-1/ξ)`, computed in log space, or `None`
    /// outside the support.
    fn log_tail(&self, x: f64) -> Option<f64> {
        let z = (x - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Some(-z);
        }
        let xz = self.xi * z;
        if xz <= -1.0 {
            return None;
        }
        Some(-xz.ln_1p() / self.xi)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.log_tail(x) {
            Some(lt) => (-lt.exp()).exp(),
            // below the lower endpoint for Fréchet, above the upper for Weibull
            None if self.xi > 0.0 => 0.0,
            None => 1.0,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.log_tail(x) {
            // ln f = -ln σ - (1 + ξ) ln t - t^{-1/ξ}, with ln t^{-1/ξ} = lt
            Some(lt) => -self.sigma.ln() + (1.0 + self.xi) * lt - lt.exp(),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        let y = -p.ln();
        if self.is_gumbel() {
            self.mu - self.sigma * y.ln()
        } else {
            self.mu + self.sigma * (-self.xi * y.ln()).exp_m1() / self.xi
        }
    }

    pub fn return_level(&self, spec: ReturnSpec) -> f64 {
        self.quantile_unchecked(1.0 - spec.exceedance_prob)
    }

    /// Inverse-transform draws; deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Validation("sample size must be at least 1".into()));
        }
        let mut rng = seed::rng(seed);
        Ok(self.sample_with(n, &mut rng))
    }

    pub(crate) fn sample_with(&self, n: usize, rng: &mut seed::Rng) -> Vec<f64> {
        (0..n)
            .map(|_| self.quantile_unchecked(rng.sample::<f64, _>(Open01)))
            .collect()
    }

    /// Sum of log densities; `-inf` as soon as any point leaves the support.
    pub fn log_likelihood(&self, data: &[f64]) -> f64 {
        let mut ll = 0.0;
        for &x in data {
            let v = self.ln_pdf(x);
            if v == f64::NEG_INFINITY {
                return v;
            }
            ll += v;
        }
        ll
    }
}

/// A return period `t` and its yearly exceedance probability `p = 1/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSpec {
    pub period_years: f64,
    pub exceedance_prob: f64,
}

impl ReturnSpec {
    pub fn from_period(period_years: f64) -> Result<Self> {
        if !(period_years > 1.0 && period_years.is_finite()) {
            return Err(Error::Domain(format!(
                "return period must exceed one year, got {period_years}"
            )));
        }
        Ok(Self {
            period_years,
            exceedance_prob: 1.0 / period_years,
        })
    }

    pub fn from_exceedance(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "exceedance probability must lie in (0, 1), got {p}"
            )));
        }
        Ok(Self {
            period_years: 1.0 / p,
            exceedance_prob: p,
        })
    }
}

pub fn gev_cdf(x: f64, params: &GevParams) -> Result<f64> {
    params.validate()?;
    Ok(params.cdf(x))
}

pub fn gev_pdf(x: f64, params: &GevParams) -> Result<f64> {
    params.validate()?;
    Ok(params.pdf(x))
}

pub fn gev_quantile(p: f64, params: &GevParams) -> Result<f64> {
    params.validate()?;
    params.quantile(p)
}

pub fn return_level(spec: ReturnSpec, params: &GevParams) -> Result<f64> {
    params.validate()?;
    Ok(params.return_level(spec))
}

pub fn gev_sample(params: &GevParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.sample(n, seed)
}

pub fn log_likelihood(params: &GevParams, data: &[f64]) -> Result<f64> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Validation("log-likelihood of an empty sample".into()));
    }
    Ok(params.log_likelihood(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(mu: f64, sigma: f64, xi: f64) -> GevParams {
        GevParams::new(mu, sigma, xi).unwrap()
    }

    #[test]
    fn gumbel_cdf_at_location() {
        let expected = (-1.0f64).exp();
        assert!((p(0.0, 1.0, 0.0).cdf(0.0) - expected).abs() < 1e-15);
        assert!((expected - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn cdf_outside_support() {
        assert_eq!(p(0.0, 1.0, 0.5).cdf(-2.0), 0.0);
        assert_eq!(p(0.0, 1.0, 0.5).cdf(-3.0), 0.0);
        assert_eq!(p(0.0, 1.0, -0.5).cdf(2.5), 1.0);
        assert_eq!(p(0.0, 1.0, 0.5).pdf(-2.5), 0.0);
        assert_eq!(p(0.0, 1.0, -0.5).pdf(2.5), 0.0);
    }

    #[test]
    fn near_zero_shape_matches_gumbel() {
        let a = p(0.0, 1.0, 1e-9).cdf(1.0);
        let b = p(0.0, 1.0, 0.0).cdf(1.0);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn pdf_integrates_to_one() {
        // composite Simpson on [-10, 40]; tails beyond are below 1e-9
        let g = p(0.0, 1.0, 0.0);
        let (a, b, m) = (-10.0, 40.0, 200_000);
        let h = (b - a) / m as f64;
        let mut s = g.pdf(a) + g.pdf(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * g.pdf(a + i as f64 * h);
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pdf_matches_cdf_finite_difference() {
        let g = p(0.0, 1.0, 0.2);
        let h = 1e-5;
        let fd = (g.cdf(0.7 + h) - g.cdf(0.7 - h)) / (2.0 * h);
        assert!((fd - g.pdf(0.7)).abs() < 1e-5);
        for xi in [-0.3, 0.0, 0.3] {
            let g = p(1.0, 2.0, xi);
            for x in [-1.0, 0.0, 1.0, 2.5, 4.0] {
                let fd = (g.cdf(x + h) - g.cdf(x - h)) / (2.0 * h);
                assert!((fd - g.pdf(x)).abs() < 1e-5, "xi={xi} x={x}");
            }
        }
    }

    #[test]
    fn quantile_reference_values() {
        let q = p(0.0, 1.0, 0.0).quantile(0.5).unwrap();
        assert!((q - (-(2f64.ln()).ln())).abs() < 1e-14);
        assert!((q - 0.36651).abs() < 1e-5);

        let q = p(0.0, 1.0, 0.5).quantile(0.9).unwrap();
        let closed = 2.0 * ((-(0.9f64).ln()).powf(-0.5) - 1.0);
        assert!((q - closed).abs() < 1e-12);
        assert!((q - 4.1616).abs() < 1e-4);
        // bisection on the CDF as a second route
        let (mut lo, mut hi) = (-2.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(0.0, 1.0, 0.5).cdf(mid) < 0.9 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((q - lo).abs() < 1e-10);

        let q = p(0.0, 1.0, 0.0).quantile((-1.0f64).exp()).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn quantile_rejects_boundary_probabilities() {
        let g = p(0.0, 1.0, 0.0);
        assert!(matches!(g.quantile(0.0), Err(Error::Domain(_))));
        assert!(matches!(g.quantile(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn return_levels() {
        let g = p(70.25, 22.30, 0.0);
        let z = g.return_level(ReturnSpec::from_period(10.0).unwrap());
        let closed = 70.25 + 22.30 * (-(-(0.9f64).ln()).ln());
        assert!((z - closed).abs() < 1e-12);
        assert!((z - 120.44).abs() < 0.01);

        let t = 1.0 / (1.0 - (-1.0f64).exp());
        let z = p(0.0, 1.0, 0.0).return_level(ReturnSpec::from_period(t).unwrap());
        assert!(z.abs() < 1e-12);

        for xi in [-0.3, 0.0, 0.3] {
            let g = p(0.0, 1.0, xi);
            let mut prev = f64::NEG_INFINITY;
            for t in [1.5, 2.0, 5.0, 10.0, 100.0, 1000.0] {
                let z = g.return_level(ReturnSpec::from_period(t).unwrap());
                assert!(z > prev);
                prev = z;
            }
        }
        assert!(ReturnSpec::from_period(1.0).is_err());
    }

    #[test]
    fn sampling_contract() {
        let g = p(0.0, 1.0, 0.0);
        assert!(g.sample(0, 1).is_err());
        assert_eq!(g.sample(50, 9).unwrap(), g.sample(50, 9).unwrap());
        let xs = g.sample(100_000, 42).unwrap();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m - crate::stats::EULER_GAMMA).abs() < 0.02, "mean {m}");
    }

    #[test]
    fn likelihood_values() {
        let g = p(0.0, 1.0, 0.0);
        assert!((g.log_likelihood(&[0.0]) + 1.0).abs() < 1e-15);
        assert_eq!(p(0.0, 1.0, 0.5).log_likelihood(&[1.0, -2.5]), f64::NEG_INFINITY);
        let pts = [0.3, 1.1, -0.4];
        let sum: f64 = pts.iter().map(|x| g.log_likelihood(&[*x])).sum();
        assert!((g.log_likelihood(&pts) - sum).abs() < 1e-13);
        assert!(log_likelihood(&g, &[]).is_err());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(GevParams::new(0.0, 0.0, 0.0).is_err());
        assert!(GevParams::new(0.0, -1.0, 0.0).is_err());
        assert!(GevParams::new(0.0, 1.0, f64::NAN).is_err());
        let bad = GevParams {
            mu: 0.0,
            sigma: -1.0,
            xi: 0.0,
        };
        assert!(gev_cdf(0.0, &bad).is_err());
    }

    #[test]
    fn branch_continuity() {
        let g0 = p(1.0, 2.0, 0.0);
        for xi in [1e-8, -1e-8] {
            let g = p(1.0, 2.0, xi);
            for x in [-2.0, 0.0, 1.0, 3.0, 8.0] {
                assert!((g.cdf(x) - g0.cdf(x)).abs() < 1e-6);
                assert!((g.pdf(x) - g0.pdf(x)).abs() < 1e-6);
                assert!((g.log_likelihood(&[x]) - g0.log_likelihood(&[x])).abs() < 1e-6);
            }
            for q in [0.01, 0.5, 0.99] {
                assert!((g.quantile(q).unwrap() - g0.quantile(q).unwrap()).abs() < 1e-6);
            }
            let s = ReturnSpec::from_period(50.0).unwrap();
            assert!((g.return_level(s) - g0.return_level(s)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn cdf_quantile_roundtrip(mu in -50.0..50.0f64, sigma in 0.1..30.0f64, xi in -0.5..0.8f64) {
            let g = p(mu, sigma, xi);
            for i in 1..100 {
                let q = i as f64 / 100.0;
                let back = g.cdf(g.quantile(q).unwrap());
                prop_assert!((back - q).abs() <= 1e-10 * q);
            }
        }

        #[test]
        fn location_scale_equivariance(mu in -50.0..50.0f64, sigma in 0.1..30.0f64, xi in -0.5..0.8f64, q in 0.001..0.999f64) {
            let lhs = p(mu, sigma, xi).quantile(q).unwrap();
            let rhs = mu + sigma * p(0.0, 1.0, xi).quantile(q).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
