use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, Features};
use crate::error::{Error, Result};
use crate::ingest::AnnualMaximaSeries;
use crate::stats;

pub const DEFAULT_MIN_OVERLAP: usize = 10;

pub fn euclidean_dm(features: &Features) -> DistanceMatrix {
    DistanceMatrix::from_fn(features.labels.clone(), |i, j| {
        features.rows[i]
            .iter()
            .zip(&features.rows[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    })
}

/// F-madogram of two aligned samples: half the mean absolute difference of
/// their rank-based empirical CDF values, `rank/(n+1)` with average ranks.
pub fn fmadogram(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Validation(
            "F-madogram needs two nonempty aligned samples".into(),
        ));
    }
    let denom = x.len() as f64 + 1.0;
    let (rx, ry) = (stats::average_ranks(x), stats::average_ranks(y));
    let total: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).abs() / denom).sum();
    Ok(0.5 * total / x.len() as f64)
}

/// Pairwise F-madogram over the years each pair has in common.
pub fn fmadogram_dm(series: &[AnnualMaximaSeries], min_overlap: usize) -> Result<DistanceMatrix> {
    let n = series.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (x, y) = series[i].aligned_with(&series[j]);
            if x.len() < min_overlap.max(1) {
                return Err(Error::InsufficientOverlap {
                    a: series[i].station_id.clone(),
                    b: series[j].station_id.clone(),
                    shared: x.len(),
                    required: min_overlap,
                });
            }
            fmadogram(&x, &y)
        })
        .collect::<Result<_>>()?;
    let lookup: HashMap<(usize, usize), f64> = pairs.into_iter().zip(values).collect();
    Ok(DistanceMatrix::from_fn(
        series.iter().map(|s| s.station_id.clone()).collect(),
        |i, j| lookup[&(i, j)],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremalCoefficient {
    pub raw: f64,
    /// `raw` restricted to the admissible range `[1, 2]`.
    pub clipped: f64,
}

/// `θ = (1 + 2ν) / (1 - 2ν)`.
pub fn extremal_coefficient(nu: f64) -> Result<ExtremalCoefficient> {
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::Domain(format!(
            "F-madogram value must lie in [0, 1/2), got {nu}"
        )));
    }
    let raw = (1.0 + 2.0 * nu) / (1.0 - 2.0 * nu);
    Ok(ExtremalCoefficient {
        raw,
        clipped: raw.clamp(1.0, 2.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::YearMax;
    use crate::seed;
    use rand::Rng;

    fn series(id: &str, start: i32, v: &[f64]) -> AnnualMaximaSeries {
        AnnualMaximaSeries {
            station_id: id.into(),
            observations: v
                .iter()
                .enumerate()
                .map(|(k, x)| YearMax {
                    year: start + k as i32,
                    max_mm: *x,
                    coverage: 1.0,
                })
                .collect(),
        }
    }

    fn uniforms(n: usize, s: u64) -> Vec<f64> {
        let mut rng = seed::rng(s);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn euclidean_basics() {
        let f = Features::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![0.0, 0.0, 0.0], vec![3.0, 4.0, 0.0], vec![0.0, 0.0, 0.0]],
        )
        .unwrap();
        let d = euclidean_dm(&f);
        assert_eq!(d.get(0, 1), 5.0);
        assert_eq!(d.get(0, 2), 0.0);
    }

    #[test]
    fn euclidean_matches_double_loop() {
        let mut rng = seed::rng(3);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random::<f64>() * 10.0).collect())
            .collect();
        let f = Features::new((0..10).map(|i| i.to_string()).collect(), rows.clone()).unwrap();
        let d = euclidean_dm(&f);
        for i in 0..10 {
            for j in 0..10 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += (rows[i][k] - rows[j][k]) * (rows[i][k] - rows[j][k]);
                }
                assert!((d.get(i, j) - s.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn madogram_rank_invariance() {
        let x = uniforms(40, 1);
        let same = series("a", 1981, &x);
        let copy = series("b", 1981, &x);
        let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 7.0).collect();
        let dm = fmadogram_dm(&[same, copy, series("c", 1981, &affine)], 10).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        assert_eq!(dm.get(0, 2), 0.0);
    }

    #[test]
    fn madogram_independence_value() {
        let d = fmadogram(&uniforms(10_000, 1), &uniforms(10_000, 2)).unwrap();
        assert!((d - 1.0 / 6.0).abs() < 0.01, "{d}");
    }

    #[test]
    fn madogram_uses_common_years_only() {
        let a = series("a", 1981, &uniforms(30, 5));
        let b = series("b", 1991, &uniforms(30, 6));
        let dm = fmadogram_dm(&[a.clone(), b.clone()], 10).unwrap();
        let (x, y) = a.aligned_with(&b);
        assert_eq!(x.len(), 20);
        assert_eq!(dm.get(0, 1), fmadogram(&x, &y).unwrap());
        let err = fmadogram_dm(&[a, b], 25).unwrap_err();
        assert!(matches!(err, Error::InsufficientOverlap { shared: 20, .. }));
    }

    #[test]
    fn madogram_bounded() {
        for s in 0..20 {
            let x = uniforms(33, s);
            let y: Vec<f64> = x.iter().map(|v| -v).collect();
            let d = fmadogram(&x, &y).unwrap();
            assert!((0.0..0.5).contains(&d));
        }
    }

    #[test]
    fn extremal_coefficient_values() {
        assert_eq!(extremal_coefficient(0.0).unwrap().raw, 1.0);
        assert!((extremal_coefficient(1.0 / 6.0).unwrap().raw - 2.0).abs() < 1e-12);
        assert!((extremal_coefficient(0.1).unwrap().raw - 1.5).abs() < 1e-12);
        let t = extremal_coefficient(0.3).unwrap();
        assert!(t.raw > 2.0 && t.clipped == 2.0);
        assert!(extremal_coefficient(0.5).is_err());
    }

    #[test]
    fn madogram_invariant_under_monotone_maps() {
        let mut rng = seed::rng(77);
        let x = uniforms(33, 10);
        let y = uniforms(33, 11);
        let base = fmadogram(&x, &y).unwrap();
        for _ in 0..50 {
            let (a, b, c) = (
                rng.random_range(0.1..5.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.5..3.0),
            );
            let fx: Vec<f64> = x.iter().map(|v: &f64| a * v.powf(c) + b).collect();
            let fy: Vec<f64> = y.iter().map(|v: &f64| (v * a).exp() - b).collect();
            assert_eq!(fmadogram(&fx, &fy).unwrap(), base);
        }
    }
}
