//! Independence test between two series based on recurrence rates, with a
//! permutation null.
//!
//! Both series are replaced by their average ranks before distances are
//! taken, so the statistic depends on the data only through its ordering.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AnnualMaximaSeries;
use crate::{seed, stats};

pub const MIN_PERMUTATIONS: usize = 99;
pub const DEFAULT_PERMUTATIONS: usize = 999;
pub const MIN_LENGTH: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceConfig {
    pub radius_grid_quantiles: Vec<f64>,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        Self {
            radius_grid_quantiles: (1..10).map(|k| k as f64 / 10.0).collect(),
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

impl RecurrenceConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let q = &self.radius_grid_quantiles;
        if q.is_empty() || q.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || q.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "radius quantiles must be strictly increasing inside (0, 1)".into(),
            ));
        }
        if self.permutations < MIN_PERMUTATIONS {
            return Err(Error::Validation(format!(
                "at least {MIN_PERMUTATIONS} permutations required, got {}",
                self.permutations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDeviation {
    pub r: f64,
    pub s: f64,
    pub joint: f64,
    pub rr_x: f64,
    pub rr_y: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub permutations: usize,
    pub seed: u64,
    pub grid: Vec<GridDeviation>,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Validation("recurrence rates need at least two points".into()));
    }
    Ok(())
}

fn pair_count(n: usize) -> f64 {
    (n * (n - 1) / 2) as f64
}

/// Fraction of index pairs `s < t` with `|x_s - x_t| <= r`.
pub fn marginal_rr(x: &[f64], r: f64) -> Result<f64> {
    if x.len() < 2 || !(r >= 0.0) {
        return Err(Error::Validation("need n >= 2 and a nonnegative radius".into()));
    }
    let mut hits = 0usize;
    for s in 0..x.len() {
        for t in s + 1..x.len() {
            hits += usize::from((x[s] - x[t]).abs() <= r);
        }
    }
    Ok(hits as f64 / pair_count(x.len()))
}

/// Fraction of index pairs recurrent in both series at once.
pub fn joint_rr(x: &[f64], y: &[f64], r: f64, s: f64) -> Result<f64> {
    check_pair(x, y)?;
    if !(r >= 0.0 && s >= 0.0) {
        return Err(Error::Validation("radii must be nonnegative".into()));
    }
    let mut hits = 0usize;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            hits += usize::from((x[i] - x[j]).abs() <= r && (y[i] - y[j]).abs() <= s);
        }
    }
    Ok(hits as f64 / pair_count(x.len()))
}

/// Empirical quantiles of the nonzero pairwise distances.
fn radius_grid(x: &[f64], quantiles: &[f64]) -> Vec<f64> {
    let mut d = Vec::with_capacity(x.len() * x.len() / 2);
    for s in 0..x.len() {
        for t in s + 1..x.len() {
            let v = (x[s] - x[t]).abs();
            if v > 0.0 {
                d.push(v);
            }
        }
    }
    if d.is_empty() {
        return vec![0.0; quantiles.len()];
    }
    let d = stats::sorted(&d);
    quantiles.iter().map(|&p| stats::quantile_sorted(&d, p)).collect()
}

/// Pairwise bin labels: the first grid index whose radius covers the pair,
/// or `grid.len()` when none does.
fn bin_matrix(x: &[f64], grid: &[f64]) -> Vec<u8> {
    let n = x.len();
    let mut bins = vec![0u8; n * n];
    for s in 0..n {
        for t in 0..n {
            let d = (x[s] - x[t]).abs();
            bins[s * n + t] = grid.partition_point(|&r| r < d) as u8;
        }
    }
    bins
}

/// Prepared statistic: x-side bins are fixed, y-side bins are looked up
/// through a permutation of the time index.
struct Prepared {
    n: usize,
    g_x: usize,
    g_y: usize,
    bins_x: Vec<u8>,
    bins_y: Vec<u8>,
    rr_x: Vec<f64>,
    rr_y: Vec<f64>,
}

impl Prepared {
    fn new(x: &[f64], y: &[f64], grid_x: &[f64], grid_y: &[f64]) -> Self {
        let n = x.len();
        let bins_x = bin_matrix(x, grid_x);
        let bins_y = bin_matrix(y, grid_y);
        let marginal = |bins: &[u8], g: usize| {
            let mut hist = vec![0usize; g + 1];
            for s in 0..n {
                for t in s + 1..n {
                    hist[bins[s * n + t] as usize] += 1;
                }
            }
            let mut acc = 0;
            (0..g)
                .map(|a| {
                    acc += hist[a];
                    acc as f64 / pair_count(n)
                })
                .collect::<Vec<f64>>()
        };
        let rr_x = marginal(&bins_x, grid_x.len());
        let rr_y = marginal(&bins_y, grid_y.len());
        Self {
            n,
            g_x: grid_x.len(),
            g_y: grid_y.len(),
            bins_x,
            bins_y,
            rr_x,
            rr_y,
        }
    }

    /// Joint rates on the full grid, row-major over (r, s).
    fn joint(&self, perm: &[usize]) -> Vec<f64> {
        let (n, gx, gy) = (self.n, self.g_x, self.g_y);
        let w = gy + 1;
        let mut hist = vec![0usize; (gx + 1) * w];
        for s in 0..n {
            let (ps, row) = (perm[s] * n, s * n);
            for t in s + 1..n {
                let a = self.bins_x[row + t] as usize;
                let b = self.bins_y[ps + perm[t]] as usize;
                hist[a * w + b] += 1;
            }
        }
        // two-dimensional cumulative sum
        for a in 0..=gx {
            for b in 0..=gy {
                let mut v = hist[a * w + b];
                if a > 0 {
                    v += hist[(a - 1) * w + b];
                }
                if b > 0 {
                    v += hist[a * w + b - 1];
                }
                if a > 0 && b > 0 {
                    v -= hist[(a - 1) * w + b - 1];
                }
                hist[a * w + b] = v;
            }
        }
        let np = pair_count(n);
        let mut out = Vec::with_capacity(gx * gy);
        for a in 0..gx {
            for b in 0..gy {
                out.push(hist[a * w + b] as f64 / np);
            }
        }
        out
    }

    fn statistic(&self, perm: &[usize]) -> f64 {
        let joint = self.joint(perm);
        let mut t = 0.0f64;
        for a in 0..self.g_x {
            for b in 0..self.g_y {
                t = t.max((joint[a * self.g_y + b] - self.rr_x[a] * self.rr_y[b]).abs());
            }
        }
        t
    }
}

/// `max |RR_XY(r, s) - RR_X(r) RR_Y(s)|` over the given radius grids, on the
/// series as supplied (no rank transform, no distinctness requirement).
pub fn grid_statistic(x: &[f64], y: &[f64], grid_x: &[f64], grid_y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if grid_x.len() > 254 || grid_y.len() > 254 {
        return Err(Error::Validation("radius grids are limited to 254 points".into()));
    }
    let identity: Vec<usize> = (0..x.len()).collect();
    Ok(Prepared::new(x, y, grid_x, grid_y).statistic(&identity))
}

fn prepare(x: &[f64], y: &[f64], config: &RecurrenceConfig) -> Result<(Prepared, Vec<f64>, Vec<f64>)> {
    config.validate()?;
    check_pair(x, y)?;
    if x.len() < MIN_LENGTH {
        return Err(Error::Validation(format!(
            "independence test needs n >= {MIN_LENGTH}, got {}",
            x.len()
        )));
    }
    if config.radius_grid_quantiles.len() > 254 {
        return Err(Error::Validation("radius grids are limited to 254 points".into()));
    }
    for (name, v) in [("x", x), ("y", y)] {
        if stats::distinct_count(v) < 2 {
            return Err(Error::Degenerate(format!(
                "series {name} has fewer than two distinct values"
            )));
        }
    }
    let (rx, ry) = (stats::average_ranks(x), stats::average_ranks(y));
    let grid_x = radius_grid(&rx, &config.radius_grid_quantiles);
    let grid_y = radius_grid(&ry, &config.radius_grid_quantiles);
    Ok((Prepared::new(&rx, &ry, &grid_x, &grid_y), grid_x, grid_y))
}

pub fn independence_statistic(x: &[f64], y: &[f64], config: &RecurrenceConfig) -> Result<(f64, Vec<GridDeviation>)> {
    let (prep, grid_x, grid_y) = prepare(x, y, config)?;
    Ok(observed(&prep, &grid_x, &grid_y))
}

fn observed(prep: &Prepared, grid_x: &[f64], grid_y: &[f64]) -> (f64, Vec<GridDeviation>) {
    let identity: Vec<usize> = (0..prep.n).collect();
    let joint = prep.joint(&identity);
    let mut detail = Vec::with_capacity(grid_x.len() * grid_y.len());
    let mut t = 0.0f64;
    for (a, &r) in grid_x.iter().enumerate() {
        for (b, &s) in grid_y.iter().enumerate() {
            let j = joint[a * grid_y.len() + b];
            let deviation = (j - prep.rr_x[a] * prep.rr_y[b]).abs();
            t = t.max(deviation);
            detail.push(GridDeviation {
                r,
                s,
                joint: j,
                rr_x: prep.rr_x[a],
                rr_y: prep.rr_y[b],
                deviation,
            });
        }
    }
    (t, detail)
}

/// Permutation test of independence: the time index of `y` is shuffled
/// uniformly, replicate `i` drawing from its own derived seed.
pub fn independence_test(x: &[f64], y: &[f64], config: &RecurrenceConfig) -> Result<IndependenceResult> {
    let (prep, grid_x, grid_y) = prepare(x, y, config)?;
    let (statistic, grid) = observed(&prep, &grid_x, &grid_y);
    let n = x.len();
    let null: Vec<f64> = (0..config.permutations)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(config.seed, "recurrence-permutation", i as u64));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            prep.statistic(&perm)
        })
        .collect();
    let exceed = null.iter().filter(|&&t| t >= statistic).count();
    Ok(IndependenceResult {
        statistic,
        p_value: (1 + exceed) as f64 / (config.permutations + 1) as f64,
        n,
        permutations: config.permutations,
        seed: config.seed,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub target: String,
    pub other: String,
    pub n_common_years: usize,
    pub result: Option<IndependenceResult>,
    pub error: Option<String>,
}

/// Tests `target` against every other station on their common years. A pair
/// that cannot be tested is reported with its error rather than aborting.
pub fn pairwise_independence_report(
    series: &[AnnualMaximaSeries],
    target: &str,
    config: &RecurrenceConfig,
) -> Result<Vec<PairReport>> {
    config.validate()?;
    let base = series
        .iter()
        .find(|s| s.station_id == target)
        .ok_or_else(|| Error::Validation(format!("target station {target} not found")))?;
    Ok(series
        .iter()
        .filter(|s| s.station_id != target)
        .map(|other| {
            let (x, y) = base.aligned_with(other);
            let pair_config = RecurrenceConfig {
                seed: seed::derive(config.seed, &format!("independence/{target}/{}", other.station_id), 0),
                ..config.clone()
            };
            let (result, error) = match independence_test(&x, &y, &pair_config) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PairReport {
                target: target.to_string(),
                other: other.station_id.clone(),
                n_common_years: x.len(),
                result,
                error,
            }
        })
        .collect())
}

/// `target,other,statistic,p_value,n_common_years`; untestable pairs leave
/// the statistic and p-value empty.
pub fn write_report_csv<W: Write>(rows: &[PairReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["target", "other", "statistic", "p_value", "n_common_years"])?;
    for r in rows {
        let (t, p) = r.result.as_ref().map_or((String::new(), String::new()), |x| {
            (x.statistic.to_string(), x.p_value.to_string())
        });
        w.write_record([r.target.clone(), r.other.clone(), t, p, r.n_common_years.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
