//! Small descriptive-statistics helpers shared by several modules.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

/// Quantile of already sorted data by linear interpolation of order
/// statistics (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn distinct_count(x: &[f64]) -> usize {
    let s = sorted(x);
    let mut n = 0;
    for (i, v) in s.iter().enumerate() {
        if i == 0 || *v != s[i - 1] {
            n += 1;
        }
    }
    n
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Upper-tail probability of the chi-squared distribution with one degree
/// of freedom.
pub fn chi2_1_sf(d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    erfc((d / 2.0).sqrt())
}

/// Quantile of chi-squared with one degree of freedom at `level`.
pub fn chi2_1_quantile(level: f64) -> f64 {
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    z * z
}
