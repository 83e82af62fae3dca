use serde::{Deserialize, Serialize};

use super::{euclidean_dm, pam, ward_cluster, DistanceMatrix, Features, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub values: Vec<f64>,
    pub mean: f64,
}

/// Rousseeuw silhouettes; members of singleton clusters score 0.
pub fn silhouette(dm: &DistanceMatrix, partition: &Partition) -> Result<Silhouette> {
    let n = dm.len();
    if partition.k < 2 {
        return Err(Error::Domain("silhouette needs at least two clusters".into()));
    }
    if partition.assignment.len() != n {
        return Err(Error::Validation("partition and distance matrix sizes differ".into()));
    }
    let sizes = partition.sizes();
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let own = partition.assignment[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; partition.k];
            for j in (0..n).filter(|&j| j != i) {
                sums[partition.assignment[j]] += dm.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..partition.k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    Ok(Silhouette { values, mean })
}

/// `(R²/(K-1)) / ((1-R²)/(n-K))` with `R²` the between-cluster share of the
/// total sum of squares. Perfect separation yields `+inf`.
pub fn pseudo_f(features: &Features, partition: &Partition) -> Result<f64> {
    let (n, k) = (features.len(), partition.k);
    if k < 2 || k >= n {
        return Err(Error::Domain(format!("criterion needs 2 <= K < n, got K={k} n={n}")));
    }
    let dim = features.dim();
    let grand: Vec<f64> = (0..dim)
        .map(|j| features.rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let sizes = partition.sizes();
    let mut centroids = vec![vec![0.0; dim]; k];
    for (r, &c) in features.rows.iter().zip(&partition.assignment) {
        for j in 0..dim {
            centroids[c][j] += r[j] / sizes[c] as f64;
        }
    }
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let total: f64 = features.rows.iter().map(|r| sq(r, &grand)).sum();
    let within: f64 = features
        .rows
        .iter()
        .zip(&partition.assignment)
        .map(|(r, &c)| sq(r, &centroids[c]))
        .sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("features have zero total variance".into()));
    }
    let r2 = ((total - within) / total).clamp(0.0, 1.0);
    if r2 >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok((r2 / (k - 1) as f64) / ((1.0 - r2) / (n - k) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KCriterion {
    Silhouette,
    PseudoF,
}

/// Ward on features, or PAM on a distance matrix.
#[derive(Debug, Clone, Copy)]
pub enum ClusterInput<'a> {
    Features(&'a Features),
    Distances(&'a DistanceMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen: usize,
    /// `(K, score)` for K = 2..=Kmax.
    pub scores: Vec<(usize, f64)>,
    pub partitions: Vec<Partition>,
}

impl KSelection {
    pub fn partition(&self, k: usize) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.k == k)
    }

    pub fn write_scores_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K", "score"])?;
        for (k, s) in &self.scores {
            w.write_record([k.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scores K = 2..=`k_max` and returns the maximizer, the smallest K on ties.
pub fn select_k(input: ClusterInput<'_>, criterion: KCriterion, k_max: usize) -> Result<KSelection> {
    let n = match input {
        ClusterInput::Features(f) => f.len(),
        ClusterInput::Distances(d) => d.len(),
    };
    if k_max < 2 || k_max > n.saturating_sub(1) {
        return Err(Error::Domain(format!(
            "Kmax must lie in [2, n-1] = [2, {}], got {k_max}",
            n.saturating_sub(1)
        )));
    }
    let mut scores = Vec::new();
    let mut partitions = Vec::new();
    match input {
        ClusterInput::Features(f) => {
            let dm = euclidean_dm(f);
            let tree = ward_cluster(f)?;
            for k in 2..=k_max {
                let mut p = tree.cut(k)?;
                let sil = silhouette(&dm, &p)?.mean;
                p.mean_silhouette = Some(sil);
                let score = match criterion {
                    KCriterion::Silhouette => sil,
                    KCriterion::PseudoF => pseudo_f(f, &p)?,
                };
                scores.push((k, score));
                partitions.push(p);
            }
        }
        ClusterInput::Distances(dm) => {
            if criterion == KCriterion::PseudoF {
                return Err(Error::Validation("the pseudo-F criterion needs feature vectors".into()));
            }
            for k in 2..=k_max {
                let p = pam(dm, k)?.partition;
                scores.push((k, p.mean_silhouette.expect("k >= 2")));
                partitions.push(p);
            }
        }
    }
    let mut chosen = scores[0];
    for &s in &scores[1..] {
        if s.1 > chosen.1 {
            chosen = s;
        }
    }
    Ok(KSelection {
        chosen: chosen.0,
        scores,
        partitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    fn random_dm(n: usize, s: u64) -> DistanceMatrix {
        let mut rng = seed::rng(s);
        let pts: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        DistanceMatrix::from_fn(labels(n), |i, j| (pts[i] - pts[j]).abs())
    }

    /// Literal transcription of the silhouette definition.
    fn brute_silhouette(dm: &DistanceMatrix, a: &[usize]) -> Vec<f64> {
        let n = a.len();
        (0..n)
            .map(|i| {
                let same: Vec<usize> = (0..n).filter(|&j| j != i && a[j] == a[i]).collect();
                if same.is_empty() {
                    return 0.0;
                }
                let ai = same.iter().map(|&j| dm.get(i, j)).sum::<f64>() / same.len() as f64;
                let mut bi = f64::INFINITY;
                for c in 0..=*a.iter().max().unwrap() {
                    if c == a[i] {
                        continue;
                    }
                    let other: Vec<usize> = (0..n).filter(|&j| a[j] == c).collect();
                    bi = bi.min(other.iter().map(|&j| dm.get(i, j)).sum::<f64>() / other.len() as f64);
                }
                (bi - ai) / ai.max(bi)
            })
            .collect()
    }

    #[test]
    fn well_separated_clusters_score_high() {
        let x: [f64; 6] = [0.0, 0.05, 0.1, 10.0, 10.05, 10.1];
        let dm = DistanceMatrix::from_fn(labels(6), |i, j| (x[i] - x[j]).abs());
        let p = Partition::new(labels(6), vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let s = silhouette(&dm, &p).unwrap();
        assert!(s.mean > 0.9);
        // hand check for point 0: a = 0.075, b = 10.05
        assert!((s.values[0] - (10.05 - 0.075) / 10.05).abs() < 1e-12);
    }

    #[test]
    fn singleton_scores_zero_and_k1_rejected() {
        let dm = random_dm(5, 1);
        let p = Partition::new(labels(5), vec![0, 1, 1, 1, 1], 2).unwrap();
        assert_eq!(silhouette(&dm, &p).unwrap().values[0], 0.0);
        let one = Partition::new(labels(5), vec![0; 5], 1).unwrap();
        assert!(silhouette(&dm, &one).is_err());
    }

    #[test]
    fn silhouette_matches_direct_formula() {
        let mut rng = seed::rng(4);
        for s in 0..30 {
            let dm = random_dm(8, s);
            let k = 2 + (s as usize % 3);
            let mut a: Vec<usize> = (0..8).map(|i| i % k).collect();
            for i in (1..8).rev() {
                a.swap(i, rng.random_range(0..=i));
            }
            let p = Partition::new(labels(8), a.clone(), k).unwrap();
            let got = silhouette(&dm, &p).unwrap();
            for (x, y) in got.values.iter().zip(brute_silhouette(&dm, &a)) {
                assert!((x - y).abs() < 1e-12);
                assert!((-1.0..=1.0).contains(x));
            }
        }
    }

    #[test]
    fn pseudo_f_boundaries() {
        let f = Features::new(labels(4), vec![vec![0.0], vec![0.0], vec![5.0], vec![5.0]]).unwrap();
        let p = Partition::new(labels(4), vec![0, 0, 1, 1], 2).unwrap();
        assert_eq!(pseudo_f(&f, &p).unwrap(), f64::INFINITY);
        let single = Partition::new(labels(4), vec![0; 4], 1).unwrap();
        assert!(pseudo_f(&f, &single).is_err());
        let all = Partition::new(labels(4), vec![0, 1, 2, 3], 4).unwrap();
        assert!(pseudo_f(&f, &all).is_err());
    }

    #[test]
    fn pseudo_f_matches_direct_sums() {
        let mut rng = seed::rng(8);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random(), rng.random()]).collect();
        let f = Features::new(labels(12), rows.clone()).unwrap();
        let a: Vec<usize> = (0..12).map(|i| usize::from(i >= 5)).collect();
        let p = Partition::new(labels(12), a.clone(), 2).unwrap();
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for d in 0..2 {
            let all: Vec<f64> = rows.iter().map(|r| r[d]).collect();
            let g = all.iter().sum::<f64>() / 12.0;
            for c in 0..2 {
                let m: Vec<f64> = rows
                    .iter()
                    .zip(&a)
                    .filter(|(_, x)| **x == c)
                    .map(|(r, _)| r[d])
                    .collect();
                let cm = m.iter().sum::<f64>() / m.len() as f64;
                ssb += m.len() as f64 * (cm - g).powi(2);
                ssw += m.iter().map(|v| (v - cm).powi(2)).sum::<f64>();
            }
        }
        let expected = ssb / ssw * 10.0;
        assert!((pseudo_f(&f, &p).unwrap() - expected).abs() < 1e-9 * expected);

        // relabeling clusters leaves the value unchanged
        let swapped = Partition::new(labels(12), a.iter().map(|x| 1 - x).collect(), 2).unwrap();
        assert!((pseudo_f(&f, &swapped).unwrap() - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn two_cluster_features_choose_two() {
        let mut rng = seed::rng(2);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let c = if i < 10 { 0.0 } else { 6.0 };
                vec![c + rng.random::<f64>(), c + rng.random::<f64>()]
            })
            .collect();
        let f = Features::new(labels(20), rows).unwrap();
        for crit in [KCriterion::Silhouette, KCriterion::PseudoF] {
            let sel = select_k(ClusterInput::Features(&f), crit, 6).unwrap();
            assert_eq!(sel.chosen, 2, "{crit:?}");
            assert_eq!(sel.scores.len(), 5);
        }
        let dm = euclidean_dm(&f);
        let sel = select_k(ClusterInput::Distances(&dm), KCriterion::Silhouette, 6).unwrap();
        assert_eq!(sel.chosen, 2);
        let planted = Partition::new(labels(20), (0..20).map(|i| usize::from(i >= 10)).collect(), 2).unwrap();
        assert!(sel.partition(2).unwrap().same_grouping(&planted));
    }

    #[test]
    fn kmax_bounds() {
        let dm = random_dm(5, 3);
        assert!(select_k(ClusterInput::Distances(&dm), KCriterion::Silhouette, 1).is_err());
        assert!(select_k(ClusterInput::Distances(&dm), KCriterion::Silhouette, 5).is_err());
        assert!(select_k(ClusterInput::Distances(&dm), KCriterion::PseudoF, 3).is_err());
    }

    #[test]
    fn equidistant_ties_pick_smallest_k() {
        let dm = DistanceMatrix::from_fn(labels(8), |_, _| 1.0);
        let sel = select_k(ClusterInput::Distances(&dm), KCriterion::Silhouette, 6).unwrap();
        assert!(sel.scores.iter().all(|(_, s)| *s == sel.scores[0].1));
        assert_eq!(sel.chosen, 2);
    }

    #[test]
    fn pam_beats_random_partition_on_structured_data() {
        let mut rng = seed::rng(10);
        let pts: Vec<f64> = (0..15).map(|i| (i / 5) as f64 * 4.0 + rng.random::<f64>()).collect();
        let dm = DistanceMatrix::from_fn(labels(15), |i, j| (pts[i] - pts[j]).abs());
        let p = pam(&dm, 3).unwrap().partition;
        let random = Partition::new(labels(15), (0..15).map(|i| i % 3).collect(), 3).unwrap();
        assert!(p.mean_silhouette.unwrap() >= silhouette(&dm, &random).unwrap().mean);
    }
}
