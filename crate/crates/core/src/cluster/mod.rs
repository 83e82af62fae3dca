//! Station clustering: distance structures, Ward and PAM partitions, and the
//! criteria used to choose the number of groups.

mod distance;
mod pam;
mod score;
mod ward;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::FitResult;

pub use distance::{
    euclidean_dm, extremal_coefficient, fmadogram, fmadogram_dm, ExtremalCoefficient, DEFAULT_MIN_OVERLAP,
};
pub use pam::{pam, pam_cluster, total_cost, PamOutcome};
pub use score::{pseudo_f, select_k, silhouette, ClusterInput, KCriterion, KSelection, Silhouette};
pub use ward::{ward_cluster, Dendrogram, Merge};

/// Labeled feature rows, one per station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Features {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != rows.len() {
            return Err(Error::Validation("one label per feature row required".into()));
        }
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation(
                "feature rows must share a dimension and be finite".into(),
            ));
        }
        Ok(Self { labels, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Column-wise z-scores with the sample standard deviation.
    pub fn standardized(&self) -> Result<Self> {
        let n = self.len();
        if n < 2 {
            return Err(Error::Degenerate("standardization needs at least two rows".into()));
        }
        let mut rows = self.rows.clone();
        for j in 0..self.dim() {
            let col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
            let m = crate::stats::mean(&col);
            let sd = crate::stats::sd(&col);
            if !(sd > 0.0) {
                return Err(Error::Degenerate(format!("feature column {j} has zero variance")));
            }
            for r in rows.iter_mut() {
                r[j] = (r[j] - m) / sd;
            }
        }
        Ok(Self {
            labels: self.labels.clone(),
            rows,
        })
    }
}

/// `(μ̂, σ̂, ξ̂)` per station, optionally standardized.
pub fn param_features(fits: &[(String, FitResult)], standardize: bool) -> Result<Features> {
    if let Some((id, _)) = fits.iter().find(|(_, f)| !f.converged) {
        return Err(Error::Validation(format!("fit for station {id} did not converge")));
    }
    let f = Features::new(
        fits.iter().map(|(id, _)| id.clone()).collect(),
        fits.iter()
            .map(|(_, f)| vec![f.params.mu, f.params.sigma, f.params.xi])
            .collect(),
    )?;
    if standardize {
        f.standardized()
    } else {
        Ok(f)
    }
}

/// Symmetric dissimilarities with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Validation(
                "distance matrix must be square and match its labels".into(),
            ));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = rows[i][j];
                if !v.is_finite() || v < 0.0 || v != rows[j][i] {
                    return Err(Error::Validation(format!(
                        "entry ({i}, {j}) is negative, non-finite or asymmetric"
                    )));
                }
            }
        }
        Ok(Self {
            labels,
            d: rows.concat(),
        })
    }

    /// Builds from a pairwise function evaluated on `i < j`.
    pub(crate) fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = labels.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { labels, d }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.len() + j]
    }

    /// Tab-separated with a header row and a leading label column.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.len();
        write!(out, "station")?;
        for l in &self.labels {
            write!(out, "\t{l}")?;
        }
        writeln!(out)?;
        for i in 0..n {
            write!(out, "{}", self.labels[i])?;
            for j in 0..n {
                write!(out, "\t{}", self.get(i, j))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Assignment of stations to `k` clusters, identified `0..k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    pub labels: Vec<String>,
    pub assignment: Vec<usize>,
    /// Station indices of the cluster medoids, indexed by cluster (PAM only).
    pub medoids: Option<Vec<usize>>,
    pub mean_silhouette: Option<f64>,
}

impl Partition {
    pub fn new(labels: Vec<String>, assignment: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != assignment.len() {
            return Err(Error::Validation("one cluster id per station required".into()));
        }
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            if a >= k {
                return Err(Error::Validation(format!("cluster id {a} out of range for k={k}")));
            }
            sizes[a] += 1;
        }
        if sizes.contains(&0) {
            return Err(Error::Validation("every cluster must be nonempty".into()));
        }
        Ok(Self {
            k,
            labels,
            assignment,
            medoids: None,
            mean_silhouette: None,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    /// Stations alone in their cluster.
    pub fn singletons(&self) -> Vec<usize> {
        let sizes = self.sizes();
        (0..self.assignment.len())
            .filter(|&i| sizes[self.assignment[i]] == 1)
            .collect()
    }

    /// `{K, assignments: {station: cluster}, medoids, mean_silhouette}` with
    /// clusters numbered from 1.
    pub fn to_json(&self) -> serde_json::Value {
        let assignments: serde_json::Map<String, serde_json::Value> = self
            .labels
            .iter()
            .zip(&self.assignment)
            .map(|(l, a)| (l.clone(), serde_json::Value::from(a + 1)))
            .collect();
        serde_json::json!({
            "K": self.k,
            "assignments": assignments,
            "medoids": self.medoids.as_ref().map(|m| m.iter().map(|&i| self.labels[i].clone()).collect::<Vec<_>>()),
            "mean_silhouette": self.mean_silhouette,
        })
    }

    /// True when both partitions group stations identically up to relabeling.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        if self.k != other.k || self.assignment.len() != other.assignment.len() {
            return false;
        }
        let mut map = vec![usize::MAX; self.k];
        let mut used = vec![false; other.k];
        for (&a, &b) in self.assignment.iter().zip(&other.assignment) {
            if map[a] == usize::MAX {
                if used[b] {
                    return false;
                }
                map[a] = b;
                used[b] = true;
            } else if map[a] != b {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{Constraint, Method};
    use crate::gev::GevParams;

    fn fit(mu: f64, sigma: f64, xi: f64) -> FitResult {
        FitResult {
            params: GevParams { mu, sigma, xi },
            method: Method::Mle,
            constraint: Constraint::Free,
            loglik: 0.0,
            std_errors: None,
            converged: true,
            iterations: 1,
        }
    }

    #[test]
    fn two_station_standardization() {
        let f = param_features(
            &[("a".into(), fit(70.0, 20.0, 0.1)), ("b".into(), fit(90.0, 30.0, -0.1))],
            true,
        )
        .unwrap();
        for j in 0..3 {
            assert!((f.rows[0][j] + f.rows[1][j]).abs() < 1e-12);
            assert!(f.rows[0][j].abs() > 0.0);
        }
    }

    #[test]
    fn table_features_layout_and_idempotence() {
        let fits: Vec<(String, FitResult)> = crate::table1::STATIONS
            .iter()
            .map(|&(id, mu, s, xi)| (id.to_string(), fit(mu, s, xi)))
            .collect();
        let raw = param_features(&fits, false).unwrap();
        assert_eq!(raw.len(), 20);
        assert_eq!(raw.dim(), 3);
        let mus: Vec<f64> = raw.rows.iter().map(|r| r[0]).collect();
        assert_eq!(mus[0], 70.25);
        assert_eq!(mus[19], 103.32);
        assert!(mus.windows(2).all(|w| w[0] <= w[1]));

        let z = raw.standardized().unwrap();
        let zz = z.standardized().unwrap();
        for (a, b) in z.rows.iter().zip(&zz.rows) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_variance_column_rejected() {
        let fits = vec![("a".into(), fit(70.0, 20.0, 0.0)), ("b".into(), fit(90.0, 30.0, 0.0))];
        assert!(matches!(param_features(&fits, true), Err(Error::Degenerate(_))));
        assert!(param_features(&fits, false).is_ok());
    }

    #[test]
    fn partition_validation_and_json() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!(Partition::new(labels.clone(), vec![0, 0, 0], 2).is_err());
        assert!(Partition::new(labels.clone(), vec![0, 2, 1], 2).is_err());
        let mut p = Partition::new(labels, vec![0, 1, 0], 2).unwrap();
        p.medoids = Some(vec![0, 1]);
        p.mean_silhouette = Some(0.25);
        assert_eq!(p.singletons(), vec![1]);
        let j = p.to_json();
        assert_eq!(j["K"], 2);
        assert_eq!(j["assignments"]["b"], 2);
        assert_eq!(j["medoids"][1], "b");
    }

    #[test]
    fn grouping_equivalence_up_to_relabel() {
        let l: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let a = Partition::new(l.clone(), vec![0, 0, 1, 1], 2).unwrap();
        let b = Partition::new(l.clone(), vec![1, 1, 0, 0], 2).unwrap();
        let c = Partition::new(l, vec![0, 1, 0, 1], 2).unwrap();
        assert!(a.same_grouping(&b));
        assert!(!a.same_grouping(&c));
    }

    #[test]
    fn tsv_layout() {
        let dm = DistanceMatrix::new(vec!["x".into(), "y".into()], vec![vec![0.0, 2.5], vec![2.5, 0.0]]).unwrap();
        let mut buf = Vec::new();
        dm.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "station\tx\ty\nx\t0\t2.5\ny\t2.5\t0\n");
        assert!(DistanceMatrix::new(vec!["x".into(), "y".into()], vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
    }
}
