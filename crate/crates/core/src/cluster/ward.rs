use serde::{Deserialize, Serialize};

use super::{Features, Partition};
use crate::error::{Error, Result};

/// One agglomeration step. Clusters `0..n` are the original points; merge
/// `k` creates cluster `n + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Square root of the Lance–Williams Ward distance at the merge.
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
}

/// Ward agglomeration on squared Euclidean distances using the
/// Lance–Williams update
///
/// ```text
/// d(k, i∪j) = ((n_i + n_k) d(k,i) + (n_j + n_k) d(k,j) - n_k d(i,j)) / (n_i + n_j + n_k)
/// ```
pub fn ward_cluster(features: &Features) -> Result<Dendrogram> {
    let n = features.len();
    if n < 2 {
        return Err(Error::Validation("Ward clustering needs at least two rows".into()));
    }
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = features.rows[i]
                .iter()
                .zip(&features.rows[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if d[i][j] < best.0 {
                    best = (d[i][j], i, j);
                }
            }
        }
        let (dij, i, j) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let nk = size[k] as f64;
            let v = ((ni + nk) * d[k][i] + (nj + nk) * d[k][j] - nk * dij) / (ni + nj + nk);
            d[k][i] = v;
            d[i][k] = v;
        }
        active[j] = false;
        size[i] += size[j];
        let (a, b) = (id[i].min(id[j]), id[i].max(id[j]));
        merges.push(Merge {
            a,
            b,
            height: dij.max(0.0).sqrt(),
            size: size[i],
        });
        id[i] = n + step;
    }
    Ok(Dendrogram {
        labels: features.labels.clone(),
        merges,
    })
}

impl Dendrogram {
    /// Partition obtained by stopping `k` clusters short of the root.
    /// Clusters are numbered by their lowest-index member.
    pub fn cut(&self, k: usize) -> Result<Partition> {
        let n = self.labels.len();
        if k == 0 || k > n {
            return Err(Error::Domain(format!("cannot cut {n} points into {k} clusters")));
        }
        // parent links over original and merged cluster ids
        let mut parent: Vec<usize> = (0..2 * n - 1).collect();
        for (step, m) in self.merges.iter().take(n - k).enumerate() {
            parent[m.a] = n + step;
            parent[m.b] = n + step;
        }
        let root = |mut c: usize| {
            while parent[c] != c {
                c = parent[c];
            }
            c
        };
        let mut number = std::collections::HashMap::new();
        let assignment: Vec<usize> = (0..n)
            .map(|i| {
                let next = number.len();
                *number.entry(root(i)).or_insert(next)
            })
            .collect();
        Partition::new(self.labels.clone(), assignment, k)
    }
}
