use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PamOutcome {
    pub partition: Partition,
    /// Total dissimilarity of points to their medoids.
    pub cost: f64,
    pub swaps: usize,
    /// Cost after BUILD and after each accepted swap.
    pub cost_trace: Vec<f64>,
}

/// Sum over points of the distance to the nearest medoid.
pub fn total_cost(dm: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..dm.len())
        .map(|i| medoids.iter().map(|&m| dm.get(i, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

fn build(dm: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = dm.len();
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..n).filter(|c| !medoids.contains(c)) {
            let cost: f64 = (0..n).map(|i| nearest[i].min(dm.get(i, c))).sum();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, c));
            }
        }
        let (_, c) = best.expect("k <= n leaves a candidate");
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dm.get(i, c));
        }
        medoids.push(c);
    }
    medoids
}

/// Partitioning around medoids: greedy BUILD followed by steepest-descent
/// SWAP until no exchange lowers the total cost. Ties go to the lowest index.
pub fn pam(dm: &DistanceMatrix, k: usize) -> Result<PamOutcome> {
    let n = dm.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("cannot form {k} medoids from {n} points")));
    }
    let mut medoids = build(dm, k);
    let mut cost = total_cost(dm, &medoids);
    let mut trace = vec![cost];
    let mut swaps = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..k {
            for h in (0..n).filter(|h| !medoids.contains(h)) {
                let mut cand = medoids.clone();
                cand[slot] = h;
                let c = total_cost(dm, &cand);
                if best.is_none_or(|(b, _, _)| c < b) {
                    best = Some((c, slot, h));
                }
            }
        }
        match best {
            Some((c, slot, h)) if c < cost - 1e-12 * (1.0 + cost.abs()) => {
                medoids[slot] = h;
                cost = c;
                trace.push(cost);
                swaps += 1;
            }
            _ => break,
        }
    }

    medoids.sort_unstable();
    let assignment: Vec<usize> = (0..n)
        .map(|i| {
            if let Some(p) = medoids.iter().position(|&m| m == i) {
                return p;
            }
            let mut best = 0;
            for (p, &m) in medoids.iter().enumerate() {
                if dm.get(i, m) < dm.get(i, medoids[best]) {
                    best = p;
                }
            }
            best
        })
        .collect();
    let mut partition = Partition::new(dm.labels().to_vec(), assignment, k)?;
    partition.medoids = Some(medoids);
    if k >= 2 {
        partition.mean_silhouette = Some(super::silhouette(dm, &partition)?.mean);
    }
    Ok(PamOutcome {
        partition,
        cost,
        swaps,
        cost_trace: trace,
    })
}

pub fn pam_cluster(dm: &DistanceMatrix, k: usize) -> Result<Partition> {
    Ok(pam(dm, k)?.partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    pub(crate) fn exhaustive_min(dm: &DistanceMatrix, k: usize) -> f64 {
        fn rec(dm: &DistanceMatrix, k: usize, start: usize, cur: &mut Vec<usize>, best: &mut f64) {
            if cur.len() == k {
                *best = best.min(total_cost(dm, cur));
                return;
            }
            for c in start..dm.len() {
                cur.push(c);
                rec(dm, k, c + 1, cur, best);
                cur.pop();
            }
        }
        let mut best = f64::INFINITY;
        rec(dm, k, 0, &mut Vec::new(), &mut best);
        best
    }

    fn random_dm(n: usize, seed_: u64) -> DistanceMatrix {
        let mut rng = seed::rng(seed_);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        DistanceMatrix::from_fn((0..n).map(|i| i.to_string()).collect(), |i, j| {
            ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
        })
    }

    #[test]
    fn two_tight_pairs() {
        let x: [f64; 4] = [0.0, 0.1, 5.0, 5.1];
        let dm = DistanceMatrix::from_fn((0..4).map(|i| i.to_string()).collect(), |i, j| (x[i] - x[j]).abs());
        let out = pam(&dm, 2).unwrap();
        let m = out.partition.medoids.clone().unwrap();
        assert!(m[0] < 2 && m[1] >= 2);
        assert!((out.cost - exhaustive_min(&dm, 2)).abs() < 1e-12);
        assert_eq!(out.partition.assignment, vec![0, 0, 1, 1]);
    }

    #[test]
    fn k_equals_n_is_zero_cost() {
        let dm = random_dm(6, 1);
        let out = pam(&dm, 6).unwrap();
        assert_eq!(out.cost, 0.0);
        assert_eq!(out.partition.medoids.unwrap(), (0..6).collect::<Vec<_>>());
        assert!(pam(&dm, 7).is_err());
    }

    #[test]
    fn swap_local_optimum_against_exhaustive_search() {
        let mut exact = 0;
        let mut total = 0;
        for s in 0..60 {
            let n = 4 + (s as usize % 5);
            let dm = random_dm(n, 100 + s);
            for k in 1..=3.min(n) {
                let out = pam(&dm, k).unwrap();
                let opt = exhaustive_min(&dm, k);
                assert!(out.cost >= opt - 1e-12);
                total += 1;
                if out.cost <= opt + 1e-12 {
                    exact += 1;
                }
                assert!(out.cost_trace.windows(2).all(|w| w[1] <= w[0]));
                let m = out.partition.medoids.clone().unwrap();
                for slot in 0..k {
                    for h in (0..n).filter(|h| !m.contains(h)) {
                        let mut cand = m.clone();
                        cand[slot] = h;
                        assert!(total_cost(&dm, &cand) >= out.cost - 1e-12);
                    }
                }
                for (c, &med) in m.iter().enumerate() {
                    assert_eq!(out.partition.assignment[med], c);
                }
            }
        }
        assert!(exact * 10 >= total * 9, "{exact}/{total}");
    }

    #[test]
    fn deterministic() {
        let dm = random_dm(8, 9);
        assert_eq!(pam(&dm, 3).unwrap(), pam(&dm, 3).unwrap());
    }
}
