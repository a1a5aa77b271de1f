use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::euclidean_distance;

/// Cluster assignment of each point, ids dense from 0.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub assignments: Vec<usize>,
    pub num_clusters: usize,
}

impl ClusteringResult {
    /// Relabels arbitrary ids to `0..K` in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = BTreeMap::new();
        let mut next = 0;
        let assignments = labels
            .iter()
            .map(|l| {
                *map.entry(*l).or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Self { assignments, num_clusters: next }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Joint counts of (cluster, label) with row and column totals.
struct Contingency {
    cells: Vec<Vec<f64>>,
    rows: Vec<f64>,
    cols: Vec<f64>,
    n: f64,
}

impl Contingency {
    fn new(clusters: &[usize], labels: &[usize]) -> Result<Self> {
        check_len("contingency labels", clusters.len(), labels.len())?;
        if clusters.is_empty() {
            return Err(Error::InsufficientData("clustering metric of an empty set".into()));
        }
        let a = ClusteringResult::from_labels(clusters);
        let b = ClusteringResult::from_labels(labels);
        let mut cells = vec![vec![0.0; b.num_clusters]; a.num_clusters];
        for (&i, &j) in a.assignments.iter().zip(&b.assignments) {
            cells[i][j] += 1.0;
        }
        let rows = cells.iter().map(|r| r.iter().sum()).collect();
        let cols = (0..b.num_clusters).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        Ok(Self {
            cells,
            rows,
            cols,
            n: clusters.len() as f64,
        })
    }
}

pub fn purity(clusters: &[usize], labels: &[usize]) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    let hits: f64 = t.cells.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).sum();
    Ok(hits / t.n)
}

fn entropy(counts: &[f64], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the arithmetic mean of the two entropies.
pub fn nmi(clusters: &[usize], labels: &[usize]) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    let mut mi = 0.0;
    for (i, row) in t.cells.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0.0 {
                mi += c / t.n * (c * t.n / (t.rows[i] * t.cols[j])).ln();
            }
        }
    }
    let denom = 0.5 * (entropy(&t.rows, t.n) + entropy(&t.cols, t.n));
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

pub fn ari(clusters: &[usize], labels: &[usize]) -> Result<f64> {
    let t = Contingency::new(clusters, labels)?;
    let index: f64 = t.cells.iter().flatten().map(|&c| choose2(c)).sum();
    let a: f64 = t.rows.iter().map(|&c| choose2(c)).sum();
    let b: f64 = t.cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(t.n);
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    if max == expected {
        // both partitions trivial in the same way
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// Mean silhouette with Euclidean distance; points alone in their cluster
/// score 0.
pub fn silhouette<P: AsRef<[f64]>>(points: &[P], clusters: &[usize]) -> Result<f64> {
    check_len("silhouette clusters", points.len(), clusters.len())?;
    let c = ClusteringResult::from_labels(clusters);
    if c.num_clusters < 2 {
        return Err(Error::InsufficientData("silhouette needs at least two clusters".into()));
    }
    let k = c.num_clusters;
    let mut sizes = vec![0usize; k];
    for &a in &c.assignments {
        sizes[a] += 1;
    }
    let n = points.len();
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.fill(0.0);
        for j in 0..n {
            if i != j {
                sums[c.assignments[j]] += euclidean_distance(points[i].as_ref(), points[j].as_ref());
            }
        }
        let own = c.assignments[i];
        if sizes[own] == 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&q| q != own && sizes[q] > 0)
            .map(|q| sums[q] / sizes[q] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}
