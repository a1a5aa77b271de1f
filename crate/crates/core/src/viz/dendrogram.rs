use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ClusteringResult;
use crate::numeric::euclidean_distance;

/// One agglomeration step. Leaves are `0..n`; the cluster created by merge
/// `k` has id `n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub num_points: usize,
    pub merges: Vec<Merge>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Complete-linkage agglomerative clustering with Euclidean distance, via
/// the nearest-neighbor-chain algorithm (O(n²) time and memory).
pub fn agglomerative_cluster<P: AsRef<[f64]>>(points: &[P]) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("clustering needs at least two points, got {n}")));
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean_distance(points[i].as_ref(), points[j].as_ref());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    // Active clusters are named by a representative point.
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        loop {
            let top = *chain.last().expect("chain non-empty");
            let prev = chain.len().checked_sub(2).map(|k| chain[k]);
            // Prefer the previous chain element on ties so the chain terminates.
            let mut best = prev.unwrap_or(usize::MAX);
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist[top * n + p]);
            for k in 0..n {
                if active[k] && k != top {
                    let d = dist[top * n + k];
                    if d < best_d || (best == usize::MAX && d <= best_d) {
                        best = k;
                        best_d = d;
                    }
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                let (keep, gone) = (top.min(best), top.max(best));
                raw.push((keep, gone, best_d));
                active[gone] = false;
                size[keep] += size[gone];
                for k in 0..n {
                    if active[k] && k != keep {
                        let d = dist[keep * n + k].max(dist[gone * n + k]);
                        dist[keep * n + k] = d;
                        dist[k * n + keep] = d;
                    }
                }
                break;
            }
            chain.push(best);
        }
    }

    // Stable sort keeps dependent merges after the merges they build on.
    raw.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut uf = UnionFind::new(n);
    let mut node_of = (0..n).collect::<Vec<_>>();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);
    for (k, (a, b, d)) in raw.into_iter().enumerate() {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (l, r) = (node_of[ra].min(node_of[rb]), node_of[ra].max(node_of[rb]));
        let s = sizes[ra] + sizes[rb];
        uf.parent[rb] = ra;
        sizes[ra] = s;
        node_of[ra] = n + k;
        merges.push(Merge {
            left: l,
            right: r,
            distance: d,
            size: s,
        });
    }
    Ok(Dendrogram { num_points: n, merges })
}

impl Dendrogram {
    /// Flat clustering with exactly `k` clusters, numbered by first member.
    pub fn cut(&self, k: usize) -> Result<ClusteringResult> {
        let n = self.num_points;
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("cut level {k} outside 1..={n}")));
        }
        let mut uf = UnionFind::new(2 * n - 1);
        for (step, m) in self.merges.iter().take(n - k).enumerate() {
            uf.parent[m.left] = n + step;
            uf.parent[m.right] = n + step;
        }
        let roots: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
        Ok(ClusteringResult::from_labels(&roots))
    }

    pub fn distances(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.distance).collect()
    }
}
