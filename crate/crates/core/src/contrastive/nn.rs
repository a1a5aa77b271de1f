//! Nearest-neighbor search: exact brute force and an approximate navigable
//! small-world graph.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, norm, squared_distance};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    /// `1 − cos(a, b)`.
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "manhattan" => Ok(Self::Manhattan),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::str::FromStr for NnBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "approximate" => Ok(Self::Approximate),
            other => Err(Error::InvalidArgument(format!("unknown nearest-neighbor backend `{other}`"))),
        }
    }
}

impl Metric {
    /// A distance that orders candidates identically to the metric.
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            // Squared distance is monotone in the Euclidean one.
            Metric::Euclidean => squared_distance(a, b),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Cosine => {
                let d = norm(a) * norm(b);
                if d == 0.0 {
                    1.0
                } else {
                    1.0 - dot(a, b) / d
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnBackend {
    #[default]
    Exact,
    Approximate,
}

/// `(distance, index)` ordered so that ties go to the lower index.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Scored(f64, usize);

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Index of the candidate nearest to `query`; ties go to the lowest index.
pub fn nearest_exact<P: AsRef<[f64]>>(query: &[f64], candidates: &[P], metric: Metric) -> Result<usize> {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| Scored(metric.distance(query, c.as_ref()), i))
        .min()
        .map(|s| s.1)
        .ok_or(Error::EmptyCandidates)
}

pub fn nn_search<P: AsRef<[f64]>>(query: &[f64], candidates: &[P], metric: Metric, backend: NnBackend) -> Result<usize> {
    match backend {
        NnBackend::Exact => nearest_exact(query, candidates, metric),
        NnBackend::Approximate => {
            let points: Vec<Vec<f64>> = candidates.iter().map(|c| c.as_ref().to_vec()).collect();
            let index = NswIndex::build(points, metric, NswParams::default(), 0)?;
            index.nearest(query, |_| true).ok_or(Error::EmptyCandidates)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NswParams {
    /// Links added per inserted node.
    pub links: usize,
    /// Beam width during construction.
    pub ef_construction: usize,
    /// Beam width during queries.
    pub ef_search: usize,
}

impl Default for NswParams {
    fn default() -> Self {
        Self {
            links: 8,
            ef_construction: 32,
            ef_search: 32,
        }
    }
}

/// Single-layer navigable small-world graph.
#[derive(Clone, Debug)]
pub struct NswIndex {
    points: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
    entry: usize,
    metric: Metric,
    params: NswParams,
}

impl NswIndex {
    pub fn build(points: Vec<Vec<f64>>, metric: Metric, params: NswParams, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        let n = points.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut index = Self {
            neighbors: vec![Vec::new(); n],
            entry: order[0],
            points,
            metric,
            params,
        };
        let max_degree = 2 * params.links;
        // Only inserted nodes are reachable from the entry point.
        for &node in order.iter().skip(1) {
            let found = index.beam_search(&index.points[node].clone(), params.ef_construction, |i| i != node);
            for &Scored(_, nb) in found.iter().take(params.links) {
                if nb == node {
                    continue;
                }
                index.neighbors[node].push(nb);
                index.neighbors[nb].push(node);
                if index.neighbors[nb].len() > max_degree {
                    index.prune(nb, max_degree);
                }
            }
        }
        Ok(index)
    }

    fn prune(&mut self, node: usize, keep: usize) {
        let p = &self.points[node];
        let mut scored: Vec<Scored> = self.neighbors[node]
            .iter()
            .map(|&j| Scored(self.metric.distance(p, &self.points[j]), j))
            .collect();
        scored.sort();
        scored.dedup_by_key(|s| s.1);
        scored.truncate(keep);
        self.neighbors[node] = scored.into_iter().map(|s| s.1).collect();
    }

    /// Best-first beam search; returns up to `ef` nodes accepted by
    /// `eligible`, nearest first. Ineligible nodes are still traversed.
    fn beam_search(&self, query: &[f64], ef: usize, eligible: impl Fn(usize) -> bool) -> Vec<Scored> {
        let mut visited = HashSet::new();
        let start = Scored(self.metric.distance(query, &self.points[self.entry]), self.entry);
        visited.insert(self.entry);
        // Min-heap of frontier, max-heap of current best.
        let mut frontier = BinaryHeap::new();
        frontier.push(std::cmp::Reverse(start));
        let mut beam: BinaryHeap<Scored> = BinaryHeap::new();
        beam.push(start);
        let mut results: BinaryHeap<Scored> = BinaryHeap::new();
        if eligible(start.1) {
            results.push(start);
        }
        while let Some(std::cmp::Reverse(cur)) = frontier.pop() {
            if beam.len() >= ef && cur > *beam.peek().expect("beam non-empty") {
                break;
            }
            for &nb in &self.neighbors[cur.1] {
                if !visited.insert(nb) {
                    continue;
                }
                let s = Scored(self.metric.distance(query, &self.points[nb]), nb);
                if beam.len() < ef || s < *beam.peek().expect("beam non-empty") {
                    frontier.push(std::cmp::Reverse(s));
                    beam.push(s);
                    if beam.len() > ef {
                        beam.pop();
                    }
                }
                if eligible(nb) {
                    results.push(s);
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out = results.into_vec();
        out.sort();
        out
    }

    /// Approximate nearest node accepted by `alive`. Falls back to a linear
    /// scan when the beam finds no accepted node.
    pub fn nearest(&self, query: &[f64], alive: impl Fn(usize) -> bool) -> Option<usize> {
        let found = self.beam_search(query, self.params.ef_search, &alive);
        if let Some(s) = found.first() {
            return Some(s.1);
        }
        (0..self.points.len())
            .filter(|&i| alive(i))
            .map(|i| Scored(self.metric.distance(query, &self.points[i]), i))
            .min()
            .map(|s| s.1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
