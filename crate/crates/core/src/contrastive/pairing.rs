//! Same-class snapshot pairing and minibatch sampling.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Metric, NnBackend, NswIndex, NswParams};
use crate::error::{Error, Result};

/// Pairs of indices into the point list given to the pairing routine, plus
/// the unpaired leftover of each class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<(usize, usize)>,
    pub leftovers: BTreeMap<usize, usize>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingStrategy {
    #[default]
    Nearest,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub strategy: PairingStrategy,
    pub metric: Metric,
    pub backend: NnBackend,
}

fn class_members(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    by_class
}

/// Each class draws from its own stream so classes can be paired
/// independently with identical results.
fn class_rng(seed: u64, class: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class as u64 + 1);
    rng
}

/// Greedy pairing within one class: repeatedly draw a random remaining
/// member and pair it with its nearest remaining neighbor.
///
/// `draw` picks the position of the next anchor in `remaining`.
fn pair_class_nearest<P: AsRef<[f64]>>(
    points: &[P],
    members: &[usize],
    metric: Metric,
    backend: NnBackend,
    mut draw: impl FnMut(usize) -> usize,
) -> (Vec<(usize, usize)>, Option<usize>) {
    let mut remaining = members.to_vec();
    let mut pairs = Vec::with_capacity(members.len() / 2);
    let index = match backend {
        NnBackend::Approximate if members.len() > 2 => {
            let pts = members.iter().map(|&m| points[m].as_ref().to_vec()).collect();
            NswIndex::build(pts, metric, NswParams::default(), members.len() as u64).ok()
        }
        _ => None,
    };
    let mut alive = vec![true; members.len()];
    let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(k, &m)| (m, k)).collect();

    while remaining.len() >= 2 {
        let anchor = remaining.swap_remove(draw(remaining.len()));
        alive[local[&anchor]] = false;
        let query = points[anchor].as_ref();
        let nearest = match &index {
            Some(ix) => {
                let k = ix.nearest(query, |k| alive[k]).expect("at least one member alive");
                remaining.iter().position(|&m| m == members[k]).expect("alive member is remaining")
            }
            None => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (pos, &m) in remaining.iter().enumerate() {
                    let d = metric.distance(query, points[m].as_ref());
                    if d < best_d || (d == best_d && m < remaining[best]) {
                        best = pos;
                        best_d = d;
                    }
                }
                best
            }
        };
        let partner = remaining.swap_remove(nearest);
        alive[local[&partner]] = false;
        pairs.push((anchor, partner));
    }
    (pairs, remaining.pop())
}

/// Nearest-neighbor pairing of same-label points, or uniformly random
/// same-label pairing when `config.strategy` is `Random`.
pub fn build_pair_set<P: AsRef<[f64]>>(points: &[P], labels: &[usize], config: &PairingConfig, seed: u64) -> Result<PairSet> {
    crate::error::check_len("build_pair_set labels", points.len(), labels.len())?;
    let mut out = PairSet::default();
    for (class, members) in class_members(labels) {
        let mut rng = class_rng(seed, class);
        let (pairs, leftover) = match config.strategy {
            PairingStrategy::Nearest => pair_class_nearest(points, &members, config.metric, config.backend, |n| rng.random_range(0..n)),
            PairingStrategy::Random => pair_class_random(&members, &mut rng),
        };
        out.pairs.extend(pairs);
        if let Some(l) = leftover {
            out.leftovers.insert(class, l);
        }
    }
    Ok(out)
}

pub fn build_pair_set_random(labels: &[usize], seed: u64) -> PairSet {
    let mut out = PairSet::default();
    for (class, members) in class_members(labels) {
        let mut rng = class_rng(seed, class);
        let (pairs, leftover) = pair_class_random(&members, &mut rng);
        out.pairs.extend(pairs);
        if let Some(l) = leftover {
            out.leftovers.insert(class, l);
        }
    }
    out
}

/// Repeatedly draws two distinct remaining members uniformly at random.
fn pair_class_random(members: &[usize], rng: &mut impl Rng) -> (Vec<(usize, usize)>, Option<usize>) {
    let mut remaining = members.to_vec();
    let mut pairs = Vec::with_capacity(members.len() / 2);
    while remaining.len() >= 2 {
        let a = remaining.swap_remove(rng.random_range(0..remaining.len()));
        let b = remaining.swap_remove(rng.random_range(0..remaining.len()));
        pairs.push((a, b));
    }
    (pairs, remaining.pop())
}

/// `batch_size / 2` distinct pairs; `members` lists the `batch_size`
/// snapshots as `[anchor₀, positive₀, anchor₁, …]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Minibatch {
    pub pairs: Vec<(usize, usize)>,
    pub members: Vec<usize>,
}

impl Minibatch {
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        let members = pairs.iter().flat_map(|&(a, p)| [a, p]).collect();
        Self { pairs, members }
    }
}

fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size < 2 || batch_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!("batch size must be even and ≥ 2, got {batch_size}")));
    }
    Ok(())
}

/// Draws `batch_size / 2` pairs without replacement.
pub fn sample_minibatch(pair_set: &PairSet, batch_size: usize, seed: u64) -> Result<Minibatch> {
    check_batch_size(batch_size)?;
    let want = batch_size / 2;
    if pair_set.pairs.len() < want {
        return Err(Error::InsufficientData(format!(
            "{} pairs available, {want} needed",
            pair_set.pairs.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<(usize, usize)> = pair_set.pairs.choose_multiple(&mut rng, want).copied().collect();
    Ok(Minibatch::from_pairs(chosen))
}

/// Shuffles every pair into consecutive minibatches of `batch_size / 2`
/// pairs; the last batch holds whatever remains.
pub fn epoch_minibatches(pair_set: &PairSet, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<Minibatch>> {
    check_batch_size(batch_size)?;
    let mut pairs = pair_set.pairs.clone();
    pairs.shuffle(rng);
    Ok(pairs.chunks(batch_size / 2).map(|c| Minibatch::from_pairs(c.to_vec())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashMap};

    fn nn_config() -> PairingConfig {
        PairingConfig::default()
    }

    #[test]
    fn forced_and_parity_cases() {
        let pts = vec![vec![0.0], vec![1.0]];
        let ps = build_pair_set(&pts, &[3, 3], &nn_config(), 0).unwrap();
        assert_eq!(ps.pairs.len(), 1);
        assert!(ps.leftovers.is_empty());

        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let ps = build_pair_set(&pts, &[0; 5], &nn_config(), 0).unwrap();
        assert_eq!(ps.pairs.len(), 2);
        assert_eq!(ps.leftovers.len(), 1);

        let single = build_pair_set(&[vec![0.0]], &[1], &nn_config(), 0).unwrap();
        assert!(single.is_empty());
    }

    /// Enumerates every sequence of anchor draws the algorithm can make.
    fn all_outcomes(points: &[Vec<f64>], members: &[usize]) -> BTreeSet<BTreeSet<(usize, usize)>> {
        fn rec(points: &[Vec<f64>], members: &[usize], script: &mut Vec<usize>, out: &mut BTreeSet<BTreeSet<(usize, usize)>>) {
            // Replay the script; `None` from the closure means the script ran out.
            let mut calls = 0usize;
            let mut needed = None;
            let s = script.clone();
            let (pairs, _) = pair_class_nearest(points, members, Metric::Euclidean, NnBackend::Exact, |n| {
                let k = calls;
                calls += 1;
                if k < s.len() {
                    s[k].min(n - 1)
                } else {
                    needed.get_or_insert(n);
                    0
                }
            });
            match needed {
                None => {
                    out.insert(pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect());
                }
                Some(n) => {
                    for choice in 0..n {
                        script.push(choice);
                        rec(points, members, script, out);
                        script.pop();
                    }
                }
            }
        }
        let mut out = BTreeSet::new();
        rec(points, members, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn separated_line_always_pairs_neighbors() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let expected: BTreeSet<(usize, usize)> = [(0, 1), (2, 3)].into_iter().collect();
        let outcomes = all_outcomes(&pts, &[0, 1, 2, 3]);
        assert_eq!(outcomes, [expected.clone()].into_iter().collect());
        for seed in 0..200 {
            let ps = build_pair_set(&pts, &[0; 4], &nn_config(), seed).unwrap();
            let got: BTreeSet<_> = ps.pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            assert_eq!(got, expected);
        }
        // first pick = 0 pairs it with 1
        let (pairs, _) = pair_class_nearest(&pts, &[0, 1, 2, 3], Metric::Euclidean, NnBackend::Exact, |_| 0);
        assert_eq!(pairs[0], (0, 1));
    }

    #[test]
    fn random_pairing_is_uniform_over_matchings() {
        let mut counts: HashMap<BTreeSet<(usize, usize)>, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            let ps = build_pair_set_random(&[0, 0, 0, 0], seed);
            let m: BTreeSet<_> = ps.pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            *counts.entry(m).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for c in counts.values() {
            let f = *c as f64 / trials as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{f}");
        }
        let two = build_pair_set_random(&[5, 5], 1);
        assert_eq!(two.pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn random_strategy_through_config_respects_labels() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let cfg = PairingConfig {
            strategy: PairingStrategy::Random,
            ..PairingConfig::default()
        };
        for seed in 0..50 {
            let ps = build_pair_set(&pts, &labels, &cfg, seed).unwrap();
            assert!(ps.pairs.iter().all(|&(a, b)| labels[a] == labels[b] && a != b));
        }
    }

    #[test]
    fn approximate_backend_pairs_like_exact_on_separated_data() {
        let pts: Vec<Vec<f64>> = (0..60).map(|i| vec![(i / 2) as f64 * 10.0 + (i % 2) as f64]).collect();
        let cfg = PairingConfig {
            backend: NnBackend::Approximate,
            ..PairingConfig::default()
        };
        let ps = build_pair_set(&pts, &[0; 60], &cfg, 3).unwrap();
        assert_eq!(ps.pairs.len(), 30);
        for &(a, b) in &ps.pairs {
            assert_eq!(a / 2, b / 2);
        }
    }

    #[test]
    fn minibatch_sampling() {
        let ps = PairSet {
            pairs: vec![(0, 1), (2, 3), (4, 5)],
            leftovers: BTreeMap::new(),
        };
        let mb = sample_minibatch(&ps, 6, 9).unwrap();
        let set: BTreeSet<_> = mb.members.iter().copied().collect();
        assert_eq!(set, (0..6).collect());
        assert_eq!(sample_minibatch(&ps, 4, 1).unwrap(), sample_minibatch(&ps, 4, 1).unwrap());
        assert!(sample_minibatch(&ps, 8, 1).is_err());
        assert!(sample_minibatch(&ps, 3, 1).is_err());
        for seed in 0..1000 {
            let mb = sample_minibatch(&ps, 4, seed).unwrap();
            let uniq: BTreeSet<_> = mb.members.iter().collect();
            assert_eq!(uniq.len(), 4);
        }
    }

    #[test]
    fn epoch_batches_cover_all_pairs() {
        let ps = PairSet {
            pairs: (0..7).map(|k| (2 * k, 2 * k + 1)).collect(),
            leftovers: BTreeMap::new(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batches = epoch_minibatches(&ps, 4, &mut rng).unwrap();
        assert_eq!(batches.len(), 4);
        assert_eq!(batches.last().unwrap().members.len(), 2);
        let total: usize = batches.iter().map(|b| b.pairs.len()).sum();
        assert_eq!(total, 7);
    }
}
