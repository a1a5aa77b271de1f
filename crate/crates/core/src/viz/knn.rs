use std::collections::BTreeMap;

use crate::error::{check_len, Error, Result};
use crate::numeric::squared_distance;

/// Majority vote among the `k` nearest training points (Euclidean, ties in
/// distance to the lower index). A tied vote goes to the cluster of the
/// nearest voter among the tied clusters.
pub fn knn_assign<P: AsRef<[f64]>, Q: AsRef<[f64]>>(train: &[P], train_clusters: &[usize], queries: &[Q], k: usize) -> Result<Vec<usize>> {
    check_len("knn_assign clusters", train.len(), train_clusters.len())?;
    if train.is_empty() {
        return Err(Error::InsufficientData("knn_assign needs training points".into()));
    }
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!("k = {k} outside 1..={}", train.len())));
    }
    let mut out = Vec::with_capacity(queries.len());
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    for q in queries {
        scored.clear();
        for (i, t) in train.iter().enumerate() {
            scored.push((squared_distance(q.as_ref(), t.as_ref()), i));
        }
        scored.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &mut scored[..k];
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for &(_, i) in nearest.iter() {
            *votes.entry(train_clusters[i]).or_default() += 1;
        }
        let top = *votes.values().max().expect("k ≥ 1");
        let winner = nearest
            .iter()
            .map(|&(_, i)| train_clusters[i])
            .find(|c| votes[c] == top)
            .expect("a voter holds the top count");
        out.push(winner);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contrastive::{nearest_exact, Metric};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(train: &[Vec<f64>], ids: &[usize], q: &[f64], k: usize) -> usize {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.sort_by(|&a, &b| squared_distance(q, &train[a]).total_cmp(&squared_distance(q, &train[b])).then(a.cmp(&b)));
        let top = &order[..k];
        let count = |c: usize| top.iter().filter(|&&i| ids[i] == c).count();
        let best = top.iter().map(|&i| count(ids[i])).max().unwrap();
        ids[*top.iter().find(|&&i| count(ids[i]) == best).unwrap()]
    }

    #[test]
    fn coincident_query_takes_its_cluster() {
        let train = vec![vec![0.0], vec![0.1], vec![0.2], vec![5.0], vec![5.1], vec![5.2]];
        let ids = [0, 0, 0, 1, 1, 1];
        assert_eq!(knn_assign(&train, &ids, &[vec![5.1]], 3).unwrap(), vec![1]);
        assert!(knn_assign(&train, &ids, &[vec![5.1]], 7).is_err());
        assert!(knn_assign::<Vec<f64>, Vec<f64>>(&[], &[], &[vec![0.0]], 1).is_err());
    }

    #[test]
    fn one_neighbor_is_nearest_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let train: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random(), rng.random()]).collect();
        let ids: Vec<usize> = (0..30).collect();
        for _ in 0..100 {
            let q = vec![rng.random::<f64>(), rng.random::<f64>()];
            let got = knn_assign(&train, &ids, &[q.clone()], 1).unwrap()[0];
            assert_eq!(got, nearest_exact(&q, &train, Metric::Euclidean).unwrap());
        }
    }

    #[test]
    fn matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(3..15);
            let train: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0..4) as f64, rng.random_range(0..4) as f64]).collect();
            let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let qs: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0..4) as f64, rng.random_range(0..4) as f64]).collect();
            let got = knn_assign(&train, &ids, &qs, 3).unwrap();
            for (q, g) in qs.iter().zip(got) {
                assert_eq!(g, brute(&train, &ids, q, 3));
            }
        }
    }
}
