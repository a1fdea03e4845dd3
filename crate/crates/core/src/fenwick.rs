//! Binary indexed tree over counts.

#[derive(Clone, Debug)]
pub struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Self { tree: vec![0; n] }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn add(&mut self, mut idx: usize, value: u64) {
        while idx < self.tree.len() {
            self.tree[idx] += value;
            idx |= idx + 1;
        }
    }

    /// Sum over positions `[0, end)`.
    pub fn prefix(&self, end: usize) -> u64 {
        let mut sum = 0;
        let mut r = end.min(self.tree.len());
        while r > 0 {
            sum += self.tree[r - 1];
            r &= r - 1;
        }
        sum
    }
}

/// Counts `#{k < m : keys[k] < threshold}` for many `(m, threshold)` queries
/// in `O((M + Q) log M)`. Queries may be given in any order; answers come
/// back in input order.
pub fn offline_prefix_rank<K: Ord + Copy>(keys: &[K], queries: &[(usize, K)]) -> Vec<u64> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let rank = |k: &K| sorted.partition_point(|s| s < k);

    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by_key(|&i| queries[i].0);

    let mut tree = Fenwick::new(sorted.len());
    let mut answers = vec![0; queries.len()];
    let mut inserted = 0usize;
    for qi in order {
        let (m, threshold) = queries[qi];
        let m = m.min(keys.len());
        while inserted < m {
            tree.add(rank(&keys[inserted]), 1);
            inserted += 1;
        }
        answers[qi] = tree.prefix(rank(&threshold));
    }
    answers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn prefix_sums() {
        let mut f = Fenwick::new(10);
        for i in 0..10 {
            f.add(i, i as u64);
        }
        for end in 0..=10 {
            assert_eq!(f.prefix(end), (0..end as u64).sum::<u64>());
        }
        assert_eq!(f.prefix(50), 45);
    }

    #[test]
    fn offline_matches_naive() {
        let mut rng = CounterRng::new(5, 5, 0);
        let keys: Vec<u64> = (0..500).map(|_| rng.below(100)).collect();
        let queries: Vec<(usize, u64)> =
            (0..200).map(|_| (rng.below(600) as usize, rng.below(120))).collect();
        let got = offline_prefix_rank(&keys, &queries);
        for (q, &(m, t)) in queries.iter().enumerate() {
            let naive = keys.iter().take(m).filter(|&&k| k < t).count() as u64;
            assert_eq!(got[q], naive);
        }
    }

    #[test]
    fn empty_inputs() {
        assert!(offline_prefix_rank::<u64>(&[], &[(3, 1)]) == vec![0]);
        assert!(offline_prefix_rank(&[1u64, 2], &[]).is_empty());
    }
}
