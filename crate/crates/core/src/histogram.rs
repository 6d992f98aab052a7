//! Mergeable count histograms.
//!
//! A [`Histogram`] is a commutative monoid under [`Histogram::merge`] with the
//! empty histogram as identity, so partial histograms built on disjoint
//! slices of the input can be folded in any order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram<K: Ord> {
    bins: BTreeMap<K, u64>,
}

impl<K: Ord> Default for Histogram<K> {
    fn default() -> Self {
        Self {
            bins: BTreeMap::new(),
        }
    }
}

impl<K: Ord> Histogram<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: K) {
        self.add_n(key, 1);
    }

    pub fn add_n(&mut self, key: K, n: u64) {
        if n > 0 {
            *self.bins.entry(key).or_insert(0) += n;
        }
    }

    pub fn get(&self, key: &K) -> u64 {
        self.bins.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Number of distinct non-empty bins.
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn merge(&mut self, other: Histogram<K>) {
        if self.bins.is_empty() {
            self.bins = other.bins;
            return;
        }
        for (k, n) in other.bins {
            self.add_n(k, n);
        }
    }

    pub fn merged(mut self, other: Histogram<K>) -> Self {
        self.merge(other);
        self
    }

    /// Bins in ascending key order.
    pub fn iter(&self) -> impl Iterator<Item = (&K, u64)> + '_ {
        self.bins.iter().map(|(k, &n)| (k, n))
    }

    pub fn as_map(&self) -> &BTreeMap<K, u64> {
        &self.bins
    }

    /// Key of the most populated bin; ties go to the smallest key.
    pub fn mode(&self) -> Option<&K> {
        let mut best: Option<(&K, u64)> = None;
        for (k, &n) in &self.bins {
            if best.is_none_or(|(_, m)| n > m) {
                best = Some((k, n));
            }
        }
        best.map(|(k, _)| k)
    }
}

impl<K: Ord> FromIterator<K> for Histogram<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut h = Histogram::new();
        for k in iter {
            h.add(k);
        }
        h
    }
}

impl<K: Ord> Extend<K> for Histogram<K> {
    fn extend<I: IntoIterator<Item = K>>(&mut self, iter: I) {
        for k in iter {
            self.add(k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mode_prefers_smallest_key_on_tie() {
        let h: Histogram<u32> = [3, 3, 1, 1, 7].into_iter().collect();
        assert_eq!(h.mode(), Some(&1));
        assert_eq!(Histogram::<u32>::new().mode(), None);
    }

    proptest! {
        #[test]
        fn merge_is_order_independent(a in prop::collection::vec(0u8..20, 0..50),
                                      b in prop::collection::vec(0u8..20, 0..50)) {
            let ha: Histogram<u8> = a.iter().copied().collect();
            let hb: Histogram<u8> = b.iter().copied().collect();
            let ab = ha.clone().merged(hb.clone());
            let ba = hb.merged(ha);
            let all: Histogram<u8> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(&ab, &ba);
            prop_assert_eq!(&ab, &all);
            prop_assert_eq!(ab.total(), (a.len() + b.len()) as u64);
        }
    }
}
