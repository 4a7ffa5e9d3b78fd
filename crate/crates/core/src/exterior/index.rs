use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing list of zero-based coordinate indices.
///
/// The serialized text formats use one-based indices; see [`crate::io`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "multi-index {indices:?} is not strictly increasing"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::invalid(format!(
                    "multi-index {indices:?} exceeds ambient dimension {n}"
                )));
            }
        }
        Ok(MultiIndex(indices))
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        MultiIndex(indices)
    }

    /// `{0, 1, …, m-1}`.
    pub fn leading(m: usize) -> Self {
        MultiIndex((0..m).collect())
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of this index in the lexicographic enumeration of all
    /// degree-m subsets of `{0, …, n-1}`.
    pub fn rank(&self, n: usize) -> usize {
        let m = self.0.len();
        let mut rank = 0;
        let mut prev = 0;
        for (pos, &i) in self.0.iter().enumerate() {
            for skipped in prev..i {
                rank += binomial(n - skipped - 1, m - pos - 1);
            }
            prev = i + 1;
        }
        rank
    }

    pub fn unrank(mut rank: usize, n: usize, m: usize) -> Self {
        let mut out = Vec::with_capacity(m);
        let mut next = 0;
        for pos in 0..m {
            let mut i = next;
            loop {
                let block = binomial(n - i - 1, m - pos - 1);
                if rank < block {
                    break;
                }
                rank -= block;
                i += 1;
            }
            out.push(i);
            next = i + 1;
        }
        MultiIndex(out)
    }

    /// All degree-m multi-indices of `{0, …, n-1}` in lexicographic order.
    pub fn all(n: usize, m: usize) -> MultiIndexIter {
        MultiIndexIter {
            n,
            current: if m <= n { Some((0..m).collect()) } else { None },
        }
    }

    /// Sorted union with the sign of the shuffle permutation, or `None` if
    /// the two index sets overlap.
    pub fn shuffle(&self, other: &MultiIndex) -> Option<(MultiIndex, f64)> {
        let mut inversions = 0usize;
        let mut merged = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut a, mut b) = (0, 0);
        while a < self.0.len() || b < other.0.len() {
            if b == other.0.len() || (a < self.0.len() && self.0[a] < other.0[b]) {
                merged.push(self.0[a]);
                a += 1;
            } else if a == self.0.len() || other.0[b] < self.0[a] {
                // every remaining element of `self` is larger than other[b]
                inversions += self.0.len() - a;
                merged.push(other.0[b]);
                b += 1;
            } else {
                return None;
            }
        }
        let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((MultiIndex(merged), sign))
    }

    /// Insert `i` in front (as the first slot of an alternating argument list)
    /// and return the sorted index with the permutation sign.
    pub fn prepend(&self, i: usize) -> Option<(MultiIndex, f64)> {
        MultiIndex(vec![i]).shuffle(self)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

pub struct MultiIndexIter {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for MultiIndexIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        let cur = self.current.take()?;
        let m = cur.len();
        let out = MultiIndex(cur.clone());
        let mut next = cur;
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            if next[pos] < self.n - m + pos {
                next[pos] += 1;
                for later in pos + 1..m {
                    next[later] = next[later - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
