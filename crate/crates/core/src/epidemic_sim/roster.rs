//! Per-individual counts of edges to susceptibles.
//!
//! A [`Roster`] stores one count per infectious (or removed) individual and a
//! Fenwick tree over those counts, so that the owner of the `h`-th half-edge
//! can be found in `O(log len)`. Uniform half-edge draws are what both the
//! allocation of lost `IS`/`RS` edges and size-biased initial selection need.

use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::CountMeasure;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roster {
    counts: Vec<u32>,
    // 1-based Fenwick array; tree[0] is unused.
    tree: Vec<u64>,
    total: u64,
}

#[inline]
fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl Roster {
    pub fn new() -> Self {
        Self {
            counts: Vec::new(),
            tree: vec![0],
            total: 0,
        }
    }

    pub fn from_counts<I: IntoIterator<Item = u32>>(counts: I) -> Self {
        let mut r = Self::new();
        for c in counts {
            r.push(c);
        }
        r
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, i: usize) -> u32 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Sum of the first `i` counts.
    fn prefix(&self, mut i: usize) -> u64 {
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= lowbit(i);
        }
        s
    }

    fn tree_add(&mut self, i: usize, delta: i64) {
        let mut pos = i + 1;
        while pos < self.tree.len() {
            self.tree[pos] = (self.tree[pos] as i64 + delta) as u64;
            pos += lowbit(pos);
        }
    }

    pub fn push(&mut self, c: u32) {
        let pos = self.counts.len() + 1;
        let node = u64::from(c) + self.prefix(pos - 1) - self.prefix(pos - lowbit(pos));
        self.counts.push(c);
        self.tree.push(node);
        self.total += u64::from(c);
    }

    /// Removes individual `i`, moving the last individual into its slot.
    pub fn swap_remove(&mut self, i: usize) -> u32 {
        let last = self.counts.len() - 1;
        let removed = self.counts[i];
        let moved = self.counts[last];
        if i != last {
            self.tree_add(i, i64::from(moved) - i64::from(removed));
            self.counts[i] = moved;
        }
        self.tree_add(last, -i64::from(moved));
        self.counts.pop();
        self.tree.pop();
        self.total -= u64::from(removed);
        removed
    }

    pub fn decrement(&mut self, i: usize, by: u32) -> Result<()> {
        let cur = *self.counts.get(i).ok_or(Error::Range {
            index: i as u64 + 1,
            len: self.counts.len() as u64,
        })?;
        if by > cur {
            return Err(Error::StateCorruption(format!(
                "individual {i} has {cur} edges to susceptibles, cannot remove {by}"
            )));
        }
        self.counts[i] = cur - by;
        self.tree_add(i, -i64::from(by));
        self.total -= u64::from(by);
        Ok(())
    }

    /// Index of the individual owning half-edge `h` (0-based, `h < total`),
    /// half-edges being numbered individual by individual.
    pub fn owner_of(&self, h: u64) -> usize {
        debug_assert!(h < self.total);
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut rem = h;
        let mut step = if n == 0 {
            0
        } else {
            1usize << (usize::BITS - 1 - n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    /// Chooses `n_draw` distinct half-edges uniformly among the `total` ones and
    /// reports how many belong to each individual.
    pub fn allocate<R: Rng + ?Sized>(&self, n_draw: u64, rng: &mut R) -> Result<Allocation> {
        if n_draw > self.total {
            return Err(Error::InfeasibleDraw(format!(
                "cannot draw {n_draw} half-edges out of {}",
                self.total
            )));
        }
        if n_draw == 0 {
            return Ok(Allocation::default());
        }
        let picks = rand::seq::index::sample(rng, self.total as usize, n_draw as usize);
        let mut owners: Vec<usize> = picks.iter().map(|h| self.owner_of(h as u64)).collect();
        owners.sort_unstable();
        let mut parts: Vec<(usize, u32)> = Vec::new();
        for o in owners {
            match parts.last_mut() {
                Some((idx, c)) if *idx == o => *c += 1,
                _ => parts.push((o, 1)),
            }
        }
        Ok(Allocation { parts })
    }

    /// The measure `Σ_x δ_{count(x)}`.
    pub fn to_measure(&self) -> CountMeasure {
        CountMeasure::from_levels(self.counts.iter().copied())
    }
}

/// Sparse allocation `u`: `(individual, number of its half-edges drawn)`,
/// sorted by individual, zero entries omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocation {
    parts: Vec<(usize, u32)>,
}

impl Allocation {
    pub fn from_parts(mut parts: Vec<(usize, u32)>) -> Self {
        parts.retain(|&(_, c)| c > 0);
        parts.sort_unstable();
        Self { parts }
    }

    pub fn parts(&self) -> &[(usize, u32)] {
        &self.parts
    }

    pub fn total(&self) -> u64 {
        self.parts.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    /// Dense vector `(u_1, …, u_len)`.
    pub fn dense(&self, len: usize) -> Vec<u32> {
        let mut u = vec![0; len];
        for &(i, c) in &self.parts {
            u[i] += c;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn allocation_examples() {
        let roster = Roster::from_counts([2, 1]);
        let mut rng = rng_from_seed(5);
        let m = 60_000;
        let hits = (0..m)
            .filter(|_| roster.allocate(1, &mut rng).unwrap().dense(2) == vec![1, 0])
            .count();
        let p = 2.0 / 3.0;
        assert!((hits as f64 / m as f64 - p).abs() < 5.0 * (p * (1.0 - p) / m as f64).sqrt());

        assert_eq!(roster.allocate(3, &mut rng).unwrap().dense(2), vec![2, 1]);
        let single = Roster::from_counts([5]);
        assert_eq!(single.allocate(0, &mut rng).unwrap().dense(1), vec![0]);
        assert!(matches!(roster.allocate(4, &mut rng), Err(Error::InfeasibleDraw(_))));
    }

    #[test]
    fn decrement_guards_against_negative_counts() {
        let mut r = Roster::from_counts([1, 3]);
        assert!(matches!(r.decrement(0, 2), Err(Error::StateCorruption(_))));
        r.decrement(1, 3).unwrap();
        assert_eq!(r.total(), 1);
        assert!(r.decrement(5, 1).is_err());
    }

    proptest! {
        #[test]
        fn fenwick_tracks_counts(ops in prop::collection::vec((0u8..3, 0u32..7, 0usize..50), 1..80)) {
            let mut r = Roster::new();
            let mut shadow: Vec<u32> = Vec::new();
            for (op, c, idx) in ops {
                match op {
                    0 => { r.push(c); shadow.push(c); }
                    1 if !shadow.is_empty() => {
                        let i = idx % shadow.len();
                        prop_assert_eq!(r.swap_remove(i), shadow.swap_remove(i));
                    }
                    _ if !shadow.is_empty() => {
                        let i = idx % shadow.len();
                        let by = c.min(shadow[i]);
                        r.decrement(i, by).unwrap();
                        shadow[i] -= by;
                    }
                    _ => {}
                }
                prop_assert_eq!(r.counts(), &shadow[..]);
                prop_assert_eq!(r.total(), shadow.iter().map(|&c| u64::from(c)).sum::<u64>());
                let mut h = 0u64;
                for (i, &c) in shadow.iter().enumerate() {
                    for _ in 0..c {
                        prop_assert_eq!(r.owner_of(h), i);
                        h += 1;
                    }
                }
            }
        }

        #[test]
        fn allocations_respect_the_roster(counts in prop::collection::vec(0u32..6, 1..8), seed in 0u64..1000, frac in 0.0f64..=1.0) {
            let roster = Roster::from_counts(counts.clone());
            let n = (roster.total() as f64 * frac).floor() as u64;
            let mut rng = rng_from_seed(seed);
            let u = roster.allocate(n, &mut rng).unwrap().dense(counts.len());
            prop_assert_eq!(u.iter().map(|&x| u64::from(x)).sum::<u64>(), n);
            for (ui, ci) in u.iter().zip(&counts) {
                prop_assert!(ui <= ci);
            }
        }
    }
}
