//! Finite measures on ℕ.
//!
//! [`CountMeasure`] holds integer multiplicities per level and is the state
//! of the finite-population process (degrees of susceptibles, numbers of
//! edges to susceptibles). [`RealMeasure`] holds nonnegative real weights on
//! `0..=kmax` and is the state of the limit system.
//!
//! Moments are restricted to orders `0..=5`, the range in which the limit
//! theorem controls the measures.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Highest supported moment order.
pub const MAX_MOMENT: u32 = 5;

fn check_order(p: u32) -> Result<()> {
    if p > MAX_MOMENT {
        Err(Error::MomentOrder(p))
    } else {
        Ok(())
    }
}

/// Measures that expose `⟨μ, χ^p⟩`.
pub trait Moments {
    /// `Σ_k k^p μ(k)`; `p = 0` is the mass. Orders above 5 are rejected.
    fn moment(&self, p: u32) -> Result<f64>;
}

/// Integer-valued finite measure on ℕ.
///
/// Levels with multiplicity zero are never stored. Mass and first moment are
/// cached and kept in step with every mutation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountMeasure {
    counts: BTreeMap<u32, u64>,
    mass: u64,
    first_moment: u64,
}

impl CountMeasure {
    pub fn new() -> Self {
        Self::default()
    }

    /// One atom per element of `levels`.
    pub fn from_levels<I: IntoIterator<Item = u32>>(levels: I) -> Self {
        let mut mu = Self::new();
        for k in levels {
            mu.add_atoms(k, 1);
        }
        mu
    }

    pub fn from_counts<I: IntoIterator<Item = (u32, u64)>>(counts: I) -> Self {
        let mut mu = Self::new();
        for (k, c) in counts {
            mu.add_atoms(k, c);
        }
        mu
    }

    fn add_atoms(&mut self, level: u32, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(level).or_insert(0) += count;
        self.mass += count;
        self.first_moment += u64::from(level) * count;
    }

    pub fn get(&self, level: u32) -> u64 {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    /// `⟨μ, 1⟩`.
    pub fn mass(&self) -> u64 {
        self.mass
    }

    /// `⟨μ, χ⟩`, read from the cache.
    pub fn first_moment(&self) -> u64 {
        self.first_moment
    }

    pub fn is_empty(&self) -> bool {
        self.mass == 0
    }

    pub fn max_level(&self) -> Option<u32> {
        self.counts.keys().next_back().copied()
    }

    /// `(level, multiplicity)` pairs in increasing level order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    /// Level of the `i`-th atom (1-based) when atoms are ranked by level.
    pub fn gamma(&self, i: u64) -> Result<u32> {
        if i == 0 || i > self.mass {
            return Err(Error::Range {
                index: i,
                len: self.mass,
            });
        }
        let mut cum = 0;
        for (&k, &c) in &self.counts {
            cum += c;
            if cum >= i {
                return Ok(k);
            }
        }
        unreachable!("mass cache out of sync with counts")
    }

    pub fn ranked_view(&self) -> RankedView {
        let mut cum = 0;
        let cumulative = self
            .counts
            .iter()
            .map(|(&k, &c)| {
                cum += c;
                (k, cum)
            })
            .collect();
        RankedView { cumulative }
    }

    /// Draws level `k` with probability `k μ(k) / ⟨μ, χ⟩`.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u32> {
        if self.first_moment == 0 {
            return Err(Error::Sampling(
                "size-biased draw from a measure with zero first moment".into(),
            ));
        }
        let target = rng.random_range(0..self.first_moment);
        let mut cum = 0;
        for (&k, &c) in &self.counts {
            cum += u64::from(k) * c;
            if target < cum {
                return Ok(k);
            }
        }
        unreachable!("first-moment cache out of sync with counts")
    }

    /// Applies all `(level, delta)` edits or none of them.
    ///
    /// Fails with [`Error::StateCorruption`] if any multiplicity would become
    /// negative; the measure is left untouched in that case.
    pub fn mutate(&mut self, edits: &[(u32, i64)]) -> Result<()> {
        let mut net: BTreeMap<u32, i64> = BTreeMap::new();
        for &(k, d) in edits {
            *net.entry(k).or_insert(0) += d;
        }
        for (&k, &d) in &net {
            let cur = self.get(k) as i64;
            if cur + d < 0 {
                return Err(Error::StateCorruption(format!(
                    "level {k} has multiplicity {cur}, cannot apply {d:+}"
                )));
            }
        }
        for (k, d) in net {
            if d == 0 {
                continue;
            }
            let new = (self.get(k) as i64 + d) as u64;
            if new == 0 {
                self.counts.remove(&k);
            } else {
                self.counts.insert(k, new);
            }
            if d > 0 {
                self.mass += d as u64;
                self.first_moment += u64::from(k) * d as u64;
            } else {
                self.mass -= (-d) as u64;
                self.first_moment -= u64::from(k) * (-d) as u64;
            }
        }
        debug_assert_eq!(self.first_moment, self.recompute_first_moment());
        debug_assert_eq!(self.mass, self.counts.values().sum::<u64>());
        Ok(())
    }

    fn recompute_first_moment(&self) -> u64 {
        self.counts.iter().map(|(&k, &c)| u64::from(k) * c).sum()
    }

    /// `self(k) ≤ other(k)` for every level.
    pub fn is_dominated_by(&self, other: &CountMeasure) -> bool {
        self.counts.iter().all(|(&k, &c)| c <= other.get(k))
    }

    pub fn add(&self, other: &CountMeasure) -> CountMeasure {
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_atoms(k, c);
        }
        out
    }

    /// Real-valued copy scaled by `factor`, supported on `0..=kmax`.
    pub fn to_real(&self, factor: f64, kmax: u32) -> Result<RealMeasure> {
        let mut mu = RealMeasure::zeros(kmax);
        for (k, c) in self.iter() {
            if k > kmax {
                return Err(Error::Config(format!("level {k} exceeds truncation level {kmax}")));
            }
            mu.weights[k as usize] = c as f64 * factor;
        }
        Ok(mu)
    }
}

impl Moments for CountMeasure {
    fn moment(&self, p: u32) -> Result<f64> {
        check_order(p)?;
        Ok(self
            .counts
            .iter()
            .map(|(&k, &c)| f64::from(k).powi(p as i32) * c as f64)
            .sum())
    }
}

/// Cumulative multiplicities of a [`CountMeasure`]; answers `γ_i` queries in
/// `O(log #levels)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedView {
    cumulative: Vec<(u32, u64)>,
}

impl RankedView {
    pub fn len(&self) -> u64 {
        self.cumulative.last().map_or(0, |&(_, c)| c)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gamma(&self, i: u64) -> Result<u32> {
        if i == 0 || i > self.len() {
            return Err(Error::Range {
                index: i,
                len: self.len(),
            });
        }
        let pos = self.cumulative.partition_point(|&(_, c)| c < i);
        Ok(self.cumulative[pos].0)
    }

    /// `γ_1, …, γ_mass` in order.
    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        let mut prev = 0;
        self.cumulative.iter().flat_map(move |&(k, c)| {
            let n = c - prev;
            prev = c;
            std::iter::repeat_n(k, n as usize)
        })
    }
}

/// Nonnegative real-valued measure on `0..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMeasure {
    weights: Vec<f64>,
}

impl RealMeasure {
    pub fn zeros(kmax: u32) -> Self {
        Self {
            weights: vec![0.0; kmax as usize + 1],
        }
    }

    /// Weights indexed by level; the truncation level is `weights.len() - 1`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("a measure needs at least level 0".into()));
        }
        if let Some((k, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Config(format!(
                "weight {w} at level {k} is not a nonnegative number"
            )));
        }
        Ok(Self { weights })
    }

    pub fn kmax(&self) -> u32 {
        (self.weights.len() - 1) as u32
    }

    pub fn get(&self, k: u32) -> f64 {
        self.weights.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn first_moment(&self) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| k as f64 * w).sum()
    }

    /// Largest level carrying positive weight.
    pub fn max_support(&self) -> Option<u32> {
        self.weights.iter().rposition(|&w| w > 0.0).map(|k| k as u32)
    }

    pub fn scaled(&self, factor: f64) -> Result<RealMeasure> {
        RealMeasure::from_weights(self.weights.iter().map(|w| w * factor).collect())
    }

    /// Copy with truncation level `kmax`; weight above `kmax` is dropped.
    pub fn with_kmax(&self, kmax: u32) -> RealMeasure {
        let mut weights = self.weights.clone();
        weights.resize(kmax as usize + 1, 0.0);
        RealMeasure { weights }
    }

    /// `⟨μ, 1 + χ^5⟩`.
    pub fn moment_bound(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| (1.0 + (k as f64).powi(5)) * w)
            .sum()
    }

    /// Membership in the set of measures with `⟨μ, 1 + χ^5⟩ ≤ a`.
    pub fn within_moment_bound(&self, a: f64) -> bool {
        self.moment_bound() <= a
    }
}

impl Moments for RealMeasure {
    fn moment(&self, p: u32) -> Result<f64> {
        check_order(p)?;
        Ok(self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| (k as f64).powi(p as i32) * w)
            .sum())
    }
}

/// `Σ_k |μ(k) − ν(k)|`.
///
/// This is the L1 sum, twice the halved total-variation convention.
pub fn tv_distance(mu: &RealMeasure, nu: &RealMeasure) -> f64 {
    let len = mu.weights.len().max(nu.weights.len());
    (0..len as u32).map(|k| (mu.get(k) - nu.get(k)).abs()).sum()
}

// JSON: a measure is an object keyed by decimal level. RealMeasure carries an
// extra "kmax" key.

impl Serialize for CountMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.counts.len()))?;
        for (k, c) in &self.counts {
            map.serialize_entry(&k.to_string(), c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CountMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: BTreeMap<String, u64> = BTreeMap::deserialize(deserializer)?;
        let mut mu = CountMeasure::new();
        for (key, c) in raw {
            let k: u32 = key
                .parse()
                .map_err(|_| de::Error::custom(format!("invalid level {key:?}")))?;
            mu.add_atoms(k, c);
        }
        Ok(mu)
    }
}

impl Serialize for RealMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let nonzero: Vec<_> = self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).collect();
        let mut map = serializer.serialize_map(Some(nonzero.len() + 1))?;
        map.serialize_entry("kmax", &self.kmax())?;
        for (k, w) in nonzero {
            map.serialize_entry(&k.to_string(), w)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for RealMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct RealVisitor;

        impl<'de> Visitor<'de> for RealVisitor {
            type Value = RealMeasure;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of level: weight entries with an optional kmax, or an array of weights")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<RealMeasure, A::Error> {
                let mut weights = Vec::new();
                while let Some(w) = seq.next_element::<f64>()? {
                    weights.push(w);
                }
                RealMeasure::from_weights(weights).map_err(de::Error::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<RealMeasure, A::Error> {
                let mut kmax: Option<u32> = None;
                let mut entries = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    if key == "kmax" {
                        kmax = Some(map.next_value()?);
                    } else {
                        let k: u32 = key
                            .parse()
                            .map_err(|_| de::Error::custom(format!("invalid level {key:?}")))?;
                        entries.push((k, map.next_value::<f64>()?));
                    }
                }
                let top = entries.iter().map(|&(k, _)| k).max().unwrap_or(0);
                let kmax = kmax.unwrap_or(top);
                if top > kmax {
                    return Err(de::Error::custom(format!("level {top} exceeds kmax {kmax}")));
                }
                let mut weights = vec![0.0; kmax as usize + 1];
                for (k, w) in entries {
                    weights[k as usize] += w;
                }
                RealMeasure::from_weights(weights).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_any(RealVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn example() -> CountMeasure {
        CountMeasure::from_counts([(1, 2), (5, 3), (7, 1)])
    }

    #[test]
    fn moments_of_example_measure() {
        let mu = example();
        assert_eq!(mu.moment(0).unwrap(), 6.0);
        assert_eq!(mu.moment(1).unwrap(), 24.0);
        assert_eq!(mu.first_moment(), 24);
        assert_eq!(CountMeasure::new().moment(3).unwrap(), 0.0);
        assert!(matches!(mu.moment(6), Err(Error::MomentOrder(6))));
    }

    #[test]
    fn gamma_ranks_atoms_by_level() {
        let mu = example();
        let expected = [1, 1, 5, 5, 5, 7];
        for (i, &k) in expected.iter().enumerate() {
            assert_eq!(mu.gamma(i as u64 + 1).unwrap(), k);
            assert_eq!(mu.ranked_view().gamma(i as u64 + 1).unwrap(), k);
        }
        assert!(matches!(mu.gamma(0), Err(Error::Range { .. })));
        assert!(matches!(mu.gamma(7), Err(Error::Range { .. })));
        assert_eq!(CountMeasure::from_levels([0]).gamma(1).unwrap(), 0);
    }

    #[test]
    fn size_biased_sampling_edge_cases() {
        let mut rng = rng_from_seed(3);
        let single = CountMeasure::from_levels([3]);
        let with_zero = CountMeasure::from_levels([0, 2]);
        for _ in 0..1000 {
            assert_eq!(single.sample_size_biased(&mut rng).unwrap(), 3);
            assert_eq!(with_zero.sample_size_biased(&mut rng).unwrap(), 2);
        }
        let zeros = CountMeasure::from_levels([0, 0]);
        assert!(matches!(zeros.sample_size_biased(&mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn size_biased_frequencies_match_weights() {
        let mu = example();
        let mut rng = rng_from_seed(11);
        let m = 200_000;
        let hits = (0..m).filter(|_| mu.sample_size_biased(&mut rng).unwrap() == 5).count();
        let p = 15.0 / 24.0;
        let sd = (p * (1.0 - p) / m as f64).sqrt();
        assert!((hits as f64 / m as f64 - p).abs() < 5.0 * sd);
    }

    #[test]
    fn mutate_examples() {
        let mut mu = CountMeasure::from_levels([5]);
        mu.mutate(&[(5, -1), (4, 1)]).unwrap();
        assert_eq!(mu, CountMeasure::from_levels([4]));
        assert_eq!(mu.first_moment(), 4);

        let mut two = CountMeasure::from_counts([(1, 2)]);
        assert!(matches!(two.mutate(&[(1, -3)]), Err(Error::StateCorruption(_))));
        assert_eq!(two, CountMeasure::from_counts([(1, 2)]));

        let mut noop = CountMeasure::from_levels([2]);
        noop.mutate(&[]).unwrap();
        assert_eq!(noop, CountMeasure::from_levels([2]));
    }

    #[test]
    fn mutate_is_atomic_on_failure() {
        let mut mu = CountMeasure::from_counts([(2, 1), (3, 1)]);
        let before = mu.clone();
        assert!(mu.mutate(&[(2, -1), (3, -2)]).is_err());
        assert_eq!(mu, before);
    }

    #[test]
    fn tv_distance_examples() {
        let d1 = RealMeasure::from_weights(vec![0.0, 1.0]).unwrap();
        let d2 = RealMeasure::from_weights(vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(tv_distance(&d1, &d2), 2.0);
        assert_eq!(tv_distance(&d1, &d1), 0.0);
        let two = RealMeasure::from_weights(vec![0.0, 2.0]).unwrap();
        assert_eq!(tv_distance(&two, &d1), 1.0);
    }

    #[test]
    fn real_measure_rejects_negative_weights() {
        assert!(RealMeasure::from_weights(vec![0.5, -0.1]).is_err());
        assert!(RealMeasure::from_weights(vec![f64::NAN]).is_err());
        assert!(RealMeasure::from_weights(vec![]).is_err());
    }

    #[test]
    fn moment_bound_membership() {
        let mu = RealMeasure::from_weights(vec![0.0, 0.5, 0.5]).unwrap();
        // 0.5 * (1 + 1) + 0.5 * (1 + 32)
        assert_eq!(mu.moment_bound(), 17.5);
        assert!(mu.within_moment_bound(17.5));
        assert!(!mu.within_moment_bound(17.0));
    }

    #[test]
    fn json_shapes() {
        let mu = example();
        assert_eq!(serde_json::to_string(&mu).unwrap(), r#"{"1":2,"5":3,"7":1}"#);
        let real = RealMeasure::from_weights(vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        let json = serde_json::to_string(&real).unwrap();
        assert_eq!(json, r#"{"kmax":3,"1":0.5,"3":0.5}"#);
        let back: RealMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(back, real);
        let padded: RealMeasure = serde_json::from_str(r#"{"kmax":5,"2":1.0}"#).unwrap();
        assert_eq!(padded.kmax(), 5);
        assert!(serde_json::from_str::<RealMeasure>(r#"{"kmax":1,"2":1.0}"#).is_err());
        let dense: RealMeasure = serde_json::from_str("[0, 0.5, 0.25]").unwrap();
        assert_eq!(dense.weights(), &[0.0, 0.5, 0.25]);
    }

    fn count_measure() -> impl Strategy<Value = CountMeasure> {
        prop::collection::vec((0u32..20, 1u64..6), 0..8).prop_map(CountMeasure::from_counts)
    }

    fn real_measure() -> impl Strategy<Value = RealMeasure> {
        prop::collection::vec(0.0f64..3.0, 1..10).prop_map(|w| RealMeasure::from_weights(w).unwrap())
    }

    proptest! {
        #[test]
        fn ranked_atoms_reproduce_the_measure(mu in count_measure()) {
            let view = mu.ranked_view();
            let rebuilt = CountMeasure::from_levels(view.levels());
            prop_assert_eq!(&rebuilt, &mu);
            let mut prev = 0;
            for i in 1..=mu.mass() {
                let g = view.gamma(i).unwrap();
                prop_assert!(g >= prev);
                prop_assert!(mu.get(g) >= 1);
                prop_assert_eq!(g, mu.gamma(i).unwrap());
                prev = g;
            }
        }

        #[test]
        fn moments_are_additive(a in count_measure(), b in count_measure(), p in 0u32..=5) {
            let sum = a.add(&b);
            let lhs = sum.moment(p).unwrap();
            let rhs = a.moment(p).unwrap() + b.moment(p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
            prop_assert_eq!(sum.first_moment(), a.first_moment() + b.first_moment());
        }

        #[test]
        fn tv_distance_is_a_metric(a in real_measure(), b in real_measure(), c in real_measure()) {
            let ab = tv_distance(&a, &b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, tv_distance(&b, &a));
            prop_assert_eq!(tv_distance(&a, &a), 0.0);
            prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
            if ab == 0.0 {
                prop_assert!(a.weights().iter().zip(b.weights()).all(|(x, y)| x == y));
            }
        }

        #[test]
        fn mutation_keeps_first_moment_cache(mu in count_measure(), edits in prop::collection::vec((0u32..20, -3i64..4), 0..6)) {
            let mut m = mu.clone();
            if m.mutate(&edits).is_ok() {
                let direct: u64 = m.iter().map(|(k, c)| u64::from(k) * c).sum();
                prop_assert_eq!(m.first_moment(), direct);
                prop_assert!(m.iter().all(|(_, c)| c > 0));
            } else {
                prop_assert_eq!(m, mu);
            }
        }
    }
}
