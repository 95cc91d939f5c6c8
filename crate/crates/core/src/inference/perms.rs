//! Feasible re-assignments of the experiment's treatment labels.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seeder;

/// Enumerate exhaustively when the number of distinct assignments is at most this.
pub const EXHAUSTIVE_CAP: f64 = 1e6;
pub const DEFAULT_DRAWS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "ADVERTISED")]
    Advertised,
    #[serde(rename = "EXPERIENCED")]
    Experienced,
    #[serde(rename = "JOINT")]
    Joint,
}

/// A set of label vectors, all sharing the observed vector's label counts
/// (within each stratum when stratified). Member 0 is the observed assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSet {
    pub dimension: Dimension,
    pub members: Vec<Vec<u8>>,
    pub exhaustive: bool,
    pub seed: u64,
    /// Stratum of each unit, when labels are only shuffled within strata.
    pub strata: Option<Vec<usize>>,
}

/// Number of distinct arrangements of a label multiset.
pub fn multinomial_count(labels: &[u8]) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let ln_fact = |n: usize| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    let ln = ln_fact(labels.len()) - counts.values().map(|&c| ln_fact(c)).sum::<f64>();
    ln.exp().round()
}

fn stratified_count(labels: &[u8], strata: &[usize]) -> f64 {
    let mut by: std::collections::BTreeMap<usize, Vec<u8>> = Default::default();
    for (l, s) in labels.iter().zip(strata) {
        by.entry(*s).or_default().push(*l);
    }
    by.values().map(|v| multinomial_count(v)).product()
}

/// Lexicographic successor of a label vector; false when `v` was the last.
pub fn next_permutation(v: &mut [u8]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl PermutationSet {
    /// Build the set for one design dimension. Exhaustive enumeration is used
    /// when the feasible count is at most [`EXHAUSTIVE_CAP`]; otherwise `draws`
    /// uniform re-assignments are sampled (duplicates of the observed one allowed).
    pub fn new(dimension: Dimension, observed: &[u8], draws: usize, seed: u64) -> Result<Self> {
        Self::build(dimension, observed, None, draws, seed)
    }

    pub fn stratified(
        dimension: Dimension,
        observed: &[u8],
        strata: &[usize],
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if strata.len() != observed.len() {
            return Err(Error::Invalid("strata length differs from label length".into()));
        }
        Self::build(dimension, observed, Some(strata), draws, seed)
    }

    fn build(
        dimension: Dimension,
        observed: &[u8],
        strata: Option<&[usize]>,
        draws: usize,
        seed: u64,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::Invalid("cannot permute an empty assignment".into()));
        }
        let feasible = match strata {
            None => multinomial_count(observed),
            Some(s) => stratified_count(observed, s),
        };
        let mut members = vec![observed.to_vec()];
        let exhaustive = feasible <= EXHAUSTIVE_CAP && strata.is_none();
        if exhaustive {
            let mut v = observed.to_vec();
            v.sort_unstable();
            loop {
                if v != observed {
                    members.push(v.clone());
                }
                if !next_permutation(&mut v) {
                    break;
                }
            }
        } else {
            let seeder = Seeder::new(seed);
            let groups: Vec<Vec<usize>> = match strata {
                None => vec![(0..observed.len()).collect()],
                Some(s) => {
                    let mut by: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
                    for (i, st) in s.iter().enumerate() {
                        by.entry(*st).or_default().push(i);
                    }
                    by.into_values().collect()
                }
            };
            for m in 0..draws {
                let mut rng = seeder.indexed("permutation", m as u64);
                let mut v = observed.to_vec();
                for g in &groups {
                    let mut vals: Vec<u8> = g.iter().map(|&i| observed[i]).collect();
                    vals.shuffle(&mut rng);
                    for (&i, val) in g.iter().zip(vals) {
                        v[i] = val;
                    }
                }
                members.push(v);
            }
        }
        Ok(Self {
            dimension,
            members,
            exhaustive,
            seed,
            strata: strata.map(|s| s.to_vec()),
        })
    }

    /// Number of non-observed members.
    pub fn draws(&self) -> usize {
        self.members.len() - 1
    }

    pub fn observed(&self) -> &[u8] {
        &self.members[0]
    }

    /// Every member has the observed label counts (per stratum if stratified).
    pub fn respects_design(&self) -> bool {
        let key = |v: &[u8]| {
            let mut c: std::collections::BTreeMap<(usize, u8), usize> = Default::default();
            for (i, l) in v.iter().enumerate() {
                let s = self.strata.as_ref().map(|s| s[i]).unwrap_or(0);
                *c.entry((s, *l)).or_insert(0) += 1;
            }
            c
        };
        let k0 = key(&self.members[0]);
        self.members.iter().all(|m| key(m) == k0)
    }
}

/// Pairs of (advertised, experienced) members for joint inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSet {
    pub advertised: PermutationSet,
    pub experienced: PermutationSet,
    /// Index pairs into the two member lists; pair 0 is (0, 0).
    pub pairs: Vec<(usize, usize)>,
    pub exhaustive: bool,
}

impl JointSet {
    pub fn new(advertised: PermutationSet, experienced: PermutationSet, draws: usize, seed: u64) -> Self {
        let (na, ne) = (advertised.members.len(), experienced.members.len());
        let exhaustive = advertised.exhaustive
            && experienced.exhaustive
            && (na as f64) * (ne as f64) <= EXHAUSTIVE_CAP;
        let mut pairs = vec![(0, 0)];
        if exhaustive {
            for a in 0..na {
                for e in 0..ne {
                    if (a, e) != (0, 0) {
                        pairs.push((a, e));
                    }
                }
            }
        } else {
            use rand::Rng;
            // Exhaustive lists contain the observed member exactly once, so it
            // is eligible; sampled lists already hold their own uniform draws.
            let pick = |rng: &mut crate::rng::StreamRng, set: &PermutationSet| {
                let n = set.members.len();
                if set.exhaustive || n == 1 {
                    rng.random_range(0..n)
                } else {
                    rng.random_range(1..n)
                }
            };
            let seeder = Seeder::new(seed);
            for m in 0..draws {
                let mut rng = seeder.indexed("joint-permutation", m as u64);
                let a = pick(&mut rng, &advertised);
                let e = pick(&mut rng, &experienced);
                pairs.push((a, e));
            }
        }
        Self {
            advertised,
            experienced,
            pairs,
            exhaustive,
        }
    }

    pub fn draws(&self) -> usize {
        self.pairs.len() - 1
    }
}
