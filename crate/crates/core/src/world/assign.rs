//! Fixed-count random assignment of arms to markets and schools.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::rng::Seeder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvertisedCounts {
    pub p4p: usize,
    pub fw: usize,
    pub mixed: usize,
}

impl Default for AdvertisedCounts {
    fn default() -> Self {
        Self { p4p: 7, fw: 7, mixed: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperiencedCounts {
    pub p4p: usize,
    pub fw: usize,
}

impl Default for ExperiencedCounts {
    fn default() -> Self {
        Self { p4p: 85, fw: 79 }
    }
}

/// Arm labels as small integers for the permutation engine.
pub fn arm_code(a: Arm) -> u8 {
    match a {
        Arm::Fw => 0,
        Arm::P4p => 1,
        Arm::Mixed => 2,
    }
}

pub fn arm_from_code(c: u8) -> Arm {
    match c {
        0 => Arm::Fw,
        1 => Arm::P4p,
        _ => Arm::Mixed,
    }
}

/// Uniform assignment of exactly the configured arm counts to `markets` units.
pub fn assign_advertised(markets: usize, counts: AdvertisedCounts, seed: u64) -> Result<Vec<Arm>> {
    let total = counts.p4p + counts.fw + counts.mixed;
    if total != markets {
        return Err(Error::CountMismatch {
            units: markets,
            counts: vec![counts.p4p, counts.fw, counts.mixed],
        });
    }
    let mut labels: Vec<Arm> = std::iter::repeat_n(Arm::P4p, counts.p4p)
        .chain(std::iter::repeat_n(Arm::Fw, counts.fw))
        .chain(std::iter::repeat_n(Arm::Mixed, counts.mixed))
        .collect();
    labels.shuffle(&mut Seeder::new(seed).stream("assign-advertised"));
    Ok(labels)
}

/// Uniform assignment of exactly `counts` P4P/FW labels to `schools` units.
/// With `strata`, the P4P total is apportioned to strata by largest remainder
/// and shuffled within each stratum.
pub fn assign_experienced(
    schools: usize,
    counts: ExperiencedCounts,
    strata: Option<&[usize]>,
    seed: u64,
) -> Result<Vec<Arm>> {
    if counts.p4p + counts.fw != schools {
        return Err(Error::CountMismatch {
            units: schools,
            counts: vec![counts.p4p, counts.fw],
        });
    }
    let mut rng = Seeder::new(seed).stream("assign-experienced");
    let Some(strata) = strata else {
        let mut labels: Vec<Arm> = std::iter::repeat_n(Arm::P4p, counts.p4p)
            .chain(std::iter::repeat_n(Arm::Fw, counts.fw))
            .collect();
        labels.shuffle(&mut rng);
        return Ok(labels);
    };
    if strata.len() != schools {
        return Err(Error::Invalid("strata length differs from school count".into()));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in strata.iter().enumerate() {
        members.entry(*s).or_default().push(i);
    }
    let share = counts.p4p as f64 / schools as f64;
    let mut quota: Vec<(usize, usize, f64)> = members
        .iter()
        .map(|(s, m)| {
            let exact = share * m.len() as f64;
            (*s, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut left = counts.p4p - quota.iter().map(|q| q.1).sum::<usize>();
    let mut order: Vec<usize> = (0..quota.len()).collect();
    order.sort_by(|&a, &b| quota[b].2.total_cmp(&quota[a].2).then(a.cmp(&b)));
    for &k in &order {
        if left == 0 {
            break;
        }
        quota[k].1 += 1;
        left -= 1;
    }
    let mut out = vec![Arm::Fw; schools];
    for (s, q, _) in quota {
        let mut m = members[&s].clone();
        m.shuffle(&mut rng);
        for &i in &m[..q] {
            out[i] = Arm::P4p;
        }
    }
    Ok(out)
}
