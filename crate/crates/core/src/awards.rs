//! Composite teacher metric (presence, preparation, pedagogy, learning) and
//! the within-district top-share award.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Arm, Panel};
use crate::error::{Error, Result};
use crate::metric::TeacherLearningScore;
use crate::stats::average_ranks;
use crate::theory::ContractMenu;

pub const DEFAULT_SHARE: f64 = 0.2;

/// Spot-check inputs averaged over a teacher's visits in one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputMeasures {
    pub teacher: usize,
    pub round: u8,
    pub presence: f64,
    pub preparation: f64,
    pub pedagogy: f64,
}

pub fn input_measures(panel: &Panel, round: u8) -> Vec<InputMeasures> {
    let mut acc: BTreeMap<usize, (f64, f64, f64, f64)> = BTreeMap::new();
    for s in panel.spotchecks.iter().filter(|s| s.round == round) {
        let e = acc.entry(s.teacher).or_insert((0.0, 0.0, 0.0, 0.0));
        e.0 += 1.0;
        e.1 += s.presence;
        e.2 += s.lesson_plan;
        e.3 += s.pedagogy.iter().sum::<f64>() / 4.0;
    }
    acc.into_iter()
        .map(|(teacher, (n, p, l, g))| InputMeasures {
            teacher,
            round,
            presence: p / n,
            preparation: l / n,
            pedagogy: g / n,
        })
        .collect()
}

/// Percentile rank with 1 = highest value: `1 - (r - 1)/(n - 1)` on average
/// descending ranks; a lone value gets 1.
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![1.0];
    }
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    average_ranks(&neg)
        .into_iter()
        .map(|r| 1.0 - (r - 1.0) / (n - 1) as f64)
        .collect()
}

/// One contestant's raw components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contestant {
    pub teacher: usize,
    pub district: usize,
    pub round: u8,
    pub learning: Option<f64>,
    pub inputs: Option<InputMeasures>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeScore {
    pub teacher: usize,
    pub district: usize,
    pub round: u8,
    pub learning: f64,
    pub presence: f64,
    pub preparation: f64,
    pub pedagogy: f64,
    pub learning_pct: f64,
    pub presence_pct: f64,
    pub preparation_pct: f64,
    pub pedagogy_pct: f64,
    pub inputs_pct: f64,
    pub summary: f64,
    pub award: bool,
    pub payout_rwf: f64,
}

/// Composite scores per district-round. Contestants lacking a component are
/// excluded and returned as `MissingInput` errors alongside the scores.
pub fn composite(contestants: &[Contestant]) -> (Vec<CompositeScore>, Vec<Error>) {
    let mut excluded = Vec::new();
    let mut pools: BTreeMap<(usize, u8), Vec<(usize, f64, InputMeasures)>> = BTreeMap::new();
    for c in contestants {
        match (c.learning, c.inputs) {
            (Some(l), Some(i)) => pools.entry((c.district, c.round)).or_default().push((c.teacher, l, i)),
            _ => excluded.push(Error::MissingInput(c.teacher)),
        }
    }
    let mut out = Vec::new();
    for ((district, round), mut pool) in pools {
        pool.sort_by_key(|p| p.0);
        let col = |f: &dyn Fn(&(usize, f64, InputMeasures)) -> f64| -> Vec<f64> {
            percentile_ranks(&pool.iter().map(f).collect::<Vec<_>>())
        };
        let lp = col(&|p| p.1);
        let pp = col(&|p| p.2.presence);
        let rp = col(&|p| p.2.preparation);
        let gp = col(&|p| p.2.pedagogy);
        for (k, (teacher, learning, i)) in pool.iter().enumerate() {
            let inputs_pct = (pp[k] + rp[k] + gp[k]) / 3.0;
            out.push(CompositeScore {
                teacher: *teacher,
                district,
                round,
                learning: *learning,
                presence: i.presence,
                preparation: i.preparation,
                pedagogy: i.pedagogy,
                learning_pct: lp[k],
                presence_pct: pp[k],
                preparation_pct: rp[k],
                pedagogy_pct: gp[k],
                inputs_pct,
                summary: 0.5 * lp[k] + 0.5 * inputs_pct,
                award: false,
                payout_rwf: 0.0,
            });
        }
    }
    (out, excluded)
}

/// Number of awards in a pool of `n`.
pub fn award_count(n: usize, share: f64) -> usize {
    // guard against 0.2 * 10 = 2.0000000000000004
    ((n as f64 * share) - 1e-9).ceil().max(if n > 0 { 1.0 } else { 0.0 }) as usize
}

/// Flag the top `share` of each district-round by summary and set winners'
/// payout. Ties at the cutoff go to the higher learning percentile, then higher
/// presence, then the lower teacher id. Every district in `districts` must
/// have at least one contestant.
pub fn select_awards(scores: &mut [CompositeScore], share: f64, districts: &[usize], menu: &ContractMenu) -> Result<()> {
    let mut pools: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for (k, s) in scores.iter().enumerate() {
        pools.entry((s.district, s.round)).or_default().push(k);
    }
    for d in districts {
        if !pools.keys().any(|(pd, _)| pd == d) {
            return Err(Error::EmptyDistrict(*d));
        }
    }
    for idx in pools.values() {
        let mut order = idx.clone();
        order.sort_by(|&a, &b| {
            let (x, y) = (&scores[a], &scores[b]);
            y.summary
                .total_cmp(&x.summary)
                .then(y.learning_pct.total_cmp(&x.learning_pct))
                .then(y.presence.total_cmp(&x.presence))
                .then(x.teacher.cmp(&y.teacher))
        });
        let winners = award_count(order.len(), share);
        for (pos, &k) in order.iter().enumerate() {
            scores[k].award = pos < winners;
            scores[k].payout_rwf = if pos < winners { menu.payout_p4p_rwf } else { 0.0 };
        }
    }
    Ok(())
}

/// One audit line per teacher-round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwardRow {
    pub teacher: usize,
    pub district: usize,
    pub round: u8,
    pub arm: Arm,
    pub recruit: bool,
    pub score: Option<CompositeScore>,
    pub award: bool,
    /// Contract payout (P4P award or flat FW amount) plus any retention bonus.
    pub payout_rwf: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AwardLedger {
    pub rows: Vec<AwardRow>,
    /// Teachers left out of the contest, with the reason.
    pub excluded: Vec<(usize, String)>,
}

/// Contest among P4P-school teachers active in `round`, flat payout for
/// FW-school teachers, and the end-of-year retention bonus for recruits still
/// in post.
pub fn award_ledger(
    panel: &Panel,
    round: u8,
    learning: &[TeacherLearningScore],
    share: f64,
    menu: &ContractMenu,
) -> Result<AwardLedger> {
    let learn: HashMap<usize, f64> = learning.iter().filter(|l| l.round == round).map(|l| (l.teacher, l.score)).collect();
    let inputs: HashMap<usize, InputMeasures> = input_measures(panel, round).into_iter().map(|i| (i.teacher, i)).collect();
    let active: Vec<_> = panel
        .teachers
        .iter()
        .filter(|t| t.active[round as usize - 1])
        .collect();
    let contestants: Vec<Contestant> = active
        .iter()
        .filter(|t| panel.schools[t.school].arm == Arm::P4p)
        .map(|t| Contestant {
            teacher: t.id,
            district: panel.schools[t.school].district,
            round,
            learning: learn.get(&t.id).copied(),
            inputs: inputs.get(&t.id).copied(),
        })
        .collect();
    let (mut scores, missing) = composite(&contestants);
    let mut districts: Vec<usize> = contestants.iter().map(|c| c.district).collect();
    districts.sort_unstable();
    districts.dedup();
    districts.retain(|d| scores.iter().any(|s| s.district == *d));
    select_awards(&mut scores, share, &districts, menu)?;
    let by_teacher: HashMap<usize, CompositeScore> = scores.into_iter().map(|s| (s.teacher, s)).collect();
    let rows = active
        .iter()
        .map(|t| {
            let arm = panel.schools[t.school].arm;
            let score = by_teacher.get(&t.id).cloned();
            let award = score.as_ref().is_some_and(|s| s.award);
            let contract = match arm {
                Arm::Fw => menu.payout_fw_rwf,
                _ => score.as_ref().map_or(0.0, |s| s.payout_rwf),
            };
            let kept = if round == 1 { t.retained } else { true };
            let bonus = if t.recruit && kept { menu.retention_bonus_rwf } else { 0.0 };
            AwardRow {
                teacher: t.id,
                district: panel.schools[t.school].district,
                round,
                arm,
                recruit: t.recruit,
                score,
                award,
                payout_rwf: contract + bonus,
            }
        })
        .collect();
    Ok(AwardLedger {
        rows,
        excluded: missing
            .into_iter()
            .map(|e| match e {
                Error::MissingInput(t) => (t, e.to_string()),
                other => (usize::MAX, other.to_string()),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn contestant(teacher: usize, district: usize, l: f64, p: f64, r: f64, g: f64) -> Contestant {
        Contestant {
            teacher,
            district,
            round: 1,
            learning: Some(l),
            inputs: Some(InputMeasures {
                teacher,
                round: 1,
                presence: p,
                preparation: r,
                pedagogy: g,
            }),
        }
    }

    fn menu() -> ContractMenu {
        ContractMenu::default()
    }

    #[test]
    fn median_teacher_scores_one_half_and_best_scores_one() {
        let cs: Vec<Contestant> = (0..5)
            .map(|k| contestant(k, 0, k as f64, k as f64 * 0.1, k as f64, k as f64 * 0.5))
            .collect();
        let (s, missing) = composite(&cs);
        assert!(missing.is_empty());
        assert_eq!(s[2].summary, 0.5);
        assert_eq!(s[4].summary, 1.0);
        assert_eq!(s[0].summary, 0.0);
    }

    #[test]
    fn flat_recomputation_on_ten_teachers() {
        let raw: Vec<[f64; 4]> = (0..10)
            .map(|k| {
                let k = k as f64;
                [(k * 7.3) % 3.1, (k * 1.7) % 1.0, ((k * 3.0) % 2.0).floor(), (k * 0.77) % 3.0]
            })
            .collect();
        let cs: Vec<Contestant> = raw.iter().enumerate().map(|(i, v)| contestant(i, 3, v[0], v[1], v[2], v[3])).collect();
        let (s, _) = composite(&cs);
        // hand computation: percentile = share of others strictly below plus half the ties
        let pct = |c: usize, i: usize| -> f64 {
            let below = raw.iter().filter(|v| v[c] < raw[i][c]).count() as f64;
            let ties = raw.iter().filter(|v| v[c] == raw[i][c]).count() as f64 - 1.0;
            (below + 0.5 * ties) / 9.0
        };
        for i in 0..10 {
            let inputs = (pct(1, i) + pct(2, i) + pct(3, i)) / 3.0;
            let want = 0.5 * pct(0, i) + 0.5 * inputs;
            assert!((s[i].summary - want).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn missing_component_excludes_teacher() {
        let mut cs = vec![contestant(0, 0, 1.0, 1.0, 1.0, 1.0), contestant(1, 0, 0.0, 0.0, 0.0, 0.0)];
        cs[1].inputs = None;
        let (s, missing) = composite(&cs);
        assert_eq!(s.len(), 1);
        assert!(matches!(missing[0], Error::MissingInput(1)));
    }

    #[test]
    fn ten_teachers_two_awards_and_payout() {
        let cs: Vec<Contestant> = (0..10).map(|k| contestant(k, 0, k as f64, 0.5, 1.0, 2.0)).collect();
        let (mut s, _) = composite(&cs);
        select_awards(&mut s, 0.2, &[0], &menu()).unwrap();
        let winners: Vec<usize> = s.iter().filter(|x| x.award).map(|x| x.teacher).collect();
        assert_eq!(winners, vec![8, 9]);
        let total: f64 = s.iter().map(|x| x.payout_rwf).sum();
        assert_eq!(total, 200_000.0);
        assert!((menu().payout_p4p_rwf / 734.0 - 136.0).abs() < 0.5);
    }

    #[test]
    fn empty_district_is_an_error() {
        let (mut s, _) = composite(&[contestant(0, 0, 1.0, 1.0, 1.0, 1.0)]);
        assert!(matches!(select_awards(&mut s, 0.2, &[0, 1], &menu()), Err(Error::EmptyDistrict(1))));
    }

    #[test]
    fn every_tie_placement_on_five_keeps_one_award() {
        // every pattern of summary ties over five teachers
        for mask in 0u32..(1 << 5) {
            let cs: Vec<Contestant> = (0..5)
                .map(|k| {
                    let v = if mask >> k & 1 == 1 { 1.0 } else { k as f64 * 0.1 };
                    contestant(k, 0, v, v, v, v)
                })
                .collect();
            let (mut s, _) = composite(&cs);
            select_awards(&mut s, 0.2, &[0], &menu()).unwrap();
            assert_eq!(s.iter().filter(|x| x.award).count(), 1, "mask {mask:b}");
            let w = s.iter().find(|x| x.award).unwrap();
            assert!(s.iter().all(|x| x.summary <= w.summary));
            // among tied top summaries, lowest id wins when everything else ties
            let tied_min = s.iter().filter(|x| x.summary == w.summary).map(|x| x.teacher).min().unwrap();
            assert_eq!(w.teacher, tied_min);
        }
    }

    proptest! {
        #[test]
        fn award_count_is_ceiling(n in 1usize..200) {
            let cs: Vec<Contestant> = (0..n).map(|k| contestant(k, 0, (k * 37 % 11) as f64, 0.5, 1.0, 1.0)).collect();
            let (mut s, _) = composite(&cs);
            select_awards(&mut s, 0.2, &[0], &menu()).unwrap();
            let want = (n as f64 / 5.0).ceil() as usize;
            prop_assert_eq!(s.iter().filter(|x| x.award).count(), want);
        }

        #[test]
        fn summary_invariant_to_monotone_transforms(v in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..3.0), 2..15)) {
            let a: Vec<Contestant> = v.iter().enumerate().map(|(i, x)| contestant(i, 0, x.0, x.1, x.2, x.3)).collect();
            let b: Vec<Contestant> = v.iter().enumerate().map(|(i, x)| contestant(i, 0, x.0.powi(3) + 2.0, x.1.exp(), 5.0 * x.2, x.3.sqrt())).collect();
            let (sa, _) = composite(&a);
            let (sb, _) = composite(&b);
            for (x, y) in sa.iter().zip(&sb) {
                prop_assert_eq!(x.summary, y.summary);
            }
        }

        #[test]
        fn improving_a_component_never_hurts(v in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..3.0), 2..15), who in 0usize..15, which in 0usize..4, bump in 0.0f64..2.0) {
            let who = who % v.len();
            let a: Vec<Contestant> = v.iter().enumerate().map(|(i, x)| contestant(i, 0, x.0, x.1, x.2, x.3)).collect();
            let mut b = a.clone();
            let i = b[who].inputs.as_mut().unwrap();
            match which {
                0 => b[who].learning = Some(b[who].learning.unwrap() + bump),
                1 => i.presence += bump,
                2 => i.preparation += bump,
                _ => i.pedagogy += bump,
            }
            let (sa, _) = composite(&a);
            let (sb, _) = composite(&b);
            prop_assert!(sb[who].summary >= sa[who].summary - 1e-12);
        }
    }
}
