//! Seeded-tournament learning metric for repeated cross-sections of pupils.
//!
//! Baseline pupils are binned within district-subject-grade; each
//! stream-subject cell's baseline bin distribution places its endline pupils
//! into pseudo-baseline bins; pupils are then ranked against everyone else in
//! the district placed in the same bin, and a teacher's score is the weighted
//! mean of their pupils' within-bin percentiles.
//!
//! Bin labels run `1..=B` with `B` the top bin. The teacher-facing "group"
//! view numbers the other way (group 1 is best); [`BaselineBinning::group`]
//! converts.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Panel, Subject};
use crate::error::{Error, Result};
use crate::rng::Seeder;
use crate::stats::average_ranks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Weighted mean of percentiles with inverse sampling-probability weights.
    WeightedMean,
    /// Unweighted mean over a seeded random subsample of this many pupil-subjects
    /// per teacher (all of them when the teacher has fewer).
    FixedSubsample(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub bins: usize,
    pub aggregation: Aggregation,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            bins: 20,
            aggregation: Aggregation::WeightedMean,
            seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 1 {
            return Err(Error::Config("metric needs at least one bin".into()));
        }
        if let Aggregation::FixedSubsample(0) = self.aggregation {
            return Err(Error::Config("fixed subsample size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineBinning {
    pub bins: usize,
    /// Bin label per input score, `1..=bins`, top bin = `bins`.
    pub labels: Vec<usize>,
    /// Number of pupils per bin (index 0 is bin 1).
    pub sizes: Vec<usize>,
    /// Some bins received no pupils.
    pub has_empty: bool,
}

impl BaselineBinning {
    /// Teacher-facing group number: 1 is the best group.
    pub fn group(bins: usize, label: usize) -> usize {
        bins + 1 - label
    }
}

/// Split scores into `bins` near-equal groups by rank. Tied scores share the
/// bin of their average rank.
pub fn make_baseline_bins(scores: &[f64], bins: usize) -> Result<BaselineBinning> {
    if scores.is_empty() {
        return Err(Error::EmptyCell("no baseline scores to bin".into()));
    }
    if bins == 0 {
        return Err(Error::Invalid("bin count must be positive".into()));
    }
    let n = scores.len() as f64;
    let ranks = average_ranks(scores);
    let labels: Vec<usize> = ranks
        .iter()
        .map(|r| (((r - 1.0) * bins as f64 / n).floor() as usize + 1).min(bins))
        .collect();
    let mut sizes = vec![0; bins];
    for &l in &labels {
        sizes[l - 1] += 1;
    }
    Ok(BaselineBinning {
        bins,
        has_empty: sizes.contains(&0),
        labels,
        sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamCdf {
    /// Probability mass per bin (index 0 is bin 1).
    pub mass: Vec<f64>,
    pub imputed: bool,
}

/// Baseline bin distribution of one cell; `None` when the cell has no
/// baseline pupils.
pub fn stream_cdf(labels: &[usize], bins: usize) -> Option<StreamCdf> {
    if labels.is_empty() {
        return None;
    }
    let mut mass = vec![0.0; bins];
    for &l in labels {
        mass[l - 1] += 1.0;
    }
    let n = labels.len() as f64;
    mass.iter_mut().for_each(|m| *m /= n);
    Some(StreamCdf {
        mass,
        imputed: false,
    })
}

/// Average of sibling cells' distributions, falling back to school-wide cells.
pub fn impute_cdf(siblings: &[&StreamCdf], school: &[&StreamCdf], what: &str) -> Result<StreamCdf> {
    let pool = if !siblings.is_empty() { siblings } else { school };
    if pool.is_empty() {
        return Err(Error::UnimputableCell(what.to_string()));
    }
    let bins = pool[0].mass.len();
    let mut mass = vec![0.0; bins];
    for c in pool {
        for (m, v) in mass.iter_mut().zip(&c.mass) {
            *m += v / pool.len() as f64;
        }
    }
    Ok(StreamCdf { mass, imputed: true })
}

/// Place a cell's endline pupils into pseudo-baseline bins.
///
/// `scores` holds each pupil's endline score, `None` for sampled-but-absent
/// pupils, who rank below everyone. The `i`-th best of `m` pupils sits at
/// upper-tail position `(i-1)/(m-1)` and receives the bin where the cell's
/// baseline distribution, accumulated from the top bin down, first reaches
/// that position. The best pupil therefore gets the best occupied baseline
/// bin and the worst pupil the worst one. A lone pupil sits at the median.
pub fn assign_pseudo_bins(scores: &[Option<f64>], cdf: &StreamCdf) -> Vec<usize> {
    let m = scores.len();
    let mut order: Vec<usize> = (0..m).collect();
    // best first; absent last; stable on input order for exact ties
    order.sort_by(|&a, &b| match (scores[a], scores[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let bins = cdf.mass.len();
    // cumulative mass from the top bin down, over occupied bins
    let mut tail: Vec<(usize, f64)> = Vec::new();
    let mut acc = 0.0;
    for label in (1..=bins).rev() {
        let p = cdf.mass[label - 1];
        if p > 0.0 {
            acc += p;
            tail.push((label, acc));
        }
    }
    let last = tail.last().map(|t| t.0).unwrap_or(1);
    let mut out = vec![0; m];
    for (pos, &i) in order.iter().enumerate() {
        let u = if m == 1 { 0.5 } else { pos as f64 / (m - 1) as f64 };
        let label = tail
            .iter()
            .find(|(_, c)| u <= c + 1e-12)
            .map(|t| t.0)
            .unwrap_or(last);
        // u == 0 must hit the first occupied bin even if its mass rounds to 0
        out[i] = if pos == 0 { tail.first().map(|t| t.0).unwrap_or(last) } else { label };
    }
    out
}

/// Rank of one pupil within their district-subject-grade pseudo-bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRank {
    /// Competition rank, 1 = best, ties share the smallest rank.
    pub rank: usize,
    /// Pupils in the pseudo-bin.
    pub size: usize,
    /// `1 - (r - 1)/(n - 1)` with `r` the average descending rank; 1 is best,
    /// a lone pupil gets 1, absent pupils get 0.
    pub pi: f64,
}

/// Rank pupils within each pseudo-bin. `entries` are (bin, score) pairs for
/// one district-subject-grade; `None` marks absent pupils.
pub fn within_bin_ranks(entries: &[(usize, Option<f64>)]) -> Vec<BinRank> {
    let mut by_bin: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, (b, _)) in entries.iter().enumerate() {
        by_bin.entry(*b).or_default().push(i);
    }
    let mut out = vec![
        BinRank {
            rank: 0,
            size: 0,
            pi: 0.0
        };
        entries.len()
    ];
    for members in by_bin.values() {
        let n = members.len();
        // descending order key: absent pupils get -inf
        let neg: Vec<f64> = members
            .iter()
            .map(|&i| -entries[i].1.unwrap_or(f64::NEG_INFINITY))
            .collect();
        let avg = average_ranks(&neg);
        for (p, &i) in members.iter().enumerate() {
            let competition = 1 + neg.iter().filter(|&&v| v < neg[p]).count();
            let pi = match entries[i].1 {
                None => 0.0,
                Some(_) if n == 1 => 1.0,
                Some(_) => 1.0 - (avg[p] - 1.0) / (n - 1) as f64,
            };
            out[i] = BinRank {
                rank: competition,
                size: n,
                pi,
            };
        }
    }
    out
}

/// One endline pupil-subject with its tournament outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PupilRank {
    pub pupil: usize,
    pub stream: usize,
    pub subject: Subject,
    pub round: u8,
    pub district: usize,
    pub grade: u8,
    pub pseudo_bin: usize,
    pub rank: usize,
    pub bin_size: usize,
    pub pi: f64,
    pub absent: bool,
    pub weight: f64,
    /// The cell's baseline distribution was imputed.
    pub imputed: bool,
    pub teacher: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherLearningScore {
    pub teacher: usize,
    pub round: u8,
    pub score: f64,
    /// Sum of integer within-bin ranks (lower is better).
    pub rank_sum: usize,
    pub pupils: usize,
}

/// Weighted mean of percentiles. Errors with `NoPupils` on empty input.
pub fn teacher_score(teacher: usize, pis: &[f64], weights: &[f64]) -> Result<f64> {
    if pis.is_empty() {
        return Err(Error::NoPupils(teacher));
    }
    let sw: f64 = weights.iter().sum();
    Ok(pis.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>() / sw)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricOutput {
    pub pupils: Vec<PupilRank>,
    pub teachers: Vec<TeacherLearningScore>,
    pub imputed_cells: usize,
    /// Teachers with an assignment this round but no sampled pupils.
    pub teachers_without_pupils: Vec<usize>,
}

/// Baseline scores for `round`: the baseline test for round 1, and for round
/// 2 the round-1 endline takers still enrolled in a stream in round 2.
fn baseline_rows(panel: &Panel, round: u8) -> Vec<usize> {
    panel
        .observations
        .iter()
        .enumerate()
        .filter(|(_, o)| o.round + 1 == round && !o.absent && o.score.is_some())
        .filter(|(_, o)| round == 1 || panel.pupils[o.pupil].enrolled[round as usize])
        .map(|(i, _)| i)
        .collect()
}

/// Bin labels for round `round`'s baseline rows, keyed by observation index.
pub fn second_year_bins(panel: &Panel, bins: usize) -> Result<HashMap<usize, usize>> {
    bin_rows(panel, &baseline_rows(panel, 2), bins)
}

fn bin_rows(panel: &Panel, rows: &[usize], bins: usize) -> Result<HashMap<usize, usize>> {
    let mut groups: BTreeMap<(usize, Subject, u8), Vec<usize>> = BTreeMap::new();
    for &i in rows {
        let o = &panel.observations[i];
        let st = &panel.streams[o.stream];
        let d = panel.schools[st.school].district;
        groups.entry((d, o.subject, st.grade)).or_default().push(i);
    }
    let mut out = HashMap::new();
    for members in groups.values() {
        let scores: Vec<f64> = members.iter().map(|&i| panel.observations[i].score.unwrap()).collect();
        let b = make_baseline_bins(&scores, bins)?;
        for (&i, &l) in members.iter().zip(&b.labels) {
            out.insert(i, l);
        }
    }
    Ok(out)
}

/// Full learning-metric pipeline for endline round 1 or 2.
pub fn bn_scores(panel: &Panel, round: u8, cfg: &MetricConfig) -> Result<MetricOutput> {
    if !(round == 1 || round == 2) {
        return Err(Error::Invalid(format!("learning metric is defined for rounds 1 and 2, not {round}")));
    }
    cfg.validate()?;
    let bins = cfg.bins;
    let labels = bin_rows(panel, &baseline_rows(panel, round), bins)?;

    // baseline distribution per (stream, subject)
    let mut cell_labels: BTreeMap<(usize, Subject), Vec<usize>> = BTreeMap::new();
    for (&i, &l) in &labels {
        let o = &panel.observations[i];
        cell_labels.entry((o.stream, o.subject)).or_default().push(l);
    }
    let observed: BTreeMap<(usize, Subject), StreamCdf> = cell_labels
        .iter()
        .map(|(k, v)| (*k, stream_cdf(v, bins).unwrap()))
        .collect();

    // endline cells
    let mut cells: BTreeMap<(usize, Subject), Vec<usize>> = BTreeMap::new();
    for (i, o) in panel.observations.iter().enumerate() {
        if o.round == round {
            cells.entry((o.stream, o.subject)).or_default().push(i);
        }
    }
    let mut imputed_cells = 0;
    let mut pseudo: HashMap<usize, (usize, bool)> = HashMap::new();
    for ((stream, subject), rows) in &cells {
        let cdf = match observed.get(&(*stream, *subject)) {
            Some(c) => c.clone(),
            None => {
                let st = &panel.streams[*stream];
                let mut siblings = Vec::new();
                let mut school = Vec::new();
                for ((s2, b2), c) in &observed {
                    if b2 != subject || s2 == stream {
                        continue;
                    }
                    let other = &panel.streams[*s2];
                    if other.school == st.school {
                        school.push(c);
                        if other.grade == st.grade {
                            siblings.push(c);
                        }
                    }
                }
                imputed_cells += 1;
                impute_cdf(
                    &siblings,
                    &school,
                    &format!("stream {stream} subject {}", subject.as_str()),
                )?
            }
        };
        let scores: Vec<Option<f64>> = rows
            .iter()
            .map(|&i| {
                let o = &panel.observations[i];
                if o.absent { None } else { o.score }
            })
            .collect();
        for (&i, b) in rows.iter().zip(assign_pseudo_bins(&scores, &cdf)) {
            pseudo.insert(i, (b, cdf.imputed));
        }
    }

    // tournaments per district-subject-grade
    let mut contests: BTreeMap<(usize, Subject, u8), Vec<usize>> = BTreeMap::new();
    for rows in cells.values() {
        for &i in rows {
            let o = &panel.observations[i];
            let st = &panel.streams[o.stream];
            contests
                .entry((panel.schools[st.school].district, o.subject, st.grade))
                .or_default()
                .push(i);
        }
    }
    let mut sampled: HashMap<usize, usize> = HashMap::new();
    {
        let mut seen = std::collections::HashSet::new();
        for o in panel.observations.iter().filter(|o| o.round == round) {
            if seen.insert((o.stream, o.pupil)) {
                *sampled.entry(o.stream).or_insert(0) += 1;
            }
        }
    }
    let lookup = panel.teacher_lookup();
    let mut pupils = Vec::new();
    for ((district, subject, grade), rows) in &contests {
        let entries: Vec<(usize, Option<f64>)> = rows
            .iter()
            .map(|&i| {
                let o = &panel.observations[i];
                (pseudo[&i].0, if o.absent { None } else { o.score })
            })
            .collect();
        let ranks = within_bin_ranks(&entries);
        for (&i, r) in rows.iter().zip(ranks) {
            let o = &panel.observations[i];
            let st = &panel.streams[o.stream];
            let weight = st.enrolled[round as usize] as f64 / sampled[&o.stream] as f64;
            pupils.push(PupilRank {
                pupil: o.pupil,
                stream: o.stream,
                subject: *subject,
                round,
                district: *district,
                grade: *grade,
                pseudo_bin: pseudo[&i].0,
                rank: r.rank,
                bin_size: r.size,
                pi: r.pi,
                absent: o.absent || o.score.is_none(),
                weight,
                imputed: pseudo[&i].1,
                teacher: lookup.get(&(o.stream, *subject, round)).copied(),
            });
        }
    }
    pupils.sort_by(|a, b| {
        (a.district, a.subject, a.grade, a.pseudo_bin, a.rank, a.pupil)
            .cmp(&(b.district, b.subject, b.grade, b.pseudo_bin, b.rank, b.pupil))
    });

    let mut by_teacher: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, p) in pupils.iter().enumerate() {
        if let Some(t) = p.teacher {
            by_teacher.entry(t).or_default().push(k);
        }
    }
    let seeder = Seeder::new(cfg.seed);
    let mut teachers = Vec::new();
    for (&t, idx) in &by_teacher {
        let chosen: Vec<usize> = match cfg.aggregation {
            Aggregation::WeightedMean => idx.clone(),
            Aggregation::FixedSubsample(k) => {
                let mut v = idx.clone();
                v.shuffle(&mut seeder.indexed(&format!("subsample-round-{round}"), t as u64));
                v.truncate(k);
                v.sort_unstable();
                v
            }
        };
        let pis: Vec<f64> = chosen.iter().map(|&k| pupils[k].pi).collect();
        let weights: Vec<f64> = match cfg.aggregation {
            Aggregation::WeightedMean => chosen.iter().map(|&k| pupils[k].weight).collect(),
            Aggregation::FixedSubsample(_) => vec![1.0; chosen.len()],
        };
        teachers.push(TeacherLearningScore {
            teacher: t,
            round,
            score: teacher_score(t, &pis, &weights)?,
            rank_sum: chosen.iter().map(|&k| pupils[k].rank).sum(),
            pupils: chosen.len(),
        });
    }
    let mut without: Vec<usize> = panel
        .teaching
        .iter()
        .filter(|tg| tg.round == round && !by_teacher.contains_key(&tg.teacher))
        .map(|tg| tg.teacher)
        .collect();
    without.sort_unstable();
    without.dedup();
    Ok(MetricOutput {
        pupils,
        teachers,
        imputed_cells,
        teachers_without_pupils: without,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const B: usize = 10;

    fn cdf_from_groups(groups: &[usize]) -> StreamCdf {
        let labels: Vec<usize> = groups.iter().map(|g| BaselineBinning::group(B, *g)).collect();
        stream_cdf(&labels, B).unwrap()
    }

    #[test]
    fn even_split_two_per_bin() {
        let scores: Vec<f64> = (0..40).map(|i| i as f64 * 0.37).collect();
        let b = make_baseline_bins(&scores, 20).unwrap();
        assert!(b.sizes.iter().all(|&s| s == 2));
        assert_eq!(b.labels[39], 20);
        assert_eq!(b.labels[0], 1);
    }

    #[test]
    fn all_equal_scores_share_one_bin() {
        let b = make_baseline_bins(&[1.5; 12], 20).unwrap();
        assert_eq!(b.sizes.iter().filter(|&&s| s > 0).count(), 1);
        assert!(b.has_empty);
    }

    #[test]
    fn slice_oracle_on_403_pupils() {
        let scores: Vec<f64> = (0..403).map(|i| ((i * 7919) % 403) as f64).collect();
        let b = make_baseline_bins(&scores, 20).unwrap();
        assert!(b.sizes.iter().all(|&s| s == 20 || s == 21));
        let mut idx: Vec<usize> = (0..403).collect();
        idx.sort_by(|&a, &c| scores[a].total_cmp(&scores[c]));
        for (pos, &i) in idx.iter().enumerate() {
            assert_eq!(b.labels[i], pos * 20 / 403 + 1);
        }
    }

    #[test]
    fn empty_baseline_is_an_error() {
        assert!(matches!(make_baseline_bins(&[], 20), Err(Error::EmptyCell(_))));
    }

    #[test]
    fn stream_cdf_point_mass_and_imputation() {
        let c = stream_cdf(&[20; 5], 20).unwrap();
        assert_eq!(c.mass[19], 1.0);
        let a = stream_cdf(&[10], 20).unwrap();
        let imp = impute_cdf(&[&a, &c], &[], "x").unwrap();
        assert!(imp.imputed);
        assert_eq!(imp.mass[9], 0.5);
        assert_eq!(imp.mass[19], 0.5);
        assert!(matches!(impute_cdf(&[], &[], "x"), Err(Error::UnimputableCell(_))));
    }

    #[test]
    fn worked_example_one_placement_and_rank_sum() {
        let cdf = cdf_from_groups(&[1, 3, 6, 9, 10]);
        let endline = [Some(0.3), Some(2.0), Some(-1.0), Some(1.1), Some(-0.2)];
        let bins = assign_pseudo_bins(&endline, &cdf);
        let groups: Vec<usize> = bins.iter().map(|&l| BaselineBinning::group(B, l)).collect();
        // in endline rank order: 2.0, 1.1, 0.3, -0.2, -1.0
        assert_eq!(groups, vec![6, 1, 10, 3, 9]);

        // District contest: other pupils placed so that ours rank 1, 7, 4, 4, 1
        // in groups 1, 3, 6, 9, 10.
        let mut entries: Vec<(usize, Option<f64>)> = endline.iter().zip(&bins).map(|(s, b)| (*b, *s)).collect();
        let ours = entries.len();
        let mut others = |label: usize, better: usize, worse: usize, pivot: f64| {
            for k in 0..better {
                entries.push((label, Some(pivot + 1.0 + k as f64)));
            }
            for k in 0..worse {
                entries.push((label, Some(pivot - 1.0 - k as f64)));
            }
        };
        others(bins[1], 0, 5, 2.0); // group 1: ranked 1st
        others(bins[3], 6, 3, 1.1); // group 3: ranked 7th
        others(bins[0], 3, 4, 0.3); // group 6: ranked 4th
        others(bins[4], 3, 2, -0.2); // group 9: ranked 4th
        others(bins[2], 0, 8, -1.0); // group 10: ranked 1st
        let ranks = within_bin_ranks(&entries);
        let by_group: Vec<(usize, usize)> = (0..ours)
            .map(|i| (BaselineBinning::group(B, bins[i]), ranks[i].rank))
            .collect();
        let mut sorted = by_group.clone();
        sorted.sort();
        assert_eq!(sorted, vec![(1, 1), (3, 7), (6, 4), (9, 4), (10, 1)]);
        assert_eq!(sorted.iter().map(|x| x.1).sum::<usize>(), 17);
    }

    #[test]
    fn worked_example_two_absent_pupil_ranked_last() {
        let cdf = cdf_from_groups(&[1, 3, 3, 4, 5]);
        let endline = [Some(1.0), None, Some(0.4), Some(0.9), Some(0.1)];
        let bins = assign_pseudo_bins(&endline, &cdf);
        let groups: Vec<usize> = bins.iter().map(|&l| BaselineBinning::group(B, l)).collect();
        assert_eq!(groups, vec![1, 5, 3, 3, 4]);

        let mut entries: Vec<(usize, Option<f64>)> = endline.iter().zip(&bins).map(|(s, b)| (*b, *s)).collect();
        let add = |entries: &mut Vec<(usize, Option<f64>)>, label: usize, scores: Vec<f64>| {
            for s in scores {
                entries.push((label, Some(s)));
            }
        };
        add(&mut entries, bins[0], vec![0.5, 0.2]); // group 1: our 1.0 is 1st
        // group 3: ours are 0.9 and 0.4; make them 4th and 7th
        add(&mut entries, bins[2], vec![2.0, 1.9, 1.8, 0.8, 0.7, 0.0]);
        // group 4: ours 0.1 ranked 8th
        add(&mut entries, bins[4], (0..7).map(|k| 1.0 + k as f64).chain([-1.0]).collect());
        // group 5: 39 others, absent pupil is 40th
        add(&mut entries, bins[1], (0..39).map(|k| -3.0 + 0.1 * k as f64).collect());
        let ranks = within_bin_ranks(&entries);
        let ours: Vec<usize> = (0..5).map(|i| ranks[i].rank).collect();
        assert_eq!(ranks[1].rank, 40);
        assert_eq!(ranks[1].size, 40);
        assert_eq!(ranks[1].pi, 0.0);
        let mut sorted = ours.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 4, 7, 8, 40]);
        assert_eq!(ours.iter().sum::<usize>(), 60);
    }

    #[test]
    fn single_pupil_inherits_bin() {
        let cdf = stream_cdf(&[7], 20).unwrap();
        assert_eq!(assign_pseudo_bins(&[Some(0.0)], &cdf), vec![7]);
    }

    #[test]
    fn two_pupils_get_one_and_zero() {
        let r = within_bin_ranks(&[(3, Some(1.0)), (3, Some(0.0))]);
        assert_eq!((r[0].pi, r[1].pi), (1.0, 0.0));
        let solo = within_bin_ranks(&[(4, Some(0.2))]);
        assert_eq!(solo[0].pi, 1.0);
    }

    #[test]
    fn inverse_probability_weights() {
        assert_eq!(teacher_score(1, &[1.0, 1.0], &[3.0, 3.0]).unwrap(), 1.0);
        assert!(matches!(teacher_score(4, &[], &[]), Err(Error::NoPupils(4))));
    }

    proptest! {
        #[test]
        fn ranks_invariant_to_monotone_transform(scores in proptest::collection::vec(-5.0f64..5.0, 1..40), bins in proptest::collection::vec(1usize..4, 40)) {
            let entries: Vec<(usize, Option<f64>)> = scores.iter().zip(&bins).map(|(s, b)| (*b, Some(*s))).collect();
            let transformed: Vec<(usize, Option<f64>)> = entries.iter().map(|(b, s)| (*b, s.map(|v| v.exp() * 3.0 + 1.0))).collect();
            prop_assert_eq!(within_bin_ranks(&entries), within_bin_ranks(&transformed));
        }

        #[test]
        fn percentiles_in_unit_interval(scores in proptest::collection::vec(proptest::option::of(-5.0f64..5.0), 1..30)) {
            let entries: Vec<(usize, Option<f64>)> = scores.iter().map(|s| (1, *s)).collect();
            for r in within_bin_ranks(&entries) {
                prop_assert!((0.0..=1.0).contains(&r.pi));
                prop_assert!(r.rank >= 1 && r.rank <= r.size);
            }
        }

        #[test]
        fn absence_never_helps(scores in proptest::collection::vec(-5.0f64..5.0, 2..20), who in 0usize..20) {
            let who = who % scores.len();
            let entries: Vec<(usize, Option<f64>)> = scores.iter().map(|s| (1, Some(*s))).collect();
            let mut absent = entries.clone();
            absent[who].1 = None;
            let a = within_bin_ranks(&entries)[who].pi;
            let b = within_bin_ranks(&absent)[who].pi;
            prop_assert!(b <= a);
        }

        #[test]
        fn weighted_mean_monotone(pis in proptest::collection::vec(0.0f64..1.0, 1..20), w in proptest::collection::vec(1.0f64..5.0, 20), k in 0usize..20, bump in 0.0f64..1.0) {
            let k = k % pis.len();
            let w = &w[..pis.len()];
            let base = teacher_score(0, &pis, w).unwrap();
            let mut up = pis.clone();
            up[k] = (up[k] + bump).min(1.0);
            let s = teacher_score(0, &up, w).unwrap();
            prop_assert!(s >= base - 1e-12);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
