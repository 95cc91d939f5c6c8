//! Two-parameter logistic item response model: marginal maximum likelihood by
//! EM over Gauss–Hermite quadrature, posterior-mean ability scores and
//! reference-group standardization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::data::{Arm, Panel, Subject};
use crate::error::{Error, Result};

/// Binary responses, respondents by items, with `None` for missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub respondents: Vec<String>,
    pub items: Vec<String>,
    /// Row-major, `respondents.len() * items.len()`.
    pub data: Vec<Option<bool>>,
}

impl ResponseMatrix {
    pub fn new(respondents: Vec<String>, items: Vec<String>, data: Vec<Option<bool>>) -> Result<Self> {
        if data.len() != respondents.len() * items.len() {
            return Err(Error::Invalid("response data does not match the matrix shape".into()));
        }
        Ok(Self {
            respondents,
            items,
            data,
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.respondents.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn get(&self, r: usize, j: usize) -> Option<bool> {
        self.data[r * self.items.len() + j]
    }

    /// Shape checks needed for fitting: at least two items and two
    /// respondents, no row or column without any response.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_respondents(), self.n_items());
        if n < 2 || m < 2 {
            return Err(Error::Invalid(format!("response matrix is {n} x {m}; need at least 2 x 2")));
        }
        for r in 0..n {
            if (0..m).all(|j| self.get(r, j).is_none()) {
                return Err(Error::Invalid(format!("respondent {} has no responses", self.respondents[r])));
            }
        }
        for j in 0..m {
            if (0..n).all(|r| self.get(r, j).is_none()) {
                return Err(Error::Invalid(format!("item {} has no responses", self.items[j])));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub discrimination: f64,
    pub difficulty: f64,
}

impl Item {
    pub fn p_correct(&self, theta: f64) -> f64 {
        1.0 / (1.0 + (-self.discrimination * (theta - self.difficulty)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub items: Vec<String>,
    /// `None` for items dropped as degenerate.
    pub params: Vec<Option<Item>>,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub dropped: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub nodes: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Drop all-correct / all-wrong items instead of failing.
    pub drop_degenerate: bool,
    /// Upper bound on discrimination. Near-separable items in small samples
    /// otherwise drift towards infinity and EM never settles.
    pub max_discrimination: f64,
    /// Panel scoring fits one test per subject-round across grades instead of
    /// one per subject-grade-round.
    pub pool_grades: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nodes: 41,
            tol: 1e-4,
            max_iter: 1000,
            drop_degenerate: true,
            max_discrimination: 8.0,
            pool_grades: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbilityScore {
    pub ability: f64,
    pub posterior_sd: f64,
}

/// Gauss–Hermite rule rescaled to integrate against the standard normal
/// density: returns (nodes, weights) with weights summing to one.
pub fn normal_quadrature(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal Hermite recurrence (physicists' form).
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2 - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let s = std::f64::consts::SQRT_2;
    let nodes: Vec<f64> = x.iter().rev().map(|v| v * s).collect();
    let norm = std::f64::consts::PI.sqrt();
    let weights: Vec<f64> = w.iter().rev().map(|v| v / norm).collect();
    (nodes, weights)
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Per-respondent log-likelihood at each quadrature node.
fn node_loglik(m: &ResponseMatrix, params: &[Option<Item>], nodes: &[f64], r: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (j, it) in params.iter().enumerate() {
        let (Some(it), Some(u)) = (it, m.get(r, j)) else { continue };
        for (q, &t) in nodes.iter().enumerate() {
            let z = it.discrimination * (t - it.difficulty);
            out[q] += if u { log_sigmoid(z) } else { log_sigmoid(-z) };
        }
    }
}

/// E-step: posterior node weights for every respondent plus the observed-data
/// log-likelihood.
fn posteriors(m: &ResponseMatrix, params: &[Option<Item>], nodes: &[f64], weights: &[f64]) -> (Vec<f64>, f64) {
    let nq = nodes.len();
    let rows: Vec<(Vec<f64>, f64)> = (0..m.n_respondents())
        .into_par_iter()
        .map(|r| {
            let mut ll = vec![0.0; nq];
            node_loglik(m, params, nodes, r, &mut ll);
            let mx = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut post: Vec<f64> = ll.iter().zip(weights).map(|(l, w)| w * (l - mx).exp()).collect();
            let s: f64 = post.iter().sum();
            post.iter_mut().for_each(|p| *p /= s);
            (post, mx + s.ln())
        })
        .collect();
    let mut flat = Vec::with_capacity(m.n_respondents() * nq);
    let mut total = 0.0;
    for (p, l) in rows {
        flat.extend(p);
        total += l;
    }
    (flat, total)
}

/// Maximize the expected complete-data log-likelihood of one item given
/// expected trials `n` and successes `s` at each node, by damped Newton on
/// the slope–intercept parametrization.
fn m_step_item(nodes: &[f64], n: &[f64], s: &[f64], start: Item, a_max: f64) -> Item {
    let q = |a: f64, c: f64| -> f64 {
        nodes
            .iter()
            .zip(n.iter().zip(s))
            .map(|(&t, (&nt, &st))| {
                let z = a * t + c;
                st * log_sigmoid(z) + (nt - st) * log_sigmoid(-z)
            })
            .sum()
    };
    let mut a = start.discrimination;
    let mut c = -start.discrimination * start.difficulty;
    let mut cur = q(a, c);
    for _ in 0..50 {
        let (mut ga, mut gc, mut haa, mut hac, mut hcc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, (&nt, &st)) in nodes.iter().zip(n.iter().zip(s)) {
            let p = 1.0 / (1.0 + (-(a * t + c)).exp());
            let r = st - nt * p;
            let v = nt * p * (1.0 - p);
            ga += r * t;
            gc += r;
            haa += v * t * t;
            hac += v * t;
            hcc += v;
        }
        let det = haa * hcc - hac * hac;
        if !(det > 0.0) {
            break;
        }
        let da = (hcc * ga - hac * gc) / det;
        let dc = (haa * gc - hac * ga) / det;
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-6 {
            let (na, nc) = (a + step * da, c + step * dc);
            if na > 0.0 && na <= a_max {
                let v = q(na, nc);
                if v >= cur {
                    a = na;
                    c = nc;
                    cur = v;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved || (da.abs() + dc.abs()) * step < 1e-10 {
            break;
        }
    }
    Item {
        discrimination: a,
        difficulty: -c / a,
    }
}

/// Marginal maximum likelihood for the 2PL model with a standard-normal
/// ability prior.
pub fn fit_2pl(m: &ResponseMatrix, opts: &FitOptions) -> Result<ItemParams> {
    m.validate()?;
    let (nodes, weights) = normal_quadrature(opts.nodes);
    let nq = nodes.len();
    let mut params: Vec<Option<Item>> = Vec::with_capacity(m.n_items());
    let mut dropped = Vec::new();
    for j in 0..m.n_items() {
        let obs: Vec<bool> = (0..m.n_respondents()).filter_map(|r| m.get(r, j)).collect();
        let k = obs.iter().filter(|u| **u).count();
        if k == 0 || k == obs.len() {
            if !opts.drop_degenerate {
                return Err(Error::DegenerateItem { item: m.items[j].clone() });
            }
            dropped.push(m.items[j].clone());
            params.push(None);
        } else {
            let p = (k as f64 / obs.len() as f64).clamp(0.01, 0.99);
            params.push(Some(Item {
                discrimination: 1.0,
                difficulty: -(p / (1.0 - p)).ln(),
            }));
        }
    }
    if params.iter().all(|p| p.is_none()) {
        return Err(Error::DegenerateItem { item: "all items".into() });
    }

    let mut prev_ll = f64::NEG_INFINITY;
    for iter in 1..=opts.max_iter {
        let (post, ll) = posteriors(m, &params, &nodes, &weights);
        debug_assert!(ll >= prev_ll - 1e-6 * ll.abs().max(1.0), "EM log-likelihood fell: {prev_ll} -> {ll}");
        prev_ll = ll;
        let updated: Vec<Option<Item>> = (0..m.n_items())
            .into_par_iter()
            .map(|j| {
                let start = params[j]?;
                let mut n = vec![0.0; nq];
                let mut s = vec![0.0; nq];
                for r in 0..m.n_respondents() {
                    if let Some(u) = m.get(r, j) {
                        let pr = &post[r * nq..(r + 1) * nq];
                        for q in 0..nq {
                            n[q] += pr[q];
                            if u {
                                s[q] += pr[q];
                            }
                        }
                    }
                }
                Some(m_step_item(&nodes, &n, &s, start, opts.max_discrimination))
            })
            .collect();
        let change = params
            .iter()
            .zip(&updated)
            .filter_map(|(a, b)| Some((a.as_ref()?, b.as_ref()?)))
            .map(|(a, b)| {
                (a.discrimination - b.discrimination)
                    .abs()
                    .max((a.difficulty - b.difficulty).abs())
            })
            .fold(0.0, f64::max);
        params = updated;
        if change < opts.tol {
            let (_, ll) = posteriors(m, &params, &nodes, &weights);
            return Ok(ItemParams {
                items: m.items.clone(),
                params,
                iterations: iter,
                log_likelihood: ll,
                dropped,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "2PL EM".into(),
        iterations: opts.max_iter,
    })
}

/// Posterior mean and SD of ability under a standard-normal prior.
/// Respondents without responses get the prior (0, 1).
/// Nodes for posterior means. Posteriors from two dozen items are several
/// times narrower than the prior, so scoring needs a finer rule than EM.
pub const EAP_NODES: usize = 81;

/// The recurrence in [`normal_quadrature`] underflows beyond this.
pub const MAX_NODES: usize = 150;

pub fn eap_score(m: &ResponseMatrix, items: &ItemParams) -> Vec<AbilityScore> {
    eap_score_with(m, items, EAP_NODES)
}

pub fn eap_score_with(m: &ResponseMatrix, items: &ItemParams, n_nodes: usize) -> Vec<AbilityScore> {
    let (nodes, weights) = normal_quadrature(n_nodes);
    // Align fitted items to the matrix columns by name.
    let params: Vec<Option<Item>> = m
        .items
        .iter()
        .map(|name| {
            items
                .items
                .iter()
                .position(|n| n == name)
                .and_then(|p| items.params[p])
        })
        .collect();
    (0..m.n_respondents())
        .into_par_iter()
        .map(|r| {
            let mut ll = vec![0.0; nodes.len()];
            node_loglik(m, &params, &nodes, r, &mut ll);
            let mx = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for ((l, w), t) in ll.iter().zip(&weights).zip(&nodes) {
                let p = w * (l - mx).exp();
                s0 += p;
                s1 += p * t;
                s2 += p * t * t;
            }
            let mean = s1 / s0;
            AbilityScore {
                ability: mean,
                posterior_sd: (s2 / s0 - mean * mean).max(0.0).sqrt(),
            }
        })
        .collect()
}

/// Shift and scale so that the reference rows have mean 0 and sample SD 1.
pub fn standardize(scores: &[f64], reference: &[bool]) -> Result<Vec<f64>> {
    let refs: Vec<f64> = scores
        .iter()
        .zip(reference)
        .filter(|(_, r)| **r)
        .map(|(s, _)| *s)
        .collect();
    let sd = crate::stats::sd_sample(&refs);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("standardization reference group".into()));
    }
    let mean = crate::stats::mean(&refs);
    Ok(scores.iter().map(|s| (s - mean) / sd).collect())
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_NODES).contains(&self.nodes) || self.max_iter == 0 || !(self.tol > 0.0) || !(self.max_discrimination > 1.0) {
            return Err(Error::Config(format!(
                "irt: need nodes in 2..={MAX_NODES}, max_iter >= 1, tol > 0 and max_discrimination > 1"
            )));
        }
        Ok(())
    }
}

/// Fit summary for one subject-grade-round test; grade 0 for pooled grades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFit {
    pub subject: Subject,
    pub grade: u8,
    pub round: u8,
    pub respondents: usize,
    /// Pupils who sat but answered nothing; they get the prior score.
    pub blank: usize,
    pub params: ItemParams,
}

/// Score every pupil-subject-round of a panel from its item responses. Each
/// subject-grade-round is a separate test (subject-round with grade 0 when
/// grades are pooled, items then kept apart by grade); scores are standardized against the
/// pupils of experienced-FW schools sitting the same test. Absent pupils keep
/// no score.
pub fn score_panel(panel: &mut Panel, opts: &FitOptions) -> Result<Vec<TestFit>> {
    opts.validate()?;
    let index: HashMap<(usize, Subject, u8), usize> = panel
        .observations
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.absent)
        .map(|(i, o)| ((o.pupil, o.subject, o.round), i))
        .collect();
    // test -> obs index -> (grade, item) -> answer
    type Answers = BTreeMap<usize, BTreeMap<(u8, u16), Option<bool>>>;
    let mut tests: BTreeMap<(Subject, u8, u8), Answers> = BTreeMap::new();
    for r in &panel.responses {
        let Some(&i) = index.get(&(r.pupil, r.subject, r.round)) else {
            continue;
        };
        let grade = panel.streams[panel.observations[i].stream].grade;
        let test_grade = if opts.pool_grades { 0 } else { grade };
        tests
            .entry((r.subject, test_grade, r.round))
            .or_default()
            .entry(i)
            .or_default()
            .insert((grade, r.item), r.correct);
    }
    if tests.is_empty() {
        return Err(Error::Invalid("panel has no item responses to score".into()));
    }
    let work: Vec<_> = tests.into_iter().collect();
    let fitted: Vec<(TestFit, Vec<(usize, f64)>)> = work
        .par_iter()
        .map(|((subject, grade, round), rows)| {
            let items: Vec<(u8, u16)> = rows
                .values()
                .flat_map(|m| m.iter().filter(|(_, v)| v.is_some()).map(|(k, _)| *k))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut answered = Vec::new();
            let mut blank = Vec::new();
            for (&i, m) in rows {
                if m.values().any(|v| v.is_some()) {
                    answered.push(i);
                } else {
                    blank.push(i);
                }
            }
            let mut data = Vec::with_capacity(answered.len() * items.len());
            for i in &answered {
                let m = &rows[i];
                data.extend(items.iter().map(|it| m.get(it).copied().flatten()));
            }
            let matrix = ResponseMatrix::new(
                answered.iter().map(|i| panel.observations[*i].pupil.to_string()).collect(),
                items.iter().map(|(g, i)| format!("{g}:{i}")).collect(),
                data,
            )?;
            let params = fit_2pl(&matrix, opts)?;
            let mut obs: Vec<usize> = answered.clone();
            let mut raw: Vec<f64> = eap_score(&matrix, &params).into_iter().map(|s| s.ability).collect();
            obs.extend(&blank);
            raw.extend(std::iter::repeat_n(0.0, blank.len()));
            let reference: Vec<bool> = obs
                .iter()
                .map(|i| panel.schools[panel.streams[panel.observations[*i].stream].school].arm == Arm::Fw)
                .collect();
            let z = standardize(&raw, &reference)?;
            let fit = TestFit {
                subject: *subject,
                grade: *grade,
                round: *round,
                respondents: answered.len(),
                blank: blank.len(),
                params,
            };
            Ok((fit, obs.into_iter().zip(z).collect()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(fitted.len());
    for (fit, scores) in fitted {
        for (i, z) in scores {
            panel.observations[i].score = Some(z);
        }
        out.push(fit);
    }
    Ok(out)
}

/// Simulate 2PL responses; used by tests and the world generator.
pub fn simulate_responses<R: rand::Rng + ?Sized>(rng: &mut R, abilities: &[f64], items: &[Item]) -> Vec<Option<bool>> {
    let mut out = Vec::with_capacity(abilities.len() * items.len());
    for &t in abilities {
        for it in items {
            out.push(Some(rng.random::<f64>() < it.p_correct(t)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;
    use proptest::prelude::*;

    fn matrix(n: usize, data: Vec<Option<bool>>, m: usize) -> ResponseMatrix {
        ResponseMatrix::new(
            (0..n).map(|i| format!("r{i}")).collect(),
            (0..m).map(|j| format!("i{j}")).collect(),
            data,
        )
        .unwrap()
    }

    #[test]
    fn quadrature_integrates_normal_moments() {
        let (x, w) = normal_quadrature(41);
        let m = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-10);
        assert!((m(4) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn all_correct_item_is_degenerate() {
        let data = vec![Some(true), Some(true), Some(true), Some(false), Some(true), Some(false)];
        let m = matrix(3, data, 2);
        let strict = FitOptions {
            drop_degenerate: false,
            ..Default::default()
        };
        assert!(matches!(fit_2pl(&m, &strict), Err(Error::DegenerateItem { .. })));
    }

    #[test]
    fn no_responses_gives_prior() {
        let m = matrix(1, vec![None, None], 2);
        let items = ItemParams {
            items: vec!["i0".into(), "i1".into()],
            params: vec![Some(Item { discrimination: 1.0, difficulty: 0.0 }); 2],
            iterations: 0,
            log_likelihood: 0.0,
            dropped: vec![],
        };
        let s = eap_score(&m, &items)[0];
        assert!(s.ability.abs() < 1e-12);
        assert!((s.posterior_sd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identical_columns_give_identical_items() {
        let mut rng = Seeder::new(5).stream("irt");
        let truth: Vec<Item> = (0..6)
            .map(|j| Item { discrimination: 1.0 + 0.1 * j as f64, difficulty: -1.0 + 0.4 * j as f64 })
            .collect();
        let ab: Vec<f64> = (0..300).map(|i| -2.0 + 4.0 * i as f64 / 300.0).collect();
        let mut data = simulate_responses(&mut rng, &ab, &truth);
        // duplicate column 0 into column 5
        for r in 0..300 {
            data[r * 6 + 5] = data[r * 6];
        }
        let fit = fit_2pl(&matrix(300, data, 6), &FitOptions::default()).unwrap();
        let a = fit.params[0].unwrap();
        let b = fit.params[5].unwrap();
        assert!((a.discrimination - b.discrimination).abs() < 1e-9);
        assert!((a.difficulty - b.difficulty).abs() < 1e-9);
    }

    #[test]
    fn standardize_reference_and_constant() {
        let z = standardize(&[1.0, 2.0, 3.0, 10.0], &[true, true, true, false]).unwrap();
        assert!(crate::stats::mean(&z[..3]).abs() < 1e-12);
        assert!((crate::stats::sd_sample(&z[..3]) - 1.0).abs() < 1e-12);
        assert!(matches!(standardize(&[2.0, 2.0], &[true, true]), Err(Error::ZeroVariance(_))));
    }

    fn equal_items(m: usize) -> ItemParams {
        ItemParams {
            items: (0..m).map(|j| format!("i{j}")).collect(),
            params: vec![Some(Item { discrimination: 1.3, difficulty: 0.2 }); m],
            iterations: 0,
            log_likelihood: 0.0,
            dropped: vec![],
        }
    }

    #[test]
    fn eap_increases_with_number_correct() {
        let m = 8;
        let items = equal_items(m);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=m {
            let row: Vec<Option<bool>> = (0..m).map(|j| Some(j < k)).collect();
            let s = eap_score(&matrix(1, row, m), &items)[0].ability;
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn mirror_patterns_are_symmetric() {
        let names: Vec<String> = (0..4).map(|j| format!("i{j}")).collect();
        let items = ItemParams {
            items: names,
            params: [-1.5, -0.5, 0.5, 1.5]
                .iter()
                .map(|b| Some(Item { discrimination: 1.1, difficulty: *b }))
                .collect(),
            iterations: 0,
            log_likelihood: 0.0,
            dropped: vec![],
        };
        let row = vec![Some(true), Some(true), Some(false), Some(true)];
        // mirror: reverse item order and flip responses
        let mirror: Vec<Option<bool>> = row.iter().rev().map(|u| u.map(|v| !v)).collect();
        let a = eap_score(&matrix(1, row, 4), &items)[0].ability;
        let b = eap_score(&matrix(1, mirror, 4), &items)[0].ability;
        assert!((a + b).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn eap_invariant_to_item_order(pattern in proptest::collection::vec(any::<Option<bool>>(), 6)) {
            let names: Vec<String> = (0..6).map(|j| format!("i{j}")).collect();
            let params: Vec<Option<Item>> = (0..6)
                .map(|j| Some(Item { discrimination: 0.6 + 0.2 * j as f64, difficulty: -1.0 + 0.35 * j as f64 }))
                .collect();
            let items = ItemParams { items: names.clone(), params, iterations: 0, log_likelihood: 0.0, dropped: vec![] };
            let a = eap_score(&ResponseMatrix::new(vec!["r".into()], names.clone(), pattern.clone()).unwrap(), &items)[0];
            let perm = [3usize, 0, 5, 1, 4, 2];
            let names2: Vec<String> = perm.iter().map(|&j| names[j].clone()).collect();
            let pat2: Vec<Option<bool>> = perm.iter().map(|&j| pattern[j]).collect();
            let b = eap_score(&ResponseMatrix::new(vec!["r".into()], names2, pat2).unwrap(), &items)[0];
            prop_assert!((a.ability - b.ability).abs() < 1e-12);
            prop_assert!(a.posterior_sd > 0.0);
        }
    }
}
