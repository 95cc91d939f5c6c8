//! Acceptance run: every criterion prints one PASS/FAIL line with its detail
//! and runtime, and the test fails if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use pfp_core::awards::award_ledger;
use pfp_core::data::Panel;
use pfp_core::estimators::specs::{fit_lmm_pupil, LagSlopes, Labels, PreparedSpec, SpecName, SpecOptions, T_E};
use pfp_core::inference::perms::{Dimension, PermutationSet};
use pfp_core::inference::power::{power_harness, PowerConfig, PowerTest};
use pfp_core::inference::ri::{ci_invert, ri_pvalue, GridSpec, StatKind};
use pfp_core::io::{file_digest, RunConfig};
use pfp_core::irt::{eap_score, fit_2pl, simulate_responses, FitOptions, Item, ResponseMatrix};
use pfp_core::metric::{assign_pseudo_bins, bn_scores, stream_cdf, within_bin_ranks, BaselineBinning, MetricConfig};
use pfp_core::pipeline::run_pipeline;
use pfp_core::rng::Seeder;
use pfp_core::theory::{decompose_effects, payoff_gap, selection_boundary, ContractMenu, TeachArm, TeacherType, TypeDistribution};
use pfp_core::tva::{eb_value_added, fit_tva_model, rank_corr, simulate_tva_panel, TvaOptions, TvaSimConfig};
use pfp_core::world::{gen_world, simulate_outcomes, AdvertisedCounts, EffectSpec, ExperiencedCounts, WorldConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn null_menu() -> ContractMenu {
    ContractMenu::default().without_incentive()
}

fn study_panel(cfg: &WorldConfig, effects: &EffectSpec, menu: &ContractMenu, seed: u64) -> Panel {
    let s = Seeder::new(seed);
    let world = gen_world(cfg, menu, &TypeDistribution::default(), s.child("world", 0).master()).unwrap();
    simulate_outcomes(&world, effects, menu, s.child("outcomes", 0).master()).unwrap()
}

// 1 ---------------------------------------------------------------------

fn golden_examples() -> Outcome {
    const B: usize = 10;
    let cdf = |groups: &[usize]| {
        let labels: Vec<usize> = groups.iter().map(|g| BaselineBinning::group(B, *g)).collect();
        stream_cdf(&labels, B).unwrap()
    };
    let group = |l: usize| BaselineBinning::group(B, l);

    // Five pupils with baseline groups 1, 3, 6, 9, 10; the district contest
    // places them 1st, 7th, 4th, 4th and 1st in their pseudo-bins.
    let endline = [Some(0.3), Some(2.0), Some(-1.0), Some(1.1), Some(-0.2)];
    let bins = assign_pseudo_bins(&endline, &cdf(&[1, 3, 6, 9, 10]));
    let groups: Vec<usize> = bins.iter().map(|&l| group(l)).collect();
    if groups != [6, 1, 10, 3, 9] {
        return Err(format!("example one placed pupils in groups {groups:?}"));
    }
    let mut entries: Vec<(usize, Option<f64>)> = bins.iter().zip(&endline).map(|(b, s)| (*b, *s)).collect();
    let mut others = |label: usize, better: usize, worse: usize, pivot: f64| {
        for k in 0..better {
            entries.push((label, Some(pivot + 1.0 + k as f64)));
        }
        for k in 0..worse {
            entries.push((label, Some(pivot - 1.0 - k as f64)));
        }
    };
    others(bins[1], 0, 5, 2.0);
    others(bins[3], 6, 3, 1.1);
    others(bins[0], 3, 4, 0.3);
    others(bins[4], 3, 2, -0.2);
    others(bins[2], 0, 8, -1.0);
    let ranks = within_bin_ranks(&entries);
    let sum_one: usize = ranks[..5].iter().map(|r| r.rank).sum();

    // Second class: one absent pupil, ranked last of 40 in its pseudo-bin.
    let endline = [Some(1.0), None, Some(0.4), Some(0.9), Some(0.1)];
    let bins = assign_pseudo_bins(&endline, &cdf(&[1, 3, 3, 4, 5]));
    let groups: Vec<usize> = bins.iter().map(|&l| group(l)).collect();
    if groups != [1, 5, 3, 3, 4] {
        return Err(format!("example two placed pupils in groups {groups:?}"));
    }
    let mut entries: Vec<(usize, Option<f64>)> = bins.iter().zip(&endline).map(|(b, s)| (*b, *s)).collect();
    let mut add = |label: usize, scores: Vec<f64>| entries.extend(scores.into_iter().map(|s| (label, Some(s))));
    add(bins[0], vec![0.5, 0.2]);
    add(bins[2], vec![2.0, 1.9, 1.8, 0.8, 0.7, 0.0]);
    add(bins[4], (0..7).map(|k| 1.0 + k as f64).chain([-1.0]).collect());
    add(bins[1], (0..39).map(|k| -3.0 + 0.1 * k as f64).collect());
    let ranks = within_bin_ranks(&entries);
    let sum_two: usize = ranks[..5].iter().map(|r| r.rank).sum();
    let absent = ranks[1];

    ensure(
        sum_one == 17 && sum_two == 60 && absent.rank == 40 && absent.size == 40,
        format!("rank sums {sum_one} and {sum_two}, absent pupil {} of {}", absent.rank, absent.size),
    )
}

// 2 ---------------------------------------------------------------------

/// Default learning process with every teacher contributing the same.
fn identical_teachers() -> EffectSpec {
    EffectSpec {
        teacher_sd: 0.0,
        teacher_year_sd: 0.0,
        ..Default::default()
    }
}

fn bn_fairness() -> Outcome {
    const STRATA: usize = 5;
    let cfg = WorldConfig::default();
    let worlds = 500usize.div_ceil(cfg.districts);
    let metric = MetricConfig::default();
    // (mean baseline bin of the teacher's pupils, teacher score)
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for w in 0..worlds {
        let panel = study_panel(&cfg, &identical_teachers(), &null_menu(), 7000 + w as u64);
        for round in [1u8, 2] {
            let out = bn_scores(&panel, round, &metric).map_err(fail)?;
            let mut bins: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
            for p in &out.pupils {
                if let Some(t) = p.teacher {
                    let e = bins.entry(t).or_default();
                    e.0 += p.pseudo_bin as f64;
                    e.1 += 1.0;
                }
            }
            for t in &out.teachers {
                let (s, n) = bins[&t.teacher];
                rows.push((s / n, t.score));
            }
        }
    }
    let mut comp: Vec<f64> = rows.iter().map(|r| r.0).collect();
    comp.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..STRATA).map(|k| comp[k * comp.len() / STRATA]).collect();
    let mut sums = [(0.0, 0usize); STRATA];
    for &(c, s) in &rows {
        let k = cuts.iter().filter(|&&q| c >= q).count();
        sums[k].0 += s;
        sums[k].1 += 1;
    }
    let global = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let means: Vec<f64> = sums.iter().map(|(s, n)| s / *n as f64).collect();
    let worst = means.iter().map(|m| (m - global).abs()).fold(0.0, f64::max);
    ensure(
        worst <= 0.02,
        format!(
            "{} districts, {} teacher-rounds, global mean {global:.4}, stratum means {:?}, max gap {worst:.4}",
            worlds * cfg.districts,
            rows.len(),
            means.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    )
}

// 3 ---------------------------------------------------------------------

fn monotone_invariance() -> Outcome {
    let cfg = WorldConfig {
        districts: 2,
        schools: 10,
        advertised_counts: AdvertisedCounts { p4p: 2, fw: 2, mixed: 2 },
        experienced_counts: ExperiencedCounts { p4p: 5, fw: 5 },
        potential_applicants: 60,
        ..Default::default()
    };
    let panel = study_panel(&cfg, &EffectSpec::default(), &ContractMenu::default(), 31);
    let mut warped = panel.clone();
    for o in warped.observations.iter_mut() {
        o.score = o.score.map(|x| 2.0 * x.exp() + x.powi(3) - 4.0);
    }
    let metric = MetricConfig::default();
    let menu = ContractMenu::default();
    let (mut pupils, mut teachers, mut awards) = (0, 0, 0);
    for round in [1u8, 2] {
        let a = bn_scores(&panel, round, &metric).map_err(fail)?;
        let b = bn_scores(&warped, round, &metric).map_err(fail)?;
        if a != b {
            return Err(format!("round {round}: ranks or teacher scores moved"));
        }
        let la = award_ledger(&panel, round, &a.teachers, 0.2, &menu).map_err(fail)?;
        let lb = award_ledger(&warped, round, &b.teachers, 0.2, &menu).map_err(fail)?;
        if la != lb {
            return Err(format!("round {round}: composites or awards moved"));
        }
        pupils += a.pupils.len();
        teachers += a.teachers.len();
        awards += la.rows.iter().filter(|r| r.award).count();
    }
    Ok(format!("{pupils} pupil ranks, {teachers} teacher scores, {awards} awards identical"))
}

// 4 ---------------------------------------------------------------------

fn ri_size() -> Outcome {
    let sims = 1000;
    let ks_cfg = PowerConfig {
        deltas: vec![0.0],
        tests: vec![PowerTest::Ks],
        n_sims: sims,
        draws: 199,
        ..Default::default()
    };
    let table = power_harness(&ks_cfg, &null_menu(), &TypeDistribution::default(), 404).map_err(fail)?;
    let ks_rate = table.power(PowerTest::Ks, 0.0).unwrap();

    // Identical visit schedules keep the set of measured teacher-rounds
    // independent of the experienced assignment.
    let world = WorldConfig {
        visits_p4p: [1, 1],
        visits_fw: [1, 1],
        ..Default::default()
    };
    let seeder = Seeder::new(405);
    let mut rejections = 0;
    for s in 0..sims as u64 {
        let panel = study_panel(&world, &EffectSpec::default(), &null_menu(), seeder.child("world", s).master());
        let spec = PreparedSpec::new(SpecName::TeacherInputs, &panel, &SpecOptions::default()).map_err(fail)?;
        let observed = Labels::observed(&panel);
        let perms = PermutationSet::new(Dimension::Experienced, &observed.experienced, 199, seeder.child("perms", s).master())
            .map_err(fail)?;
        let r = ri_pvalue(|l| spec.fit(&observed.with_experienced(l))?.stat(T_E), &perms, StatKind::StudentizedZ)
            .map_err(fail)?;
        if r.p_value <= 0.05 {
            rejections += 1;
        }
    }
    let z_rate = rejections as f64 / sims as f64;
    let inside = |r: f64| (0.035..=0.065).contains(&r);
    ensure(
        inside(ks_rate) && inside(z_rate),
        format!("rejection at 5%: KS on applicants {ks_rate:.3}, experienced-arm z {z_rate:.3} ({sims} sims each)"),
    )
}

// 5 ---------------------------------------------------------------------

/// Every distinct arrangement of `labels`, by brute force over all
/// `k^n` label vectors.
fn arrangements(labels: &[u8]) -> Vec<Vec<u8>> {
    let k = *labels.iter().max().unwrap() as usize + 1;
    let n = labels.len();
    let mut want = vec![0; k];
    for &l in labels {
        want[l as usize] += 1;
    }
    let mut out = Vec::new();
    for code in 0..k.pow(n as u32) {
        let v: Vec<u8> = (0..n).map(|i| ((code / k.pow(i as u32)) % k) as u8).collect();
        let mut c = vec![0; k];
        for &l in &v {
            c[l as usize] += 1;
        }
        if c == want {
            out.push(v);
        }
    }
    out
}

fn diff_means(y: &[f64], labels: &[u8], a: u8, b: u8) -> f64 {
    let mean = |g: u8| {
        let v: Vec<f64> = y.iter().zip(labels).filter(|(_, l)| **l == g).map(|(y, _)| *y).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    mean(a) - mean(b)
}

fn brute_p(observed: f64, all: &[f64]) -> f64 {
    all.iter().filter(|s| s.abs() >= observed.abs()).count() as f64 / all.len() as f64
}

fn exact_small_cases() -> Outcome {
    let mut rng = Seeder::new(55).stream("small-designs");
    let designs: [&[u8]; 5] = [&[1, 0, 1, 0], &[1, 1, 0, 0, 0], &[0, 1, 1, 0, 1, 0], &[1, 0, 0, 1, 0, 0], &[0, 1, 2, 2, 1, 0]];
    let (mut p_checks, mut ci_checks, mut worst_p, mut worst_ci) = (0, 0, 0.0f64, 0.0f64);
    for rep in 0..20 {
        for obs in designs {
            let y: Vec<f64> = obs.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
            let set = PermutationSet::new(Dimension::Experienced, obs, 10, rep).map_err(fail)?;
            let all = arrangements(obs);
            if !set.exhaustive || set.members.len() != all.len() {
                return Err(format!("design {obs:?}: {} members, brute force has {}", set.members.len(), all.len()));
            }
            let stat = |l: &[u8]| diff_means(&y, l, 1, 0);
            let r = ri_pvalue(|l| Ok(stat(l)), &set, StatKind::Raw).map_err(fail)?;
            let values: Vec<f64> = all.iter().map(|l| stat(l)).collect();
            worst_p = worst_p.max((r.p_value - brute_p(stat(obs), &values)).abs());
            p_checks += 1;

            if obs.contains(&2) {
                continue;
            }
            // Additive effect: remove delta from units treated under the
            // observed assignment, then re-test.
            let treated: Vec<f64> = obs.iter().map(|&l| f64::from(l)).collect();
            let shifted = |d: f64, l: &[u8]| {
                let yd: Vec<f64> = y.iter().zip(&treated).map(|(v, t)| v - d * t).collect();
                diff_means(&yd, l, 1, 0)
            };
            let center = stat(obs);
            for alpha in [0.1, 0.25] {
                let grid = GridSpec {
                    tol: 0.0,
                    alpha,
                    ..GridSpec::new(center - 50.0, center + 50.0)
                };
                let ci = ci_invert(|d, l| Ok(shifted(d, l)), &set, center, grid).map_err(fail)?;
                let (lo, hi) = brute_interval(&all, obs, center, (grid.lo, grid.hi), alpha, &shifted);
                worst_ci = worst_ci.max((ci.lo - lo).abs()).max((ci.hi - hi).abs());
                ci_checks += 1;
            }
        }
    }
    ensure(
        worst_p <= 1e-15 && worst_ci <= 1e-9,
        format!("{p_checks} p-values (max gap {worst_p:e}), {ci_checks} intervals (max endpoint gap {worst_ci:e})"),
    )
}

/// The acceptance interval around `center` from the piecewise-constant
/// brute-force p-value: its endpoints are the crossings of |T_l(d)| and
/// |T_obs(d)|, each linear in d. A side whose range edge is accepted is
/// reported at that edge.
fn brute_interval(
    all: &[Vec<u8>],
    obs: &[u8],
    center: f64,
    range: (f64, f64),
    alpha: f64,
    stat: &dyn Fn(f64, &[u8]) -> f64,
) -> (f64, f64) {
    let line = |l: &[u8]| {
        let a = stat(0.0, l);
        (a, a - stat(1.0, l))
    };
    let (a0, b0) = line(obs);
    let mut cuts = Vec::new();
    for l in all {
        let (a, b) = line(l);
        for (num, den) in [(a0 - a, b0 - b), (a0 + a, b0 + b)] {
            if den.abs() > 1e-12 {
                cuts.push(num / den);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let accept = |d: f64| {
        let vals: Vec<f64> = all.iter().map(|l| stat(d, l)).collect();
        brute_p(stat(d, obs), &vals) > alpha
    };
    let hi = if accept(range.1) {
        range.1
    } else {
        cuts.iter()
            .zip(cuts.iter().skip(1).map(|c| Some(*c)).chain([None]))
            .filter(|(c, _)| **c > center)
            .find(|(c, next)| !accept(next.map_or(**c + 1.0, |n| 0.5 * (**c + n))))
            .map(|(c, _)| *c)
            .unwrap_or(range.1)
    };
    let lo = if accept(range.0) {
        range.0
    } else {
        cuts.iter()
            .rev()
            .zip(cuts.iter().rev().skip(1).map(|c| Some(*c)).chain([None]))
            .filter(|(c, _)| **c < center)
            .find(|(c, prev)| !accept(prev.map_or(**c - 1.0, |p| 0.5 * (**c + p))))
            .map(|(c, _)| *c)
            .unwrap_or(range.0)
    };
    (lo, hi)
}

// 6 ---------------------------------------------------------------------

fn power_ordering() -> Outcome {
    let cfg = PowerConfig {
        n_sims: 500,
        ..Default::default()
    };
    let table = power_harness(&cfg, &null_menu(), &TypeDistribution::default(), 606).map_err(fail)?;
    let grid = table.ks_vs_ols();
    let bad: Vec<f64> = grid
        .iter()
        .filter(|(_, ks, ols)| (*ks > 0.2 || *ols > 0.2) && ks < ols)
        .map(|g| g.0)
        .collect();
    let shown: Vec<String> = grid.iter().map(|(d, ks, ols)| format!("d={d}: KS {ks:.3} / OLS {ols:.3}")).collect();
    ensure(bad.is_empty(), format!("{}; KS below OLS at {bad:?}", shown.join(", ")))
}

// 7 ---------------------------------------------------------------------

fn estimator_recovery() -> Outcome {
    let tau = 0.15;
    let effects = EffectSpec {
        experienced: tau,
        ..Default::default()
    };
    let worlds = 200;
    let (mut sum, mut covered) = (0.0, 0);
    for w in 0..worlds {
        let panel = study_panel(&WorldConfig::default(), &effects, &ContractMenu::default(), 9100 + w);
        let rep = fit_lmm_pupil(&panel, false, LagSlopes::default()).map_err(fail)?;
        let c = rep.coef(T_E).ok_or("no experienced coefficient")?;
        sum += c.estimate;
        if (c.estimate - tau).abs() <= 1.959964 * c.se {
            covered += 1;
        }
    }
    let bias = sum / worlds as f64 - tau;
    let coverage = covered as f64 / worlds as f64;
    ensure(
        bias.abs() <= 0.02 && (0.93..=0.97).contains(&coverage),
        format!("bias {bias:+.4}, 95% coverage {coverage:.3} over {worlds} worlds"),
    )
}

// 8 ---------------------------------------------------------------------

/// Posterior mean of ability on a dense uniform grid against the N(0, 1) prior.
fn dense_eap(pattern: &[Option<bool>], items: &[Item]) -> f64 {
    let (lo, hi, n) = (-10.0, 10.0, 40_001);
    let h = (hi - lo) / (n - 1) as f64;
    let lls: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = lo + h * i as f64;
            let mut ll = -0.5 * t * t;
            for (r, it) in pattern.iter().zip(items) {
                if let Some(c) = r {
                    let p = it.p_correct(t);
                    ll += if *c { p.ln() } else { (1.0 - p).ln() };
                }
            }
            (t, ll)
        })
        .collect();
    let mx = lls.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s1) = (0.0, 0.0);
    for (t, ll) in lls {
        let w = (ll - mx).exp();
        s0 += w;
        s1 += w * t;
    }
    s1 / s0
}

fn irt_recovery() -> Outcome {
    let (n, m) = (2000, 25);
    let mut rng = Seeder::new(808).stream("irt-recovery");
    let truth: Vec<Item> = (0..m)
        .map(|_| Item {
            discrimination: rng.random_range(0.8..2.0),
            difficulty: rng.random_range(-1.5..1.5),
        })
        .collect();
    let abilities: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = simulate_responses(&mut rng, &abilities, &truth);
    let matrix = ResponseMatrix::new(
        (0..n).map(|i| format!("p{i}")).collect(),
        (0..m).map(|j| format!("i{j}")).collect(),
        data.clone(),
    )
    .map_err(fail)?;
    let fit = fit_2pl(&matrix, &FitOptions::default()).map_err(fail)?;
    let est: Vec<Item> = fit.params.iter().map(|p| p.ok_or("item dropped")).collect::<Result<_, _>>()?;
    let rmse = |f: fn(&Item) -> f64| (truth.iter().zip(&est).map(|(t, e)| (f(t) - f(e)).powi(2)).sum::<f64>() / m as f64).sqrt();
    let rmse_a = rmse(|i| i.discrimination);
    let rmse_b = rmse(|i| i.difficulty);

    let scores = eap_score(&matrix, &fit);
    let eap_gap = (0..n)
        .map(|r| (scores[r].ability - dense_eap(&data[r * m..(r + 1) * m], &est)).abs())
        .fold(0.0, f64::max);
    ensure(
        rmse_a <= 0.15 && rmse_b <= 0.10 && eap_gap <= 1e-4,
        format!("RMSE(a) {rmse_a:.4}, RMSE(b) {rmse_b:.4}, max EAP gap to dense grid {eap_gap:.2e}"),
    )
}

// 9 ---------------------------------------------------------------------

fn tva_recovery() -> Outcome {
    let cfg = TvaSimConfig::default();
    let sims = 200;
    let (mut comps, mut rhos) = ([0.0; 3], Vec::new());
    let mut ok = true;
    for seed in 0..sims {
        let (obs, theta) = simulate_tva_panel(&cfg, 900 + seed);
        let fit = fit_tva_model(&obs, &TvaOptions::default()).map_err(fail)?;
        let c = &fit.components;
        for (acc, v) in comps.iter_mut().zip([c.theta_var, c.eta_var, c.eps_var]) {
            *acc += v / sims as f64;
        }
        let eb = eb_value_added(c);
        let va: Vec<f64> = eb.iter().map(|e| e.value_added).collect();
        let truth: Vec<f64> = eb.iter().map(|e| theta[e.teacher]).collect();
        rhos.push(rank_corr(&va, &truth, 0, seed).map_err(fail)?.rho);
        ok &= eb.iter().all(|e| (0.0..=1.0).contains(&e.reliability));
    }
    let errs: Vec<f64> = comps
        .iter()
        .zip([cfg.theta_var, cfg.eta_var, cfg.eps_var])
        .map(|(est, truth)| (est - truth) / truth)
        .collect();
    let rho = rhos.iter().sum::<f64>() / sims as f64;
    let rho_min = rhos.iter().cloned().fold(1.0, f64::min);
    ok &= errs.iter().all(|e| e.abs() <= 0.3) && rho >= 0.8;
    // reliability stays in the unit interval in thin and degenerate panels too
    for (pupils, theta_var) in [(1, 0.04), (3, 0.0), (200, 0.5)] {
        let cfg = TvaSimConfig {
            pupils_per_year: pupils,
            theta_var,
            schools: 30,
            ..Default::default()
        };
        let (obs, _) = simulate_tva_panel(&cfg, 77);
        let fit = fit_tva_model(&obs, &TvaOptions::default()).map_err(fail)?;
        ok &= eb_value_added(&fit.components).iter().all(|e| (0.0..=1.0).contains(&e.reliability));
    }
    ensure(
        ok,
        format!(
            "mean over {sims} panels: theta {:+.1}%, eta {:+.1}%, eps {:+.1}%; Spearman mean {rho:.3} (min {rho_min:.3})",
            100.0 * errs[0],
            100.0 * errs[1],
            100.0 * errs[2]
        ),
    )
}

// 10 --------------------------------------------------------------------

/// Indifference point by scanning a fine grid for the first sign change of
/// the payoff gap, interpolated linearly inside the bracketing step.
fn grid_boundary(arm: TeachArm, theta: f64, menu: &ContractMenu, dist: &TypeDistribution) -> f64 {
    let points = 10_000;
    let gap = |tau: f64| payoff_gap(TeacherType { tau, theta }, arm, menu);
    let at = |i: usize| dist.tau_lo + (dist.tau_hi - dist.tau_lo) * i as f64 / (points - 1) as f64;
    if gap(at(0)) >= 0.0 {
        return dist.tau_lo;
    }
    for i in 1..points {
        let (g0, g1) = (gap(at(i - 1)), gap(at(i)));
        if g1 >= 0.0 {
            return at(i - 1) + (at(i) - at(i - 1)) * (-g0) / (g1 - g0);
        }
    }
    dist.tau_hi
}

fn theory_model() -> Outcome {
    let menu = ContractMenu::default();
    let dist = TypeDistribution::default();
    let d = decompose_effects(&menu, &dist, 2_000_000, 1010).map_err(fail)?;
    let terms = [d.selection_fw, d.selection_p4p, d.incentive_fw_applicants, d.incentive_p4p_applicants];
    let negative = terms.iter().all(|t| t.mean + 3.0 * t.se < 0.0);
    let mut worst = 0.0f64;
    let mut n = 0;
    for arm in [TeachArm::Fw, TeachArm::P4p] {
        for k in 0..=40 {
            let theta = dist.theta_lo + (dist.theta_hi - dist.theta_lo) * k as f64 / 40.0;
            let b = selection_boundary(arm, theta, &menu, &dist).map_err(fail)?;
            worst = worst.max((b - grid_boundary(arm, theta, &menu, &dist)).abs());
            n += 1;
        }
    }
    ensure(
        negative && worst <= 1e-4,
        format!(
            "differences {:?}, {n} boundaries within {worst:.1e} of the grid",
            terms.iter().map(|t| format!("{:.3}±{:.3}", t.mean, t.se)).collect::<Vec<_>>()
        ),
    )
}

// 11 --------------------------------------------------------------------

fn bundle(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, file_digest(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/acceptance.toml");
    let base = RunConfig::load(&path).map_err(fail)?;
    let tmp = tempfile::tempdir().map_err(fail)?;
    let run = |name: &str, threads: usize| -> Result<BTreeMap<String, String>, String> {
        let cfg = RunConfig {
            out: tmp.path().join(name),
            ..base.clone()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(fail)?;
        pool.install(|| run_pipeline(&cfg)).map_err(fail)?;
        let mut b = bundle(&cfg.out);
        // the saved config records its own output directory
        b.remove("config.toml");
        Ok(b)
    };
    let first = run("one-a", 1)?;
    let second = run("one-b", 1)?;
    let wide = run("eight", 8)?;
    let differ = |a: &BTreeMap<String, String>, b: &BTreeMap<String, String>| -> Vec<String> {
        a.keys().chain(b.keys()).filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
    };
    let (d1, d8) = (differ(&first, &second), differ(&first, &wide));
    ensure(
        d1.is_empty() && d8.is_empty() && !first.is_empty(),
        format!("{} files; differing across runs {d1:?}, across 1 vs 8 threads {d8:?}", first.len()),
    )
}

// -----------------------------------------------------------------------

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { name: "golden worked examples", budget: secs(1), run: golden_examples },
        Criterion { name: "tournament fairness", budget: secs(120), run: bn_fairness },
        Criterion { name: "monotone invariance", budget: secs(5), run: monotone_invariance },
        Criterion { name: "randomization test size", budget: secs(600), run: ri_size },
        Criterion { name: "exact small-case equivalence", budget: secs(10), run: exact_small_cases },
        Criterion { name: "KS versus OLS power", budget: secs(900), run: power_ordering },
        Criterion { name: "pupil learning estimator recovery", budget: secs(1200), run: estimator_recovery },
        Criterion { name: "IRT recovery", budget: secs(120), run: irt_recovery },
        Criterion { name: "teacher value added", budget: secs(300), run: tva_recovery },
        Criterion { name: "occupational choice model", budget: secs(60), run: theory_model },
        Criterion { name: "pipeline determinism", budget: secs(600), run: determinism },
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (i, c) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let took = start.elapsed();
        let (ok, detail) = match res {
            Ok(d) if took <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(d) => (false, d),
        };
        println!(
            "criterion {id:>2} {}: {} ({detail}) [{:.1}s]",
            c.name,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
        if !ok {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
