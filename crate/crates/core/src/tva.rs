//! Teacher value added from a repeated cross-section of pupils: residualize
//! scores, split residual variance into persistent teacher, teacher-year and
//! pupil parts, and shrink teacher means by their reliability.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_ols, Design, SeKind};
use crate::rng::Seeder;
use crate::stats::{average_ranks, mean, pearson, var_pop};

/// One pupil-subject score with its teacher and controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvaObs {
    pub teacher: usize,
    pub round: u8,
    pub school: usize,
    /// Subject-grade cell; fixed effects and lag slopes vary by cell and round.
    pub cell: usize,
    pub lag_mean: f64,
    pub score: f64,
}

/// How year pairs are weighted in the persistent-variance covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairWeight {
    #[default]
    Sum,
    Min,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TvaOptions {
    pub pair_weight: PairWeight,
    /// Persistent teacher variance to use when only one round is available.
    pub theta_var_fallback: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherYear {
    pub teacher: usize,
    pub round: u8,
    pub n: usize,
    pub mean_residual: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvaComponents {
    /// Raw covariance estimate; may be negative.
    pub theta_var: f64,
    /// Residual identity term; may be negative.
    pub eta_var: f64,
    pub eps_var: f64,
    pub total_var: f64,
    pub years: Vec<TeacherYear>,
    /// The persistent variance came from configuration, not the data.
    pub theta_from_config: bool,
}

#[derive(Debug, Clone)]
pub struct TvaFit {
    pub residuals: Vec<f64>,
    pub components: TvaComponents,
}

fn weighted_cov(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let ma = a.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let mb = b.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), w)| w * (x - ma) * (y - mb))
        .sum::<f64>()
        / sw
}

/// Residualize on cell-round effects, lag slopes by cell-round and school
/// effects, then estimate variance components.
pub fn fit_tva_model(obs: &[TvaObs], opts: &TvaOptions) -> Result<TvaFit> {
    if obs.is_empty() {
        return Err(Error::EmptySample);
    }
    let cell_round: Vec<(usize, u8)> = obs.iter().map(|o| (o.cell, o.round)).collect();
    let codes: Vec<String> = cell_round.iter().map(|(c, r)| format!("{c}_{r}")).collect();
    let schools: Vec<usize> = obs.iter().map(|o| o.school).collect();
    let lags: Vec<f64> = obs.iter().map(|o| o.lag_mean).collect();
    let design = Design::new(obs.iter().map(|o| o.score).collect())
        .fixed_effect("cell_round", &codes)
        .fixed_effect("school", &schools)
        .slopes_by("lag", &lags, &codes);
    let fit = fit_ols(&design, SeKind::Classical)?;
    let v = fit.residuals;
    let components = components_from_residuals(obs, &v, opts)?;
    Ok(TvaFit {
        residuals: v,
        components,
    })
}

pub fn components_from_residuals(obs: &[TvaObs], v: &[f64], opts: &TvaOptions) -> Result<TvaComponents> {
    let mut groups: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for (i, o) in obs.iter().enumerate() {
        groups.entry((o.teacher, o.round)).or_default().push(i);
    }
    let mut within = Vec::with_capacity(v.len());
    let mut years = Vec::new();
    for (&(teacher, round), idx) in &groups {
        let m = idx.iter().map(|&i| v[i]).sum::<f64>() / idx.len() as f64;
        within.extend(idx.iter().map(|&i| v[i] - m));
        years.push(TeacherYear {
            teacher,
            round,
            n: idx.len(),
            mean_residual: m,
            precision: 0.0,
        });
    }
    let total_var = var_pop(v);
    // Within teacher-year spread, with one degree of freedom per class spent
    // on its mean; the population variance is short by eps/n per class and
    // that shortfall would land in eta.
    let dof = within.len().saturating_sub(groups.len());
    let eps_var = if dof == 0 {
        0.0
    } else {
        within.iter().map(|x| x * x).sum::<f64>() / dof as f64
    };

    // pairs of consecutive rounds for the same teacher
    let (mut a, mut b, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for pair in years.windows(2) {
        let (p, q) = (&pair[0], &pair[1]);
        if p.teacher == q.teacher && q.round == p.round + 1 {
            a.push(q.mean_residual);
            b.push(p.mean_residual);
            w.push(match opts.pair_weight {
                PairWeight::Sum => (p.n + q.n) as f64,
                PairWeight::Min => p.n.min(q.n) as f64,
                PairWeight::Product => (p.n * q.n) as f64,
            });
        }
    }
    let rounds: std::collections::BTreeSet<u8> = obs.iter().map(|o| o.round).collect();
    let (theta_var, theta_from_config) = if rounds.len() < 2 || a.len() < 2 {
        match opts.theta_var_fallback {
            Some(t) => (t, true),
            None => return Err(Error::SingleRound),
        }
    } else {
        (weighted_cov(&a, &b, &w), false)
    };
    let eta_var = total_var - theta_var - eps_var;
    let eta_used = eta_var.max(0.0);
    for y in &mut years {
        let den = eta_used + eps_var / y.n as f64;
        y.precision = 1.0 / den.max(f64::MIN_POSITIVE);
    }
    Ok(TvaComponents {
        theta_var,
        eta_var,
        eps_var,
        total_var,
        years,
        theta_from_config,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvaEstimate {
    pub teacher: usize,
    pub value_added: f64,
    /// Precision-weighted mean of the teacher's yearly residual means.
    pub mean_residual: f64,
    pub reliability: f64,
    pub years: usize,
    /// The persistent variance was non-positive and was clamped to zero.
    pub clamped: bool,
}

pub fn eb_value_added(c: &TvaComponents) -> Vec<TvaEstimate> {
    let theta = c.theta_var.max(0.0);
    let clamped = c.theta_var <= 0.0;
    let mut by: BTreeMap<usize, Vec<&TeacherYear>> = BTreeMap::new();
    for y in &c.years {
        by.entry(y.teacher).or_default().push(y);
    }
    by.into_iter()
        .map(|(teacher, ys)| {
            let sh: f64 = ys.iter().map(|y| y.precision).sum();
            let vbar = ys.iter().map(|y| y.precision * y.mean_residual).sum::<f64>() / sh;
            let reliability = if theta == 0.0 { 0.0 } else { theta / (theta + 1.0 / sh) };
            TvaEstimate {
                teacher,
                value_added: vbar * reliability,
                mean_residual: vbar,
                reliability,
                years: ys.len(),
                clamped,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    pub p_value: f64,
    pub shuffles: usize,
}

pub const RANK_SHUFFLES: usize = 10_000;

/// Spearman correlation with a two-sided permutation p-value.
pub fn rank_corr(x: &[f64], y: &[f64], shuffles: usize, seed: u64) -> Result<RankCorrelation> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Invalid("rank correlation needs two equal-length samples of size >= 2".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    if var_pop(&rx) == 0.0 || var_pop(&ry) == 0.0 {
        return Err(Error::ZeroVariance("rank correlation input".into()));
    }
    let rho = pearson(&rx, &ry);
    let seeder = Seeder::new(seed);
    let hits: usize = (0..shuffles)
        .into_par_iter()
        .map(|s| {
            let mut perm = ry.clone();
            perm.shuffle(&mut seeder.indexed("rank-corr", s as u64));
            usize::from(pearson(&rx, &perm).abs() >= rho.abs() - 1e-12)
        })
        .sum();
    Ok(RankCorrelation {
        rho,
        p_value: (1 + hits) as f64 / (1 + shuffles) as f64,
        shuffles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub dominates: bool,
    /// Largest `F_a(y) - F_b(y)` over pooled points, floored at 0.
    pub max_violation: f64,
}

/// Weak first-order dominance of `a` over `b`.
pub fn fosd_check(a: &[f64], b: &[f64]) -> Result<Dominance> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], y: f64| s.partition_point(|v| *v <= y) as f64 / s.len() as f64;
    let worst = sa
        .iter()
        .chain(&sb)
        .map(|&y| cdf(&sa, y) - cdf(&sb, y))
        .fold(0.0f64, f64::max);
    Ok(Dominance {
        dominates: worst <= 0.0,
        max_violation: worst,
    })
}

/// Empirical percentile (0..=100) of `value` in `dist`, counting ties as half.
pub fn percentile_of(dist: &[f64], value: f64) -> f64 {
    let below = dist.iter().filter(|v| **v < value).count() as f64;
    let ties = dist.iter().filter(|v| **v == value).count() as f64;
    100.0 * (below + 0.5 * ties) / dist.len() as f64
}

/// Empirical quantile by linear interpolation, `p` in 0..=100.
pub fn value_at_percentile(dist: &[f64], p: f64) -> f64 {
    let mut s = dist.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Percentile reached by a teacher starting at percentile `from` whose value
/// added rises by `shift`.
pub fn percentile_after_shift(dist: &[f64], from: f64, shift: f64) -> f64 {
    percentile_of(dist, value_at_percentile(dist, from) + shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TvaSimConfig {
    pub schools: usize,
    pub teachers_per_school: usize,
    pub pupils_per_year: usize,
    pub rounds: u8,
    pub cells: usize,
    pub theta_var: f64,
    pub eta_var: f64,
    pub eps_var: f64,
    pub school_sd: f64,
    pub lag_coef: f64,
}

impl Default for TvaSimConfig {
    fn default() -> Self {
        Self {
            schools: 164,
            teachers_per_school: 8,
            pupils_per_year: 40,
            rounds: 2,
            cells: 15,
            theta_var: 0.04,
            eta_var: 0.01,
            eps_var: 0.25,
            school_sd: 0.2,
            lag_coef: 0.5,
        }
    }
}

/// Simulated panel with known persistent teacher effects (indexed by teacher).
pub fn simulate_tva_panel(cfg: &TvaSimConfig, seed: u64) -> (Vec<TvaObs>, Vec<f64>) {
    let mut rng = Seeder::new(seed).stream("tva-panel");
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let mut theta = Vec::new();
    let mut obs = Vec::new();
    let cell_fe: Vec<f64> = (0..cfg.cells * cfg.rounds as usize).map(|_| 0.3 * n01.sample(&mut rng)).collect();
    for s in 0..cfg.schools {
        let school_fx = cfg.school_sd * n01.sample(&mut rng);
        for k in 0..cfg.teachers_per_school {
            let j = theta.len();
            let th = cfg.theta_var.sqrt() * n01.sample(&mut rng);
            theta.push(th);
            let cell = (s + k) % cfg.cells;
            for r in 0..cfg.rounds {
                let eta = cfg.eta_var.sqrt() * n01.sample(&mut rng);
                let lag = 0.5 * n01.sample(&mut rng);
                let mu = cell_fe[cell * cfg.rounds as usize + r as usize];
                for _ in 0..cfg.pupils_per_year {
                    let eps = cfg.eps_var.sqrt() * n01.sample(&mut rng);
                    obs.push(TvaObs {
                        teacher: j,
                        round: r + 1,
                        school: s,
                        cell,
                        lag_mean: lag,
                        score: cfg.lag_coef * lag + mu + school_fx + th + eta + eps,
                    });
                }
            }
        }
    }
    (obs, theta)
}

/// Centered mean of EB estimates (for the mean-zero check).
pub fn mean_value_added(est: &[TvaEstimate]) -> f64 {
    mean(&est.iter().map(|e| e.value_added).collect::<Vec<_>>())
}
