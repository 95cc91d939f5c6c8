//! Regression estimators: weighted least squares with classical, HC1 or
//! cluster-robust errors, and a random-intercept model fitted by maximum
//! likelihood.

pub mod applicants;
pub mod mixed;
pub mod specs;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{independent_columns, submatrix, Cholesky};

pub use applicants::{applicant_pool_tests, PoolMode};
pub use mixed::fit_random_intercept;

/// Relative pivot tolerance for the collinearity screen.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Intercept,
    /// A coefficient that is tested; dropping it for collinearity is an error.
    Interest,
    Control,
    /// Absorbed indicator; collinear ones are dropped silently and not reported.
    FixedEffect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeKind {
    Classical,
    Hc1,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatKind {
    #[serde(rename = "t")]
    T,
    #[serde(rename = "z")]
    Z,
}

/// Regression design: an outcome and named columns with roles, plus optional
/// weights, cluster ids and random-intercept group ids.
#[derive(Debug, Clone, Default)]
pub struct Design {
    pub y: Vec<f64>,
    pub names: Vec<String>,
    pub roles: Vec<Role>,
    pub cols: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub clusters: Option<Vec<usize>>,
    pub groups: Option<Vec<usize>>,
}

impl Design {
    /// Outcome plus an intercept column.
    pub fn new(y: Vec<f64>) -> Self {
        let n = y.len();
        let mut d = Self {
            y,
            ..Default::default()
        };
        d.push("intercept", Role::Intercept, vec![1.0; n]);
        d
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.cols.len()
    }

    fn push(&mut self, name: &str, role: Role, values: Vec<f64>) {
        assert_eq!(values.len(), self.y.len(), "column {name} has the wrong length");
        self.names.push(name.to_string());
        self.roles.push(role);
        self.cols.push(values);
    }

    pub fn interest(mut self, name: &str, values: Vec<f64>) -> Self {
        self.push(name, Role::Interest, values);
        self
    }

    pub fn control(mut self, name: &str, values: Vec<f64>) -> Self {
        self.push(name, Role::Control, values);
        self
    }

    /// One indicator per level of `codes`; the collinearity screen removes the
    /// redundant one(s).
    pub fn fixed_effect<K: Ord + Clone + std::fmt::Display>(mut self, prefix: &str, codes: &[K]) -> Self {
        let levels: Vec<K> = codes
            .iter()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for lv in levels {
            let col = codes.iter().map(|c| if *c == lv { 1.0 } else { 0.0 }).collect();
            self.push(&format!("{prefix}[{lv}]"), Role::FixedEffect, col);
        }
        self
    }

    /// A control interacted with the levels of a categorical variable: one
    /// slope per level.
    pub fn slopes_by<K: Ord + Clone + std::fmt::Display>(mut self, prefix: &str, values: &[f64], codes: &[K]) -> Self {
        let levels: std::collections::BTreeSet<K> = codes.iter().cloned().collect();
        for lv in levels {
            let col = values
                .iter()
                .zip(codes)
                .map(|(v, c)| if *c == lv { *v } else { 0.0 })
                .collect();
            self.push(&format!("{prefix}[{lv}]"), Role::Control, col);
        }
        self
    }

    pub fn weights(mut self, w: Vec<f64>) -> Self {
        assert_eq!(w.len(), self.y.len());
        self.weights = Some(w);
        self
    }

    pub fn clusters(mut self, c: Vec<usize>) -> Self {
        assert_eq!(c.len(), self.y.len());
        self.clusters = Some(c);
        self
    }

    pub fn groups(mut self, g: Vec<usize>) -> Self {
        assert_eq!(g.len(), self.y.len());
        self.groups = Some(g);
        self
    }

    /// Keep only the rows where `keep` is true.
    pub fn filter_rows(&self, keep: &[bool]) -> Self {
        let pick = |v: &Vec<f64>| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
        let pick_u = |v: &Vec<usize>| v.iter().zip(keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
        Self {
            y: pick(&self.y),
            names: self.names.clone(),
            roles: self.roles.clone(),
            cols: self.cols.iter().map(pick).collect(),
            weights: self.weights.as_ref().map(pick),
            clusters: self.clusters.as_ref().map(pick_u),
            groups: self.groups.as_ref().map(pick_u),
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Nonzero entries of row `i` restricted to `cols`, as (position in `cols`, value).
    fn row_nz(&self, i: usize, cols: &[usize], out: &mut Vec<(usize, f64)>) {
        out.clear();
        for (p, &c) in cols.iter().enumerate() {
            let v = self.cols[c][i];
            if v != 0.0 {
                out.push((p, v));
            }
        }
    }

    /// Weighted cross-products `X'WX`, `X'Wy`, `y'Wy` over the given columns.
    pub(crate) fn cross_products(&self, cols: &[usize]) -> (Vec<f64>, Vec<f64>, f64) {
        let k = cols.len();
        let mut xtx = vec![0.0; k * k];
        let mut xty = vec![0.0; k];
        let mut yty = 0.0;
        let mut nz = Vec::with_capacity(k);
        for i in 0..self.n() {
            let w = self.weights.as_ref().map_or(1.0, |w| w[i]);
            self.row_nz(i, cols, &mut nz);
            let yi = self.y[i];
            yty += w * yi * yi;
            for (a, &(p, vp)) in nz.iter().enumerate() {
                xty[p] += w * vp * yi;
                for &(q, vq) in &nz[..=a] {
                    xtx[p * k + q] += w * vp * vq;
                }
            }
        }
        for p in 0..k {
            for q in 0..p {
                xtx[q * k + p] = xtx[p * k + q];
            }
        }
        (xtx, xty, yty)
    }

    /// Screen collinear columns. Returns kept column indices and dropped names,
    /// or `RankDeficient` when a tested column cannot be kept. Redundant
    /// controls and indicators are dropped and listed.
    pub(crate) fn screen(&self) -> Result<(Vec<usize>, Vec<String>)> {
        let all: Vec<usize> = (0..self.k()).collect();
        let (xtx, _, _) = self.cross_products(&all);
        // Screen order: intercept and absorbed indicators first, then controls,
        // then tested columns, so a tested column is only dropped when it is
        // genuinely explained by the rest.
        let rank = |r: Role| match r {
            Role::Intercept => 0,
            Role::FixedEffect => 1,
            Role::Control => 2,
            Role::Interest => 3,
        };
        let mut order = all.clone();
        order.sort_by_key(|&c| (rank(self.roles[c]), c));
        let sub = submatrix(&xtx, self.k(), &order);
        let kept_pos = independent_columns(&sub, order.len(), COLLINEAR_TOL);
        let mut kept: Vec<usize> = kept_pos.iter().map(|&p| order[p]).collect();
        kept.sort_unstable();
        let dropped: Vec<usize> = all.iter().filter(|c| !kept.contains(c)).cloned().collect();
        let bad: Vec<String> = dropped
            .iter()
            .filter(|&&c| self.roles[c] == Role::Interest)
            .map(|&c| self.names[c].clone())
            .collect();
        if !bad.is_empty() {
            return Err(Error::RankDeficient { columns: bad });
        }
        Ok((kept, dropped.iter().map(|&c| self.names[c].clone()).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub stat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Random-intercept variance.
    pub group: f64,
    pub residual: f64,
    /// The group variance sits on the zero boundary; the fit equals OLS.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub spec: String,
    pub outcome: String,
    pub coefficients: Vec<Coef>,
    pub stat_kind: StatKind,
    pub se_kind: Option<SeKind>,
    pub n: usize,
    pub k: usize,
    pub clusters: Option<usize>,
    pub log_likelihood: Option<f64>,
    pub variance: Option<VarianceComponents>,
    /// Indicators and controls removed by the collinearity screen.
    pub dropped: Vec<String>,
}

impl EstimateReport {
    pub fn coef(&self, name: &str) -> Option<&Coef> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Studentized statistic of a named coefficient.
    pub fn stat(&self, name: &str) -> Result<f64> {
        self.coef(name)
            .map(|c| c.stat)
            .ok_or_else(|| Error::Invalid(format!("no coefficient named {name}")))
    }

    pub fn estimate(&self, name: &str) -> Result<f64> {
        self.coef(name)
            .map(|c| c.estimate)
            .ok_or_else(|| Error::Invalid(format!("no coefficient named {name}")))
    }
}

/// A least-squares fit with its full coefficient vector and residuals.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub report: EstimateReport,
    /// Kept column indices into the design, aligned with `beta`.
    pub columns: Vec<usize>,
    pub beta: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

fn coefficients(design: &Design, kept: &[usize], beta: &[f64], vcov: &[f64]) -> Vec<Coef> {
    let k = kept.len();
    kept.iter()
        .enumerate()
        .filter(|(_, &c)| design.roles[c] != Role::FixedEffect)
        .map(|(p, &c)| {
            let se = vcov[p * k + p].max(0.0).sqrt();
            Coef {
                name: design.names[c].clone(),
                estimate: beta[p],
                se,
                stat: beta[p] / se,
            }
        })
        .collect()
}

/// Weighted least squares with the requested standard errors.
///
/// Cluster-robust errors use the small-sample factor `G/(G-1) (N-1)/(N-K)`;
/// with singleton clusters this is exactly HC1.
pub fn fit_ols(design: &Design, se: SeKind) -> Result<OlsFit> {
    let n = design.n();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if let Some(w) = &design.weights {
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Invalid("weights must be finite and non-negative".into()));
        }
    }
    let (kept, dropped) = design.screen()?;
    let k = kept.len();
    let (xtx, xty, _) = design.cross_products(&kept);
    let chol = Cholesky::new(&xtx, k).ok_or_else(|| Error::RankDeficient {
        columns: kept.iter().map(|&c| design.names[c].clone()).collect(),
    })?;
    let beta = chol.solve(&xty);
    let bread = chol.inverse();

    let mut fitted = vec![0.0; n];
    for (p, &c) in kept.iter().enumerate() {
        let b = beta[p];
        for (f, x) in fitted.iter_mut().zip(&design.cols[c]) {
            *f += b * x;
        }
    }
    let residuals: Vec<f64> = design.y.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let wt = |i: usize| design.weights.as_ref().map_or(1.0, |w| w[i]);
    // Rows with zero weight do not count towards the sample size.
    let n_eff = (0..n).filter(|&i| wt(i) > 0.0).count();
    if n_eff <= k {
        return Err(Error::Invalid(format!("{n_eff} weighted rows for {k} coefficients")));
    }
    let dof = (n_eff - k) as f64;

    let mut n_clusters = None;
    let vcov = match se {
        SeKind::Classical => {
            let s2 = (0..n).map(|i| wt(i) * residuals[i] * residuals[i]).sum::<f64>() / dof;
            bread.iter().map(|v| v * s2).collect::<Vec<_>>()
        }
        SeKind::Hc1 | SeKind::Cluster => {
            let ids: Vec<usize> = match (se, &design.clusters) {
                (SeKind::Cluster, Some(c)) => c.clone(),
                (SeKind::Cluster, None) => {
                    return Err(Error::Invalid("cluster-robust errors need cluster ids".into()))
                }
                _ => (0..n).collect(),
            };
            let mut scores: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for i in 0..n {
                let we = wt(i) * residuals[i];
                if wt(i) == 0.0 {
                    continue;
                }
                let s = scores.entry(ids[i]).or_insert_with(|| vec![0.0; k]);
                for (p, &c) in kept.iter().enumerate() {
                    s[p] += we * design.cols[c][i];
                }
            }
            let g = scores.len();
            if g < 2 {
                return Err(Error::Invalid("robust errors need at least two clusters".into()));
            }
            let mut meat = vec![0.0; k * k];
            for s in scores.values() {
                for p in 0..k {
                    if s[p] == 0.0 {
                        continue;
                    }
                    for q in 0..k {
                        meat[p * k + q] += s[p] * s[q];
                    }
                }
            }
            let gf = g as f64;
            let nf = n_eff as f64;
            let factor = gf / (gf - 1.0) * (nf - 1.0) / dof;
            if se == SeKind::Cluster {
                n_clusters = Some(g);
            }
            crate::linalg::sandwich(&bread, &meat, k)
                .into_iter()
                .map(|v| v * factor)
                .collect()
        }
    };

    let rss: f64 = (0..n).map(|i| wt(i) * residuals[i] * residuals[i]).sum();
    let log_likelihood = if design.weights.is_none() {
        let nf = n as f64;
        Some(-0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0))
    } else {
        None
    };

    Ok(OlsFit {
        report: EstimateReport {
            spec: String::new(),
            outcome: String::new(),
            coefficients: coefficients(design, &kept, &beta, &vcov),
            stat_kind: StatKind::T,
            se_kind: Some(se),
            n: n_eff,
            k,
            clusters: n_clusters,
            log_likelihood,
            variance: None,
            dropped,
        },
        columns: kept,
        beta,
        fitted,
        residuals,
    })
}
