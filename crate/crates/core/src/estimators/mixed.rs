//! Random-intercept linear model by maximum likelihood.
//!
//! With `gamma = sigma_u^2 / sigma^2`, the fixed effects and residual variance
//! are profiled out in closed form, leaving a one-dimensional search over
//! `gamma`. Groups of equal size share their correction terms, so one
//! likelihood evaluation costs `O(sizes * K^2 + K^3)` regardless of N.

use std::collections::BTreeMap;

use super::{coefficients, Design, EstimateReport, SeKind, StatKind, VarianceComponents};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const GRID_POINTS: usize = 40;
/// Upper end of the search on `t = gamma / (1 + gamma)`.
const T_MAX: f64 = 0.9995;
const REL_TOL: f64 = 1e-9;
const MAX_ITER: usize = 300;

/// Sufficient statistics for all groups of one size.
struct SizeClass {
    size: f64,
    count: f64,
    /// sum over groups of s_g s_g'
    ss: Vec<f64>,
    /// sum over groups of s_g t_g
    st: Vec<f64>,
    /// sum over groups of t_g^2
    tt: f64,
}

struct Profile {
    k: usize,
    n: f64,
    xtx: Vec<f64>,
    xty: Vec<f64>,
    yty: f64,
    classes: Vec<SizeClass>,
}

struct Eval {
    loglik: f64,
    sigma2: f64,
    beta: Vec<f64>,
    chol: Cholesky,
}

impl Profile {
    fn build(design: &Design, cols: &[usize], groups: &[usize]) -> Self {
        let k = cols.len();
        let (xtx, xty, yty) = design.cross_products(cols);
        let mut sums: BTreeMap<usize, (usize, Vec<f64>, f64)> = BTreeMap::new();
        for i in 0..design.n() {
            let e = sums.entry(groups[i]).or_insert_with(|| (0, vec![0.0; k], 0.0));
            e.0 += 1;
            for (p, &c) in cols.iter().enumerate() {
                e.1[p] += design.cols[c][i];
            }
            e.2 += design.y[i];
        }
        let mut by_size: BTreeMap<usize, SizeClass> = BTreeMap::new();
        for (_, (n, s, t)) in sums {
            let c = by_size.entry(n).or_insert_with(|| SizeClass {
                size: n as f64,
                count: 0.0,
                ss: vec![0.0; k * k],
                st: vec![0.0; k],
                tt: 0.0,
            });
            c.count += 1.0;
            for p in 0..k {
                if s[p] == 0.0 {
                    continue;
                }
                c.st[p] += s[p] * t;
                for q in 0..k {
                    c.ss[p * k + q] += s[p] * s[q];
                }
            }
            c.tt += t * t;
        }
        Self {
            k,
            n: design.n() as f64,
            xtx,
            xty,
            yty,
            classes: by_size.into_values().collect(),
        }
    }

    fn eval(&self, gamma: f64) -> Option<Eval> {
        let k = self.k;
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let mut q = self.yty;
        let mut logdet = 0.0;
        for c in &self.classes {
            let w = gamma / (1.0 + c.size * gamma);
            if w != 0.0 {
                for (x, s) in a.iter_mut().zip(&c.ss) {
                    *x -= w * s;
                }
                for (x, s) in b.iter_mut().zip(&c.st) {
                    *x -= w * s;
                }
                q -= w * c.tt;
            }
            logdet += c.count * (1.0 + c.size * gamma).ln();
        }
        let chol = Cholesky::new(&a, k)?;
        let beta = chol.solve(&b);
        let rss = q - beta.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>();
        if !(rss > 0.0) {
            return None;
        }
        let sigma2 = rss / self.n;
        let loglik = -0.5 * self.n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) - 0.5 * logdet;
        Some(Eval {
            loglik,
            sigma2,
            beta,
            chol,
        })
    }
}

fn gamma_of(t: f64) -> f64 {
    t / (1.0 - t)
}

/// Cluster-robust covariance of the GLS coefficients. Each group's score is
/// `X_g' V_g^-1 e_g` up to the common scale, summed within clusters; groups
/// must nest in clusters.
fn robust_vcov(design: &Design, kept: &[usize], groups: &[usize], clusters: &[usize], gamma: f64, fit: &Eval) -> Result<(Vec<f64>, usize)> {
    let k = kept.len();
    let n = design.n();
    // per group: size, cluster, column sums, residual sum
    let mut by_group: BTreeMap<usize, (usize, usize, Vec<f64>, f64)> = BTreeMap::new();
    let mut scores: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let mut e = design.y[i];
        for (p, &c) in kept.iter().enumerate() {
            e -= fit.beta[p] * design.cols[c][i];
        }
        let g = by_group.entry(groups[i]).or_insert_with(|| (0, clusters[i], vec![0.0; k], 0.0));
        if g.1 != clusters[i] {
            return Err(Error::Invalid("random-intercept groups must nest in clusters".into()));
        }
        g.0 += 1;
        g.3 += e;
        let s = scores.entry(clusters[i]).or_insert_with(|| vec![0.0; k]);
        for (p, &c) in kept.iter().enumerate() {
            let x = design.cols[c][i];
            g.2[p] += x;
            s[p] += x * e;
        }
    }
    for (size, cl, xs, es) in by_group.values() {
        let w = gamma / (1.0 + *size as f64 * gamma);
        let s = scores.get_mut(cl).unwrap();
        for p in 0..k {
            s[p] -= w * xs[p] * es;
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
    let factor = g as f64 / (g as f64 - 1.0);
    let bread = fit.chol.inverse();
    let vcov = crate::linalg::sandwich(&bread, &meat, k).into_iter().map(|v| v * factor).collect();
    Ok((vcov, g))
}

/// Maximum-likelihood random-intercept fit with groups from `design.groups`.
/// A zero group variance is reported through `VarianceComponents::boundary`.
/// When `design.clusters` is set the covariance is cluster-robust, otherwise
/// model-based.
pub fn fit_random_intercept(design: &Design) -> Result<EstimateReport> {
    let groups = design
        .groups
        .as_ref()
        .ok_or_else(|| Error::Invalid("random-intercept fit needs group ids".into()))?;
    if design.weights.is_some() {
        return Err(Error::Invalid("random-intercept fit does not take weights".into()));
    }
    if design.n() == 0 {
        return Err(Error::EmptySample);
    }
    let (kept, dropped) = design.screen()?;
    let prof = Profile::build(design, &kept, groups);
    let ll = |t: f64| prof.eval(gamma_of(t)).map_or(f64::NEG_INFINITY, |e| e.loglik);

    // Coarse grid, then golden-section refinement around the best point.
    let grid: Vec<f64> = (0..=GRID_POINTS).map(|i| T_MAX * i as f64 / GRID_POINTS as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| ll(t)).collect();
    let best = (0..vals.len()).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    if !vals[best].is_finite() {
        return Err(Error::NoConvergence {
            what: "random-intercept likelihood".into(),
            iterations: 0,
        });
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(GRID_POINTS)];
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (ll(x1), ll(x2));
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = ll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = ll(x2);
        }
        let cur = f1.max(f2);
        if ((cur - prev) / cur.abs().max(1.0)).abs() < REL_TOL && hi - lo < 1e-7 {
            converged = true;
            break;
        }
        prev = cur;
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "random-intercept variance search".into(),
            iterations: MAX_ITER,
        });
    }
    let mut t_hat = if f1 >= f2 { x1 } else { x2 };
    // Snap to the boundary when it is at least as good.
    let boundary = ll(0.0) >= ll(t_hat);
    if boundary {
        t_hat = 0.0;
    }
    let gamma = gamma_of(t_hat);
    let fit = prof.eval(gamma).ok_or_else(|| Error::NoConvergence {
        what: "random-intercept final evaluation".into(),
        iterations: MAX_ITER,
    })?;
    let (vcov, clusters, se_kind) = match &design.clusters {
        Some(c) => {
            let (v, g) = robust_vcov(design, &kept, groups, c, gamma, &fit)?;
            (v, Some(g), Some(SeKind::Cluster))
        }
        None => (fit.chol.inverse().into_iter().map(|v| v * fit.sigma2).collect(), None, None),
    };
    Ok(EstimateReport {
        spec: String::new(),
        outcome: String::new(),
        coefficients: coefficients(design, &kept, &fit.beta, &vcov),
        stat_kind: StatKind::Z,
        se_kind,
        n: design.n(),
        k: kept.len(),
        clusters,
        log_likelihood: Some(fit.loglik),
        variance: Some(VarianceComponents {
            group: gamma * fit.sigma2,
            residual: fit.sigma2,
            boundary,
        }),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_ols, SeKind};
    use crate::rng::Seeder;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn panel(seed: u64, groups: usize, per: usize, sd_u: f64) -> Design {
        let mut rng = Seeder::new(seed).stream("mixed-test");
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut g = Vec::new();
        for j in 0..groups {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u = sd_u * z;
            let t = (j % 2) as f64;
            for _ in 0..per {
                let e: f64 = StandardNormal.sample(&mut rng);
                let xi: f64 = rng.random();
                y.push(0.5 + 0.3 * t + xi + u + e);
                x.push(xi);
                g.push(j);
            }
        }
        let t: Vec<f64> = g.iter().map(|j| (j % 2) as f64).collect();
        Design::new(y).interest("t", t).control("x", x).groups(g)
    }

    #[test]
    fn zero_group_variance_matches_ols() {
        // Outcomes with no group component: the fit sits at or near the boundary.
        let d = panel(1, 60, 5, 0.0);
        let mixed = fit_random_intercept(&d).unwrap();
        let ols = fit_ols(&d, SeKind::Classical).unwrap().report;
        for c in &ols.coefficients {
            let m = mixed.coef(&c.name).unwrap();
            assert!((m.estimate - c.estimate).abs() < 1e-4, "{} {}", m.estimate, c.estimate);
        }
        assert!(mixed.log_likelihood.unwrap() >= ols.log_likelihood.unwrap() - 1e-9);
    }

    #[test]
    fn robust_errors_at_zero_variance_match_ols_clusters() {
        let mut d = panel(1, 60, 5, 0.0);
        d.clusters = Some(d.groups.as_ref().unwrap().iter().map(|g| g / 3).collect());
        let mixed = fit_random_intercept(&d).unwrap();
        assert!(mixed.variance.unwrap().boundary);
        assert_eq!(mixed.clusters, Some(20));
        let ols = fit_ols(&d, SeKind::Cluster).unwrap().report;
        // OLS carries an extra (n - 1) / (n - k) factor
        let scale = ((300.0 - 1.0) / (300.0 - 3.0) as f64).sqrt();
        for c in &ols.coefficients {
            let m = mixed.coef(&c.name).unwrap();
            assert!((m.se * scale - c.se).abs() < 1e-6 * c.se, "{} {}", m.se, c.se);
        }
    }

    #[test]
    fn robust_errors_need_nested_groups() {
        let mut d = panel(3, 20, 4, 0.5);
        d.clusters = Some((0..80).map(|i| i % 2).collect());
        assert!(fit_random_intercept(&d).is_err());
    }

    #[test]
    fn singleton_groups_give_ols_likelihood() {
        let mut d = panel(2, 80, 1, 0.0);
        d.groups = Some((0..80).collect());
        let mixed = fit_random_intercept(&d).unwrap();
        let ols = fit_ols(&d, SeKind::Classical).unwrap();
        let n = 80.0;
        let rss: f64 = ols.residuals.iter().map(|e| e * e).sum();
        let closed = -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0);
        assert!((mixed.log_likelihood.unwrap() - closed).abs() < 1e-8);
        let v = mixed.variance.unwrap();
        assert!(((v.group + v.residual) - rss / n).abs() < 1e-8);
    }

    #[test]
    fn recovers_group_variance() {
        let d = panel(3, 400, 5, 0.8);
        let m = fit_random_intercept(&d).unwrap();
        let v = m.variance.unwrap();
        assert!(!v.boundary);
        assert!((v.group - 0.64).abs() < 0.2, "{v:?}");
        assert!((v.residual - 1.0).abs() < 0.1, "{v:?}");
        assert!((m.estimate("t").unwrap() - 0.3).abs() < 0.3);
    }

    // Brute-force likelihood with explicit per-group inverse, for comparison.
    #[test]
    fn profile_likelihood_matches_direct_gls() {
        let d = panel(4, 12, 3, 0.5);
        let (kept, _) = d.screen().unwrap();
        let prof = Profile::build(&d, &kept, d.groups.as_ref().unwrap());
        for gamma in [0.0, 0.3, 2.0] {
            let e = prof.eval(gamma).unwrap();
            // direct: V_g = s2 (I + gamma J); profile s2 via GLS residuals
            let k = kept.len();
            let mut a = vec![0.0; k * k];
            let mut b = vec![0.0; k];
            let groups = d.groups.as_ref().unwrap();
            let ng = 12;
            for g in 0..ng {
                let rows: Vec<usize> = (0..d.n()).filter(|&i| groups[i] == g).collect();
                let m = rows.len() as f64;
                let c = gamma / (1.0 + m * gamma);
                for &i in &rows {
                    for &j in &rows {
                        let vij = if i == j { 1.0 - c } else { -c };
                        for p in 0..k {
                            b[p] += d.cols[kept[p]][i] * vij * d.y[j];
                            for q in 0..k {
                                a[p * k + q] += d.cols[kept[p]][i] * vij * d.cols[kept[q]][j];
                            }
                        }
                    }
                }
            }
            let beta = Cholesky::new(&a, k).unwrap().solve(&b);
            for (x, y) in beta.iter().zip(&e.beta) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
