//! Randomization p-values, joint permutation and confidence sets by test inversion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::perms::{JointSet, PermutationSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatKind {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "studentized-t")]
    StudentizedT,
    #[serde(rename = "studentized-z")]
    StudentizedZ,
    #[serde(rename = "raw")]
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSummary {
    pub mean: f64,
    pub sd: f64,
    pub q95_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: StatKind,
    pub observed: f64,
    pub p_value: f64,
    /// Permutations actually evaluated, excluding the observed assignment.
    pub n_perms: usize,
    pub exhaustive: bool,
    pub null: NullSummary,
    pub ci: Option<(f64, f64)>,
    /// Set when `p(delta) > alpha` at an edge of the search range.
    pub ci_unbounded: Option<(bool, bool)>,
    /// Permutation indices at which the statistic failed.
    pub failed: Vec<usize>,
}

/// Share of permuted statistics at least as extreme in absolute value, with
/// the observed assignment counted in numerator and denominator.
pub fn p_value_from(observed: f64, permuted: &[f64]) -> f64 {
    let hits = permuted.iter().filter(|s| s.abs() >= observed.abs()).count();
    (1 + hits) as f64 / (1 + permuted.len()) as f64
}

fn summarize(values: &[f64]) -> NullSummary {
    if values.is_empty() {
        return NullSummary {
            mean: f64::NAN,
            sd: f64::NAN,
            q95_abs: f64::NAN,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let q = abs[((0.95 * n).ceil() as usize).clamp(1, abs.len()) - 1];
    NullSummary { mean, sd, q95_abs: q }
}

/// Evaluate `stat` at every member index, in parallel, reducing in index order.
fn evaluate<F>(n: usize, stat: F, kind: StatKind, exhaustive: bool) -> Result<TestResult>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let values: Vec<Result<f64>> = (0..n).into_par_iter().map(&stat).collect();
    let mut iter = values.into_iter();
    let observed = iter.next().expect("member 0 present")?;
    if !observed.is_finite() {
        return Err(Error::StatisticFailure {
            failures: 1,
            total: n,
            first: vec![0],
        });
    }
    let mut permuted = Vec::with_capacity(n - 1);
    let mut failed = Vec::new();
    for (i, v) in iter.enumerate() {
        match v {
            Ok(x) if x.is_finite() => permuted.push(x),
            _ => failed.push(i + 1),
        }
    }
    let total = n - 1;
    if total > 0 && failed.len() as f64 > 0.01 * total as f64 {
        return Err(Error::StatisticFailure {
            failures: failed.len(),
            total,
            first: failed.iter().take(10).cloned().collect(),
        });
    }
    Ok(TestResult {
        kind,
        observed,
        p_value: p_value_from(observed, &permuted),
        n_perms: permuted.len(),
        exhaustive,
        null: summarize(&permuted),
        ci: None,
        ci_unbounded: None,
        failed,
    })
}

/// Randomization p-value for a statistic of the assignment labels.
pub fn ri_pvalue<F>(stat: F, perms: &PermutationSet, kind: StatKind) -> Result<TestResult>
where
    F: Fn(&[u8]) -> Result<f64> + Sync,
{
    evaluate(perms.members.len(), |i| stat(&perms.members[i]), kind, perms.exhaustive)
}

/// Joint permutation of (advertised, experienced) labels.
pub fn joint_permute<F>(stat: F, perms: &JointSet, kind: StatKind) -> Result<TestResult>
where
    F: Fn(&[u8], &[u8]) -> Result<f64> + Sync,
{
    evaluate(
        perms.pairs.len(),
        |i| {
            let (a, e) = perms.pairs[i];
            stat(&perms.advertised.members[a], &perms.experienced.members[e])
        },
        kind,
        perms.exhaustive,
    )
}

/// Search range for test inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    /// Bisection stops once the bracket is narrower than this; 0 bisects to
    /// floating-point resolution.
    pub tol: f64,
    pub alpha: f64,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            tol: (hi - lo) * 1e-4,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub unbounded_lo: bool,
    pub unbounded_hi: bool,
}

/// Confidence set for an additive effect by inverting the randomization test.
///
/// `stat(delta, labels)` must return the statistic computed on outcomes with
/// `delta` removed from the units treated under the observed assignment.
/// The interval is grown outwards from `center` (typically the point estimate)
/// by bisection on each side.
pub fn ci_invert<F>(stat: F, perms: &PermutationSet, center: f64, grid: GridSpec) -> Result<Interval>
where
    F: Fn(f64, &[u8]) -> Result<f64> + Sync,
{
    let p_at = |delta: f64| -> Result<f64> {
        Ok(ri_pvalue(|l| stat(delta, l), perms, StatKind::Raw)?.p_value)
    };
    let accept = |delta: f64| -> Result<bool> { Ok(p_at(delta)? > grid.alpha) };
    if !(grid.lo <= center && center <= grid.hi) {
        return Err(Error::Invalid("inversion center outside the search range".into()));
    }
    if !accept(center)? {
        // Point estimate itself rejected: the acceptance set is empty or disjoint
        // from it; fall back to the best grid point.
        return Err(Error::Invalid(
            "additive-effect test rejects at the supplied center".into(),
        ));
    }

    let edge = |inside: f64, outside: f64| -> Result<(f64, bool)> {
        if accept(outside)? {
            return Ok((outside, true));
        }
        let (mut a, mut r) = (inside, outside);
        loop {
            let mid = 0.5 * (a + r);
            if (a - r).abs() <= grid.tol || mid == a || mid == r {
                break;
            }
            if accept(mid)? {
                a = mid;
            } else {
                r = mid;
            }
        }
        Ok((a, false))
    };
    let (lo, unbounded_lo) = edge(center, grid.lo)?;
    let (hi, unbounded_hi) = edge(center, grid.hi)?;
    Ok(Interval {
        lo,
        hi,
        unbounded_lo,
        unbounded_hi,
    })
}

/// Dense-grid inversion: the accepted grid points' extent.
pub fn ci_grid<F>(stat: F, perms: &PermutationSet, grid: GridSpec, points: usize) -> Result<Option<(f64, f64)>>
where
    F: Fn(f64, &[u8]) -> Result<f64> + Sync,
{
    let mut accepted: Option<(f64, f64)> = None;
    for i in 0..points {
        let d = grid.lo + (grid.hi - grid.lo) * i as f64 / (points - 1) as f64;
        let p = ri_pvalue(|l| stat(d, l), perms, StatKind::Raw)?.p_value;
        if p > grid.alpha {
            accepted = Some(match accepted {
                None => (d, d),
                Some((a, _)) => (a, d),
            });
        }
    }
    Ok(accepted)
}
