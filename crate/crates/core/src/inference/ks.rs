//! Two-sample Kolmogorov–Smirnov statistic.

use crate::error::{Error, Result};

/// Exact `sup_y |F_a(y) - F_b(y)|`, evaluated at every pooled sample point.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let next = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => break,
        };
        while i < xa.len() && xa[i] <= next {
            i += 1;
        }
        while j < xb.len() && xb[j] <= next {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Pre-sorted pooled sample whose group membership changes under permutation
/// of group-level labels. Each evaluation is a single linear sweep.
#[derive(Debug, Clone)]
pub struct GroupedKs {
    /// Group index of each observation in ascending value order.
    group: Vec<usize>,
    /// Whether observation `k` (sorted order) ties with observation `k + 1`.
    tie_next: Vec<bool>,
    group_sizes: Vec<usize>,
}

impl GroupedKs {
    pub fn new(values: &[f64], groups: &[usize], n_groups: usize) -> Self {
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let group: Vec<usize> = idx.iter().map(|&k| groups[k]).collect();
        let tie_next = (0..idx.len())
            .map(|k| k + 1 < idx.len() && values[idx[k]] == values[idx[k + 1]])
            .collect();
        let mut group_sizes = vec![0; n_groups];
        for &g in groups {
            group_sizes[g] += 1;
        }
        Self {
            group,
            tie_next,
            group_sizes,
        }
    }

    /// KS distance between the pooled observations of groups labelled `a` and
    /// those labelled `b`, under the group labelling `labels`.
    pub fn statistic<L: PartialEq + Copy>(&self, labels: &[L], a: L, b: L) -> Result<f64> {
        let na: usize = self
            .group_sizes
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == a)
            .map(|(n, _)| n)
            .sum();
        let nb: usize = self
            .group_sizes
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == b)
            .map(|(n, _)| n)
            .sum();
        if na == 0 || nb == 0 {
            return Err(Error::EmptySample);
        }
        let (fa, fb) = (1.0 / na as f64, 1.0 / nb as f64);
        let (mut ca, mut cb) = (0.0f64, 0.0f64);
        let mut d: f64 = 0.0;
        for (k, &g) in self.group.iter().enumerate() {
            let l = labels[g];
            if l == a {
                ca += fa;
            } else if l == b {
                cb += fb;
            }
            if !self.tie_next[k] {
                d = d.max((ca - cb).abs());
            }
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Dense-grid oracle: evaluate both ECDFs on a fine grid covering the data.
    fn grid_oracle(a: &[f64], b: &[f64]) -> f64 {
        let ecdf = |s: &[f64], y: f64| s.iter().filter(|v| **v <= y).count() as f64 / s.len() as f64;
        let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let n = 20_000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|y| (ecdf(a, y) - ecdf(b, y)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(ks_statistic(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), 0.0);
        assert_eq!(ks_statistic(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap(), 1.0);
    }

    #[test]
    fn shifted_triplets() {
        let d = ks_statistic(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert!((d - grid_oracle(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0])).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_errors() {
        assert!(matches!(ks_statistic(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn grouped_matches_direct() {
        let values = [0.3, 1.2, 0.3, 2.2, -0.4, 1.2, 0.9, 3.1, 0.0];
        let groups = [0, 0, 1, 1, 2, 2, 3, 3, 3];
        let g = GroupedKs::new(&values, &groups, 4);
        let labels = [1u8, 0, 1, 2];
        let a: Vec<f64> = values.iter().zip(&groups).filter(|(_, g)| labels[**g] == 1).map(|(v, _)| *v).collect();
        let b: Vec<f64> = values.iter().zip(&groups).filter(|(_, g)| labels[**g] == 0).map(|(v, _)| *v).collect();
        assert_eq!(g.statistic(&labels, 1, 0).unwrap(), ks_statistic(&a, &b).unwrap());
    }
}
