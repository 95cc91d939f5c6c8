//! Dense symmetric linear algebra on row-major `Vec<f64>` matrices.
//!
//! Problems here are small (tens of columns), so a hand-written Cholesky with a
//! collinearity screen is all that is needed.

/// Symmetric positive definite factor `L` with `A = L L'`, row-major `k x k`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    k: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn new(a: &[f64], k: usize) -> Option<Self> {
        let mut l = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..=i {
                let mut s = a[i * k + j];
                for p in 0..j {
                    s -= l[i * k + p] * l[j * k + p];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    l[i * k + i] = s.sqrt();
                } else {
                    l[i * k + j] = s / l[j * k + j];
                }
            }
        }
        Some(Self { k, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut y = b.to_vec();
        for i in 0..k {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[i * k + p] * y[p];
            }
            y[i] = s / self.l[i * k + i];
        }
        for i in (0..k).rev() {
            let mut s = y[i];
            for p in i + 1..k {
                s -= self.l[p * k + i] * y[p];
            }
            y[i] = s / self.l[i * k + i];
        }
        y
    }

    pub fn inverse(&self) -> Vec<f64> {
        let k = self.k;
        let mut inv = vec![0.0; k * k];
        let mut e = vec![0.0; k];
        for j in 0..k {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..k {
                inv[i * k + j] = col[i];
            }
        }
        inv
    }

    pub fn log_det(&self) -> f64 {
        (0..self.k).map(|i| 2.0 * self.l[i * self.k + i].ln()).sum()
    }
}

/// Greedy column screen: walks columns in order and keeps a column only if its
/// pivot in an incremental Cholesky of `A` stays above `tol * A_jj`.
/// Returns the indices of the kept columns.
pub fn independent_columns(a: &[f64], k: usize, tol: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    // rows of L for kept columns, indexed by position in `kept`
    let mut l: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let ajj = a[j * k + j];
        if !(ajj > 0.0) {
            continue;
        }
        let mut row = Vec::with_capacity(kept.len() + 1);
        for (p, &c) in kept.iter().enumerate() {
            let mut s = a[j * k + c];
            for q in 0..p {
                s -= row[q] * l[p][q];
            }
            row.push(s / l[p][p]);
        }
        let pivot = ajj - row.iter().map(|v| v * v).sum::<f64>();
        if pivot > tol * ajj {
            row.push(pivot.sqrt());
            kept.push(j);
            l.push(row);
        }
    }
    kept
}

/// Extract the sub-matrix on `idx x idx`.
pub fn submatrix(a: &[f64], k: usize, idx: &[usize]) -> Vec<f64> {
    let m = idx.len();
    let mut out = vec![0.0; m * m];
    for (i, &r) in idx.iter().enumerate() {
        for (j, &c) in idx.iter().enumerate() {
            out[i * m + j] = a[r * k + c];
        }
    }
    out
}

/// `A B A` for symmetric row-major `k x k` matrices.
pub fn sandwich(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut ab = vec![0.0; k * k];
    for i in 0..k {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for j in 0..k {
                ab[i * k + j] += aip * b[p * k + j];
            }
        }
    }
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for p in 0..k {
            let v = ab[i * k + p];
            if v == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += v * a[p * k + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_and_inverts() {
        let a = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::new(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
        let inv = ch.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|p| a[i * 3 + p] * inv[p * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collinear_column_is_screened_out() {
        // columns: x0 = 1, x1 = t, x2 = 1 + 2 t
        let rows = [[1.0, 0.0, 1.0], [1.0, 1.0, 3.0], [1.0, 2.0, 5.0], [1.0, 5.0, 11.0]];
        let mut a = vec![0.0; 9];
        for r in rows {
            for i in 0..3 {
                for j in 0..3 {
                    a[i * 3 + j] += r[i] * r[j];
                }
            }
        }
        assert_eq!(independent_columns(&a, 3, 1e-10), vec![0, 1]);
    }
}
