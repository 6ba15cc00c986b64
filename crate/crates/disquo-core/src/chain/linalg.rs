//! Small dense linear algebra for the exact chain checks: row-major square
//! matrices, a pivoted linear solve, and a cyclic Jacobi eigensolver for
//! symmetric matrices. State spaces here stay in the low thousands, so plain
//! O(n^3) routines are entirely adequate.

use crate::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        DenseMatrix { n, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Row-vector product mu * A.
    pub fn mul_left(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (i, &m) in mu.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let row = self.row(i);
            for j in 0..n {
                out[j] += m * row[j];
            }
        }
        out
    }

    /// Column-vector product A * v.
    pub fn mul_right(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn scale(&self, a: f64) -> DenseMatrix {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let mut m = a.data.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .abs()
                    .partial_cmp(&m[r2 * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        let pivot = m[pivot_row * n + col];
        if pivot.abs() < 1e-300 {
            return Err(Error::Numerical("singular matrix in linear solve".into()));
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / m[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for j in col + 1..n {
            v -= m[col * n + j] * x[j];
        }
        x[col] = v / m[col * n + col];
    }
    Ok(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    let n = a.n;
    if n == 1 {
        return vec![a.get(0, 0)];
    }
    let mut m = a.data.clone();
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// Strong connectivity of the digraph with an edge wherever the entry is
/// positive — forward and backward reachability from state 0.
pub fn strongly_connected(p: &DenseMatrix) -> bool {
    let n = p.n;
    let reach = |transposed: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if transposed { p.get(v, u) } else { p.get(u, v) };
                if w > 0.0 && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count
    };
    reach(false) == n && reach(true) == n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = DenseMatrix::from_rows(2, vec![2.0, 1.0, 1.0, 3.0]);
        let x = solve_linear(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_matches_analytic_2x2() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a = DenseMatrix::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]);
        let mut ev = symmetric_eigenvalues(&a);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_preserves_trace_and_frobenius() {
        // Pseudo-random symmetric matrix; rotations preserve both invariants.
        let n = 12;
        let mut a = DenseMatrix::zeros(n);
        let mut rng = crate::rng::CounterRng::new(5);
        for i in 0..n {
            for j in i..n {
                let v = rng.unit_f64() - 0.5;
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
        let frob: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        let ev = symmetric_eigenvalues(&a);
        let ev_sum: f64 = ev.iter().sum();
        let ev_sq: f64 = ev.iter().map(|x| x * x).sum();
        assert!((trace - ev_sum).abs() < 1e-10);
        assert!((frob - ev_sq).abs() < 1e-9);
    }

    #[test]
    fn connectivity_detects_absorbing_state() {
        let mut p = DenseMatrix::zeros(2);
        p.set(0, 0, 0.5);
        p.set(0, 1, 0.5);
        p.set(1, 1, 1.0); // absorbing
        assert!(!strongly_connected(&p));
        p.set(1, 0, 0.5);
        assert!(strongly_connected(&p));
    }
}
