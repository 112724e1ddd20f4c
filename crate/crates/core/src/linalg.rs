//! Small dense linear algebra on row-major `Vec<Vec<f64>>` matrices.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `L Lᵀ = A` for a symmetric positive
/// semi-definite `A`. Columns with a non-positive pivot are left at zero, so a
/// zero matrix factors to zero.
pub fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let diag = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if diag < -1e-12 * a[j][j].abs().max(1.0) {
            return Err(Error::InvalidParameter("matrix is not positive semi-definite".into()));
        }
        if diag <= 1e-300 {
            continue;
        }
        let pivot = diag.sqrt();
        l[j][j] = pivot;
        for i in (j + 1)..n {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / pivot;
        }
    }
    Ok(l)
}

/// `L z` for a lower-triangular `L`.
pub fn lower_mul(l: &[Vec<f64>], z: &[f64]) -> Vec<f64> {
    l.iter()
        .enumerate()
        .map(|(i, row)| (0..=i).map(|k| row[k] * z[k]).sum())
        .collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[pivot_row][col].abs() < 1e-14 {
            return Err(Error::Singular);
        }
        m.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = ((row + 1)..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][n] - s) / m[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cholesky_of_zero_is_zero() {
        let l = cholesky(&[vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]]).unwrap();
        assert!(l.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn solve_small_system() {
        let x = solve(&[vec![0.0, 2.0], vec![3.0, 1.0]], &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        assert_eq!(solve(&[vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]), Err(Error::Singular));
    }
}
