//! Exact integer matrices for graph structure.
//!
//! Incidence and loop matrices have entries 0, +/-1, so rank, kernel
//! orthogonality, and chart solving are done in exact integer arithmetic.
//! Rank uses fraction-free Gaussian elimination.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        IntMat { rows: r, cols: c, data: rows.concat() }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_vec(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> IntMat {
        let mut t = IntMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &IntMat) -> IntMat {
        assert_eq!(self.rows, other.rows);
        let mut out = IntMat::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.data[i * out.cols..i * out.cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * out.cols + self.cols..(i + 1) * out.cols].copy_from_slice(other.row(i));
        }
        out
    }

    /// Rank over the rationals by fraction-free elimination.
    pub fn rank(&self) -> usize {
        let mut m: Vec<Vec<i128>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|&v| i128::from(v)).collect())
            .collect();
        let mut rank = 0;
        let mut prev = 1i128;
        for col in 0..self.cols {
            let Some(pivot_row) = (rank..self.rows).find(|&r| m[r][col] != 0) else {
                continue;
            };
            m.swap(rank, pivot_row);
            let p = m[rank][col];
            for r in rank + 1..self.rows {
                let f = m[r][col];
                for c in 0..self.cols {
                    m[r][c] = (p * m[r][c] - f * m[rank][c]) / prev;
                }
            }
            prev = p;
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] as f64)
    }
}

impl std::ops::Index<(usize, usize)> for IntMat {
    type Output = i64;
    fn index(&self, (i, j): (usize, usize)) -> &i64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut i64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for IntMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// True when the column spaces agree over the rationals.
pub fn colspace_equal(a: &IntMat, b: &IntMat) -> bool {
    if a.nrows() != b.nrows() {
        return false;
    }
    let ra = a.rank();
    let rb = b.rank();
    ra == rb && a.hstack(b).rank() == ra
}

/// Solution of an integer system `M x = c` with `c` symbolic.
///
/// `pivot_cols[r]` is the variable eliminated by row `r`; the remaining
/// (free) columns parameterize the solution set:
/// `x = free_map * x_free + rhs_map * c`.
pub struct GaussSolution {
    pub pivot_cols: Vec<usize>,
    pub free_cols: Vec<usize>,
    /// cols(M) x free coefficient matrix expressing every variable.
    pub free_map: IntMat,
    /// cols(M) x rows(M) coefficient matrix applied to the right-hand side.
    pub rhs_map: IntMat,
}

/// Gauss-Jordan elimination of `m` (shape r x c) with exact integer
/// arithmetic, restricted to pivot on `allowed` columns. Requires the
/// restricted matrix to have full row rank and unimodular pivot structure
/// (true for incidence matrices).
pub fn solve_symbolic(m: &IntMat, allowed: &[bool]) -> Result<GaussSolution> {
    let rows = m.nrows();
    let cols = m.ncols();
    assert_eq!(allowed.len(), cols);
    // augmented [M | I]
    let mut a: Vec<Vec<i64>> = (0..rows)
        .map(|i| {
            let mut row: Vec<i64> = m.row(i).to_vec();
            row.extend((0..rows).map(|j| i64::from(j == i)));
            row
        })
        .collect();
    let width = cols + rows;

    let mut pivot_of_row: Vec<usize> = Vec::new();
    let mut is_pivot = vec![false; cols];
    let mut next = 0usize;
    for col in 0..cols {
        if !allowed[col] || next == rows {
            continue;
        }
        let Some(r) = (next..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(next, r);
        let p = a[next][col];
        for r2 in 0..rows {
            if r2 == next || a[r2][col] == 0 {
                continue;
            }
            let f = a[r2][col];
            for c2 in 0..width {
                a[r2][c2] = p * a[r2][c2] - f * a[next][c2];
            }
            reduce_row(&mut a[r2]);
        }
        is_pivot[col] = true;
        pivot_of_row.push(col);
        next += 1;
    }
    if next < rows {
        return Err(Error::Chart(format!(
            "rank deficiency: only {next} of {rows} equations independent on the allowed columns"
        )));
    }
    // normalize pivots to +1
    for (r, &pc) in pivot_of_row.iter().enumerate() {
        let p = a[r][pc];
        for c in 0..width {
            if a[r][c] % p != 0 {
                return Err(Error::Internal(
                    "non-unimodular pivot while solving the chart system".to_string(),
                ));
            }
            a[r][c] /= p;
        }
    }

    let free_cols: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
    let mut free_map = IntMat::zeros(cols, free_cols.len());
    let mut rhs_map = IntMat::zeros(cols, rows);
    for (j, &fc) in free_cols.iter().enumerate() {
        free_map[(fc, j)] = 1;
    }
    for (r, &pc) in pivot_of_row.iter().enumerate() {
        for (j, &fc) in free_cols.iter().enumerate() {
            free_map[(pc, j)] = -a[r][fc];
        }
        for j in 0..rows {
            rhs_map[(pc, j)] = a[r][cols + j];
        }
    }
    Ok(GaussSolution { pivot_cols: pivot_of_row, free_cols, free_map, rhs_map })
}

fn reduce_row(row: &mut [i64]) {
    let mut g = 0i64;
    for &v in row.iter() {
        g = gcd(g, v.abs());
        if g == 1 {
            return;
        }
    }
    if g > 1 {
        for v in row.iter_mut() {
            *v /= g;
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_singular() {
        assert_eq!(IntMat::identity(4).rank(), 4);
        let m = IntMat::from_rows(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(m.rank(), 1);
        assert_eq!(IntMat::zeros(3, 3).rank(), 0);
    }

    #[test]
    fn colspace_equality_detects_sign_flip_of_basis() {
        let a = IntMat::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]]);
        // columns mixed by a unimodular transform span the same space
        let b = IntMat::from_rows(&[vec![1, 1], vec![1, 2], vec![2, 3]]);
        assert!(colspace_equal(&a, &b));
        let c = IntMat::from_rows(&[vec![1, 0], vec![0, 1], vec![0, 0]]);
        assert!(!colspace_equal(&a, &c));
    }

    #[test]
    fn symbolic_solve_reconstructs_solutions() {
        // x1 + x2 = c1, x2 + x3 = c2; free column chosen automatically
        let m = IntMat::from_rows(&[vec![1, 1, 0], vec![0, 1, 1]]);
        let sol = solve_symbolic(&m, &[true, true, true]).unwrap();
        assert_eq!(sol.free_cols.len(), 1);
        // M * free_map = 0 and M * rhs_map = I
        assert!(m.mul(&sol.free_map).is_zero());
        assert_eq!(m.mul(&sol.rhs_map), IntMat::identity(2));
    }

    #[test]
    fn symbolic_solve_respects_forbidden_columns() {
        let m = IntMat::from_rows(&[vec![1, 1, 0], vec![0, 1, 1]]);
        let sol = solve_symbolic(&m, &[true, false, true]).unwrap();
        assert_eq!(sol.free_cols, vec![1]);
        let bad = solve_symbolic(&m, &[true, false, false]);
        assert!(bad.is_err());
    }
}
