use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::error::{dim, Result};

/// Dense row-major matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(dim(alloc::format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Rows `rows`, restricted to the columns in `cols` (ascending).
    pub fn select(&self, rows: &[usize], cols: Coalition) -> Matrix {
        let members: Vec<usize> = cols.members().filter(|&j| j < self.cols).collect();
        let mut data = Vec::with_capacity(rows.len() * members.len());
        for &i in rows {
            let r = self.row(i);
            data.extend(members.iter().map(|&j| r[j]));
        }
        Matrix {
            rows: rows.len(),
            cols: members.len(),
            data,
        }
    }

    /// All rows, restricted to `cols`.
    pub fn restrict(&self, cols: Coalition) -> Matrix {
        let all: Vec<usize> = (0..self.rows).collect();
        self.select(&all, cols)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        self.select(rows, Coalition::full(self.cols))
    }
}

/// Entries of `x` at the members of `cols`.
pub fn restrict_point(x: &[f64], cols: Coalition) -> Vec<f64> {
    cols.members().map(|j| x[j]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_rows_and_columns() {
        let m = Matrix::new(3, 3, (0..9).map(f64::from).collect()).unwrap();
        let s = m.select(&[2, 0], Coalition::from_members([0, 2]));
        assert_eq!(s.rows(), 2);
        assert_eq!(s.row(0), [6.0, 8.0]);
        assert_eq!(s.row(1), [0.0, 2.0]);
        assert_eq!(m.restrict(Coalition::EMPTY).cols(), 0);
        assert!(Matrix::new(2, 2, alloc::vec![0.0]).is_err());
    }
}
