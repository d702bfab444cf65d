//! Minimal dense row-major matrix. The solver only ever needs row sweeps
//! and column reductions, so this stays a thin wrapper over a flat buffer.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    /// Wrap a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Option<Self> {
        if data.len() != rows * cols {
            return None;
        }
        Some(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Column sums of squared entries.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v * v;
            }
        }
        out
    }

    /// y = A x (row-major sweep).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for (&a, &b) in self.row(r).iter().zip(x) {
                acc += a * b;
            }
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_reductions() {
        let m = DenseMatrix::from_vec(2, 3, alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(1, 2), 6.0);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(m.column_sq_norms(), alloc::vec![17.0, 29.0, 45.0]);
        assert_eq!(m.mul_vec(&[1.0, 0.0, 1.0]), alloc::vec![4.0, 10.0]);
        assert!(DenseMatrix::from_vec(2, 2, alloc::vec![0.0; 3]).is_none());
    }
}
