//! Minimal f64 matrix ops for the training loop.
//!
//! Training math runs in f64 so hand-derived gradients verify cleanly
//! against central finite differences; the public f32 types are the
//! interchange format at the boundaries.

use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: m.values().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("training weights stay finite")
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// self · rhs
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &w) in self.row(i).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for (o, &x) in out_row.iter_mut().zip(rhs.row(k).iter()) {
                    *o += w * x;
                }
            }
        }
        out
    }

    /// self · rhsᵀ
    pub fn matmul_bt(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.cols);
        let mut out = Mat::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            for j in 0..rhs.rows {
                let mut acc = 0.0;
                for (a, b) in self.row(i).iter().zip(rhs.row(j).iter()) {
                    acc += a * b;
                }
                out.data[i * rhs.rows + j] = acc;
            }
        }
        out
    }

    /// selfᵀ · rhs
    pub fn at_matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows);
        let mut out = Mat::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = rhs.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * c).collect(),
        }
    }

    /// self -= γ · g
    pub fn sgd_step(&mut self, g: &Mat, gamma: f64) {
        assert_eq!((self.rows, self.cols), (g.rows, g.cols));
        for (w, &d) in self.data.iter_mut().zip(g.data.iter()) {
            *w -= gamma * d;
        }
    }

    /// Zero entries where the mask bit is false.
    pub fn mask_in_place(&mut self, bits: &[bool]) {
        assert_eq!(self.data.len(), bits.len());
        for (w, &keep) in self.data.iter_mut().zip(bits.iter()) {
            if !keep {
                *w = 0.0;
            }
        }
    }

    pub fn masked(&self, bits: &[bool]) -> Mat {
        let mut out = self.clone();
        out.mask_in_place(bits);
        out
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|&a| a * a).sum::<f64>().sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn hadamard(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(rhs.data.iter())
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Add a column vector to every column.
    pub fn add_col_broadcast(&self, bias: &[f64]) -> Mat {
        assert_eq!(self.rows, bias.len());
        let mut out = self.clone();
        for (row, b) in out.data.chunks_exact_mut(self.cols).zip(bias.iter()) {
            for x in row {
                *x += b;
            }
        }
        out
    }

    /// Row sums (for bias gradients).
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Column-gathered copy (for minibatch assembly).
    pub fn gather_cols(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            let src = self.row(i);
            let dst = &mut out.data[i * idx.len()..(i + 1) * idx.len()];
            for (d, &j) in dst.iter_mut().zip(idx.iter()) {
                *d = src[j];
            }
        }
        out
    }
}
