use rand::Rng as _;

use super::Rng;
use crate::{Error, Result};

/// Row-major dense matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn shape_err(op: &str, a: &Matrix, b: &Matrix) -> Error {
    Error::ShapeMismatch(format!("{op}: {}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols))
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!("ragged rows: {} vs {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Matrix { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.cols);
        self.matmul_acc(other, &mut out)?;
        Ok(out)
    }

    /// `out += self * other`.
    pub fn matmul_acc(&self, other: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.cols != other.rows || out.rows != self.rows || out.cols != other.cols {
            return Err(shape_err("matmul", self, other));
        }
        let n = other.cols;
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let o_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(())
    }

    /// `out += selfᵀ * other`.
    pub fn matmul_tn_acc(&self, other: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.rows != other.rows || out.rows != self.cols || out.cols != other.cols {
            return Err(shape_err("matmul_tn", self, other));
        }
        let n = other.cols;
        for r in 0..self.rows {
            let a_row = &self.data[r * self.cols..(r + 1) * self.cols];
            let b_row = &other.data[r * n..(r + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(())
    }

    /// `selfᵀ * other`.
    pub fn matmul_tn(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.cols, other.cols);
        self.matmul_tn_acc(other, &mut out)?;
        Ok(out)
    }

    /// `out += self * otherᵀ`.
    pub fn matmul_nt_acc(&self, other: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.cols != other.cols || out.rows != self.rows || out.cols != other.rows {
            return Err(shape_err("matmul_nt", self, other));
        }
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..other.rows {
                let b_row = &other.data[j * other.cols..(j + 1) * other.cols];
                out.data[i * out.cols + j] += dot(a_row, b_row);
            }
        }
        Ok(())
    }

    /// `self * otherᵀ`.
    pub fn matmul_nt(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, other.rows);
        self.matmul_nt_acc(other, &mut out)?;
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if !self.same_shape(other) {
            return Err(shape_err("add", self, other));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if !self.same_shape(other) {
            return Err(shape_err("add_assign", self, other));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds a `1 x cols` row vector to every row.
    pub fn add_row_broadcast(&mut self, row: &Matrix) -> Result<()> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(shape_err("add_row_broadcast", self, row));
        }
        for r in self.data.chunks_exact_mut(self.cols) {
            for (a, b) in r.iter_mut().zip(&row.data) {
                *a += b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 x cols` matrix.
    pub fn sum_rows(&self) -> Matrix {
        let mut out = Matrix::zeros(1, self.cols);
        for r in self.data.chunks_exact(self.cols.max(1)) {
            for (o, v) in out.data.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Matrix {
        self.map(|v| v * k)
    }

    pub fn scale_assign(&mut self, k: f64) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    pub fn relu(&self) -> Matrix {
        self.map(|v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if !self.same_shape(other) {
            return Err(shape_err("hadamard", self, other));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 - p)`.
pub fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("dropout probability {p} outside [0, 1)")));
    }
    if p == 0.0 {
        return Ok(Matrix { rows, cols, data: vec![1.0; rows * cols] });
    }
    let keep = 1.0 / (1.0 - p);
    let data = (0..rows * cols).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
    Ok(Matrix { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{seeded_rng, Rng};
    use proptest::prelude::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn transpose(a: &Matrix) -> Matrix {
        let mut t = Matrix::zeros(a.cols(), a.rows());
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                t.set(j, i, a.get(i, j));
            }
        }
        t
    }

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.same_shape(b)
            && a.data().iter().zip(b.data()).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(y.abs()).max(1.0))
    }

    #[test]
    fn identity_is_neutral() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.25, 4.0, -1.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&m).unwrap(), m);
    }

    #[test]
    fn relu_definition() {
        let m = Matrix::row_vector(&[-1.0, 2.0, 0.0]).relu();
        assert_eq!(m.data(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn dropout_zero_is_all_ones() {
        let mut rng = seeded_rng(1);
        let m = dropout_mask(3, 4, 0.0, &mut rng).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        assert!(dropout_mask(1, 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn dropout_is_seeded() {
        let a = dropout_mask(8, 8, 0.3, &mut seeded_rng(5)).unwrap();
        let b = dropout_mask(8, 8, 0.3, &mut seeded_rng(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || (v - 1.0 / 0.7).abs() < 1e-15));
    }

    #[test]
    fn shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&a), Err(Error::ShapeMismatch(_))));
        assert!(a.add(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn transposed_products_match_naive() {
        let mut rng = seeded_rng(3);
        let a = random(5, 7, &mut rng);
        let b = random(5, 3, &mut rng);
        let c = random(4, 7, &mut rng);
        assert!(close(&a.matmul_tn(&b).unwrap(), &naive(&transpose(&a), &b), 1e-14));
        assert!(close(&a.matmul_nt(&c).unwrap(), &naive(&a, &transpose(&c)), 1e-14));
    }

    proptest! {
        #[test]
        fn matmul_matches_naive_and_is_associative(
            n in 1usize..32, k in 1usize..32, m in 1usize..32, p in 1usize..32, seed in any::<u64>()
        ) {
            let mut rng = seeded_rng(seed);
            let a = random(n, k, &mut rng);
            let b = random(k, m, &mut rng);
            let c = random(m, p, &mut rng);
            prop_assert!(close(&a.matmul(&b).unwrap(), &naive(&a, &b), 1e-14));
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert!(close(&left, &right, 1e-10));
        }
    }
}
