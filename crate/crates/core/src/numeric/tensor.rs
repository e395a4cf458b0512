//! Dense rank-1/rank-2 tensors of `f64` and the forward kernels shared by the
//! recorded (differentiable) and plain evaluation paths.
//!
//! Keeping a single implementation of every kernel means the traced and
//! untraced forward passes produce bit-identical values.

use crate::error::{Error, Result};

/// A dense tensor of rank at most 2, stored row-major. Vectors are tensors
/// with a single column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a column vector.
    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    /// Builds a `rows x cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "matrix",
                format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::vector(vec![v])
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

    pub fn is_vector(&self) -> bool {
        self.cols == 1
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Reinterprets the values under a new shape of the same element count.
    pub fn reshaped(&self, rows: usize, cols: usize) -> Result<Tensor> {
        Tensor::matrix(rows, cols, self.data.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}

/// `w (m x n) * x (n) + b (m)`.
pub fn affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !x.is_vector() || !b.is_vector() || w.cols() != x.rows() || w.rows() != b.rows() {
        return Err(Error::dim(
            "affine",
            format!(
                "w {:?}, x {:?}, b {:?}",
                w.shape(),
                x.shape(),
                b.shape()
            ),
        ));
    }
    let mut out = b.data().to_vec();
    let n = w.cols();
    for (i, acc) in out.iter_mut().enumerate() {
        let row = &w.data()[i * n..(i + 1) * n];
        let mut s = 0.0;
        for (wv, xv) in row.iter().zip(x.data()) {
            s += wv * xv;
        }
        *acc += s;
    }
    Ok(Tensor::vector(out))
}

/// `a (m x k) * b (k x n)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.cols() != b.rows() {
        return Err(Error::dim(
            "matmul",
            format!("a {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let av = a.data()[i * k + l];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data()[l * n..(l + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::matrix(m, n, out)
}

/// Elementwise `max(0, x)`. The subgradient at 0 is taken as 0.
pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|v| v.max(0.0)).collect();
    Tensor {
        rows: x.rows(),
        cols: x.cols(),
        data,
    }
}

/// Concatenates vectors into one vector.
pub fn concat(xs: &[&Tensor]) -> Result<Tensor> {
    let mut out = Vec::new();
    for x in xs {
        if !x.is_vector() {
            return Err(Error::dim("concat", "all inputs must be vectors".to_string()));
        }
        out.extend_from_slice(x.data());
    }
    Ok(Tensor::vector(out))
}

/// Scalar-tensor product.
pub fn scale(s: f64, x: &Tensor) -> Tensor {
    Tensor {
        rows: x.rows(),
        cols: x.cols(),
        data: x.data().iter().map(|v| s * v).collect(),
    }
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.same_shape(b) {
        return Err(Error::dim(
            "add",
            format!("a {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Tensor {
        rows: a.rows(),
        cols: a.cols(),
        data,
    })
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if !a.same_shape(b) {
        return Err(Error::dim(
            "sub",
            format!("a {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    Ok(Tensor {
        rows: a.rows(),
        cols: a.cols(),
        data,
    })
}

/// Inner product of two equal-length vectors.
pub fn dot(a: &Tensor, b: &Tensor) -> Result<f64> {
    if !a.is_vector() || !b.is_vector() || a.rows() != b.rows() {
        return Err(Error::dim(
            "dot",
            format!("a {:?}, b {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
}

/// Softmax of a slice with max subtraction for overflow safety.
pub fn softmax_slice(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax applied independently to every row.
pub fn row_softmax(x: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(x.len());
    for i in 0..x.rows() {
        data.extend(softmax_slice(x.row(i)));
    }
    Tensor {
        rows: x.rows(),
        cols: x.cols(),
        data,
    }
}

/// Softmax applied independently to every column.
pub fn col_softmax(x: &Tensor) -> Tensor {
    let (r, c) = x.shape();
    let mut out = vec![0.0; r * c];
    for j in 0..c {
        let col: Vec<f64> = (0..r).map(|i| x.get(i, j)).collect();
        for (i, v) in softmax_slice(&col).into_iter().enumerate() {
            out[i * c + j] = v;
        }
    }
    Tensor {
        rows: r,
        cols: c,
        data: out,
    }
}

/// `log(sum(exp(x)))` over a vector, with max subtraction.
pub fn log_sum_exp(x: &Tensor) -> Result<f64> {
    if !x.is_vector() || x.is_empty() {
        return Err(Error::dim(
            "log_sum_exp",
            format!("expected non-empty vector, got {:?}", x.shape()),
        ));
    }
    Ok(log_sum_exp_slice(x.data()))
}

pub fn log_sum_exp_slice(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = xs.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_hand_example() {
        let w = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = Tensor::vector(vec![1.0, 1.0]);
        let b = Tensor::vector(vec![1.0, 1.0]);
        assert_eq!(affine(&w, &x, &b).unwrap().data(), &[4.0, 8.0]);
    }

    #[test]
    fn relu_definition() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn col_softmax_uniform_logits() {
        let x = Tensor::zeros(3, 2);
        let s = col_softmax(&x);
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn col_softmax_columns_sum_to_one() {
        let x = Tensor::matrix(3, 2, vec![1.0, -2.0, 0.5, 3.0, -1.0, 7.0]).unwrap();
        let s = col_softmax(&x);
        for j in 0..2 {
            let sum: f64 = (0..3).map(|i| s.get(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for i in 0..3 {
                assert!(s.get(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn log_sum_exp_matches_naive_and_survives_large_inputs() {
        let x = Tensor::vector(vec![0.1, 0.7, -0.3]);
        let naive = x.data().iter().map(|v| v.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&x).unwrap() - naive).abs() < 1e-14);

        let huge = Tensor::vector(vec![1000.0, 1000.0]);
        let lse = log_sum_exp(&huge).unwrap();
        assert!((lse - (1000.0 + 2.0_f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn matmul_shape_mismatch_names_primitive() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let err = matmul(&a, &b).unwrap_err();
        assert!(err.to_string().contains("matmul"));
    }
}
