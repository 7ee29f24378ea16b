//! Dense row-major matrices and seeded randomness.
//!
//! Matrix products go through `matrixmultiply`'s single-threaded kernels, whose
//! summation order is fixed for given shapes on a given CPU, so repeated calls
//! with equal inputs are bit-identical. Reductions accumulate in `f64`.

mod rng;
mod scalar;

pub use rng::{derive_seed, Rng, Stream};
pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{0}: empty matrix")]
    Empty(&'static str),
    #[error("data length {len} does not match shape {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Reduction direction for [`Matrix::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Collapse the rows: result is `1 × cols`.
    Rows,
    /// Collapse the columns: result is `rows × 1`.
    Cols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
}

/// Dense 2-D array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::BadLength {
                    rows: rows.len(),
                    cols,
                    len: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        // chunks_exact panics on 0; a 0-column matrix has no data to iterate anyway
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Gathers the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Converts element type, e.g. `f32 -> f64` for oracles.
    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(NumericsError::DimensionMismatch {
                op: "max_abs_diff",
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max))
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(NumericsError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        // SAFETY: shapes checked above; strides describe the row-major buffers exactly.
        unsafe {
            T::gemm(
                self.rows,
                self.cols,
                other.cols,
                T::ONE,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                T::ZERO,
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(NumericsError::DimensionMismatch {
                op: "matmul_tn",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.cols, other.cols);
        // SAFETY: selfᵀ is cols×rows with row stride 1 and column stride cols.
        unsafe {
            T::gemm(
                self.cols,
                self.rows,
                other.cols,
                T::ONE,
                self.data.as_ptr(),
                1,
                self.cols as isize,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                T::ZERO,
                out.data.as_mut_ptr(),
                other.cols as isize,
                1,
            );
        }
        Ok(out)
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(NumericsError::DimensionMismatch {
                op: "matmul_nt",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, other.rows);
        // SAFETY: otherᵀ is cols×rows with row stride 1 and column stride cols.
        unsafe {
            T::gemm(
                self.rows,
                self.cols,
                other.rows,
                T::ONE,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                1,
                other.cols as isize,
                T::ZERO,
                out.data.as_mut_ptr(),
                other.rows as isize,
                1,
            );
        }
        Ok(out)
    }

    /// Adds a `1 × cols` row vector to every row in place.
    pub fn add_row_inplace(&mut self, row: &Self) -> Result<()> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(NumericsError::DimensionMismatch {
                op: "add_row",
                left: self.shape(),
                right: row.shape(),
            });
        }
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, &b) in r.iter_mut().zip(&row.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Sum or mean along an axis, accumulated in `f64` in index order.
    pub fn reduce(&self, axis: Axis, mode: Reduce) -> Result<Self> {
        if self.rows == 0 || self.cols == 0 {
            return Err(NumericsError::Empty("reduce"));
        }
        let finish = |sum: f64, count: usize| -> T {
            match mode {
                Reduce::Sum => T::from_f64(sum),
                Reduce::Mean => T::from_f64(sum / count as f64),
            }
        };
        match axis {
            Axis::Rows => {
                let mut acc = vec![0.0f64; self.cols];
                for r in self.iter_rows() {
                    for (a, v) in acc.iter_mut().zip(r) {
                        *a += v.to_f64();
                    }
                }
                let data = acc.into_iter().map(|s| finish(s, self.rows)).collect();
                Ok(Self {
                    rows: 1,
                    cols: self.cols,
                    data,
                })
            }
            Axis::Cols => {
                let data = self
                    .iter_rows()
                    .map(|r| finish(r.iter().map(|v| v.to_f64()).sum(), self.cols))
                    .collect();
                Ok(Self {
                    rows: self.rows,
                    cols: 1,
                    data,
                })
            }
        }
    }
}

/// Matrix of i.i.d. normal draws.
pub fn sample_gaussian<T: Scalar>(
    rng: &mut Rng,
    rows: usize,
    cols: usize,
    mean: f64,
    std: f64,
) -> Result<Matrix<T>> {
    if !(std >= 0.0) || !std.is_finite() || !mean.is_finite() {
        return Err(NumericsError::InvalidParameter(format!(
            "gaussian needs finite mean and std >= 0, got mean={mean} std={std}"
        )));
    }
    let data = (0..rows * cols)
        .map(|_| T::from_f64(mean + std * rng.standard_normal()))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Uniformly random permutation of `0..n` (Fisher–Yates).
pub fn shuffle_permutation(rng: &mut Rng, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(NumericsError::InvalidParameter(
            "cannot permute an empty range".into(),
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    Ok(perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
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

    #[test]
    fn identity_times_m_is_m() {
        let m = Matrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(Matrix::identity(3).matmul(&m).unwrap(), m);
    }

    #[test]
    fn small_product() {
        let a = Matrix::<f32>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::<f32>::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn mismatched_product_names_shapes() {
        let a = Matrix::<f32>::zeros(2, 3);
        let err = a.matmul(&a).unwrap_err();
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn transposed_products_agree_with_naive() {
        let mut rng = Rng::new(7);
        let a: Matrix<f64> = sample_gaussian(&mut rng, 5, 4, 0.0, 1.0).unwrap();
        let b: Matrix<f64> = sample_gaussian(&mut rng, 5, 3, 0.0, 1.0).unwrap();
        let c: Matrix<f64> = sample_gaussian(&mut rng, 6, 4, 0.0, 1.0).unwrap();
        let tn = a.matmul_tn(&b).unwrap();
        assert!(tn.max_abs_diff(&naive_matmul(&a.transpose(), &b)).unwrap() < 1e-12);
        let nt = a.matmul_nt(&c).unwrap();
        assert!(nt.max_abs_diff(&naive_matmul(&a, &c.transpose())).unwrap() < 1e-12);
        let nn = a.transpose().matmul(&b).unwrap();
        assert!(nn.max_abs_diff(&tn).unwrap() < 1e-12);
    }

    #[test]
    fn reduce_examples() {
        let m = Matrix::<f32>::from_rows(&[vec![1.0, 3.0], vec![5.0, 7.0]]).unwrap();
        assert_eq!(m.reduce(Axis::Rows, Reduce::Mean).unwrap().as_slice(), &[3.0, 5.0]);
        let z = Matrix::<f32>::zeros(3, 4);
        assert_eq!(z.reduce(Axis::Cols, Reduce::Sum).unwrap(), Matrix::zeros(3, 1));
        let one = Matrix::<f32>::from_rows(&[vec![0.1, -2.5, 9.0]]).unwrap();
        assert_eq!(one.reduce(Axis::Rows, Reduce::Mean).unwrap(), one);
        assert!(Matrix::<f32>::zeros(0, 3).reduce(Axis::Rows, Reduce::Sum).is_err());
    }

    #[test]
    fn gaussian_degenerate_and_errors() {
        let mut rng = Rng::new(1);
        let m: Matrix<f32> = sample_gaussian(&mut rng, 3, 3, 2.5, 0.0).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 2.5));
        assert!(sample_gaussian::<f32>(&mut rng, 2, 2, 0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = Rng::new(42);
        let m: Matrix<f64> = sample_gaussian(&mut rng, 1, 100_000, 0.0, 1.0).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.as_slice().iter().sum::<f64>() / n;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "std {}", var.sqrt());
    }

    #[test]
    fn seeded_draws_repeat() {
        let a: Matrix<f32> = sample_gaussian(&mut Rng::new(9), 4, 4, 0.0, 1.0).unwrap();
        let b: Matrix<f32> = sample_gaussian(&mut Rng::new(9), 4, 4, 0.0, 1.0).unwrap();
        assert_eq!(a, b);
        let p = shuffle_permutation(&mut Rng::new(9), 50).unwrap();
        let q = shuffle_permutation(&mut Rng::new(9), 50).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn permutation_edge_cases() {
        assert_eq!(shuffle_permutation(&mut Rng::new(0), 1).unwrap(), vec![0]);
        assert!(shuffle_permutation(&mut Rng::new(0), 0).is_err());
    }

    #[test]
    fn permutation_frequencies_are_uniform() {
        let mut rng = Rng::new(2024);
        let mut counts = std::collections::HashMap::new();
        let draws = 60_000;
        for _ in 0..draws {
            *counts.entry(shuffle_permutation(&mut rng, 3).unwrap()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, c) in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.01, "{perm:?}: {freq}");
        }
    }
}
