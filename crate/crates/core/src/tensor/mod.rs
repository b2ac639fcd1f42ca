//! Dense row-major `f64` arrays and a define-by-run reverse-mode tape.
//!
//! Tensors are rank 1 or rank 2. A scalar is a rank-1 tensor of extent 1.
//! The eager operations on [`Tensor`] are the forward half of every tape
//! primitive; [`Tape`] records them and replays the chain rule backwards.

mod gradcheck;
mod rng;
mod tape;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub use gradcheck::{grad_check, GradCheck, GradCheckReport, GradCheckRow};
pub use rng::SeededRng;
pub use tape::{Gradients, Tape, Var};

/// Immutable dense array. Cloning shares the underlying buffer.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<[f64]>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &&self.data[..])
            .finish()
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 || shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "tensor shape must have one or two positive extents, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape,
            data: data.into(),
        })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value].into(),
        }
    }

    /// Rank-1 tensor. Panics on an empty slice.
    pub fn vector(values: &[f64]) -> Self {
        assert!(!values.is_empty(), "vector must be non-empty");
        Tensor {
            shape: vec![values.len()],
            data: values.into(),
        }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Tensor::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n].into(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Tensor {
            shape: vec![n, n],
            data: data.into(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.rank() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.len() != 1 {
            return Err(Error::Shape {
                op: "item",
                lhs: self.shape.clone(),
                rhs: vec![1],
            });
        }
        Ok(self.data[0])
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.to_vec()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same data, new shape of equal size.
    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.len() {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape.clone(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            shape,
            data: data.into(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        Ok(Tensor::from_parts(
            self.shape.clone(),
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, "mul", |a, b| a * b)
    }

    /// Matrix product. `[m,k] x [k,n] -> [m,n]` and `[m,k] x [k] -> [m]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let mismatch = || Error::Shape {
            op: "matmul",
            lhs: self.shape.clone(),
            rhs: other.shape.clone(),
        };
        if self.rank() != 2 {
            return Err(mismatch());
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        if other.shape[0] != k {
            return Err(mismatch());
        }
        let a = &self.data;
        let b = &other.data;
        if other.rank() == 1 {
            let out = (0..m).map(|i| dot(&a[i * k..(i + 1) * k], b)).collect();
            return Ok(Tensor::from_parts(vec![m], out));
        }
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = a[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                    *o += aip * bv;
                }
            }
        }
        Ok(Tensor::from_parts(vec![m, n], out))
    }

    /// Concatenation along `axis`. Rank-1 inputs only concatenate along axis 0.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let rank = first.rank();
        if axis >= rank {
            return Err(Error::InvalidArgument(format!(
                "concat axis {axis} out of range for rank {rank}"
            )));
        }
        for p in parts {
            let conforming = p.rank() == rank && (rank == 1 || p.shape[1 - axis] == first.shape[1 - axis]);
            if !conforming {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: first.shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
        }
        if rank == 1 || axis == 0 {
            let data: Vec<f64> = parts.iter().flat_map(|p| p.data.iter().copied()).collect();
            let mut shape = first.shape.clone();
            shape[0] = parts.iter().map(|p| p.shape[0]).sum();
            return Ok(Tensor::from_parts(shape, data));
        }
        let rows = first.shape[0];
        let cols: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                let c = p.shape[1];
                data.extend_from_slice(&p.data[r * c..(r + 1) * c]);
            }
        }
        Ok(Tensor::from_parts(vec![rows, cols], data))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    pub fn exp(&self) -> Tensor {
        self.map(f64::exp)
    }

    pub fn ln(&self) -> Tensor {
        self.map(f64::ln)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| v * c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.map(|v| v + c)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.map(|v| v.clamp(lo, hi))
    }

    pub fn sum(&self) -> Tensor {
        Tensor::scalar(self.data.iter().sum())
    }

    pub fn sum_sq(&self) -> Tensor {
        Tensor::scalar(self.data.iter().map(|v| v * v).sum())
    }

    /// Sum over `axis`; the reduced axis disappears (a rank-1 input yields a scalar).
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("sum_axis", axis)?;
        if self.rank() == 1 {
            return Ok(self.sum());
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        if axis == 0 {
            let mut out = vec![0.0; cols];
            for r in 0..rows {
                for (o, v) in out.iter_mut().zip(&self.data[r * cols..(r + 1) * cols]) {
                    *o += v;
                }
            }
            Ok(Tensor::from_parts(vec![cols], out))
        } else {
            let out = (0..rows)
                .map(|r| self.data[r * cols..(r + 1) * cols].iter().sum())
                .collect();
            Ok(Tensor::from_parts(vec![rows], out))
        }
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let n = self.shape.get(axis).copied().unwrap_or(1) as f64;
        Ok(self.sum_axis(axis)?.scale(1.0 / n))
    }

    /// Softmax over `axis` with max subtraction.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        self.check_axis("softmax", axis)?;
        let mut out = self.data.to_vec();
        for lane in self.lanes(axis) {
            let max = lane.iter().map(|&i| self.data[i]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for &i in &lane {
                out[i] = (self.data[i] - max).exp();
                total += out[i];
            }
            for &i in &lane {
                out[i] /= total;
            }
        }
        Ok(Tensor::from_parts(self.shape.clone(), out))
    }

    /// Inverted dropout with a caller-supplied 0/1 mask.
    pub fn dropout(&self, keep: f64, mask: &Tensor) -> Result<Tensor> {
        check_keep(keep)?;
        let scaled = mask.scale(1.0 / keep);
        self.zip(&scaled, "dropout", |a, m| a * m)
    }

    /// Row `index` of a matrix as a vector.
    pub fn row(&self, index: usize) -> Result<Tensor> {
        if self.rank() != 2 || index >= self.shape[0] {
            return Err(Error::InvalidArgument(format!(
                "row {index} out of range for shape {:?}",
                self.shape
            )));
        }
        let c = self.shape[1];
        Ok(Tensor::from_parts(
            vec![c],
            self.data[index * c..(index + 1) * c].to_vec(),
        ))
    }

    /// Stack equal-length vectors into the rows of a matrix.
    pub fn stack(rows: &[&Tensor]) -> Result<Tensor> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero tensors".into()))?;
        for r in rows {
            if r.rank() != 1 || r.shape != first.shape {
                return Err(Error::Shape {
                    op: "stack",
                    lhs: first.shape.clone(),
                    rhs: r.shape.clone(),
                });
            }
        }
        let data = rows.iter().flat_map(|r| r.data.iter().copied()).collect();
        Ok(Tensor::from_parts(vec![rows.len(), first.shape[0]], data))
    }

    /// Rows `indices` of a matrix, in order.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        if self.rank() != 2 || indices.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "gather_rows needs a matrix and at least one index, got shape {:?}",
                self.shape
            )));
        }
        let c = self.shape[1];
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            if i >= self.shape[0] {
                return Err(Error::InvalidArgument(format!(
                    "row {i} out of range for shape {:?}",
                    self.shape
                )));
            }
            data.extend_from_slice(&self.data[i * c..(i + 1) * c]);
        }
        Ok(Tensor::from_parts(vec![indices.len(), c], data))
    }

    fn check_axis(&self, op: &str, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::InvalidArgument(format!(
                "{op}: axis {axis} out of range for shape {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    /// Flat indices of each 1-d slice running along `axis`.
    pub(crate) fn lanes(&self, axis: usize) -> Vec<Vec<usize>> {
        if self.rank() == 1 {
            return vec![(0..self.len()).collect()];
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        if axis == 0 {
            (0..cols).map(|c| (0..rows).map(|r| r * cols + c).collect()).collect()
        } else {
            (0..rows).map(|r| (0..cols).map(|c| r * cols + c).collect()).collect()
        }
    }
}

pub(crate) fn check_keep(keep: f64) -> Result<()> {
    if !(keep > 0.0 && keep <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dropout keep probability must lie in (0, 1], got {keep}"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
