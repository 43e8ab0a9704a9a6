//! Dense row-major `f64` tensors of rank 0 through 4.
//!
//! Only the handful of operations a capsule network needs are provided:
//! elementwise arithmetic, matrix products, valid-mode 2-D cross-correlation,
//! non-overlapping mean pooling and reshaping, together with the adjoints the
//! backward pass uses. Every operation is a pure function returning a new
//! tensor; results containing NaN or infinity are reported as errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

/// Row-major dense tensor. `shape == []` is a scalar holding one value.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn num_elements(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.len() > MAX_RANK {
        return Err(Error::shape(format!(
            "rank {} exceeds the maximum rank {MAX_RANK}",
            shape.len()
        )));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("zero extent in shape {shape:?}")));
    }
    Ok(())
}

fn finish(shape: Vec<usize>, data: Vec<f64>, op: &str) -> Result<Tensor> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(op.to_string()));
    }
    Ok(Tensor { shape, data })
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape)?;
        if data.len() != num_elements(&shape) {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {} values, got {}",
                num_elements(&shape),
                data.len()
            )));
        }
        finish(shape, data, "tensor construction")
    }

    /// # Panics
    /// If `shape` has a zero extent or rank above [`MAX_RANK`].
    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    /// # Panics
    /// If `shape` has a zero extent or rank above [`MAX_RANK`], or `value` is not finite.
    pub fn full(shape: &[usize], value: f64) -> Self {
        check_shape(shape).expect("invalid tensor shape");
        assert!(value.is_finite(), "tensor values must be finite");
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; num_elements(shape)],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::full(&[], value)
    }

    /// Rank-1 tensor holding `values`.
    pub fn vector(values: &[f64]) -> Self {
        Self::new(vec![values.len()], values.to_vec()).expect("invalid vector")
    }

    /// Rank-2 tensor from equally long rows.
    pub fn matrix(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(vec![rows.len(), cols], data).expect("invalid matrix")
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn get(&self, index: &[usize]) -> Option<f64> {
        self.flat_index(index).map(|i| self.data[i])
    }

    fn flat_index(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            if i >= d {
                return None;
            }
            flat = flat * d + i;
        }
        Some(flat)
    }

    /// Overwrites one flat entry. Used by parameter updates and finite differences.
    pub(crate) fn set_flat(&mut self, i: usize, value: f64) {
        self.data[i] = value;
    }

    fn same_shape(&self, other: &Tensor, op: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn zip_with(&self, other: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other, op)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        finish(self.shape.clone(), data, op)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        finish(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect(), "map")
    }

    /// In-place `self += other`.
    pub fn accumulate(&mut self, other: &Tensor) -> Result<()> {
        self.same_shape(other, "accumulate")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue("accumulate".into()));
        }
        Ok(())
    }

    /// Sum of elementwise products (Frobenius inner product).
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn reshape(&self, target: &[usize]) -> Result<Tensor> {
        check_shape(target)?;
        if num_elements(target) != self.data.len() {
            return Err(Error::shape(format!(
                "reshape {:?} -> {target:?} changes the element count",
                self.shape
            )));
        }
        Ok(Tensor {
            shape: target.to_vec(),
            data: self.data.clone(),
        })
    }

    /// `[m,n] × [n]` or `[m,n] × [n,p]`.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, n) = self.as_matrix("matmul lhs")?;
        let (rows, p) = match rhs.shape.as_slice() {
            [r] => (*r, 1),
            [r, p] => (*r, *p),
            s => return Err(Error::shape(format!("matmul rhs must be rank 1 or 2, got {s:?}"))),
        };
        if rows != n {
            return Err(Error::shape(format!(
                "matmul inner extents differ: {:?} × {:?}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.data[i * n + k] * rhs.data[k * p + j];
                }
                out[i * p + j] = acc;
            }
        }
        let shape = if rhs.rank() == 1 { vec![m] } else { vec![m, p] };
        finish(shape, out, "matmul")
    }

    /// `selfᵀ × rhs` without materialising the transpose.
    pub fn matmul_transposed(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, n) = self.as_matrix("matmul_transposed lhs")?;
        let (rows, p) = match rhs.shape.as_slice() {
            [r] => (*r, 1),
            [r, p] => (*r, *p),
            s => return Err(Error::shape(format!("matmul_transposed rhs rank {}", s.len()))),
        };
        if rows != m {
            return Err(Error::shape(format!(
                "matmul_transposed extents differ: {:?}ᵀ × {:?}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.data[k * n + i] * rhs.data[k * p + j];
                }
                out[i * p + j] = acc;
            }
        }
        let shape = if rhs.rank() == 1 { vec![n] } else { vec![n, p] };
        finish(shape, out, "matmul_transposed")
    }

    /// `self × rhsᵀ` for two tensors of equal trailing extent, treating rank-1
    /// operands as column vectors (so two vectors give their outer product).
    pub fn matmul_rhs_transposed(&self, rhs: &Tensor) -> Result<Tensor> {
        let (m, p) = match self.shape.as_slice() {
            [m] => (*m, 1),
            [m, p] => (*m, *p),
            s => return Err(Error::shape(format!("outer lhs rank {}", s.len()))),
        };
        let (n, q) = match rhs.shape.as_slice() {
            [n] => (*n, 1),
            [n, q] => (*n, *q),
            s => return Err(Error::shape(format!("outer rhs rank {}", s.len()))),
        };
        if p != q || self.rank() != rhs.rank() {
            return Err(Error::shape(format!(
                "outer product extents differ: {:?} × {:?}ᵀ",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += self.data[i * p + k] * rhs.data[j * p + k];
                }
                out[i * n + j] = acc;
            }
        }
        finish(vec![m, n], out, "outer")
    }

    fn as_matrix(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [m, n] => Ok((*m, *n)),
            s => Err(Error::shape(format!("{what} must be rank 2, got {s:?}"))),
        }
    }

    fn as_feature_map(&self, what: &str) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            [c, h, w] => Ok((*c, *h, *w)),
            s => Err(Error::shape(format!("{what} must be [c,h,w], got {s:?}"))),
        }
    }

    fn as_kernel_bank(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            [k, c, kh, kw] => Ok((*k, *c, *kh, *kw)),
            s => Err(Error::shape(format!("kernels must be [k,c,kh,kw], got {s:?}"))),
        }
    }

    /// Valid-mode cross-correlation of a `[c,h,w]` map with `[k,c,kh,kw]` kernels.
    pub fn conv2d(&self, kernels: &Tensor) -> Result<Tensor> {
        let (c, h, w) = self.as_feature_map("conv2d input")?;
        let (k, kc, kh, kw) = kernels.as_kernel_bank()?;
        if kc != c || kh > h || kw > w {
            return Err(Error::shape(format!(
                "conv2d kernels {:?} do not fit input {:?}",
                kernels.shape, self.shape
            )));
        }
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let mut out = vec![0.0; k * oh * ow];
        for o in 0..k {
            for i in 0..oh {
                for j in 0..ow {
                    let mut acc = 0.0;
                    for ch in 0..c {
                        for a in 0..kh {
                            let krow = ((o * c + ch) * kh + a) * kw;
                            let xrow = (ch * h + i + a) * w + j;
                            for b in 0..kw {
                                acc += kernels.data[krow + b] * self.data[xrow + b];
                            }
                        }
                    }
                    out[(o * oh + i) * ow + j] = acc;
                }
            }
        }
        finish(vec![k, oh, ow], out, "conv2d")
    }

    /// Gradient of `<delta, conv2d(self, K)>` with respect to `K`: the valid
    /// cross-correlation of the input with `delta`. Returns `[k,c,kh,kw]`.
    pub fn conv2d_kernel_grad(&self, delta: &Tensor, kernel_hw: (usize, usize)) -> Result<Tensor> {
        let (c, h, w) = self.as_feature_map("conv2d input")?;
        let (k, oh, ow) = delta.as_feature_map("conv2d delta")?;
        let (kh, kw) = kernel_hw;
        if kh > h || kw > w || oh != h - kh + 1 || ow != w - kw + 1 {
            return Err(Error::shape(format!(
                "conv2d delta {:?} inconsistent with input {:?} and kernel {kh}x{kw}",
                delta.shape, self.shape
            )));
        }
        let mut out = vec![0.0; k * c * kh * kw];
        for o in 0..k {
            for ch in 0..c {
                for a in 0..kh {
                    for b in 0..kw {
                        let mut acc = 0.0;
                        for i in 0..oh {
                            for j in 0..ow {
                                acc += delta.data[(o * oh + i) * ow + j]
                                    * self.data[(ch * h + i + a) * w + j + b];
                            }
                        }
                        out[((o * c + ch) * kh + a) * kw + b] = acc;
                    }
                }
            }
        }
        finish(vec![k, c, kh, kw], out, "conv2d kernel grad")
    }

    /// Gradient of `<delta, conv2d(X, self)>` with respect to `X`: the full
    /// convolution of `delta` with the spatially flipped kernels. Returns `[c,h,w]`.
    pub fn conv2d_input_grad(&self, delta: &Tensor) -> Result<Tensor> {
        let (k, c, kh, kw) = self.as_kernel_bank()?;
        let (dk, oh, ow) = delta.as_feature_map("conv2d delta")?;
        if dk != k {
            return Err(Error::shape(format!(
                "conv2d delta {:?} does not match kernels {:?}",
                delta.shape, self.shape
            )));
        }
        let (h, w) = (oh + kh - 1, ow + kw - 1);
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for p in 0..h {
                for q in 0..w {
                    let mut acc = 0.0;
                    for o in 0..k {
                        for a in 0..kh {
                            if p < a || p - a >= oh {
                                continue;
                            }
                            for b in 0..kw {
                                if q < b || q - b >= ow {
                                    continue;
                                }
                                acc += delta.data[(o * oh + p - a) * ow + q - b]
                                    * self.data[((o * c + ch) * kh + a) * kw + b];
                            }
                        }
                    }
                    out[(ch * h + p) * w + q] = acc;
                }
            }
        }
        finish(vec![c, h, w], out, "conv2d input grad")
    }

    /// Mean over non-overlapping `window × window` blocks of each channel.
    pub fn downsample(&self, window: usize) -> Result<Tensor> {
        let (c, h, w) = self.as_feature_map("downsample input")?;
        if window == 0 || h % window != 0 || w % window != 0 {
            return Err(Error::shape(format!(
                "window {window} does not divide {h}x{w}"
            )));
        }
        let (oh, ow) = (h / window, w / window);
        let area = (window * window) as f64;
        let mut out = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    // offsets from the window's first entry keep constant inputs exact
                    let first = self.data[(ch * h + i * window) * w + j * window];
                    let mut acc = 0.0;
                    for a in 0..window {
                        for b in 0..window {
                            acc += self.data[(ch * h + i * window + a) * w + j * window + b] - first;
                        }
                    }
                    out[(ch * oh + i) * ow + j] = first + acc / area;
                }
            }
        }
        finish(vec![c, oh, ow], out, "downsample")
    }

    /// Adjoint of [`Tensor::downsample`]: each entry is spread evenly over its window.
    pub fn downsample_adjoint(&self, window: usize) -> Result<Tensor> {
        let (c, oh, ow) = self.as_feature_map("downsample delta")?;
        if window == 0 {
            return Err(Error::shape("downsample window must be positive"));
        }
        let (h, w) = (oh * window, ow * window);
        let area = (window * window) as f64;
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for p in 0..h {
                for q in 0..w {
                    out[(ch * h + p) * w + q] =
                        self.data[(ch * oh + p / window) * ow + q / window] / area;
                }
            }
        }
        finish(vec![c, h, w], out, "downsample adjoint")
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}{:?}", self.shape, self.data)
    }
}
