//! Dense numerical core: tensors, matrix products and ReLU.
//!
//! Storage is always double precision, row-major. Activities live in two
//! layouts:
//!
//! * single sample — vector `[n]` or feature map `[channels, h, w]`;
//! * minibatch — `[n, batch]` or `[channels, h, w, batch]`, i.e. the batch
//!   dimension is innermost so one unit's values across the batch are
//!   contiguous. The batched kernels below vectorize over that axis, and a
//!   batch of one is bit-identical to the single-sample path.
//!
//! All reductions run in a fixed sequential order per output element, so
//! every operation returns the same bits for any `threads` argument.

mod conv;

pub use conv::{
    conv2d_adjoint_same, conv2d_adjoint_same_batch, conv2d_same, conv2d_same_batch,
    kernel_correlation, ConvKernel,
};

use crate::error::{Error, Result};
use crate::parallel::for_rows;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} implies {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    /// Reinterpret the value with a new shape of the same total length.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot view {:?} as {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Element-wise combination; shapes must match exactly.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "zip of {:?} with {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// self += scale * other, in place.
    pub fn add_scaled(&mut self, other: &Tensor, scale: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "axpy of {:?} with {:?}",
                other.shape, self.shape
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// max(0, x) element-wise.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// ReLU derivative: 1 where x > 0, else 0. The value at exactly 0 is 0.
pub fn relu_prime(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

fn check_matrix(w: &Tensor) -> Result<(usize, usize)> {
    match w.shape() {
        [rows, cols] => Ok((*rows, *cols)),
        other => Err(Error::Shape(format!("expected a matrix, got {other:?}"))),
    }
}

/// y = W x for a matrix `[n_out, n_in]` and vector `[n_in]`.
pub fn matmul(w: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (_, n_in) = check_matrix(w)?;
    if x.shape() != [n_in] {
        return Err(Error::Shape(format!(
            "matmul of {:?} with {:?}",
            w.shape(),
            x.shape()
        )));
    }
    let n = x.len();
    let cols = matmul_batch(w, &x.clone().reshaped(&[n, 1])?, 1)?;
    let out = cols.shape()[0];
    cols.reshaped(&[out])
}

/// y = Wᵀ v for a matrix `[n_out, n_in]` and vector `[n_out]`.
pub fn matmul_transpose(w: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (n_out, _) = check_matrix(w)?;
    if v.shape() != [n_out] {
        return Err(Error::Shape(format!(
            "transposed matmul of {:?} with {:?}",
            w.shape(),
            v.shape()
        )));
    }
    let n = v.len();
    let cols = matmul_transpose_batch(w, &v.clone().reshaped(&[n, 1])?, 1)?;
    let out = cols.shape()[0];
    cols.reshaped(&[out])
}

/// Batched product: W `[n_out, n_in]` times X `[n_in, batch]` -> `[n_out, batch]`.
///
/// The kernel walks the batch in tiles of 8 columns held in registers, so
/// the inner loop over the shared dimension is a fused stream of
/// multiply-adds; per output element the accumulation order is always
/// ascending over the shared dimension, independent of tiling and threads.
/// On x86-64 with AVX2+FMA the tile is computed by a vector micro-kernel
/// chosen once at startup.
pub fn matmul_batch(w: &Tensor, x: &Tensor, threads: usize) -> Result<Tensor> {
    let (n_out, n_in) = check_matrix(w)?;
    let (xn, batch) = check_matrix(x)?;
    if xn != n_in {
        return Err(Error::Shape(format!(
            "matmul of {:?} with {:?}",
            w.shape(),
            x.shape()
        )));
    }
    let mut out = Tensor::zeros(&[n_out, batch]);
    let wd = w.data();
    let xd = x.data();
    let use_simd = simd::available();
    for_rows(out.data_mut(), batch, threads, n_in * batch, |first, block| {
        let rows = block.len() / batch;
        let mut col = 0;
        while col < batch {
            if batch - col >= 8 {
                if use_simd {
                    // bounds: rows/cols sliced above; n_in strides checked
                    // by the shape tests
                    unsafe { simd::gemm_col_tile(wd, xd, block, first, rows, n_in, batch, col) };
                } else {
                    for r in 0..rows {
                        let w_row = &wd[(first + r) * n_in..(first + r + 1) * n_in];
                        let mut acc = [0.0f64; 8];
                        for (j, &wj) in w_row.iter().enumerate() {
                            let xs = &xd[j * batch + col..j * batch + col + 8];
                            acc[0] += wj * xs[0];
                            acc[1] += wj * xs[1];
                            acc[2] += wj * xs[2];
                            acc[3] += wj * xs[3];
                            acc[4] += wj * xs[4];
                            acc[5] += wj * xs[5];
                            acc[6] += wj * xs[6];
                            acc[7] += wj * xs[7];
                        }
                        block[r * batch + col..r * batch + col + 8].copy_from_slice(&acc);
                    }
                }
                col += 8;
            } else {
                for r in 0..rows {
                    let w_row = &wd[(first + r) * n_in..(first + r + 1) * n_in];
                    for t in col..batch {
                        let mut acc = 0.0;
                        for (j, &wj) in w_row.iter().enumerate() {
                            acc += wj * xd[j * batch + t];
                        }
                        block[r * batch + t] = acc;
                    }
                }
                col = batch;
            }
        }
    });
    Ok(out)
}

#[cfg(target_arch = "x86_64")]
mod simd {
    //! Runtime-selected AVX2+FMA micro-kernel. Per output element the
    //! accumulation order over the shared dimension is ascending, matching
    //! the scalar tile kernel; only the rounding differs (fused
    //! multiply-add), and which kernel runs is fixed per machine, so runs
    //! on one machine are bit-reproducible.

    use core::arch::x86_64::*;
    use std::sync::OnceLock;

    pub fn available() -> bool {
        static AVAILABLE: OnceLock<bool> = OnceLock::new();
        *AVAILABLE
            .get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
    }

    /// Compute the 8-column tile starting at `col` for every row of the
    /// worker's block: `out[r][col..col+8] = Σ_j w[first+r][j] · x[j][col..col+8]`.
    ///
    /// # Safety
    /// Requires AVX2 and FMA (checked via [`available`]), and in-bounds
    /// access for `w[(first+rows)*n_in]`, `x[n_in*batch]` and
    /// `out[rows*batch]`, which the caller's slice construction guarantees.
    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx2", enable = "fma")]
    pub unsafe fn gemm_col_tile(
        w: &[f64],
        x: &[f64],
        out: &mut [f64],
        first: usize,
        rows: usize,
        n_in: usize,
        batch: usize,
        col: usize,
    ) {
        debug_assert!((first + rows) * n_in <= w.len());
        debug_assert!(n_in * batch <= x.len() && col + 8 <= batch);
        debug_assert!(rows * batch <= out.len());
        let mut r = 0;
        // 4 rows x 8 columns: eight independent accumulator chains keep
        // both FMA ports busy
        while r + 4 <= rows {
            let w0 = w.as_ptr().add((first + r) * n_in);
            let w1 = w0.add(n_in);
            let w2 = w1.add(n_in);
            let w3 = w2.add(n_in);
            let mut a00 = _mm256_setzero_pd();
            let mut a01 = _mm256_setzero_pd();
            let mut a10 = _mm256_setzero_pd();
            let mut a11 = _mm256_setzero_pd();
            let mut a20 = _mm256_setzero_pd();
            let mut a21 = _mm256_setzero_pd();
            let mut a30 = _mm256_setzero_pd();
            let mut a31 = _mm256_setzero_pd();
            let mut xp = x.as_ptr().add(col);
            for j in 0..n_in {
                let x0 = _mm256_loadu_pd(xp);
                let x1 = _mm256_loadu_pd(xp.add(4));
                let b0 = _mm256_set1_pd(*w0.add(j));
                a00 = _mm256_fmadd_pd(b0, x0, a00);
                a01 = _mm256_fmadd_pd(b0, x1, a01);
                let b1 = _mm256_set1_pd(*w1.add(j));
                a10 = _mm256_fmadd_pd(b1, x0, a10);
                a11 = _mm256_fmadd_pd(b1, x1, a11);
                let b2 = _mm256_set1_pd(*w2.add(j));
                a20 = _mm256_fmadd_pd(b2, x0, a20);
                a21 = _mm256_fmadd_pd(b2, x1, a21);
                let b3 = _mm256_set1_pd(*w3.add(j));
                a30 = _mm256_fmadd_pd(b3, x0, a30);
                a31 = _mm256_fmadd_pd(b3, x1, a31);
                xp = xp.add(batch);
            }
            let o0 = out.as_mut_ptr().add(r * batch + col);
            _mm256_storeu_pd(o0, a00);
            _mm256_storeu_pd(o0.add(4), a01);
            let o1 = out.as_mut_ptr().add((r + 1) * batch + col);
            _mm256_storeu_pd(o1, a10);
            _mm256_storeu_pd(o1.add(4), a11);
            let o2 = out.as_mut_ptr().add((r + 2) * batch + col);
            _mm256_storeu_pd(o2, a20);
            _mm256_storeu_pd(o2.add(4), a21);
            let o3 = out.as_mut_ptr().add((r + 3) * batch + col);
            _mm256_storeu_pd(o3, a30);
            _mm256_storeu_pd(o3.add(4), a31);
            r += 4;
        }
        while r < rows {
            let wr = w.as_ptr().add((first + r) * n_in);
            let mut a0 = _mm256_setzero_pd();
            let mut a1 = _mm256_setzero_pd();
            let mut xp = x.as_ptr().add(col);
            for j in 0..n_in {
                let b = _mm256_set1_pd(*wr.add(j));
                a0 = _mm256_fmadd_pd(b, _mm256_loadu_pd(xp), a0);
                a1 = _mm256_fmadd_pd(b, _mm256_loadu_pd(xp.add(4)), a1);
                xp = xp.add(batch);
            }
            let o = out.as_mut_ptr().add(r * batch + col);
            _mm256_storeu_pd(o, a0);
            _mm256_storeu_pd(o.add(4), a1);
            r += 1;
        }
    }
}

#[cfg(not(target_arch = "x86_64"))]
mod simd {
    pub fn available() -> bool {
        false
    }

    /// Never called: `available()` is false on this architecture.
    pub unsafe fn gemm_col_tile(
        _w: &[f64],
        _x: &[f64],
        _out: &mut [f64],
        _first: usize,
        _rows: usize,
        _n_in: usize,
        _batch: usize,
        _col: usize,
    ) {
        unreachable!("simd kernel on unsupported architecture")
    }
}

/// Batched adjoint product: Wᵀ V for V `[n_out, batch]` -> `[n_in, batch]`.
pub fn matmul_transpose_batch(w: &Tensor, v: &Tensor, threads: usize) -> Result<Tensor> {
    let (n_out, n_in) = check_matrix(w)?;
    let (vn, batch) = check_matrix(v)?;
    if vn != n_out {
        return Err(Error::Shape(format!(
            "transposed matmul of {:?} with {:?}",
            w.shape(),
            v.shape()
        )));
    }
    let mut out = Tensor::zeros(&[n_in, batch]);
    let wd = w.data();
    let vd = v.data();
    // Each worker owns a contiguous range of output rows (input units) and
    // walks the full n_out dimension sequentially, so every accumulation
    // order is fixed regardless of the thread count.
    for_rows(out.data_mut(), batch, threads, n_out * batch, |first, block| {
        let rows = block.len() / batch;
        for i in 0..n_out {
            let v_row = &vd[i * batch..(i + 1) * batch];
            let w_row = &wd[i * n_in + first..i * n_in + first + rows];
            for (j, &wj) in w_row.iter().enumerate() {
                let out_row = &mut block[j * batch..(j + 1) * batch];
                for (o, &vv) in out_row.iter_mut().zip(v_row) {
                    *o += wj * vv;
                }
            }
        }
    });
    Ok(out)
}

/// Weight-shaped product G = D Xᵀ summed over the batch:
/// D `[n_out, batch]`, X `[n_in, batch]` -> `[n_out, n_in]` with
/// `G[r][c] = Σ_b D[r][b] · X[c][b]`.
pub fn matmul_grad_batch(d: &Tensor, x: &Tensor, threads: usize) -> Result<Tensor> {
    let (n_out, batch) = check_matrix(d)?;
    let (n_in, xb) = check_matrix(x)?;
    if xb != batch {
        return Err(Error::Shape(format!(
            "batch mismatch: {:?} vs {:?}",
            d.shape(),
            x.shape()
        )));
    }
    let mut out = Tensor::zeros(&[n_out, n_in]);
    let dd = d.data();
    let xd = x.data();
    for_rows(out.data_mut(), n_in, threads, batch * n_in, |first, block| {
        let rows = block.len() / n_in;
        let mut col = 0;
        while col < n_in {
            if n_in - col >= 8 {
                for r in 0..rows {
                    let d_row = &dd[(first + r) * batch..(first + r + 1) * batch];
                    let mut acc = [0.0f64; 8];
                    for (b, &dv) in d_row.iter().enumerate() {
                        acc[0] += dv * xd[col * batch + b];
                        acc[1] += dv * xd[(col + 1) * batch + b];
                        acc[2] += dv * xd[(col + 2) * batch + b];
                        acc[3] += dv * xd[(col + 3) * batch + b];
                        acc[4] += dv * xd[(col + 4) * batch + b];
                        acc[5] += dv * xd[(col + 5) * batch + b];
                        acc[6] += dv * xd[(col + 6) * batch + b];
                        acc[7] += dv * xd[(col + 7) * batch + b];
                    }
                    block[r * n_in + col..r * n_in + col + 8].copy_from_slice(&acc);
                }
                col += 8;
            } else {
                for r in 0..rows {
                    let d_row = &dd[(first + r) * batch..(first + r + 1) * batch];
                    for c in col..n_in {
                        let x_row = &xd[c * batch..(c + 1) * batch];
                        let mut acc = 0.0;
                        for (&dv, &xv) in d_row.iter().zip(x_row) {
                            acc += dv * xv;
                        }
                        block[r * n_in + c] = acc;
                    }
                }
                col = n_in;
            }
        }
    });
    Ok(out)
}
