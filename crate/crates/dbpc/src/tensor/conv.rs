//! Same-padded 2-D convolution and its exact adjoint.
//!
//! Kernels have odd size K so the zero padding P = (K-1)/2 keeps the output
//! spatial shape equal to the input's at stride 1. Shape preservation is
//! what lets one kernel serve both propagation directions: the adjoint maps
//! an output-shaped tensor back to an input-shaped one, and satisfies
//! `⟨v, conv(u)⟩ = ⟨adjoint(v), u⟩` exactly (up to rounding).

use super::Tensor;
use crate::error::{Error, Result};
use crate::parallel::for_rows;

/// Convolution weights: `[out_channels, in_channels, size, size]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    out_channels: usize,
    in_channels: usize,
    size: usize,
    weights: Tensor,
}

impl ConvKernel {
    pub fn new(out_channels: usize, in_channels: usize, size: usize) -> Result<Self> {
        if size % 2 == 0 || size == 0 {
            return Err(Error::InvalidKernel(format!(
                "kernel size must be odd, got {size}"
            )));
        }
        Ok(ConvKernel {
            out_channels,
            in_channels,
            size,
            weights: Tensor::zeros(&[out_channels, in_channels, size, size]),
        })
    }

    pub fn from_weights(
        out_channels: usize,
        in_channels: usize,
        size: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut k = ConvKernel::new(out_channels, in_channels, size)?;
        k.weights = Tensor::from_vec(&[out_channels, in_channels, size, size], weights)?;
        Ok(k)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Zero-padding width that preserves spatial shape: (K-1)/2.
    pub fn padding(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn weight_count(&self) -> usize {
        self.weights.len()
    }

    fn at(&self, o: usize, i: usize, p: usize, q: usize) -> f64 {
        let k = self.size;
        self.weights.data()[((o * self.in_channels + i) * k + p) * k + q]
    }
}

fn check_map(x: &Tensor, channels: usize, what: &str) -> Result<(usize, usize, usize)> {
    match x.shape() {
        [c, h, w, b] if *c == channels => Ok((*h, *w, *b)),
        other => Err(Error::Shape(format!(
            "{what} expects [{channels}, h, w, batch], got {other:?}"
        ))),
    }
}

/// Same-padded convolution on a batched map `[c_in, h, w, batch]`.
pub fn conv2d_same_batch(x: &Tensor, k: &ConvKernel, threads: usize) -> Result<Tensor> {
    let (h, w, batch) = check_map(x, k.in_channels(), "conv2d_same")?;
    let pad = k.padding();
    let ks = k.size();
    let mut out = Tensor::zeros(&[k.out_channels(), h, w, batch]);
    let xd = x.data();
    // One row = all batch values for one output scanline (o, row).
    let work = k.in_channels() * ks * ks * w * batch;
    for_rows(out.data_mut(), w * batch, threads, work, |first, block| {
        for (r, out_row) in block.chunks_mut(w * batch).enumerate() {
            let o = (first + r) / h;
            let oh = (first + r) % h;
            for i in 0..k.in_channels() {
                for p in 0..ks {
                    let ih = oh + p;
                    if ih < pad || ih - pad >= h {
                        continue;
                    }
                    let ih = ih - pad;
                    let x_line = &xd[((i * h + ih) * w) * batch..((i * h + ih) * w + w) * batch];
                    for q in 0..ks {
                        let kv = k.at(o, i, p, q);
                        if kv == 0.0 {
                            continue;
                        }
                        let lo = pad.saturating_sub(q);
                        let hi = (w + pad).saturating_sub(q).min(w);
                        for ow in lo..hi {
                            let iw = ow + q - pad;
                            let src = &x_line[iw * batch..(iw + 1) * batch];
                            let dst = &mut out_row[ow * batch..(ow + 1) * batch];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += kv * s;
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Exact adjoint of [`conv2d_same_batch`] on a batched map
/// `[c_out, h, w, batch]` -> `[c_in, h, w, batch]`.
pub fn conv2d_adjoint_same_batch(v: &Tensor, k: &ConvKernel, threads: usize) -> Result<Tensor> {
    let (h, w, batch) = check_map(v, k.out_channels(), "conv2d_adjoint_same")?;
    let pad = k.padding();
    let ks = k.size();
    let mut out = Tensor::zeros(&[k.in_channels(), h, w, batch]);
    let vd = v.data();
    let work = k.out_channels() * ks * ks * w * batch;
    for_rows(out.data_mut(), w * batch, threads, work, |first, block| {
        for (r, out_row) in block.chunks_mut(w * batch).enumerate() {
            let i = (first + r) / h;
            let ih = (first + r) % h;
            for o in 0..k.out_channels() {
                for p in 0..ks {
                    // adjoint reads v at (ih - p + pad)
                    let vh = ih + pad;
                    if vh < p || vh - p >= h {
                        continue;
                    }
                    let vh = vh - p;
                    let v_line = &vd[((o * h + vh) * w) * batch..((o * h + vh) * w + w) * batch];
                    for q in 0..ks {
                        let kv = k.at(o, i, p, q);
                        if kv == 0.0 {
                            continue;
                        }
                        let lo = q.saturating_sub(pad);
                        let hi = (w + q).saturating_sub(pad).min(w);
                        for iw in lo..hi {
                            let vw = iw + pad - q;
                            let src = &v_line[vw * batch..(vw + 1) * batch];
                            let dst = &mut out_row[iw * batch..(iw + 1) * batch];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += kv * s;
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Kernel-shaped correlation accumulated over space and batch:
/// `g[a][b][p][q] = Σ_{h,w,n} lhs[a,h,w,n] · rhs[b, h+p-P, w+q-P, n]`
/// with zero padding. Both weight-gradient terms of a convolutional
/// interface reduce to this, with activity and masked residual swapping
/// roles between the forward and feedback halves.
pub fn kernel_correlation(
    lhs: &Tensor,
    rhs: &Tensor,
    size: usize,
    threads: usize,
) -> Result<Tensor> {
    let (ca, h, w, batch) = match lhs.shape() {
        [c, h, w, b] => (*c, *h, *w, *b),
        other => {
            return Err(Error::Shape(format!(
                "kernel_correlation lhs must be a batched map, got {other:?}"
            )))
        }
    };
    let cb = match rhs.shape() {
        [c, rh, rw, rb] if *rh == h && *rw == w && *rb == batch => *c,
        other => {
            return Err(Error::Shape(format!(
                "kernel_correlation rhs {other:?} does not match lhs {:?}",
                lhs.shape()
            )))
        }
    };
    if size % 2 == 0 || size == 0 {
        return Err(Error::InvalidKernel(format!(
            "kernel size must be odd, got {size}"
        )));
    }
    let pad = (size - 1) / 2;
    let mut out = Tensor::zeros(&[ca, cb, size, size]);
    let ld = lhs.data();
    let rd = rhs.data();
    let row_len = cb * size * size;
    let work = cb * size * size * h * w * batch;
    for_rows(out.data_mut(), row_len, threads, work, |first, block| {
        for (r, g_row) in block.chunks_mut(row_len).enumerate() {
            let a = first + r;
            for b in 0..cb {
                for p in 0..size {
                    for q in 0..size {
                        let mut acc = 0.0;
                        for hh in 0..h {
                            let rh = hh + p;
                            if rh < pad || rh - pad >= h {
                                continue;
                            }
                            let rh = rh - pad;
                            let lo = pad.saturating_sub(q);
                            let hi = (w + pad).saturating_sub(q).min(w);
                            for ww in lo..hi {
                                let rw = ww + q - pad;
                                let l_off = ((a * h + hh) * w + ww) * batch;
                                let r_off = ((b * h + rh) * w + rw) * batch;
                                for n in 0..batch {
                                    acc += ld[l_off + n] * rd[r_off + n];
                                }
                            }
                        }
                        g_row[(b * size + p) * size + q] = acc;
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Same-padded convolution of a single map `[c_in, h, w]`.
pub fn conv2d_same(x: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    let shape = match x.shape() {
        [c, h, w] => [*c, *h, *w, 1],
        other => {
            return Err(Error::Shape(format!(
                "conv2d_same expects [channels, h, w], got {other:?}"
            )))
        }
    };
    let out = conv2d_same_batch(&x.clone().reshaped(&shape)?, k, 1)?;
    let [c, h, w, _] = [
        out.shape()[0],
        out.shape()[1],
        out.shape()[2],
        out.shape()[3],
    ];
    out.reshaped(&[c, h, w])
}

/// Exact adjoint of [`conv2d_same`] on a single map `[c_out, h, w]`.
pub fn conv2d_adjoint_same(v: &Tensor, k: &ConvKernel) -> Result<Tensor> {
    let shape = match v.shape() {
        [c, h, w] => [*c, *h, *w, 1],
        other => {
            return Err(Error::Shape(format!(
                "conv2d_adjoint_same expects [channels, h, w], got {other:?}"
            )))
        }
    };
    let out = conv2d_adjoint_same_batch(&v.clone().reshaped(&shape)?, k, 1)?;
    let [c, h, w, _] = [
        out.shape()[0],
        out.shape()[1],
        out.shape()[2],
        out.shape()[3],
    ];
    out.reshaped(&[c, h, w])
}
