//! Layer kernels: same-padded 3D convolution, inference batch norm, ReLU,
//! and the voxel rearrangements behind patch merging and expanding.

use rayon::prelude::*;

use super::tensor::Tensor5;
use crate::{Error, Result};

/// Output columns per GEMM call.
const CHUNK_COLS: usize = 4096;

/// Borrowed convolution parameters; `shape` is `(C_out, C_in, k, k, k)`.
#[derive(Clone, Copy, Debug)]
pub struct ConvWeights<'a> {
    pub weight: &'a [f32],
    pub bias: &'a [f32],
    pub shape: [usize; 5],
}

impl<'a> ConvWeights<'a> {
    pub fn new(weight: &'a [f32], bias: &'a [f32], shape: [usize; 5]) -> Result<Self> {
        let [co, ci, kz, ky, kx] = shape;
        if kz != ky || ky != kx || kz % 2 == 0 {
            return Err(Error::ShapeMismatch(format!(
                "kernel {shape:?} must be cubic with odd size"
            )));
        }
        if weight.len() != co * ci * kz * ky * kx || bias.len() != co {
            return Err(Error::ShapeMismatch(format!(
                "kernel {shape:?} with {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(ConvWeights {
            weight,
            bias,
            shape,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.shape[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.shape[2]
    }
}

/// Row-major `m x k` times `k x n` into `c` (`m x n`, overwritten).
fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover the row-major extents passed as strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Same-size 3D cross-correlation, stride 1, zero padding `k / 2`.
///
/// Output chunks are fixed by the tensor shape, not the thread count, so
/// results are bit-identical for any rayon pool size.
pub fn conv3d(t: &Tensor5, w: &ConvWeights<'_>) -> Result<Tensor5> {
    if w.in_channels() != t.channels() {
        return Err(Error::ShapeMismatch(format!(
            "kernel expects {} input channels, tensor has {}",
            w.in_channels(),
            t.channels()
        )));
    }
    let [b, ci, nz, ny, nx] = t.shape();
    let co = w.out_channels();
    let k = w.kernel_size();
    let plane = nz * ny * nx;
    let rows_per_chunk = (CHUNK_COLS / nx).clamp(1, ny);
    // (batch, z, y0, y1)
    let chunks: Vec<(usize, usize, usize, usize)> = (0..b)
        .flat_map(|bi| {
            (0..nz).flat_map(move |z| {
                (0..ny)
                    .step_by(rows_per_chunk)
                    .map(move |y0| (bi, z, y0, (y0 + rows_per_chunk).min(ny)))
            })
        })
        .collect();
    let kdim = ci * k * k * k;
    let pad = (k / 2) as isize;
    let results: Vec<Vec<f32>> = chunks
        .par_iter()
        .map(|&(bi, z, y0, y1)| {
            let cols = (y1 - y0) * nx;
            let input = t.item(bi);
            let mut col = vec![0.0f32; kdim * cols];
            let mut row = 0;
            for c in 0..ci {
                let chan = &input[c * plane..(c + 1) * plane];
                for dz in 0..k as isize {
                    let sz = z as isize + dz - pad;
                    for dy in 0..k as isize {
                        for dx in 0..k as isize {
                            let dst = &mut col[row * cols..(row + 1) * cols];
                            row += 1;
                            if sz < 0 || sz >= nz as isize {
                                continue;
                            }
                            // Valid x range for this tap.
                            let x_lo = (pad - dx).max(0) as usize;
                            let x_hi = (nx as isize + pad - dx).min(nx as isize) as usize;
                            if x_lo >= x_hi {
                                continue;
                            }
                            for (r, y) in (y0..y1).enumerate() {
                                let sy = y as isize + dy - pad;
                                if sy < 0 || sy >= ny as isize {
                                    continue;
                                }
                                let src = (sz as usize * ny + sy as usize) * nx;
                                let sx0 = (x_lo as isize + dx - pad) as usize;
                                dst[r * nx + x_lo..r * nx + x_hi]
                                    .copy_from_slice(&chan[src + sx0..src + sx0 + (x_hi - x_lo)]);
                            }
                        }
                    }
                }
            }
            let mut out = vec![0.0f32; co * cols];
            gemm(co, kdim, cols, w.weight, &col, &mut out);
            for (o, bias) in out.chunks_exact_mut(cols).zip(w.bias) {
                o.iter_mut().for_each(|v| *v += bias);
            }
            out
        })
        .collect();
    let mut out = Tensor5::zeros([b, co, nz, ny, nx]);
    for (&(bi, z, y0, y1), res) in chunks.iter().zip(&results) {
        let cols = (y1 - y0) * nx;
        for c in 0..co {
            let start = out.offset(bi, c, z, y0, 0);
            out.data_mut()[start..start + cols].copy_from_slice(&res[c * cols..(c + 1) * cols]);
        }
    }
    Ok(out)
}

/// Stored batch-norm statistics for one layer.
#[derive(Clone, Copy, Debug)]
pub struct BatchNormParams<'a> {
    pub scale: &'a [f32],
    pub shift: &'a [f32],
    pub mean: &'a [f32],
    pub var: &'a [f32],
    pub eps: f32,
}

/// `(v - mean) / sqrt(var + eps) * scale + shift`, per channel.
pub fn batchnorm3d(t: &Tensor5, p: &BatchNormParams<'_>) -> Result<Tensor5> {
    let c = t.channels();
    if [p.scale, p.shift, p.mean, p.var].iter().any(|v| v.len() != c) {
        return Err(Error::ShapeMismatch(format!(
            "batch norm parameters must have {c} entries"
        )));
    }
    let mut inv_std = Vec::with_capacity(c);
    for (i, &var) in p.var.iter().enumerate() {
        let denom = var as f64 + p.eps as f64;
        if !(denom > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "batch norm channel {i}: var + eps = {denom} is not positive"
            )));
        }
        inv_std.push((1.0 / denom.sqrt()) as f32);
    }
    let mut out = t.clone();
    let plane = t.plane_len();
    out.data_mut()
        .par_chunks_mut(plane)
        .enumerate()
        .for_each(|(i, chan)| {
            let ch = i % c;
            let (m, s, sc, sh) = (p.mean[ch], inv_std[ch], p.scale[ch], p.shift[ch]);
            chan.iter_mut().for_each(|v| *v = (*v - m) * s * sc + sh);
        });
    Ok(out)
}

pub fn relu_inplace(t: &mut Tensor5) {
    t.data_mut().par_iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Interval sampling: splits every `s x s x s` block into `s³` channels.
///
/// Output channel `c * s³ + dz * s² + dy * s + dx` at `(z, y, x)` holds input
/// channel `c` at `(s*z + dz, s*y + dy, s*x + dx)`.
pub fn space_to_depth(t: &Tensor5, s: usize) -> Result<Tensor5> {
    let [b, c, nz, ny, nx] = t.shape();
    if s == 0 {
        return Err(Error::InvalidParameter("scale factor must be >= 1".into()));
    }
    if nz % s != 0 || ny % s != 0 || nx % s != 0 {
        return Err(Error::EvenDimsRequired([nz, ny, nx]));
    }
    let (oz, oy, ox) = (nz / s, ny / s, nx / s);
    let mut out = Tensor5::zeros([b, c * s * s * s, oz, oy, ox]);
    let src = t.data();
    let mut i = 0;
    let dst = out.data_mut();
    for bi in 0..b {
        for ch in 0..c {
            for dz in 0..s {
                for dy in 0..s {
                    for dx in 0..s {
                        for z in 0..oz {
                            for y in 0..oy {
                                let base = (((bi * c + ch) * nz + s * z + dz) * ny + s * y + dy) * nx + dx;
                                for x in 0..ox {
                                    dst[i] = src[base + s * x];
                                    i += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`space_to_depth`]: output `(c, s*z + dz, s*y + dy, s*x + dx)`
/// reads input channel `c * s³ + dz * s² + dy * s + dx` at `(z, y, x)`.
pub fn depth_to_space(t: &Tensor5, s: usize) -> Result<Tensor5> {
    let [b, cs, nz, ny, nx] = t.shape();
    let s3 = s * s * s;
    if s == 0 {
        return Err(Error::InvalidParameter("scale factor must be >= 1".into()));
    }
    if cs % s3 != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{cs} channels not divisible by {s}³"
        )));
    }
    let c = cs / s3;
    let mut out = Tensor5::zeros([b, c, nz * s, ny * s, nx * s]);
    let src = t.data();
    let (oy, ox) = (ny * s, nx * s);
    let oz = nz * s;
    let dst = out.data_mut();
    let mut i = 0;
    for bi in 0..b {
        for ch in 0..cs {
            let (co, sub) = (ch / s3, ch % s3);
            let (dz, dy, dx) = (sub / (s * s), (sub / s) % s, sub % s);
            for z in 0..nz {
                for y in 0..ny {
                    let base = (((bi * c + co) * oz + s * z + dz) * oy + s * y + dy) * ox + dx;
                    for x in 0..nx {
                        dst[base + s * x] = src[i];
                        i += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Halves every spatial dimension, keeping `C`: interval sampling to `8C`
/// channels, then a 1×1×1 convolution and batch norm back to `C`.
pub fn patch_merge3d(t: &Tensor5, conv: &ConvWeights<'_>, bn: &BatchNormParams<'_>) -> Result<Tensor5> {
    let [nz, ny, nx] = t.spatial();
    if nz % 2 != 0 || ny % 2 != 0 || nx % 2 != 0 {
        return Err(Error::EvenDimsRequired([nz, ny, nx]));
    }
    if conv.shape != [t.channels(), 8 * t.channels(), 1, 1, 1] {
        return Err(Error::ShapeMismatch(format!(
            "patch merge on {} channels needs a {:?} kernel, got {:?}",
            t.channels(),
            [t.channels(), 8 * t.channels(), 1, 1, 1],
            conv.shape
        )));
    }
    let sampled = space_to_depth(t, 2)?;
    batchnorm3d(&conv3d(&sampled, conv)?, bn)
}

/// Multiplies every spatial dimension by `s`, keeping `C`: a 1×1×1
/// convolution to `s³C` channels, then the inverse interval rearrangement.
pub fn patch_expand3d(t: &Tensor5, s: usize, conv: &ConvWeights<'_>) -> Result<Tensor5> {
    if s < 1 {
        return Err(Error::InvalidParameter(format!("expand factor {s} must be >= 1")));
    }
    let c = t.channels();
    if conv.shape != [s * s * s * c, c, 1, 1, 1] {
        return Err(Error::ShapeMismatch(format!(
            "patch expand x{s} on {c} channels needs a {:?} kernel, got {:?}",
            [s * s * s * c, c, 1, 1, 1],
            conv.shape
        )));
    }
    depth_to_space(&conv3d(t, conv)?, s)
}
