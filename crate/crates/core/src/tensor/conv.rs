//! Strided, padded, dilated 2-D convolution.
//!
//! Taps follow the convolution convention: with the kernel index `t`
//! centred on zero, output position `p` collects `F(s)·k(t)` over all
//! `s + l·t = p`. Positions outside the input read as zero.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvSpec {
    /// Stride 1, no dilation, padding that preserves resolution.
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
            dilation: 1,
        }
    }

    /// Resolution-preserving 3x3 convolution with dilation `l` (padding `l`).
    pub fn dilated3(in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: 3,
            stride: 1,
            padding: dilation,
            dilation,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(invalid("conv: channel counts must be positive"));
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(invalid(format!(
                "conv: kernel extent must be odd and positive, got {}",
                self.kernel
            )));
        }
        if self.stride == 0 || self.dilation == 0 {
            return Err(invalid("conv: stride and dilation must be >= 1"));
        }
        Ok(())
    }

    /// Extent spanned by one dilated kernel, `l·(k-1) + 1`.
    pub fn effective_kernel(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }

    /// `floor((in + 2p - l(k-1) - 1)/s) + 1`, or `None` when that is < 1.
    pub fn output_extent(&self, input: usize) -> Option<usize> {
        let num = input as i64 + 2 * self.padding as i64 - self.effective_kernel() as i64;
        if num < 0 {
            None
        } else {
            Some((num / self.stride as i64 + 1) as usize)
        }
    }

    fn output_extent_checked(&self, op: &'static str, input: usize) -> Result<usize> {
        self.output_extent(input).ok_or_else(|| {
            let num = input as i64 + 2 * self.padding as i64 - self.effective_kernel() as i64;
            Error::EmptyOutput {
                op,
                input,
                extent: num.div_euclid(self.stride as i64) + 1,
            }
        })
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    /// Signed input offset of kernel row/column `k_idx` relative to `o·stride`.
    fn tap_offset(&self, k_idx: usize) -> i64 {
        ((self.kernel - 1 - k_idx) * self.dilation) as i64 - self.padding as i64
    }
}

/// Output indices `o` in `0..out` whose sample `o·stride + offset` lies in `0..input`.
fn valid_range(out: usize, input: usize, stride: usize, offset: i64) -> std::ops::Range<usize> {
    let s = stride as i64;
    // smallest o with o*s + offset >= 0
    let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
    // largest o with o*s + offset <= input - 1
    let hi_num = input as i64 - 1 - offset;
    if hi_num < 0 {
        return 0..0;
    }
    let hi = (hi_num / s + 1).min(out as i64);
    if lo >= hi {
        0..0
    } else {
        lo as usize..hi as usize
    }
}

fn check_operands(
    op: &'static str,
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
) -> Result<(usize, usize, usize, usize)> {
    spec.validate()?;
    let (c, h, w) = input.chw()?;
    if c != spec.in_channels {
        return Err(Error::Shape {
            op,
            dim: "input channels",
            expected: spec.in_channels,
            got: c,
        });
    }
    let ws = spec.weight_shape();
    if weights.shape().len() != 4 {
        return Err(Error::Shape {
            op,
            dim: "weight rank",
            expected: 4,
            got: weights.shape().len(),
        });
    }
    const NAMES: [&str; 4] = [
        "weight out_channels",
        "weight in_channels",
        "weight kernel height",
        "weight kernel width",
    ];
    for (i, (&e, &g)) in ws.iter().zip(weights.shape()).enumerate() {
        if e != g {
            return Err(Error::Shape {
                op,
                dim: NAMES[i],
                expected: e,
                got: g,
            });
        }
    }
    let oh = spec.output_extent_checked(op, h)?;
    let ow = spec.output_extent_checked(op, w)?;
    Ok((h, w, oh, ow))
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    spec: &ConvSpec,
) -> Result<Tensor> {
    let (h, w, oh, ow) = check_operands("conv2d_forward", input, weights, spec)?;
    if bias.len() != spec.out_channels {
        return Err(Error::Shape {
            op: "conv2d_forward",
            dim: "bias length",
            expected: spec.out_channels,
            got: bias.len(),
        });
    }
    let k = spec.kernel;
    let s = spec.stride;
    let mut out = Tensor::zeros(&[spec.out_channels, oh, ow]);
    let wdata = weights.data();
    for o in 0..spec.out_channels {
        let plane = out.channel_mut(o);
        plane.fill(bias.data()[o]);
        for i in 0..spec.in_channels {
            let src = input.channel(i);
            for ky in 0..k {
                let off_y = spec.tap_offset(ky);
                let rows = valid_range(oh, h, s, off_y);
                for kx in 0..k {
                    let wv = wdata[((o * spec.in_channels + i) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let off_x = spec.tap_offset(kx);
                    let cols = valid_range(ow, w, s, off_x);
                    if cols.is_empty() {
                        continue;
                    }
                    for oy in rows.clone() {
                        let iy = (oy * s) as i64 + off_y;
                        let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
                        let dst_row = &mut plane[oy * ow..(oy + 1) * ow];
                        if s == 1 {
                            let ix0 = (cols.start as i64 + off_x) as usize;
                            let src_seg = &src_row[ix0..ix0 + cols.len()];
                            for (d, &x) in dst_row[cols.clone()].iter_mut().zip(src_seg) {
                                *d += wv * x;
                            }
                        } else {
                            for ox in cols.clone() {
                                let ix = ((ox * s) as i64 + off_x) as usize;
                                dst_row[ox] += wv * src_row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of `sum(grad_out ⊙ conv2d_forward(input, weights, bias))`.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    spec: &ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (h, w, oh, ow) = check_operands("conv2d_backward", input, weights, spec)?;
    let (gc, gh, gw) = grad_out.chw()?;
    for (dim, expected, got) in [
        ("grad_out channels", spec.out_channels, gc),
        ("grad_out height", oh, gh),
        ("grad_out width", ow, gw),
    ] {
        if expected != got {
            return Err(Error::Shape {
                op: "conv2d_backward",
                dim,
                expected,
                got,
            });
        }
    }
    let k = spec.kernel;
    let s = spec.stride;
    let mut g_in = Tensor::zeros(input.shape());
    let mut g_w = Tensor::zeros(&spec.weight_shape());
    let mut g_b = Tensor::zeros(&[spec.out_channels]);
    let wdata = weights.data();

    for o in 0..spec.out_channels {
        let g = grad_out.channel(o);
        g_b.data_mut()[o] = g.iter().sum();
        for i in 0..spec.in_channels {
            let src = input.channel(i);
            for ky in 0..k {
                let off_y = spec.tap_offset(ky);
                let rows = valid_range(oh, h, s, off_y);
                for kx in 0..k {
                    let widx = ((o * spec.in_channels + i) * k + ky) * k + kx;
                    let wv = wdata[widx];
                    let off_x = spec.tap_offset(kx);
                    let cols = valid_range(ow, w, s, off_x);
                    if cols.is_empty() {
                        continue;
                    }
                    let mut acc = 0.0;
                    let gin_plane = g_in.channel_mut(i);
                    for oy in rows.clone() {
                        let iy = ((oy * s) as i64 + off_y) as usize;
                        let g_row = &g[oy * ow..(oy + 1) * ow];
                        let src_row = &src[iy * w..(iy + 1) * w];
                        let gin_row = &mut gin_plane[iy * w..(iy + 1) * w];
                        if s == 1 {
                            let ix0 = (cols.start as i64 + off_x) as usize;
                            let ix = ix0..ix0 + cols.len();
                            for ((&gv, &x), gi) in g_row[cols.clone()].iter().zip(&src_row[ix.clone()]).zip(&mut gin_row[ix]) {
                                acc += gv * x;
                                *gi += wv * gv;
                            }
                        } else {
                            for ox in cols.clone() {
                                let ix = ((ox * s) as i64 + off_x) as usize;
                                acc += g_row[ox] * src_row[ix];
                                gin_row[ix] += wv * g_row[ox];
                            }
                        }
                    }
                    g_w.data_mut()[widx] = acc;
                }
            }
        }
    }
    Ok(ConvGrads {
        input: g_in,
        weights: g_w,
        bias: g_b,
    })
}
