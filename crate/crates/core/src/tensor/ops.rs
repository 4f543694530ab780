use super::Tensor;
use crate::error::{invalid, Error, Result};

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| v.max(0.0))
}

/// Passes `grad_out` where `input > 0`; a tie at zero passes nothing.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    input.check_same_shape("relu_backward", grad_out)?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data)
}

/// Corner-aligned sample position and blend weights along one axis.
fn axis_taps(out: usize, input: usize) -> Vec<(usize, usize, f64)> {
    let scale = if out > 1 {
        (input - 1) as f64 / (out - 1) as f64
    } else {
        0.0
    };
    (0..out)
        .map(|o| {
            let src = o as f64 * scale;
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

fn upsample_dims(op: &'static str, input: &Tensor, out_h: usize, out_w: usize) -> Result<(usize, usize, usize)> {
    let (c, h, w) = input.chw()?;
    if out_h < h || out_w < w {
        return Err(invalid(format!(
            "{op}: downscaling {h}x{w} to {out_h}x{out_w} is not supported"
        )));
    }
    Ok((c, h, w))
}

/// Channelwise bilinear upsampling on a corner-aligned grid: output
/// corners coincide with input corners.
pub fn bilinear_upsample(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = upsample_dims("bilinear_upsample", input, out_h, out_w)?;
    if (h, w) == (out_h, out_w) {
        return Ok(input.clone());
    }
    let ys = axis_taps(out_h, h);
    let xs = axis_taps(out_w, w);
    let mut out = Tensor::zeros(&[c, out_h, out_w]);
    for ch in 0..c {
        let src = input.channel(ch);
        let dst = out.channel_mut(ch);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                dst[oy * out_w + ox] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`bilinear_upsample`] for an input of extent `in_h x in_w`.
pub fn bilinear_upsample_backward(grad_out: &Tensor, in_h: usize, in_w: usize) -> Result<Tensor> {
    let (c, out_h, out_w) = grad_out.chw()?;
    if out_h < in_h || out_w < in_w {
        return Err(invalid("bilinear_upsample_backward: output smaller than input"));
    }
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(grad_out.clone());
    }
    let ys = axis_taps(out_h, in_h);
    let xs = axis_taps(out_w, in_w);
    let mut g_in = Tensor::zeros(&[c, in_h, in_w]);
    for ch in 0..c {
        let g = grad_out.channel(ch);
        let dst = g_in.channel_mut(ch);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let v = g[oy * out_w + ox];
                let top = v * (1.0 - fy);
                let bottom = v * fy;
                dst[y0 * in_w + x0] += top * (1.0 - fx);
                dst[y0 * in_w + x1] += top * fx;
                dst[y1 * in_w + x0] += bottom * (1.0 - fx);
                dst[y1 * in_w + x1] += bottom * fx;
            }
        }
    }
    Ok(g_in)
}

/// Stacks CHW tensors along the channel axis, preserving order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| invalid("concat_channels: no parts given"))?;
    let (_, h, w) = first.chw()?;
    let mut channels = 0;
    for p in parts {
        let (c, ph, pw) = p.chw()?;
        if ph != h {
            return Err(Error::Shape {
                op: "concat_channels",
                dim: "height",
                expected: h,
                got: ph,
            });
        }
        if pw != w {
            return Err(Error::Shape {
                op: "concat_channels",
                dim: "width",
                expected: w,
                got: pw,
            });
        }
        channels += c;
    }
    let mut data = Vec::with_capacity(channels * h * w);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::from_vec(&[channels, h, w], data)
}

/// Inverse of [`concat_channels`]: splits into consecutive channel groups.
pub fn split_channels(input: &Tensor, counts: &[usize]) -> Result<Vec<Tensor>> {
    let (c, h, w) = input.chw()?;
    let total: usize = counts.iter().sum();
    if total != c {
        return Err(Error::Shape {
            op: "split_channels",
            dim: "channels",
            expected: c,
            got: total,
        });
    }
    let plane = h * w;
    let mut start = 0;
    counts
        .iter()
        .map(|&n| {
            let t = Tensor::from_vec(&[n, h, w], input.data()[start * plane..(start + n) * plane].to_vec());
            start += n;
            t
        })
        .collect()
}

/// Per-pixel softmax over the channel axis, max-subtracted.
pub fn softmax_pixelwise(logits: &Tensor) -> Result<Tensor> {
    let (c, h, w) = logits.chw()?;
    let plane = h * w;
    let src = logits.data();
    let mut out = Tensor::zeros(&[c, h, w]);
    let dst = out.data_mut();
    for j in 0..plane {
        let mut m = f64::NEG_INFINITY;
        for ch in 0..c {
            m = m.max(src[ch * plane + j]);
        }
        let mut z = 0.0;
        for ch in 0..c {
            let e = (src[ch * plane + j] - m).exp();
            dst[ch * plane + j] = e;
            z += e;
        }
        for ch in 0..c {
            dst[ch * plane + j] /= z;
        }
    }
    Ok(out)
}
