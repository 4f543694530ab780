//! Canny edge detection specialised to binary masks.

use super::Mask;

pub const SIGMA: f64 = 1.0;
pub const LOW_RATIO: f64 = 0.1;
pub const HIGH_RATIO: f64 = 0.3;

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable blur with clamp-to-edge borders.
fn blur(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * src[y * w + clamp(x as i64 + i as i64 - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, k)| k * tmp[clamp(y as i64 + i as i64 - r, h) * w + x])
                .sum();
        }
    }
    out
}

/// Edge map of the mask boundary: Gaussian blur, Sobel gradients,
/// non-maximum suppression and hysteresis at (0.1, 0.3) of the peak
/// gradient magnitude.
///
/// The mask is zero-padded by one pixel first so objects touching the
/// image border still produce edges there. A constant mask has no object
/// boundary and yields an empty map.
pub fn canny_edges(gt: &Mask) -> Mask {
    let (h, w) = (gt.height(), gt.width());
    let ones = gt.count_ones();
    if ones == 0 || ones == h * w {
        return Mask::empty(h, w);
    }
    let (ph, pw) = (h + 2, w + 2);
    let mut padded = vec![0.0; ph * pw];
    for y in 0..h {
        for x in 0..w {
            if gt.get(y, x) {
                padded[(y + 1) * pw + x + 1] = 1.0;
            }
        }
    }
    let smooth = blur(&padded, ph, pw, &gaussian_kernel(SIGMA));

    let at = |x: i64, y: i64| {
        let xc = x.clamp(0, pw as i64 - 1) as usize;
        let yc = y.clamp(0, ph as i64 - 1) as usize;
        smooth[yc * pw + xc]
    };
    let mut mag = vec![0.0; ph * pw];
    let mut dir = vec![0u8; ph * pw];
    for y in 0..ph as i64 {
        for x in 0..pw as i64 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let j = y as usize * pw + x as usize;
            mag[j] = gx.hypot(gy);
            // quantize direction to 0, 45, 90, 135 degrees
            let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
            dir[j] = if !(22.5..157.5).contains(&angle) {
                0
            } else if angle < 67.5 {
                1
            } else if angle < 112.5 {
                2
            } else {
                3
            };
        }
    }

    let mut thin = vec![0.0; ph * pw];
    for y in 0..ph {
        for x in 0..pw {
            let j = y * pw + x;
            let m = mag[j];
            if m <= 0.0 {
                continue;
            }
            let (dx, dy): (i64, i64) = match dir[j] {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            let nb = |sx: i64, sy: i64| {
                let nx = x as i64 + sx;
                let ny = y as i64 + sy;
                if nx < 0 || ny < 0 || nx >= pw as i64 || ny >= ph as i64 {
                    0.0
                } else {
                    mag[ny as usize * pw + nx as usize]
                }
            };
            if m >= nb(dx, dy) && m >= nb(-dx, -dy) {
                thin[j] = m;
            }
        }
    }

    let peak = thin.iter().copied().fold(0.0, f64::max);
    let high = HIGH_RATIO * peak;
    let low = LOW_RATIO * peak;
    let mut edge = vec![false; ph * pw];
    let mut stack: Vec<usize> = (0..ph * pw).filter(|&j| thin[j] >= high && thin[j] > 0.0).collect();
    for &j in &stack {
        edge[j] = true;
    }
    while let Some(j) = stack.pop() {
        let (x, y) = ((j % pw) as i64, (j / pw) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= pw as i64 || ny >= ph as i64 {
                    continue;
                }
                let k = ny as usize * pw + nx as usize;
                if !edge[k] && thin[k] >= low && thin[k] > 0.0 {
                    edge[k] = true;
                    stack.push(k);
                }
            }
        }
    }

    let mut out = Mask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            if edge[(y + 1) * pw + x + 1] {
                out.set(y, x, true);
            }
        }
    }
    out
}
