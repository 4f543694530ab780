//! sRGB <-> CIE-Lab under the D65 white point.
//!
//! sRGB components are in `[0, 1]`. The forward path is gamma expansion,
//! the linear-sRGB to XYZ matrix, then the CIE `f(t)` companding
//! relative to the white point `(0.95047, 1.0, 1.08883)`.

use crate::error::Result;
use crate::tensor::Tensor;

pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

const EPSILON: f64 = 216.0 / 24389.0; // (6/29)^3
const KAPPA: f64 = 24389.0 / 27.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn lab_to_srgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        lab_f_inv(fx) * D65_WHITE[0],
        lab_f_inv(fy) * D65_WHITE[1],
        lab_f_inv(fz) * D65_WHITE[2],
    ];
    mat_mul(&XYZ_TO_RGB, xyz).map(|c| linear_to_srgb(c).clamp(0.0, 1.0))
}

/// Converts a `3 x H x W` sRGB tensor to a `3 x H x W` Lab tensor.
pub fn image_to_lab(image: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    if c != 3 {
        return Err(crate::Error::Shape {
            op: "image_to_lab",
            dim: "channels",
            expected: 3,
            got: c,
        });
    }
    let plane = h * w;
    let src = image.data();
    let mut out = Tensor::zeros(&[3, h, w]);
    let dst = out.data_mut();
    for j in 0..plane {
        let lab = srgb_to_lab([src[j], src[plane + j], src[2 * plane + j]]);
        dst[j] = lab[0];
        dst[plane + j] = lab[1];
        dst[2 * plane + j] = lab[2];
    }
    Ok(out)
}
