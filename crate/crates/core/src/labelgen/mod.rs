//! Three-category relabeling of binary saliency ground truth:
//! background (0), salient edge (1) and salient object (2).

mod canny;

pub use canny::canny_edges;

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

pub const BACKGROUND: u8 = 0;
pub const SALIENT_EDGE: u8 = 1;
pub const SALIENT_OBJECT: u8 = 2;

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn from_bools(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape {
                op: "Mask::from_bools",
                dim: "pixel count",
                expected: height * width,
                got: data.len(),
            });
        }
        Ok(Self { height, width, data })
    }

    /// Accepts only the values 0 and 1.
    pub fn from_values(height: usize, width: usize, values: &[u8]) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(invalid(format!("mask is not binary: value {v} at pixel {i}")));
        }
        Self::from_bools(height, width, values.iter().map(|&v| v == 1).collect())
    }

    /// Builds a mask from a `1 x H x W` tensor whose values are exactly 0 or 1.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t.chw()?;
        if c != 1 {
            return Err(Error::Shape {
                op: "Mask::from_tensor",
                dim: "channels",
                expected: 1,
                got: c,
            });
        }
        if let Some(v) = t.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(invalid(format!("mask is not binary: found value {v}")));
        }
        Self::from_bools(h, w, t.data().iter().map(|&v| v == 1.0).collect())
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Tensor::from_vec(&[1, self.height, self.width], data).expect("mask dimensions are consistent")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Morphological dilation with a full 3x3 structuring element, clipped at
/// the image border.
pub fn dilate_3x3(edges: &Mask) -> Mask {
    let (h, w) = (edges.height, edges.width);
    let mut out = Mask::empty(h, w);
    for y in 0..h {
        for x in 0..w {
            if !edges.get(y, x) {
                continue;
            }
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    out.set(ny, nx, true);
                }
            }
        }
    }
    out
}

/// Per-pixel labels in {0, 1, 2} with class pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriLabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
    counts: [usize; 3],
}

impl TriLabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Shape {
                op: "TriLabelMap::new",
                dim: "pixel count",
                expected: height * width,
                got: labels.len(),
            });
        }
        let mut counts = [0usize; 3];
        for (i, &l) in labels.iter().enumerate() {
            if l > SALIENT_OBJECT {
                return Err(invalid(format!("label {l} at pixel {i} is outside {{0, 1, 2}}")));
            }
            counts[l as usize] += 1;
        }
        Ok(Self {
            height,
            width,
            labels,
            counts,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    /// `[|Y_b|, |Y_e|, |Y_s|]`.
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    /// `|Y|`, the total pixel count.
    pub fn total(&self) -> usize {
        self.labels.len()
    }

    /// Fraction of pixels labelled salient edge.
    pub fn edge_fraction(&self) -> f64 {
        self.counts[1] as f64 / self.total() as f64
    }

    /// Class-balancing weights `[beta_b, beta_e, beta_s]`; each is the share of
    /// pixels belonging to the other two classes.
    ///
    /// `beta_s` is computed as `2 - (beta_b + beta_e)`, which equals
    /// `(|Y_b| + |Y_e|) / |Y|` up to rounding and is exact in floating point
    /// (`beta_b + beta_e >= 1`), so the three weights sum to exactly 2.
    pub fn class_weights(&self) -> [f64; 3] {
        let [b, e, s] = self.counts;
        let total = self.total() as f64;
        let beta_b = (e + s) as f64 / total;
        let beta_e = (b + s) as f64 / total;
        [beta_b, beta_e, 2.0 - (beta_b + beta_e)]
    }
}

/// Three sequential steps: everything background, the dilated Canny edge
/// band becomes salient edge, then remaining object pixels become salient
/// object. Edge wins where the band overlaps the object.
pub fn three_category_labels(gt: &Mask) -> TriLabelMap {
    let band = dilate_3x3(&canny_edges(gt));
    let labels = gt
        .as_slice()
        .iter()
        .zip(band.as_slice())
        .map(|(&obj, &edge)| {
            if edge {
                SALIENT_EDGE
            } else if obj {
                SALIENT_OBJECT
            } else {
                BACKGROUND
            }
        })
        .collect();
    TriLabelMap::new(gt.height, gt.width, labels).expect("labels are in range by construction")
}
