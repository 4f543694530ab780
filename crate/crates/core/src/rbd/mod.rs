//! Robust background detection (RBD) saliency prior.
//!
//! Pipeline: SLIC superpixels, soft geodesic boundary connectivity,
//! background probability, background-weighted contrast, then min-max
//! normalization broadcast back to pixels.

mod graph;
mod scores;
mod slic;

pub use graph::{lab_distance, Region, SuperpixelGraph};
pub use scores::{background_probability, geodesic_background_scores, weighted_contrast, BndConScores};
pub use slic::slic_superpixels;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbdParams {
    pub k_regions: usize,
    pub compactness: f64,
    /// Geodesic Gaussian width, CIE-Lab units.
    pub sigma_clr: f64,
    pub delta_bndcon: f64,
    /// Spatial Gaussian width, normalized image coordinates.
    pub sigma_spa: f64,
}

impl Default for RbdParams {
    fn default() -> Self {
        Self {
            k_regions: 200,
            compactness: 20.0,
            sigma_clr: 10.0,
            delta_bndcon: 1.0,
            sigma_spa: 0.25,
        }
    }
}

impl RbdParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_clr <= 0.0 || self.delta_bndcon <= 0.0 || self.sigma_spa <= 0.0 {
            return Err(invalid("rbd: sigma_clr, delta_bndcon and sigma_spa must be positive"));
        }
        Ok(())
    }
}

/// Min-max normalization; a constant input maps to all zeros.
pub fn normalize_min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / range).collect()
}

/// RBD saliency of a `3 x H x W` sRGB image, as a `1 x H x W` map in `[0, 1]`.
pub fn rbd_saliency(image: &Tensor, params: &RbdParams) -> Result<Tensor> {
    params.validate()?;
    let graph = slic_superpixels(image, params.k_regions, params.compactness)?;
    let scores = geodesic_background_scores(&graph, params.sigma_clr);
    let omega = background_probability(&scores, params.delta_bndcon);
    let wctr = weighted_contrast(&graph, &omega, params.sigma_spa);
    let per_region = normalize_min_max(&wctr);
    Tensor::from_vec(&[1, graph.height, graph.width], graph.broadcast(&per_region))
}
