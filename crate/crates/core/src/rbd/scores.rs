use super::graph::SuperpixelGraph;

/// Boundary connectivity terms per region.
#[derive(Debug, Clone, PartialEq)]
pub struct BndConScores {
    /// Effective boundary length `Len_bnd`.
    pub len_bnd: Vec<f64>,
    /// Effective spanning area `Area`.
    pub area: Vec<f64>,
    /// `Len_bnd / sqrt(Area)`.
    pub bndcon: Vec<f64>,
}

/// Soft geodesic boundary connectivity.
///
/// `Area(p)` sums `exp(-d_geo(p, i)^2 / (2 sigma_clr^2))` over all regions
/// and `Len_bnd(p)` restricts the same sum to regions touching the image
/// border. Unreachable regions contribute nothing.
pub fn geodesic_background_scores(graph: &SuperpixelGraph, sigma_clr: f64) -> BndConScores {
    let n = graph.len();
    let denom = 2.0 * sigma_clr * sigma_clr;
    let mut len_bnd = vec![0.0; n];
    let mut area = vec![0.0; n];
    for p in 0..n {
        let geo = graph.geodesic_from(p);
        for (i, &d) in geo.iter().enumerate() {
            let s = if d.is_finite() { (-d * d / denom).exp() } else { 0.0 };
            area[p] += s;
            if graph.regions[i].touches_border() {
                len_bnd[p] += s;
            }
        }
    }
    let bndcon = len_bnd.iter().zip(&area).map(|(l, a)| l / a.sqrt()).collect();
    BndConScores { len_bnd, area, bndcon }
}

/// `1 - exp(-BndCon^2 / (2 delta^2))` per region.
pub fn background_probability(scores: &BndConScores, delta_bndcon: f64) -> Vec<f64> {
    let denom = 2.0 * delta_bndcon * delta_bndcon;
    scores
        .bndcon
        .iter()
        .map(|&b| -(-b * b / denom).exp_m1())
        .collect()
}

/// Background-weighted contrast over all region pairs, with a Gaussian
/// spatial weight on normalized centroid distance.
pub fn weighted_contrast(graph: &SuperpixelGraph, omega_bg: &[f64], sigma_spa: f64) -> Vec<f64> {
    let n = graph.len();
    assert_eq!(omega_bg.len(), n, "omega_bg must have one entry per region");
    let denom = 2.0 * sigma_spa * sigma_spa;
    (0..n)
        .map(|p| {
            let (px, py) = graph.regions[p].centroid;
            (0..n)
                .map(|i| {
                    let (ix, iy) = graph.regions[i].centroid;
                    let d2 = (px - ix).powi(2) + (py - iy).powi(2);
                    graph.d_app(p, i) * (-d2 / denom).exp() * omega_bg[i]
                })
                .sum()
        })
        .collect()
}
