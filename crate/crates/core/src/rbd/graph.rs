use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Mean CIE-Lab colour.
    pub mean_lab: [f64; 3],
    /// Centroid in normalized image coordinates, `(x, y)` in `[0, 1]`.
    pub centroid: (f64, f64),
    pub pixel_count: usize,
    /// Number of the region's pixels lying on the image border.
    pub boundary_contact: usize,
}

impl Region {
    pub fn touches_border(&self) -> bool {
        self.boundary_contact > 0
    }
}

/// Over-segmentation of an image: per-pixel region ids, region statistics
/// and the region adjacency graph weighted by appearance distance.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelGraph {
    pub height: usize,
    pub width: usize,
    /// Row-major region id per pixel; ids are dense in `0..regions.len()`.
    pub labels: Vec<usize>,
    pub regions: Vec<Region>,
    /// Neighbour lists, sorted and symmetric.
    pub adjacency: Vec<Vec<usize>>,
}

/// Euclidean distance between two Lab colours.
pub fn lab_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl SuperpixelGraph {
    /// Builds region statistics and 4-connected adjacency from a label map.
    /// `lab` is the `3 x H x W` Lab image as planar data.
    pub fn from_labels(height: usize, width: usize, labels: Vec<usize>, lab: &[f64]) -> Result<Self> {
        let plane = height * width;
        if labels.len() != plane || lab.len() != 3 * plane {
            return Err(invalid("superpixel graph: label map does not match image size"));
        }
        let n = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut sums = vec![[0.0f64; 5]; n];
        let mut counts = vec![0usize; n];
        let mut contact = vec![0usize; n];
        // colour is accumulated as offsets from the region's first pixel, so
        // a constant region gets exactly that colour as its mean and equal
        // regions have zero appearance distance
        let mut pivot: Vec<Option<[f64; 3]>> = vec![None; n];
        for y in 0..height {
            for x in 0..width {
                let j = y * width + x;
                let r = labels[j];
                let px = [lab[j], lab[plane + j], lab[2 * plane + j]];
                let p0 = *pivot[r].get_or_insert(px);
                let s = &mut sums[r];
                s[0] += px[0] - p0[0];
                s[1] += px[1] - p0[1];
                s[2] += px[2] - p0[2];
                s[3] += (x as f64 + 0.5) / width as f64;
                s[4] += (y as f64 + 0.5) / height as f64;
                counts[r] += 1;
                if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                    contact[r] += 1;
                }
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(invalid(format!("superpixel graph: region id {empty} has no pixels")));
        }
        let regions = (0..n)
            .map(|r| {
                let c = counts[r] as f64;
                let s = &sums[r];
                let p0 = pivot[r].unwrap_or_default();
                Region {
                    mean_lab: [p0[0] + s[0] / c, p0[1] + s[1] / c, p0[2] + s[2] / c],
                    centroid: (s[3] / c, s[4] / c),
                    pixel_count: counts[r],
                    boundary_contact: contact[r],
                }
            })
            .collect();

        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for y in 0..height {
            for x in 0..width {
                let a = labels[y * width + x];
                if x + 1 < width {
                    let b = labels[y * width + x + 1];
                    if a != b {
                        adj[a].insert(b);
                        adj[b].insert(a);
                    }
                }
                if y + 1 < height {
                    let b = labels[(y + 1) * width + x];
                    if a != b {
                        adj[a].insert(b);
                        adj[b].insert(a);
                    }
                }
            }
        }
        Ok(Self {
            height,
            width,
            labels,
            regions,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    /// Graph without a pixel grid, for synthetic region layouts.
    pub fn from_regions(regions: Vec<Region>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = regions.len();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) references a missing region")));
            }
            if a != b {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
        Ok(Self {
            height: 0,
            width: 0,
            labels: Vec::new(),
            regions,
            adjacency: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Appearance distance `d_app` between any two regions.
    pub fn d_app(&self, p: usize, q: usize) -> f64 {
        lab_distance(&self.regions[p].mean_lab, &self.regions[q].mean_lab)
    }

    /// Adjacent pairs `(p, q, d_app)` with `p < q`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (p, nbrs) in self.adjacency.iter().enumerate() {
            for &q in nbrs {
                if p < q {
                    out.push((p, q, self.d_app(p, q)));
                }
            }
        }
        out
    }

    /// Shortest-path distances from `source` over the adjacency graph with
    /// edge costs `d_app`. Unreachable regions get `+inf`.
    pub fn geodesic_from(&self, source: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Item(f64, usize);
        impl Eq for Item {}
        impl Ord for Item {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Item {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let mut dist = vec![f64::INFINITY; self.len()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, source));
        while let Some(Item(d, p)) = heap.pop() {
            if d > dist[p] {
                continue;
            }
            for &q in &self.adjacency[p] {
                let nd = d + self.d_app(p, q);
                if nd < dist[q] {
                    dist[q] = nd;
                    heap.push(Item(nd, q));
                }
            }
        }
        dist
    }

    /// All-pairs geodesic distances, row `p` from [`Self::geodesic_from`].
    pub fn geodesic_all(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|p| self.geodesic_from(p)).collect()
    }

    /// Broadcasts one value per region back to a row-major pixel map.
    pub fn broadcast(&self, per_region: &[f64]) -> Vec<f64> {
        self.labels.iter().map(|&r| per_region[r]).collect()
    }
}
