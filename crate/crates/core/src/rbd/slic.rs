//! SLIC over-segmentation in CIE-Lab + xy space.

use super::graph::{lab_distance, SuperpixelGraph};
use crate::color::image_to_lab;
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

pub const MIN_EXTENT: usize = 16;
const ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy)]
struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// Segments a `3 x H x W` sRGB image into roughly `k_regions` connected
/// superpixels. `compactness` trades colour fidelity for spatial regularity.
pub fn slic_superpixels(image: &Tensor, k_regions: usize, compactness: f64) -> Result<SuperpixelGraph> {
    let (c, h, w) = image.chw()?;
    if c != 3 {
        return Err(Error::Shape {
            op: "slic_superpixels",
            dim: "channels",
            expected: 3,
            got: c,
        });
    }
    if h < MIN_EXTENT || w < MIN_EXTENT {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            min: MIN_EXTENT,
        });
    }
    if k_regions < 4 {
        return Err(invalid(format!("slic: k_regions must be >= 4, got {k_regions}")));
    }
    if !(compactness > 0.0) {
        return Err(invalid("slic: compactness must be positive"));
    }
    let lab_img = image_to_lab(image)?;
    let lab = lab_img.data();
    let plane = h * w;
    let px = |j: usize| [lab[j], lab[plane + j], lab[2 * plane + j]];

    let step = ((plane as f64) / k_regions as f64).sqrt();
    let ny = ((h as f64 / step).round() as usize).max(1);
    let nx = ((w as f64 / step).round() as usize).max(1);
    let mut centers = Vec::with_capacity(nx * ny);
    for i in 0..ny {
        for j in 0..nx {
            let cx = (((j as f64 + 0.5) * w as f64 / nx as f64) as usize).min(w - 1);
            let cy = (((i as f64 + 0.5) * h as f64 / ny as f64) as usize).min(h - 1);
            let (bx, by) = lowest_gradient(lab, h, w, cx, cy);
            centers.push(Center {
                lab: px(by * w + bx),
                x: bx as f64,
                y: by as f64,
            });
        }
    }

    let spatial = compactness / step;
    let radius = step.ceil() as i64;
    let mut labels = vec![usize::MAX; plane];
    let mut dist = vec![f64::INFINITY; plane];
    for _ in 0..ITERATIONS {
        dist.fill(f64::INFINITY);
        for (k, ctr) in centers.iter().enumerate() {
            let y0 = (ctr.y.round() as i64 - radius).max(0) as usize;
            let y1 = ((ctr.y.round() as i64 + radius) as usize).min(h - 1);
            let x0 = (ctr.x.round() as i64 - radius).max(0) as usize;
            let x1 = ((ctr.x.round() as i64 + radius) as usize).min(w - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let j = y * w + x;
                    let dc = lab_distance(&px(j), &ctr.lab);
                    let dx = x as f64 - ctr.x;
                    let dy = y as f64 - ctr.y;
                    let d = dc * dc + (dx * dx + dy * dy) * spatial * spatial;
                    if d < dist[j] {
                        dist[j] = d;
                        labels[j] = k;
                    }
                }
            }
        }
        // pixels outside every search window fall back to the nearest centre
        for j in 0..plane {
            if dist[j].is_infinite() {
                let (x, y) = ((j % w) as f64, (j / w) as f64);
                labels[j] = nearest_center(&centers, x, y);
            }
        }
        let mut acc = vec![[0.0f64; 6]; centers.len()];
        for j in 0..plane {
            let a = &mut acc[labels[j]];
            let p = px(j);
            a[0] += p[0];
            a[1] += p[1];
            a[2] += p[2];
            a[3] += (j % w) as f64;
            a[4] += (j / w) as f64;
            a[5] += 1.0;
        }
        for (ctr, a) in centers.iter_mut().zip(&acc) {
            if a[5] > 0.0 {
                ctr.lab = [a[0] / a[5], a[1] / a[5], a[2] / a[5]];
                ctr.x = a[3] / a[5];
                ctr.y = a[4] / a[5];
            }
        }
    }

    let min_size = (plane / centers.len().max(1) / 4).max(1);
    let labels = enforce_connectivity(&labels, lab, h, w, min_size);
    SuperpixelGraph::from_labels(h, w, labels, lab)
}

fn nearest_center(centers: &[Center], x: f64, y: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = (c.x - x).powi(2) + (c.y - y).powi(2);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Moves a seed to the lowest Lab-gradient position in its 3x3 neighbourhood.
fn lowest_gradient(lab: &[f64], h: usize, w: usize, cx: usize, cy: usize) -> (usize, usize) {
    let plane = h * w;
    let at = |x: usize, y: usize| {
        let j = y * w + x;
        [lab[j], lab[plane + j], lab[2 * plane + j]]
    };
    let grad = |x: usize, y: usize| {
        let xl = x.saturating_sub(1);
        let xr = (x + 1).min(w - 1);
        let yu = y.saturating_sub(1);
        let yd = (y + 1).min(h - 1);
        lab_distance(&at(xr, y), &at(xl, y)).powi(2) + lab_distance(&at(x, yd), &at(x, yu)).powi(2)
    };
    let mut best = (cx, cy);
    let mut best_g = grad(cx, cy);
    for y in cy.saturating_sub(1)..=(cy + 1).min(h - 1) {
        for x in cx.saturating_sub(1)..=(cx + 1).min(w - 1) {
            let g = grad(x, y);
            if g < best_g {
                best_g = g;
                best = (x, y);
            }
        }
    }
    best
}

/// Relabels 4-connected components, then repeatedly merges the smallest
/// component under `min_size` into the adjacent component of closest mean
/// colour. Output ids are dense and ordered by first appearance in scan order.
fn enforce_connectivity(labels: &[usize], lab: &[f64], h: usize, w: usize, min_size: usize) -> Vec<usize> {
    let plane = h * w;
    let mut comp = vec![usize::MAX; plane];
    let mut n = 0;
    let mut stack = Vec::new();
    for start in 0..plane {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = n;
        stack.push(start);
        while let Some(j) = stack.pop() {
            let (x, y) = (j % w, j / w);
            let mut visit = |k: usize| {
                if comp[k] == usize::MAX && labels[k] == labels[start] {
                    comp[k] = n;
                    stack.push(k);
                }
            };
            if x > 0 {
                visit(j - 1);
            }
            if x + 1 < w {
                visit(j + 1);
            }
            if y > 0 {
                visit(j - w);
            }
            if y + 1 < h {
                visit(j + w);
            }
        }
        n += 1;
    }

    // union-find style parent pointers for merges
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let mut size = vec![0usize; n];
    let mut sum = vec![[0.0f64; 3]; n];
    for j in 0..plane {
        let c = comp[j];
        size[c] += 1;
        sum[c][0] += lab[j];
        sum[c][1] += lab[plane + j];
        sum[c][2] += lab[2 * plane + j];
    }
    let mut alive = n;
    loop {
        if alive <= 1 {
            break;
        }
        let small = (0..n)
            .filter(|&c| parent[c] == c && size[c] < min_size)
            .min_by_key(|&c| (size[c], c));
        let Some(small) = small else { break };
        let mut neighbours = std::collections::BTreeSet::new();
        for j in 0..plane {
            if root(&mut parent, comp[j]) != small {
                continue;
            }
            let (x, y) = (j % w, j / w);
            let mut nb = Vec::with_capacity(4);
            if x > 0 {
                nb.push(j - 1);
            }
            if x + 1 < w {
                nb.push(j + 1);
            }
            if y > 0 {
                nb.push(j - w);
            }
            if y + 1 < h {
                nb.push(j + w);
            }
            for k in nb {
                let r = root(&mut parent, comp[k]);
                if r != small {
                    neighbours.insert(r);
                }
            }
        }
        let mean = |c: usize| {
            let s = size[c] as f64;
            [sum[c][0] / s, sum[c][1] / s, sum[c][2] / s]
        };
        let target = neighbours
            .iter()
            .copied()
            .min_by(|&a, &b| {
                lab_distance(&mean(small), &mean(a))
                    .total_cmp(&lab_distance(&mean(small), &mean(b)))
                    .then(a.cmp(&b))
            })
            .expect("a component of a multi-component image has a neighbour");
        parent[small] = target;
        size[target] += size[small];
        for k in 0..3 {
            sum[target][k] += sum[small][k];
        }
        alive -= 1;
    }

    let mut dense = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; plane];
    for j in 0..plane {
        let r = root(&mut parent, comp[j]);
        if dense[r] == usize::MAX {
            dense[r] = next;
            next += 1;
        }
        out[j] = dense[r];
    }
    out
}
