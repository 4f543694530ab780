//! Synthetic saliency data: coloured rectangles and ellipses on textured
//! backgrounds, with paired binary masks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::color::srgb_to_lab;
use crate::labelgen::Mask;
use crate::rbd::lab_distance;
use crate::tensor::Tensor;

/// Minimum Lab distance between an object colour and the background base colour.
const MIN_CONTRAST: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, Copy)]
struct Object {
    shape: Shape,
    cy: f64,
    cx: f64,
    ry: f64,
    rx: f64,
    color: [f64; 3],
}

impl Object {
    fn contains(&self, y: usize, x: usize) -> bool {
        let dy = (y as f64 + 0.5 - self.cy) / self.ry;
        let dx = (x as f64 + 0.5 - self.cx) / self.rx;
        match self.shape {
            Shape::Rect => dy.abs() <= 1.0 && dx.abs() <= 1.0,
            Shape::Ellipse => dy * dy + dx * dx <= 1.0,
        }
    }
}

fn quantize8(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

fn muted_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let base: f64 = rng.random_range(0.25..0.75);
    [0, 1, 2].map(|_| (base + rng.random_range(-0.12..0.12)).clamp(0.0, 1.0))
}

fn object_color(rng: &mut ChaCha8Rng, background: [f64; 3]) -> [f64; 3] {
    let bg_lab = srgb_to_lab(background);
    loop {
        let c = [0, 1, 2].map(|_| rng.random::<f64>());
        if lab_distance(&srgb_to_lab(c), &bg_lab) >= MIN_CONTRAST {
            return c;
        }
    }
}

/// Background of `base` colour with a low-amplitude sinusoidal texture and
/// per-pixel noise.
fn textured_background(rng: &mut ChaCha8Rng, size: usize, base: [f64; 3]) -> Tensor {
    let fy = rng.random_range(0.1..0.6);
    let fx = rng.random_range(0.1..0.6);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = rng.random_range(0.02..0.06);
    let mut img = Tensor::zeros(&[3, size, size]);
    for y in 0..size {
        for x in 0..size {
            let wave = amp * (fy * y as f64 + fx * x as f64 + phase).sin();
            for c in 0..3 {
                let noise = rng.random_range(-0.02..0.02);
                img.set(c, y, x, base[c] + wave + noise);
            }
        }
    }
    img
}

fn paint(img: &mut Tensor, mask: &mut Mask, obj: &Object, rng: &mut ChaCha8Rng) {
    let size = mask.height();
    for y in 0..size {
        for x in 0..size {
            if obj.contains(y, x) {
                mask.set(y, x, true);
                for c in 0..3 {
                    img.set(c, y, x, obj.color[c] + rng.random_range(-0.02..0.02));
                }
            }
        }
    }
}

fn finish(mut img: Tensor) -> Tensor {
    img.data_mut().iter_mut().for_each(|v| *v = quantize8(*v));
    img
}

/// One image with 1-3 objects. One image in ten only contains small objects
/// (each under 1/25 of the image area).
pub fn random_scene(rng: &mut ChaCha8Rng, size: usize) -> (Tensor, Mask) {
    loop {
        let base = muted_color(rng);
        let mut img = textured_background(rng, size, base);
        let mut mask = Mask::empty(size, size);
        let n_objects = rng.random_range(1..=3);
        let small = rng.random_bool(0.1);
        let s = size as f64;
        for _ in 0..n_objects {
            let (lo, hi) = if small {
                (0.06 * s, 0.1 * s)
            } else {
                (0.13 * s, 0.3 * s)
            };
            let ry = rng.random_range(lo..hi);
            let rx = rng.random_range(lo..hi);
            let margin_y = ry + 2.0;
            let margin_x = rx + 2.0;
            let obj = Object {
                shape: if rng.random_bool(0.5) { Shape::Rect } else { Shape::Ellipse },
                cy: rng.random_range(margin_y..s - margin_y),
                cx: rng.random_range(margin_x..s - margin_x),
                ry,
                rx,
                color: object_color(rng, base),
            };
            paint(&mut img, &mut mask, &obj, rng);
        }
        if mask.count_ones() > 0 {
            return (finish(img), mask);
        }
    }
}

/// A single object near the image centre that never touches the border.
pub fn centered_scene(rng: &mut ChaCha8Rng, size: usize) -> (Tensor, Mask) {
    let s = size as f64;
    let base = muted_color(rng);
    let mut img = textured_background(rng, size, base);
    let mut mask = Mask::empty(size, size);
    let obj = Object {
        shape: if rng.random_bool(0.5) { Shape::Rect } else { Shape::Ellipse },
        cy: s / 2.0 + rng.random_range(-0.05 * s..0.05 * s),
        cx: s / 2.0 + rng.random_range(-0.05 * s..0.05 * s),
        ry: rng.random_range(0.12 * s..0.25 * s),
        rx: rng.random_range(0.12 * s..0.25 * s),
        color: object_color(rng, base),
    };
    paint(&mut img, &mut mask, &obj, rng);
    (finish(img), mask)
}

/// `count` scenes from a fixed seed, named `synth_0000`, `synth_0001`, ...
pub fn dataset(count: usize, size: usize, seed: u64) -> Vec<(String, Tensor, Mask)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let (img, mask) = random_scene(&mut rng, size);
            (format!("synth_{i:04}"), img, mask)
        })
        .collect()
}

/// Axis-aligned square masks of assorted sizes, centred with jitter.
pub fn square_masks(count: usize, size: usize, seed: u64) -> Vec<Mask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let side = rng.random_range(size / 8..=size * 3 / 8);
            let max_off = size - side - 2;
            let y0 = rng.random_range(2..=max_off);
            let x0 = rng.random_range(2..=max_off);
            let mut m = Mask::empty(size, size);
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    m.set(y, x, true);
                }
            }
            m
        })
        .collect()
}
