use edgesal_core::rbd::*;
use edgesal_core::synth;
use edgesal_core::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn region(lab: [f64; 3], centroid: (f64, f64), border: bool) -> Region {
    Region {
        mean_lab: lab,
        centroid,
        pixel_count: 10,
        boundary_contact: usize::from(border),
    }
}

/// Random connected graph: a random spanning tree plus extra edges.
fn random_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> SuperpixelGraph {
    let regions: Vec<Region> = (0..n)
        .map(|_| {
            region(
                [rng.random_range(0.0..100.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)],
                (rng.random(), rng.random()),
                rng.random_bool(0.4),
            )
        })
        .collect();
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    SuperpixelGraph::from_regions(regions, &edges).unwrap()
}

/// All-pairs shortest paths by Floyd-Warshall.
fn floyd_warshall(g: &SuperpixelGraph) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for (a, b, w) in g.edges() {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesics_match_all_pairs_oracle(n in 2usize..14, extra in 0usize..20, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, extra, &mut rng);
        let oracle = floyd_warshall(&g);
        let geo = g.geodesic_all();
        for i in 0..n {
            prop_assert_eq!(geo[i][i], 0.0);
            for j in 0..n {
                prop_assert!((geo[i][j] - oracle[i][j]).abs() <= 1e-9 * oracle[i][j].max(1.0));
                prop_assert!((geo[i][j] - geo[j][i]).abs() <= 1e-9 * geo[i][j].max(1.0));
                for k in 0..n {
                    prop_assert!(geo[i][j] <= geo[i][k] + geo[k][j] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn omega_is_monotone_in_bndcon(mut b in prop::collection::vec(0.0f64..20.0, 2..30), delta in 0.1f64..3.0) {
        b.sort_by(f64::total_cmp);
        let scores = BndConScores { len_bnd: b.clone(), area: vec![1.0; b.len()], bndcon: b };
        let omega = background_probability(&scores, delta);
        for w in omega.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(omega.iter().all(|&o| (0.0..=1.0).contains(&o)));
    }

    #[test]
    fn wctr_is_permutation_invariant(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 5, &mut rng);
        let omega: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let base = weighted_contrast(&g, &omega, 0.25);
        // relabel the regions with a random permutation
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut regions = vec![g.regions[0].clone(); n];
        let mut omega_p = vec![0.0; n];
        for (old, &new) in perm.iter().enumerate() {
            regions[new] = g.regions[old].clone();
            omega_p[new] = omega[old];
        }
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|&(a, b, _)| (perm[a].min(perm[b]), perm[a].max(perm[b]))).collect();
        let gp = SuperpixelGraph::from_regions(regions, &edges).unwrap();
        let permuted = weighted_contrast(&gp, &omega_p, 0.25);
        for (old, &new) in perm.iter().enumerate() {
            prop_assert!((base[old] - permuted[new]).abs() <= 1e-9 * base[old].abs().max(1.0));
        }
    }
}

#[test]
fn uniform_graph_bndcon_is_border_count_over_root_n() {
    // 5 regions, 3 on the border, identical colour
    let regions: Vec<Region> = (0..5).map(|i| region([50.0, 0.0, 0.0], (0.5, 0.5), i < 3)).collect();
    let g = SuperpixelGraph::from_regions(regions, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
    let scores = geodesic_background_scores(&g, 10.0);
    for &b in &scores.bndcon {
        assert!((b - 3.0 / 5f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn border_chain_is_more_background_than_cut_interior() {
    // a chain of border regions sharing one colour, and an interior pocket
    // separated from it by a cut of 5 sigma_clr
    let sigma = 10.0;
    let bg = [60.0, 0.0, 0.0];
    let fg = [60.0 + 5.0 * sigma, 0.0, 0.0];
    let mut regions: Vec<Region> = (0..8).map(|i| region(bg, (i as f64 / 8.0, 0.0), true)).collect();
    regions.extend((0..3).map(|i| region(fg, (0.5, 0.4 + 0.1 * i as f64), false)));
    let mut edges: Vec<(usize, usize)> = (0..7).map(|i| (i, i + 1)).collect();
    edges.extend([(3, 8), (8, 9), (9, 10)]);
    let g = SuperpixelGraph::from_regions(regions, &edges).unwrap();
    let omega = background_probability(&geodesic_background_scores(&g, sigma), 1.0);
    let min_border = omega[..8].iter().copied().fold(f64::INFINITY, f64::min);
    let max_interior = omega[8..].iter().copied().fold(0.0, f64::max);
    assert!(min_border > max_interior, "{omega:?}");
}

fn mean_inside_outside(s: &Tensor, mask: &edgesal_core::labelgen::Mask) -> (f64, f64) {
    let (mut si, mut ni, mut so, mut no) = (0.0, 0, 0.0, 0);
    for (j, &v) in s.data().iter().enumerate() {
        if mask.as_slice()[j] {
            si += v;
            ni += 1;
        } else {
            so += v;
            no += 1;
        }
    }
    (si / ni as f64, so / no as f64)
}

#[test]
fn centered_bright_square_is_salient() {
    let n = 48;
    let mut img = Tensor::filled(&[3, n, n], 0.1);
    let mut mask = edgesal_core::labelgen::Mask::empty(n, n);
    for y in 16..32 {
        for x in 16..32 {
            for c in 0..3 {
                img.set(c, y, x, 0.9);
            }
            mask.set(y, x, true);
        }
    }
    let s = rbd_saliency(&img, &RbdParams::default()).unwrap();
    let (inside, outside) = mean_inside_outside(&s, &mask);
    assert!(inside > outside, "inside {inside} outside {outside}");
    let lo = s.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (0.0, 1.0));
}

#[test]
fn uniform_image_gives_zero_map() {
    // sizes where region means are averages over many identical pixels
    for (v, h, w) in [(0.37, 32, 40), (1.0, 64, 64), (0.5, 32, 32), (0.999, 48, 48), (0.0, 16, 24)] {
        let img = Tensor::filled(&[3, h, w], v);
        let s = rbd_saliency(&img, &RbdParams::default()).unwrap();
        assert!(s.data().iter().all(|&x| x == 0.0), "value {v} at {h}x{w}");
    }
}

#[test]
fn saliency_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (img, _) = synth::centered_scene(&mut rng, 64);
    let a = rbd_saliency(&img, &RbdParams::default()).unwrap();
    let b = rbd_saliency(&img, &RbdParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn slic_region_count_and_connectivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let (img, _) = synth::random_scene(&mut rng, 64);
        let k = 200;
        let g = slic_superpixels(&img, k, 20.0).unwrap();
        assert!((k / 2..=2 * k).contains(&g.len()), "{} regions", g.len());
        // every region is one 4-connected component
        let (h, w) = (g.height, g.width);
        let mut seen = vec![false; h * w];
        let mut components = 0;
        for start in 0..h * w {
            if seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(j) = stack.pop() {
                let (y, x) = (j / w, j % w);
                let mut nb = Vec::with_capacity(4);
                if y > 0 { nb.push(j - w); }
                if y + 1 < h { nb.push(j + w); }
                if x > 0 { nb.push(j - 1); }
                if x + 1 < w { nb.push(j + 1); }
                for q in nb {
                    if !seen[q] && g.labels[q] == g.labels[j] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        assert_eq!(components, g.len());
    }
}

#[test]
fn centered_objects_beat_background_on_most_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut wins = 0;
    for _ in 0..20 {
        let (img, mask) = synth::centered_scene(&mut rng, 64);
        let s = rbd_saliency(&img, &RbdParams::default()).unwrap();
        let (inside, outside) = mean_inside_outside(&s, &mask);
        wins += usize::from(inside > outside);
    }
    assert!(wins >= 19, "{wins}/20");
}
