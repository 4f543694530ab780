use std::path::Path;
use std::process::Command;

use edgesal_cli::commands::{self, decode_label_gray, EvalInputs};
use edgesal_cli::config::RunConfig;
use edgesal_cli::error::CliError;
use edgesal_cli::io;
use edgesal_core::labelgen::{three_category_labels, Mask, TriLabelMap};
use edgesal_core::metrics::quantize;
use edgesal_core::net::{self, checkpoint};

fn config(tmp: &Path, count: usize, size: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.root = tmp.join("data");
    cfg.output_dir = tmp.join("out");
    cfg.synth.count = count;
    cfg.train.image_size = size;
    cfg.train.max_iter = 5;
    cfg.set_seed(3);
    cfg
}

fn synthesize(cfg: &RunConfig) {
    let mut gen = cfg.clone();
    gen.output_dir = cfg.dataset.root.clone();
    commands::synth(&gen).unwrap();
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgesal"))
}

#[test]
fn empty_dataset_yields_zero_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 0, 32);
    std::fs::create_dir_all(cfg.dataset.images_dir()).unwrap();
    std::fs::create_dir_all(cfg.dataset.masks_dir()).unwrap();
    let r = commands::relabel(&cfg).unwrap();
    assert!(r.summary.contains("0 images"), "{}", r.summary);
    assert!(r.failures.is_empty());
    let r = commands::rbd(&cfg).unwrap();
    assert!(r.summary.contains("wrote 0 maps"), "{}", r.summary);
    assert!(matches!(commands::train(&cfg), Err(CliError::Data(_))));
}

#[test]
fn relabel_round_trips_to_a_valid_partition() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 8, 32);
    synthesize(&cfg);
    commands::relabel(&cfg).unwrap();
    for i in 0..8 {
        let stem = format!("synth_{i:04}");
        let mask = io::read_mask(&cfg.dataset.masks_dir().join(format!("{stem}.png"))).unwrap();
        let img = image::open(cfg.output_dir.join("labels").join(format!("{stem}.png")))
            .unwrap()
            .into_luma8();
        let labels: Vec<u8> = img.as_raw().iter().map(|&v| decode_label_gray(v).unwrap()).collect();
        let map = TriLabelMap::new(mask.height(), mask.width(), labels).unwrap();
        assert_eq!(map, three_category_labels(&mask));
        let [bg, edge, obj] = map.counts();
        assert_eq!(bg + edge + obj, 32 * 32);
    }
}

#[test]
fn non_binary_mask_fails_alone_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 3, 32);
    synthesize(&cfg);
    let prov = cfg.provenance();
    io::write_gray_png(&cfg.dataset.masks_dir().join("zz_bad.png"), 2, 2, &[0, 7, 255, 0], &prov).unwrap();
    let r = commands::relabel(&cfg).unwrap();
    assert_eq!(r.failures.len(), 1);
    assert!(r.summary.contains("3 images"), "{}", r.summary);
    assert!(cfg.output_dir.join("labels/synth_0002.png").exists());

    let status = bin()
        .args(["relabel", "--root"])
        .arg(&cfg.dataset.root)
        .arg("--out")
        .arg(&cfg.output_dir)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn rbd_is_rerun_stable_and_counts_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 4, 48);
    synthesize(&cfg);
    std::fs::remove_file(cfg.dataset.masks_dir().join("synth_0003.png")).unwrap();
    let r = commands::rbd(&cfg).unwrap();
    assert!(r.summary.contains("wrote 3 maps"), "{}", r.summary);
    assert_eq!(r.warnings.len(), 1);
    let first = read(&cfg.output_dir.join("rbd/synth_0000_rbd.png"));
    commands::rbd(&cfg).unwrap();
    assert_eq!(first, read(&cfg.output_dir.join("rbd/synth_0000_rbd.png")));
    assert!(!cfg.output_dir.join("rbd/synth_0003_rbd.png").exists());
}

#[test]
fn infer_files_match_in_memory_inference() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 3, 32);
    cfg.model.widths = [4, 8, 8, 8];
    cfg.model.fusion_width = 8;
    synthesize(&cfg);
    commands::train(&cfg).unwrap();
    let ckpt = cfg.output_dir.join(commands::CHECKPOINT_FILE);
    commands::infer(&cfg, &ckpt).unwrap();

    let (model, meta) = checkpoint::load(&read(&ckpt)).unwrap();
    assert!(meta.contains(&cfg.hash()));
    for i in 0..3 {
        let stem = format!("synth_{i:04}");
        let image = io::read_rgb(&cfg.dataset.images_dir().join(format!("{stem}.png"))).unwrap();
        let inf = net::infer(&model, &image, &cfg.rbd).unwrap();
        let sal = image::open(cfg.output_dir.join(format!("saliency/{stem}_sal.png"))).unwrap().into_luma8();
        let edge = image::open(cfg.output_dir.join(format!("edges/{stem}_edge.png"))).unwrap().into_luma8();
        let want_sal: Vec<u8> = inf.saliency.data().iter().map(|&v| quantize(v)).collect();
        let want_edge: Vec<u8> = inf.salient_edge.data().iter().map(|&v| quantize(v)).collect();
        assert_eq!(sal.as_raw(), &want_sal);
        assert_eq!(edge.as_raw(), &want_edge);
        let bg: Vec<u8> = inf.background.data().iter().map(|&v| quantize(v)).collect();
        for j in 0..bg.len() {
            let total = f64::from(bg[j]) + f64::from(sal.as_raw()[j]) + f64::from(edge.as_raw()[j]);
            assert!((total / 255.0 - 1.0).abs() <= 2.0 / 255.0, "pixel {j}: {total}");
        }
        let text = io::png_text(&cfg.output_dir.join(format!("saliency/{stem}_sal.png"))).unwrap();
        assert!(text.contains(&("edgesal:config-sha256".into(), cfg.hash())));
    }
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 2, 32);
    cfg.model.widths = [4, 8, 8, 8];
    cfg.model.fusion_width = 8;
    cfg.train.max_iter = 1;
    synthesize(&cfg);
    commands::train(&cfg).unwrap();
    let bytes = read(&cfg.output_dir.join(commands::CHECKPOINT_FILE));

    let truncated = tmp.path().join("trunc.easal");
    std::fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
    let err = commands::infer(&cfg, &truncated).unwrap_err();
    assert!(matches!(err, CliError::Data(_)), "{err}");
    assert!(err.to_string().contains("truncated"), "{err}");

    let mut newer = bytes.clone();
    newer[6..10].copy_from_slice(&7u32.to_le_bytes());
    let path = tmp.path().join("v7.easal");
    std::fs::write(&path, &newer).unwrap();
    let msg = commands::infer(&cfg, &path).unwrap_err().to_string();
    assert!(msg.contains('7') && msg.contains('1'), "{msg}");
}

/// Metrics of `pred` (gray levels) against `gt`, computed by brute force.
fn oracle_max_f(preds: &[Vec<u8>], gts: &[Vec<bool>]) -> f64 {
    let mut best: f64 = 0.0;
    for t in 0..256 {
        let mut f_sum = 0.0;
        for (p, g) in preds.iter().zip(gts) {
            let tp = p.iter().zip(g).filter(|(&v, &y)| u32::from(v) > t && y).count() as f64;
            let pp = p.iter().filter(|&&v| u32::from(v) > t).count() as f64;
            let pos = g.iter().filter(|&&y| y).count() as f64;
            let prec = if pp == 0.0 { 0.0 } else { tp / pp };
            let rec = tp / pos;
            f_sum += if prec + rec == 0.0 { 0.0 } else { 1.3 * prec * rec / (0.3 * prec + rec) };
        }
        best = best.max(f_sum / preds.len() as f64);
    }
    best
}

fn metric_rows(path: &Path) -> Vec<(String, f64, f64, f64)> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].to_string(), rec[1].parse().unwrap(), rec[2].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn eval_matches_hand_built_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 0, 32);
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    let prov = cfg.provenance();
    let preds = vec![
        vec![255, 200, 0, 0, 180, 90, 10, 0, 0, 0, 60, 0, 0, 0, 0, 30],
        vec![0, 0, 0, 0, 0, 128, 128, 0, 0, 128, 250, 0, 0, 0, 0, 0],
    ];
    let gts = vec![
        vec![1u8, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        vec![0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0],
    ];
    for (i, (p, g)) in preds.iter().zip(&gts).enumerate() {
        io::write_gray_png(&pred.join(format!("im{i}_sal.png")), 4, 4, p, &prov).unwrap();
        io::write_mask_png(&gt.join(format!("im{i}.png")), &Mask::from_values(4, 4, g).unwrap(), &prov).unwrap();
    }
    cfg.output_dir = tmp.path().join("eval");
    let inputs = EvalInputs {
        pred_dir: pred,
        gt_dir: gt,
        pred_suffix: "_sal".into(),
    };
    commands::eval(&cfg, &inputs).unwrap();
    let rows = metric_rows(&cfg.output_dir.join(commands::METRICS_FILE));
    assert_eq!(rows.len(), 4);

    let gt_bools: Vec<Vec<bool>> = gts.iter().map(|g| g.iter().map(|&v| v == 1).collect()).collect();
    for i in 0..2 {
        let mae: f64 = preds[i]
            .iter()
            .zip(&gts[i])
            .map(|(&p, &g)| (f64::from(p) / 255.0 - f64::from(g)).abs())
            .sum::<f64>()
            / 16.0;
        assert!((rows[i].1 - mae).abs() < 1e-12);
        let single = oracle_max_f(&preds[i..=i], &gt_bools[i..=i]);
        assert!((rows[i].2 - single).abs() < 1e-12, "{} vs {single}", rows[i].2);
    }
    let agg = &rows[2];
    assert_eq!(agg.0, "aggregate_curve");
    assert!((agg.2 - oracle_max_f(&preds, &gt_bools)).abs() < 1e-12);
    assert_eq!(rows[3].0, "aggregate_per_image");

    let pr = std::fs::read_to_string(cfg.output_dir.join(commands::PR_FILE)).unwrap();
    assert_eq!(pr.lines().count(), 257);
    assert!(!pr.contains('\r'));
    assert!(cfg.output_dir.join("pr_curve.csv.meta.json").exists());
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 6, 32);
    synthesize(&cfg);
    let inputs = EvalInputs {
        pred_dir: cfg.dataset.masks_dir(),
        gt_dir: cfg.dataset.masks_dir(),
        pred_suffix: String::new(),
    };
    cfg.output_dir = tmp.path().join("self");
    commands::eval(&cfg, &inputs).unwrap();
    let rows = metric_rows(&cfg.output_dir.join(commands::METRICS_FILE));
    let agg = rows.iter().find(|r| r.0 == "aggregate_curve").unwrap();
    assert_eq!(agg.1, 0.0);
    assert_eq!(agg.2, 1.0);
}

#[test]
fn constant_half_maps_give_half_mae() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 4, 32);
    synthesize(&cfg);
    let pred = tmp.path().join("half");
    let prov = cfg.provenance();
    let mut expected = 0.0;
    for i in 0..4 {
        let mask = io::read_mask(&cfg.dataset.masks_dir().join(format!("synth_{i:04}.png"))).unwrap();
        io::write_gray_png(&pred.join(format!("synth_{i:04}_sal.png")), 32, 32, &[quantize(0.5); 1024], &prov).unwrap();
        // 0.5 quantizes to 128, so each pixel is off by 128/255 or 127/255.
        let pos = mask.count_ones() as f64;
        expected += (pos * 127.0 + (1024.0 - pos) * 128.0) / 255.0 / 1024.0 / 4.0;
    }
    cfg.output_dir = tmp.path().join("e");
    let inputs = EvalInputs {
        pred_dir: pred,
        gt_dir: cfg.dataset.masks_dir(),
        pred_suffix: "_sal".into(),
    };
    commands::eval(&cfg, &inputs).unwrap();
    let rows = metric_rows(&cfg.output_dir.join(commands::METRICS_FILE));
    let mae = rows.iter().find(|r| r.0 == "aggregate_curve").unwrap().1;
    assert!((mae - expected).abs() < 1e-12);
    assert!((mae - 0.5).abs() <= 0.5 / 255.0 + 1e-12);

    commands::export_pr(&cfg, &inputs).unwrap();
    assert!(cfg.output_dir.join(commands::PR_FILE).exists());
}

#[test]
fn synth_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str, seed: u64| {
        let mut cfg = config(&tmp.path().join(dir), 5, 32);
        cfg.set_seed(seed);
        synthesize(&cfg);
        read(&cfg.dataset.images_dir().join("synth_0004.png"))
    };
    assert_eq!(run("a", 1), run("b", 1));
    assert_ne!(run("a", 1), run("c", 2));
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).current_dir(tmp.path()).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["synth", "--size", "30"]), Some(1));
    std::fs::write(tmp.path().join("bad.toml"), "unknown_key = 1\n").unwrap();
    assert_eq!(code(&["--config", "bad.toml", "rbd"]), Some(1));
    assert_eq!(code(&["rbd", "--root", "missing"]), Some(2));
    assert_eq!(code(&["infer", "--checkpoint", "missing.easal"]), Some(2));
    assert_eq!(code(&["synth", "--count", "2", "--size", "32", "--out", "d"]), Some(0));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("run.toml");
    std::fs::write(&path, "seed = 4\noutput_dir = \"from_file\"\n[train]\nmax_iter = 9\n").unwrap();
    let cli = <edgesal_cli::Cli as clap::Parser>::try_parse_from([
        "edgesal",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "11",
        "train",
        "--max-iter",
        "2",
    ])
    .unwrap();
    let cfg = cli.resolve_config().unwrap();
    assert_eq!((cfg.seed, cfg.train.seed, cfg.train.max_iter), (11, 11, 2));
    assert_eq!(cfg.output_dir, Path::new("from_file"));
}

fn dir_snapshot(dir: &Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = read(&p);
            (p, bytes)
        })
        .collect();
    out.sort();
    out
}

#[test]
fn train_skips_mismatched_pairs_and_traces_every_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 3, 32);
    cfg.model.widths = [4, 8, 8, 8];
    cfg.model.fusion_width = 8;
    cfg.train.max_iter = 7;
    synthesize(&cfg);
    let prov = cfg.provenance();
    let odd = Mask::from_values(16, 16, &[0; 256]).unwrap();
    io::write_mask_png(&cfg.dataset.masks_dir().join("synth_0001.png"), &odd, &prov).unwrap();
    let images_before = dir_snapshot(&cfg.dataset.images_dir());
    let masks_before = dir_snapshot(&cfg.dataset.masks_dir());

    let r = commands::train(&cfg).unwrap();
    assert!(r.summary.contains("(1 skipped)"), "{}", r.summary);
    assert!(r.warnings.iter().any(|w| w.contains("synth_0001")), "{:?}", r.warnings);
    let trace = std::fs::read_to_string(cfg.output_dir.join(commands::TRACE_FILE)).unwrap();
    let rows: Vec<&str> = trace.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows[0].starts_with("0,0.001,"), "{}", rows[0]);
    let echo = std::fs::read_to_string(cfg.output_dir.join(commands::CONFIG_ECHO_FILE)).unwrap();
    assert!(echo.contains("seed = 3"));
    assert_eq!(RunConfig::from_toml(&echo).unwrap(), cfg);

    commands::rbd(&cfg).unwrap();
    assert_eq!(dir_snapshot(&cfg.dataset.images_dir()), images_before);
    assert_eq!(dir_snapshot(&cfg.dataset.masks_dir()), masks_before);
}

#[test]
fn rbd_writes_zero_map_for_uniform_image() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 0, 32);
    let prov = cfg.provenance();
    let img = edgesal_core::Tensor::filled(&[3, 48, 48], 0.6);
    io::write_rgb_png(&cfg.dataset.images_dir().join("flat.png"), &img, &prov).unwrap();
    io::write_mask_png(&cfg.dataset.masks_dir().join("flat.png"), &Mask::empty(48, 48), &prov).unwrap();
    commands::rbd(&cfg).unwrap();
    let map = image::open(cfg.output_dir.join("rbd/flat_rbd.png")).unwrap().into_luma8();
    assert!(map.as_raw().iter().all(|&v| v == 0));
}

#[test]
fn synth_masks_are_binary_nonempty_and_include_small_objects() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), 200, 64);
    synthesize(&cfg);
    let mut small = 0;
    for i in 0..200 {
        let path = cfg.dataset.masks_dir().join(format!("synth_{i:04}.png"));
        let raw = image::open(&path).unwrap().into_luma8().into_raw();
        assert!(raw.iter().all(|&v| v == 0 || v == 255));
        let on = raw.iter().filter(|&&v| v == 255).count();
        assert!(on > 0, "{} is empty", path.display());
        small += usize::from((on as f64) < 0.04 * 64.0 * 64.0);
    }
    assert!(small > 0);
}

#[test]
fn eval_reports_unpaired_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path(), 3, 32);
    synthesize(&cfg);
    let pred = tmp.path().join("pred");
    let prov = cfg.provenance();
    for stem in ["synth_0000", "synth_0001", "orphan"] {
        io::write_gray_png(&pred.join(format!("{stem}_sal.png")), 32, 32, &[200; 1024], &prov).unwrap();
    }
    cfg.output_dir = tmp.path().join("e");
    let inputs = EvalInputs {
        pred_dir: pred,
        gt_dir: cfg.dataset.masks_dir(),
        pred_suffix: "_sal".into(),
    };
    let r = commands::eval(&cfg, &inputs).unwrap();
    assert_eq!(r.warnings.len(), 2, "{:?}", r.warnings);
    assert!(r.summary.contains("2 images (2 skipped"), "{}", r.summary);
}
