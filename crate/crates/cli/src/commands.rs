//! Subcommand implementations. Each writes its artifacts under the
//! configured output directory and returns a summary; per-input failures
//! are collected and the run continues with the remaining inputs.

use std::path::{Path, PathBuf};

use edgesal_core::labelgen::{three_category_labels, SALIENT_EDGE, SALIENT_OBJECT};
use edgesal_core::metrics::{self, MetricsReport};
use edgesal_core::net::{self, checkpoint, Model, Sample};
use edgesal_core::rbd::rbd_saliency;
use edgesal_core::synth;

use crate::config::RunConfig;
use crate::dataset::{list_images, DatasetIndex};
use crate::error::{CliError, CliResult};
use crate::io;

/// Gray levels used for label images: background, salient edge, salient object.
pub const LABEL_GRAY: [u8; 3] = [0, 128, 255];

pub const CHECKPOINT_FILE: &str = "model.easal";
pub const TRACE_FILE: &str = "loss_trace.csv";
pub const CONFIG_ECHO_FILE: &str = "run_config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PR_FILE: &str = "pr_curve.csv";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub summary: String,
    /// Non-fatal notices: unmatched files, skipped samples.
    pub warnings: Vec<String>,
    /// Inputs that could not be processed.
    pub failures: Vec<String>,
}

fn require_dir(dir: &Path, what: &str) -> CliResult<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} directory {} does not exist", dir.display())))
    }
}

fn dataset_index(cfg: &RunConfig) -> CliResult<DatasetIndex> {
    let (images, masks) = (cfg.dataset.images_dir(), cfg.dataset.masks_dir());
    require_dir(&images, "image")?;
    require_dir(&masks, "mask")?;
    DatasetIndex::build(&images, &masks)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv_writer();
    let err = |e: csv::Error| CliError::Invariant(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Invariant(format!("csv: {e}")))
}

/// Generates the synthetic dataset as `<out>/<images>` and `<out>/<masks>`.
pub fn synth(cfg: &RunConfig) -> CliResult<Outcome> {
    let size = cfg.train.image_size;
    let images = cfg.output_dir.join(&cfg.dataset.images);
    let masks = cfg.output_dir.join(&cfg.dataset.masks);
    let prov = cfg.provenance();
    let data = synth::dataset(cfg.synth.count, size, cfg.seed);
    for (name, image, mask) in &data {
        io::write_rgb_png(&images.join(format!("{name}.png")), image, &prov)?;
        io::write_mask_png(&masks.join(format!("{name}.png")), mask, &prov)?;
    }
    Ok(Outcome {
        summary: format!(
            "synth: wrote {} image/mask pairs ({size}x{size}) to {}",
            data.len(),
            cfg.output_dir.display()
        ),
        ..Outcome::default()
    })
}

/// Writes `<out>/labels/<stem>.png` for every mask.
pub fn relabel(cfg: &RunConfig) -> CliResult<Outcome> {
    let masks_dir = cfg.dataset.masks_dir();
    require_dir(&masks_dir, "mask")?;
    let out_dir = cfg.output_dir.join("labels");
    let prov = cfg.provenance();
    let mut outcome = Outcome::default();
    let mut fractions = Vec::new();
    for (stem, path) in list_images(&masks_dir, "")? {
        let mask = match io::read_mask(&path) {
            Ok(m) => m,
            Err(e) => {
                outcome.failures.push(e.to_string());
                continue;
            }
        };
        let labels = three_category_labels(&mask);
        let gray: Vec<u8> = labels.labels().iter().map(|&l| LABEL_GRAY[l as usize]).collect();
        io::write_gray_png(&out_dir.join(format!("{stem}.png")), labels.height(), labels.width(), &gray, &prov)?;
        fractions.push(labels.edge_fraction());
    }
    let mean = if fractions.is_empty() {
        "n/a".to_string()
    } else {
        format!("{:.4}", fractions.iter().sum::<f64>() / fractions.len() as f64)
    };
    outcome.summary = format!(
        "relabel: {} images, {} failed, mean edge fraction |Y_e|/|Y| = {mean}",
        fractions.len(),
        outcome.failures.len()
    );
    Ok(outcome)
}

/// Writes `<out>/rbd/<stem>_rbd.png` for every matched pair.
pub fn rbd(cfg: &RunConfig) -> CliResult<Outcome> {
    let index = dataset_index(cfg)?;
    let out_dir = cfg.output_dir.join("rbd");
    let prov = cfg.provenance();
    let mut outcome = Outcome {
        warnings: index.warnings(),
        ..Outcome::default()
    };
    let mut written = 0;
    for pair in &index.pairs {
        let result = io::read_rgb(&pair.image).and_then(|img| Ok(rbd_saliency(&img, &cfg.rbd)?));
        match result {
            Ok(map) => {
                io::write_map_png(&out_dir.join(format!("{}_rbd.png", pair.stem)), &map, &prov)?;
                written += 1;
            }
            Err(e) => outcome.failures.push(format!("{}: {e}", pair.image.display())),
        }
    }
    outcome.summary = format!(
        "rbd: wrote {written} maps to {}, {} failed, {} unmatched files",
        out_dir.display(),
        outcome.failures.len(),
        index.unmatched()
    );
    Ok(outcome)
}

fn load_samples(index: &DatasetIndex, outcome: &mut Outcome) -> Vec<Sample> {
    let mut samples = Vec::with_capacity(index.pairs.len());
    for pair in &index.pairs {
        match io::read_rgb(&pair.image).and_then(|image| Ok((image, io::read_mask(&pair.mask)?))) {
            Ok((image, mask)) => samples.push(Sample {
                name: pair.stem.clone(),
                image,
                mask,
            }),
            Err(e) => outcome.failures.push(e.to_string()),
        }
    }
    samples
}

/// Trains a model and writes the checkpoint, loss trace and config echo.
pub fn train(cfg: &RunConfig) -> CliResult<Outcome> {
    let index = dataset_index(cfg)?;
    let mut outcome = Outcome {
        warnings: index.warnings(),
        ..Outcome::default()
    };
    let samples = load_samples(&index, &mut outcome);
    if samples.is_empty() {
        return Err(CliError::Data("train: no readable image/mask pairs".into()));
    }
    let mut model = Model::build(cfg.model, cfg.seed)?;
    let result = net::train(&mut model, &samples, &cfg.train, &cfg.rbd)?;
    for name in &result.skipped {
        outcome
            .warnings
            .push(format!("warning: skipped {name} (image/mask size mismatch or size not a multiple of 4)"));
    }

    let prov = cfg.provenance();
    let out = &cfg.output_dir;
    io::write_atomic(&out.join(CHECKPOINT_FILE), &checkpoint::save(&model, prov.to_json().trim_end()))?;
    let rows: Vec<Vec<String>> = result
        .trace
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                r.lr.to_string(),
                r.loss_frontend.to_string(),
                r.loss_final.to_string(),
            ]
        })
        .collect();
    let trace = csv_bytes(&["iter", "lr", "loss_frontend", "loss_final"], &rows)?;
    io::write_with_sidecar(&out.join(TRACE_FILE), &trace, &prov)?;
    let echo = format!(
        "# {} {}\n# config_sha256 = \"{}\"\n# seed = {}\n{}",
        prov.tool,
        prov.version,
        prov.config_sha256,
        prov.seed,
        cfg.to_toml()
    );
    io::write_atomic(&out.join(CONFIG_ECHO_FILE), echo.as_bytes())?;

    let first = result.trace[0].loss_final;
    let tail = &result.trace[result.trace.len().saturating_sub(50)..];
    let tail_mean = tail.iter().map(|r| r.loss_final).sum::<f64>() / tail.len() as f64;
    outcome.summary = format!(
        "train: {} samples ({} skipped), {} iterations; final-supervision loss {first:.2} -> {tail_mean:.2} (last {} mean); wrote {}",
        samples.len() - result.skipped.len(),
        result.skipped.len(),
        result.trace.len(),
        tail.len(),
        out.join(CHECKPOINT_FILE).display()
    );
    Ok(outcome)
}

pub fn load_checkpoint(path: &Path) -> CliResult<(Model, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    checkpoint::load(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes `<out>/saliency/<stem>_sal.png` and `<out>/edges/<stem>_edge.png`
/// for every image.
pub fn infer(cfg: &RunConfig, checkpoint_path: &Path) -> CliResult<Outcome> {
    let (model, _) = load_checkpoint(checkpoint_path)?;
    let images_dir = cfg.dataset.images_dir();
    require_dir(&images_dir, "image")?;
    let sal_dir = cfg.output_dir.join("saliency");
    let edge_dir = cfg.output_dir.join("edges");
    let prov = cfg.provenance();
    let mut outcome = Outcome::default();
    let mut written = 0;
    for (stem, path) in list_images(&images_dir, "")? {
        let result = io::read_rgb(&path).and_then(|img| Ok(net::infer(&model, &img, &cfg.rbd)?));
        match result {
            Ok(inf) => {
                io::write_map_png(&sal_dir.join(format!("{stem}_sal.png")), &inf.saliency, &prov)?;
                io::write_map_png(&edge_dir.join(format!("{stem}_edge.png")), &inf.salient_edge, &prov)?;
                written += 1;
            }
            Err(e) => outcome.failures.push(format!("{}: {e}", path.display())),
        }
    }
    outcome.summary = format!(
        "infer: wrote {written} saliency/edge map pairs under {}, {} failed",
        cfg.output_dir.display(),
        outcome.failures.len()
    );
    Ok(outcome)
}

/// Evaluation inputs: predicted maps and ground-truth masks paired by stem.
#[derive(Debug, Clone)]
pub struct EvalInputs {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    /// Suffix stripped from prediction stems before pairing.
    pub pred_suffix: String,
}

fn evaluate(inputs: &EvalInputs, outcome: &mut Outcome) -> CliResult<MetricsReport> {
    require_dir(&inputs.pred_dir, "prediction")?;
    require_dir(&inputs.gt_dir, "ground-truth")?;
    let index = DatasetIndex::build_with_suffix(&inputs.pred_dir, &inputs.pred_suffix, &inputs.gt_dir)?;
    outcome.warnings.extend(index.warnings());
    let mut reports = Vec::with_capacity(index.pairs.len());
    for pair in &index.pairs {
        let result = io::read_map(&pair.image).and_then(|s| {
            let gt = io::read_mask(&pair.mask)?;
            Ok(metrics::evaluate_image(pair.stem.clone(), &s, &gt, metrics::DEFAULT_BETA2)?)
        });
        match result {
            Ok(r) => reports.push(r),
            Err(e) => outcome.failures.push(format!("{}: {e}", pair.image.display())),
        }
    }
    let skipped = outcome.failures.len() + index.unmatched();
    if reports.is_empty() {
        return Err(CliError::Data(format!(
            "eval: no evaluable prediction/ground-truth pairs ({skipped} skipped)"
        )));
    }
    Ok(metrics::aggregate(reports, skipped)?)
}

fn check_report(report: &MetricsReport) -> CliResult<()> {
    let bad = |v: f64| !(0.0..=1.0).contains(&v);
    if bad(report.mean_mae) || bad(report.max_f) || report.max_f < report.mean_f {
        return Err(CliError::Invariant(format!(
            "metrics out of range: mae {} max F {} mean F {}",
            report.mean_mae, report.max_f, report.mean_f
        )));
    }
    Ok(())
}

fn pr_csv(report: &MetricsReport) -> CliResult<Vec<u8>> {
    let rows: Vec<Vec<String>> = (0..metrics::LEVELS)
        .map(|t| {
            vec![
                t.to_string(),
                report.mean_pr[t].precision.to_string(),
                report.mean_pr[t].recall.to_string(),
                report.mean_f_curve[t].to_string(),
            ]
        })
        .collect();
    csv_bytes(&["threshold", "precision", "recall", "f_measure"], &rows)
}

/// Per-image rows followed by two aggregate rows: `aggregate_curve` (F
/// curves averaged over images, then max/mean over thresholds; primary)
/// and `aggregate_per_image` (per-image max/mean F averaged over images).
fn metrics_csv(report: &MetricsReport) -> CliResult<Vec<u8>> {
    let mut rows: Vec<Vec<String>> = report
        .images
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.mae.to_string(),
                r.max_f.to_string(),
                r.mean_f.to_string(),
                u8::from(r.pr.degenerate).to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "aggregate_curve".into(),
        report.mean_mae.to_string(),
        report.max_f.to_string(),
        report.mean_f.to_string(),
        report.degenerate.to_string(),
    ]);
    rows.push(vec![
        "aggregate_per_image".into(),
        report.mean_mae.to_string(),
        report.per_image_max_f.to_string(),
        report.per_image_mean_f.to_string(),
        report.degenerate.to_string(),
    ]);
    csv_bytes(&["image", "mae", "max_f", "mean_f", "degenerate"], &rows)
}

/// Writes `<out>/metrics.csv` and `<out>/pr_curve.csv`.
pub fn eval(cfg: &RunConfig, inputs: &EvalInputs) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let report = evaluate(inputs, &mut outcome)?;
    check_report(&report)?;
    let prov = cfg.provenance();
    io::write_with_sidecar(&cfg.output_dir.join(METRICS_FILE), &metrics_csv(&report)?, &prov)?;
    io::write_with_sidecar(&cfg.output_dir.join(PR_FILE), &pr_csv(&report)?, &prov)?;
    outcome.summary = format!(
        "eval: {} images ({} skipped, {} degenerate): MAE {:.4}, max F {:.4}, mean F {:.4} (per-image: max F {:.4}, mean F {:.4})",
        report.evaluated,
        report.skipped,
        report.degenerate,
        report.mean_mae,
        report.max_f,
        report.mean_f,
        report.per_image_max_f,
        report.per_image_mean_f
    );
    Ok(outcome)
}

/// Writes only the 256-row `<out>/pr_curve.csv`.
pub fn export_pr(cfg: &RunConfig, inputs: &EvalInputs) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    let report = evaluate(inputs, &mut outcome)?;
    check_report(&report)?;
    let path = cfg.output_dir.join(PR_FILE);
    io::write_with_sidecar(&path, &pr_csv(&report)?, &cfg.provenance())?;
    outcome.summary = format!("export-pr: wrote {} ({} images)", path.display(), report.evaluated);
    Ok(outcome)
}

/// Decodes a label image written by [`relabel`] back to class indices.
pub fn decode_label_gray(v: u8) -> Option<u8> {
    match v {
        0 => Some(0),
        128 => Some(SALIENT_EDGE),
        255 => Some(SALIENT_OBJECT),
        _ => None,
    }
}
