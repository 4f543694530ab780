//! Command-line front end: dataset synthesis, relabeling, RBD maps,
//! training, inference and evaluation.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{EvalInputs, Outcome};
use config::RunConfig;
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "edgesal", version, about = "Edge-aware salient object detection")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dataset root containing the image and mask subdirectories.
    #[arg(long, global = true, value_name = "DIR")]
    pub root: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for synthesis, initialization and sample order.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic shape dataset under <out>/images and <out>/masks.
    Synth {
        #[arg(long)]
        count: Option<usize>,
        /// Image side length in pixels (multiple of 4).
        #[arg(long)]
        size: Option<usize>,
    },
    /// Convert binary masks into background / salient-edge / salient-object labels.
    Relabel,
    /// Compute RBD saliency maps for every image/mask pair.
    Rbd,
    /// Train the model and write the checkpoint and loss trace.
    Train {
        #[arg(long)]
        max_iter: Option<usize>,
        /// Feed a zero map instead of the RBD prior (ablation).
        #[arg(long)]
        no_rbd: bool,
    },
    /// Write saliency and salient-edge maps for every image.
    Infer {
        /// Defaults to <out>/model.easal.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
    },
    /// Compute MAE and F-measure; writes metrics.csv and pr_curve.csv.
    Eval(EvalArgs),
    /// Write only the averaged precision-recall curve.
    ExportPr(EvalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Predicted maps; defaults to <out>/saliency.
    #[arg(long, value_name = "DIR")]
    pub pred: Option<PathBuf>,
    /// Ground-truth masks; defaults to the dataset mask directory.
    #[arg(long, value_name = "DIR")]
    pub gt: Option<PathBuf>,
    /// Suffix removed from prediction file stems before pairing.
    #[arg(long, default_value = "_sal")]
    pub pred_suffix: String,
}

impl Cli {
    /// Defaults, then the config file, then flags.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(root) = &self.root {
            cfg.dataset.root = root.clone();
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        match &self.command {
            Command::Synth { count, size } => {
                if let Some(c) = count {
                    cfg.synth.count = *c;
                }
                if let Some(s) = size {
                    cfg.train.image_size = *s;
                }
            }
            Command::Train { max_iter, no_rbd } => {
                if let Some(m) = max_iter {
                    cfg.train.max_iter = *m;
                }
                if *no_rbd {
                    cfg.train.use_rbd = false;
                }
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn eval_inputs(cfg: &RunConfig, args: &EvalArgs) -> EvalInputs {
    EvalInputs {
        pred_dir: args.pred.clone().unwrap_or_else(|| cfg.output_dir.join("saliency")),
        gt_dir: args.gt.clone().unwrap_or_else(|| cfg.dataset.masks_dir()),
        pred_suffix: args.pred_suffix.clone(),
    }
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    let cfg = cli.resolve_config()?;
    match &cli.command {
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Relabel => commands::relabel(&cfg),
        Command::Rbd => commands::rbd(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Infer { checkpoint } => {
            let path = checkpoint
                .clone()
                .unwrap_or_else(|| cfg.output_dir.join(commands::CHECKPOINT_FILE));
            commands::infer(&cfg, &path)
        }
        Command::Eval(args) => commands::eval(&cfg, &eval_inputs(&cfg, args)),
        Command::ExportPr(args) => commands::export_pr(&cfg, &eval_inputs(&cfg, args)),
    }
}
