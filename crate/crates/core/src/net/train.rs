use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::balanced_loss;
use super::model::Model;
use super::optim::{sgd_step, TrainConfig};
use crate::error::{invalid, Result};
use crate::labelgen::{three_category_labels, Mask, TriLabelMap};
use crate::rbd::{rbd_saliency, RbdParams};
use crate::tensor::{softmax_pixelwise, Tensor};

/// One training pair: an sRGB image and its binary ground truth.
#[derive(Debug, Clone)]
pub struct Sample {
    pub name: String,
    pub image: Tensor,
    pub mask: Mask,
}

/// Losses of one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    /// Supervision on the upsampled front-end prediction `S_deep`.
    pub frontend: f64,
    /// Supervision on the context-refined output.
    pub final_: f64,
}

impl StepLoss {
    pub fn total(&self) -> f64 {
        self.frontend + self.final_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lr: f64,
    pub loss_frontend: f64,
    pub loss_final: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trace: Vec<TraceRow>,
    /// Names of samples skipped because image and mask sizes disagree or
    /// are not a multiple of the output stride.
    pub skipped: Vec<String>,
}

/// Forward pass through the whole network and both loss terms; parameter
/// gradients of their sum are accumulated into `model`.
pub fn accumulate_gradients(
    model: &mut Model,
    image: &Tensor,
    s_rbd: &Tensor,
    labels: &TriLabelMap,
) -> Result<StepLoss> {
    let front = model.forward_frontend(image)?;
    let fused = model.fuse(image, &front.s_deep, &front.sides, s_rbd)?;
    let ctx = model.context_refine(&fused.logits)?;
    let (loss_front, g_front) = balanced_loss(&front.s_deep, labels)?;
    let (loss_final, g_final) = balanced_loss(&ctx.output, labels)?;

    let g_fused = model.backward_context(&ctx, &g_final)?;
    let mut g = model.backward_fuse(&fused, &g_fused)?;
    g.s_deep.add_assign(&g_front)?;
    model.backward_frontend(&front, &g.s_deep, &g.sides)?;
    Ok(StepLoss {
        frontend: loss_front,
        final_: loss_final,
    })
}

/// Loss of both supervision terms without touching gradients.
pub fn evaluate_loss(model: &Model, image: &Tensor, s_rbd: &Tensor, labels: &TriLabelMap) -> Result<StepLoss> {
    let front = model.forward_frontend(image)?;
    let fused = model.fuse(image, &front.s_deep, &front.sides, s_rbd)?;
    let logits = model.context_refine(&fused.logits)?.output;
    Ok(StepLoss {
        frontend: balanced_loss(&front.s_deep, labels)?.0,
        final_: balanced_loss(&logits, labels)?.0,
    })
}

/// Fused logits, optionally passed through the context module.
pub fn final_logits(model: &Model, image: &Tensor, s_rbd: &Tensor, use_context: bool) -> Result<Tensor> {
    let front = model.forward_frontend(image)?;
    let fused = model.fuse(image, &front.s_deep, &front.sides, s_rbd)?;
    if use_context {
        Ok(model.context_refine(&fused.logits)?.output)
    } else {
        Ok(fused.logits)
    }
}

struct Prepared {
    image: Tensor,
    s_rbd: Tensor,
    labels: TriLabelMap,
}

fn prepare(sample: &Sample, config: &TrainConfig, rbd: &RbdParams) -> Result<Option<Prepared>> {
    let (c, h, w) = sample.image.chw()?;
    if c != 3 || h != sample.mask.height() || w != sample.mask.width() || h % 4 != 0 || w % 4 != 0 {
        return Ok(None);
    }
    let s_rbd = if config.use_rbd {
        rbd_saliency(&sample.image, rbd)?
    } else {
        Tensor::zeros(&[1, h, w])
    };
    Ok(Some(Prepared {
        image: sample.image.clone(),
        s_rbd,
        labels: three_category_labels(&sample.mask),
    }))
}

/// Trains for `config.max_iter` single-example iterations. Examples are
/// visited in a fresh seeded permutation every epoch; labels and the RBD
/// map are computed once per example. Single-threaded and deterministic.
///
/// The optimized objective is the per-pixel mean of the two loss terms
/// (the gradient is divided by the pixel count, like Caffe's default loss
/// normalization); the trace records the unnormalized sums. Parameters are
/// rounded to `f32` at the end so a saved checkpoint reloads bit-exactly.
pub fn train(model: &mut Model, dataset: &[Sample], config: &TrainConfig, rbd: &RbdParams) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(invalid("train: dataset is empty"));
    }
    let mut prepared = Vec::with_capacity(dataset.len());
    let mut skipped = Vec::new();
    for sample in dataset {
        match prepare(sample, config, rbd)? {
            Some(p) => prepared.push(p),
            None => skipped.push(sample.name.clone()),
        }
    }
    if prepared.is_empty() {
        return Err(invalid(format!(
            "train: all {} samples were skipped (size mismatch)",
            dataset.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut cursor = order.len();
    let mut trace = Vec::with_capacity(config.max_iter);
    for iter in 0..config.max_iter {
        if cursor == order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let ex = &prepared[order[cursor]];
        cursor += 1;
        model.zero_grad();
        let loss = accumulate_gradients(model, &ex.image, &ex.s_rbd, &ex.labels)?;
        model.scale_grads(1.0 / ex.labels.total() as f64);
        let lr = sgd_step(model, iter, config)?;
        trace.push(TraceRow {
            iter,
            lr,
            loss_frontend: loss.frontend,
            loss_final: loss.final_,
        });
    }
    model.round_to_f32();
    Ok(TrainOutcome { trace, skipped })
}

/// Per-pixel class probabilities and the argmax label map.
#[derive(Debug, Clone)]
pub struct Inference {
    /// `P(salient object)`.
    pub saliency: Tensor,
    /// `P(salient edge)`.
    pub salient_edge: Tensor,
    /// `P(background)`.
    pub background: Tensor,
    pub labels: TriLabelMap,
}

/// Inference with a precomputed RBD map.
pub fn infer_with_rbd(model: &Model, image: &Tensor, s_rbd: &Tensor) -> Result<Inference> {
    let logits = final_logits(model, image, s_rbd, true)?;
    let probs = softmax_pixelwise(&logits)?;
    let (_, h, w) = probs.chw()?;
    let plane = h * w;
    let p = probs.data();
    let labels = (0..plane)
        .map(|j| {
            // ties go to the lower class index
            let mut best = 0u8;
            for k in 1..3u8 {
                if p[k as usize * plane + j] > p[best as usize * plane + j] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let channel = |k: usize| Tensor::from_vec(&[1, h, w], probs.channel(k).to_vec());
    Ok(Inference {
        background: channel(0)?,
        salient_edge: channel(1)?,
        saliency: channel(2)?,
        labels: TriLabelMap::new(h, w, labels)?,
    })
}

pub fn infer(model: &Model, image: &Tensor, rbd: &RbdParams) -> Result<Inference> {
    let s_rbd = rbd_saliency(image, rbd)?;
    infer_with_rbd(model, image, &s_rbd)
}
