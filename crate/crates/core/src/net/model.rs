//! Toy edge-aware FCN.
//!
//! ```text
//! image ─ enc1 ─ enc2 ─ enc3 ─ enc4 ─ head(1x1) ─ up ─ S_deep = {S_b, S_e, S_s}
//!           │      │      │      │
//!         side1  side2  side3  side4   (1x1 -> 1 channel, upsampled)
//!
//! [image, S_s, S_RBD, S_1..S_4] ─ fusion (3 x 3x3 conv+ReLU) ─ S_ns
//! [S_b, S_e, S_ns] ─ 1x1 ─ S_DS ─ context (dilations 1,2,4,8, 3x3, 1x1) ─ logits
//! ```
//!
//! Blocks 1-2 end in a stride-2 convolution, blocks 3-4 use dilation 2 and
//! 4 instead, so the encoder's total stride is 4.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{chain_backward, chain_forward, ConvLayer, LayerCache};
use crate::error::{invalid, Error, Result};
use crate::tensor::{
    bilinear_upsample, bilinear_upsample_backward, concat_channels, split_channels, ConvSpec, Tensor,
};

pub const NUM_CLASSES: usize = 3;
pub const NUM_BLOCKS: usize = 4;
pub const OUTPUT_STRIDE: usize = 4;
/// Channels fed to the fusion net: 3 image + S_s + S_RBD + 4 side outputs.
pub const FUSION_INPUTS: usize = 3 + 1 + 1 + NUM_BLOCKS;
pub const CONTEXT_DILATIONS: [usize; 4] = [1, 2, 4, 8];

const BLOCK_DILATION: [usize; NUM_BLOCKS] = [1, 1, 2, 4];
const BLOCK_STRIDE: [usize; NUM_BLOCKS] = [2, 2, 1, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Encoder block widths.
    pub widths: [usize; NUM_BLOCKS],
    /// Hidden width of the fusion net.
    pub fusion_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            widths: [8, 16, 16, 16],
            fusion_width: 16,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.contains(&0) || self.fusion_width == 0 {
            return Err(invalid(format!(
                "invalid width plan {:?} / fusion width {}: all widths must be positive",
                self.widths, self.fusion_width
            )));
        }
        Ok(())
    }

    /// Hidden width of the context module, two channels per class.
    pub fn context_width(&self) -> usize {
        2 * NUM_CLASSES
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub encoder: Vec<Vec<ConvLayer>>,
    /// Encoder blocks feeding the side convolutions, increasing depth.
    pub side_taps: [usize; NUM_BLOCKS],
    pub sides: Vec<ConvLayer>,
    pub head: ConvLayer,
    pub fusion: Vec<ConvLayer>,
    pub fuse_out: ConvLayer,
    pub context: Vec<ConvLayer>,
}

/// Front-end outputs at input resolution plus the activations needed to
/// backpropagate through them.
#[derive(Debug, Clone)]
pub struct FrontendOutput {
    /// Three-channel logits `{S_b, S_e, S_s}`.
    pub s_deep: Tensor,
    /// Four single-channel side outputs `S_1..S_4`.
    pub sides: Vec<Tensor>,
    block_caches: Vec<Vec<LayerCache>>,
    side_caches: Vec<LayerCache>,
    head_cache: LayerCache,
    block_dims: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct FusionOutput {
    /// Three-channel `S_DS` logits.
    pub logits: Tensor,
    /// The fused single-channel map `S_ns`.
    pub s_ns: Tensor,
    fusion_caches: Vec<LayerCache>,
    out_cache: LayerCache,
}

#[derive(Debug, Clone)]
pub struct ContextOutput {
    pub output: Tensor,
    caches: Vec<LayerCache>,
}

/// Gradients leaving the fusion stage towards its inputs.
#[derive(Debug, Clone)]
pub struct FusionGrads {
    pub s_deep: Tensor,
    pub sides: Vec<Tensor>,
    pub s_rbd: Tensor,
}

fn xavier_fill(layer: &mut ConvLayer, rng: &mut ChaCha8Rng) {
    let s = layer.spec;
    let fan_in = (s.in_channels * s.kernel * s.kernel) as f64;
    let scale = (3.0 / fan_in).sqrt();
    for w in layer.weight.value.data_mut() {
        *w = rng.random_range(-scale..scale);
    }
    layer.bias.value.fill(0.0);
}

fn set_center(layer: &mut ConvLayer, out: usize, input: usize, v: f64) {
    let k = layer.spec.kernel;
    let idx = ((out * layer.spec.in_channels + input) * k + k / 2) * k + k / 2;
    layer.weight.value.data_mut()[idx] = v;
}

/// Identity initialization: the first layer splits each class channel
/// into positive and negative parts, middle layers copy them through, and
/// the final 1x1 projection recombines `relu(x) - relu(-x) = x`.
pub fn identity_init_context(layers: &mut [ConvLayer]) {
    let last = layers.len() - 1;
    for (i, layer) in layers.iter_mut().enumerate() {
        layer.weight.value.fill(0.0);
        layer.bias.value.fill(0.0);
        if i == 0 {
            for c in 0..NUM_CLASSES {
                set_center(layer, c, c, 1.0);
                set_center(layer, c + NUM_CLASSES, c, -1.0);
            }
        } else if i == last {
            for c in 0..NUM_CLASSES {
                set_center(layer, c, c, 1.0);
                set_center(layer, c, c + NUM_CLASSES, -1.0);
            }
        } else {
            for c in 0..layer.spec.out_channels {
                set_center(layer, c, c, 1.0);
            }
        }
    }
}

impl Model {
    /// Builds the topology with zeroed parameters.
    pub fn skeleton(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut encoder = Vec::with_capacity(NUM_BLOCKS);
        let mut in_ch = 3;
        for b in 0..NUM_BLOCKS {
            let w = config.widths[b];
            let d = BLOCK_DILATION[b];
            encoder.push(vec![
                ConvLayer::new(format!("enc{}.conv1", b + 1), ConvSpec::dilated3(in_ch, w, d), true),
                ConvLayer::new(
                    format!("enc{}.conv2", b + 1),
                    ConvSpec::dilated3(w, w, d).with_stride(BLOCK_STRIDE[b]),
                    true,
                ),
            ]);
            in_ch = w;
        }
        let sides = (0..NUM_BLOCKS)
            .map(|b| ConvLayer::new(format!("side{}", b + 1), ConvSpec::same(config.widths[b], 1, 1), false))
            .collect();
        let head = ConvLayer::new("head", ConvSpec::same(config.widths[3], NUM_CLASSES, 1), false);
        let fw = config.fusion_width;
        let fusion = vec![
            ConvLayer::new("fuse1", ConvSpec::same(FUSION_INPUTS, fw, 3), true),
            ConvLayer::new("fuse2", ConvSpec::same(fw, fw, 3), true),
            ConvLayer::new("fuse3", ConvSpec::same(fw, 1, 3), true),
        ];
        let fuse_out = ConvLayer::new("fuse_out", ConvSpec::same(NUM_CLASSES, NUM_CLASSES, 1), false);
        let cw = config.context_width();
        let mut context = Vec::new();
        let mut c_in = NUM_CLASSES;
        for (i, &d) in CONTEXT_DILATIONS.iter().enumerate() {
            context.push(ConvLayer::new(format!("ctx{}", i + 1), ConvSpec::dilated3(c_in, cw, d), true));
            c_in = cw;
        }
        context.push(ConvLayer::new("ctx5", ConvSpec::dilated3(cw, cw, 1), true));
        context.push(ConvLayer::new("ctx6", ConvSpec::same(cw, NUM_CLASSES, 1), false));
        Ok(Self {
            config,
            encoder,
            side_taps: [0, 1, 2, 3],
            sides,
            head,
            fusion,
            fuse_out,
            context,
        })
    }

    /// Xavier-uniform weights (`U(-sqrt(3/fan_in), sqrt(3/fan_in))`), zero
    /// biases, identity-initialized context module. Deterministic in `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::skeleton(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in model.encoder.iter_mut().flatten() {
            xavier_fill(layer, &mut rng);
        }
        for layer in &mut model.sides {
            xavier_fill(layer, &mut rng);
        }
        xavier_fill(&mut model.head, &mut rng);
        for layer in &mut model.fusion {
            xavier_fill(layer, &mut rng);
        }
        xavier_fill(&mut model.fuse_out, &mut rng);
        identity_init_context(&mut model.context);
        Ok(model)
    }

    /// All layers in a fixed order: encoder, sides, head, fusion, fuse_out, context.
    pub fn layers(&self) -> Vec<&ConvLayer> {
        let mut v: Vec<&ConvLayer> = self.encoder.iter().flatten().collect();
        v.extend(self.sides.iter());
        v.push(&self.head);
        v.extend(self.fusion.iter());
        v.push(&self.fuse_out);
        v.extend(self.context.iter());
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut ConvLayer> {
        let mut v: Vec<&mut ConvLayer> = self.encoder.iter_mut().flatten().collect();
        v.extend(self.sides.iter_mut());
        v.push(&mut self.head);
        v.extend(self.fusion.iter_mut());
        v.push(&mut self.fuse_out);
        v.extend(self.context.iter_mut());
        v
    }

    pub fn zero_grad(&mut self) {
        for layer in self.layers_mut() {
            layer.zero_grad();
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weight.value.len() + l.bias.value.len())
            .sum()
    }

    /// Multiplies every accumulated parameter gradient by `k`.
    pub fn scale_grads(&mut self, k: f64) {
        for layer in self.layers_mut() {
            layer.weight.grad.scale(k);
            layer.bias.grad.scale(k);
        }
    }

    /// Rounds every parameter to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for layer in self.layers_mut() {
            for v in layer.weight.value.data_mut().iter_mut().chain(layer.bias.value.data_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    fn check_input(image: &Tensor) -> Result<(usize, usize)> {
        let (c, h, w) = image.chw()?;
        if c != 3 {
            return Err(Error::Shape {
                op: "forward_frontend",
                dim: "image channels",
                expected: 3,
                got: c,
            });
        }
        if h % OUTPUT_STRIDE != 0 || w % OUTPUT_STRIDE != 0 {
            let up = |v: usize| v.div_ceil(OUTPUT_STRIDE) * OUTPUT_STRIDE;
            return Err(Error::Indivisible {
                height: h,
                width: w,
                factor: OUTPUT_STRIDE,
                padded_h: up(h),
                padded_w: up(w),
            });
        }
        Ok((h, w))
    }

    pub fn forward_frontend(&self, image: &Tensor) -> Result<FrontendOutput> {
        let (h, w) = Self::check_input(image)?;
        let mut x = image.clone();
        let mut block_caches = Vec::with_capacity(NUM_BLOCKS);
        let mut block_outs = Vec::with_capacity(NUM_BLOCKS);
        for block in &self.encoder {
            let (y, caches) = chain_forward(block, &x)?;
            block_caches.push(caches);
            block_outs.push(y.clone());
            x = y;
        }
        let mut sides = Vec::with_capacity(NUM_BLOCKS);
        let mut side_caches = Vec::with_capacity(NUM_BLOCKS);
        for (side, &tap) in self.sides.iter().zip(&self.side_taps) {
            let (low, cache) = side.forward(&block_outs[tap])?;
            sides.push(bilinear_upsample(&low, h, w)?);
            side_caches.push(cache);
        }
        let (head_low, head_cache) = self.head.forward(&x)?;
        let s_deep = bilinear_upsample(&head_low, h, w)?;
        let block_dims = block_outs.iter().map(|t| (t.height(), t.width())).collect();
        Ok(FrontendOutput {
            s_deep,
            sides,
            block_caches,
            side_caches,
            head_cache,
            block_dims,
        })
    }

    /// Head logits at encoder resolution, before upsampling.
    pub fn frontend_low_res(&self, image: &Tensor) -> Result<Tensor> {
        Self::check_input(image)?;
        let mut x = image.clone();
        for block in &self.encoder {
            x = chain_forward(block, &x)?.0;
        }
        Ok(self.head.forward(&x)?.0)
    }

    pub fn backward_frontend(
        &mut self,
        out: &FrontendOutput,
        grad_s_deep: &Tensor,
        grad_sides: &[Tensor],
    ) -> Result<()> {
        let (h4, w4) = out.block_dims[NUM_BLOCKS - 1];
        let g_head = bilinear_upsample_backward(grad_s_deep, h4, w4)?;
        let mut g_block = Some(self.head.backward(&out.head_cache, &g_head)?);
        for b in (0..NUM_BLOCKS).rev() {
            let (bh, bw) = out.block_dims[b];
            let mut g = match g_block.take() {
                Some(g) => g,
                None => Tensor::zeros(&[self.config.widths[b], bh, bw]),
            };
            for (s, &tap) in self.side_taps.iter().enumerate() {
                if tap == b {
                    let g_low = bilinear_upsample_backward(&grad_sides[s], bh, bw)?;
                    g.add_assign(&self.sides[s].backward(&out.side_caches[s], &g_low)?)?;
                }
            }
            let g_in = chain_backward(&mut self.encoder[b], &out.block_caches[b], &g)?;
            if b > 0 {
                g_block = Some(g_in);
            }
        }
        Ok(())
    }

    pub fn fuse(
        &self,
        image: &Tensor,
        s_deep: &Tensor,
        sides: &[Tensor],
        s_rbd: &Tensor,
    ) -> Result<FusionOutput> {
        if sides.len() != NUM_BLOCKS {
            return Err(Error::Shape {
                op: "fuse",
                dim: "side output count",
                expected: NUM_BLOCKS,
                got: sides.len(),
            });
        }
        let deep = split_channels(s_deep, &[1, 1, 1])?;
        let mut parts: Vec<&Tensor> = vec![image, &deep[2], s_rbd];
        parts.extend(sides.iter());
        let cat = concat_channels(&parts)?;
        debug_assert_eq!(cat.channels(), FUSION_INPUTS);
        let (s_ns, fusion_caches) = chain_forward(&self.fusion, &cat)?;
        let cat2 = concat_channels(&[&deep[0], &deep[1], &s_ns])?;
        let (logits, out_cache) = self.fuse_out.forward(&cat2)?;
        Ok(FusionOutput {
            logits,
            s_ns,
            fusion_caches,
            out_cache,
        })
    }

    pub fn backward_fuse(&mut self, out: &FusionOutput, grad_logits: &Tensor) -> Result<FusionGrads> {
        let g_cat2 = self.fuse_out.backward(&out.out_cache, grad_logits)?;
        let g2 = split_channels(&g_cat2, &[1, 1, 1])?;
        let g_cat = chain_backward(&mut self.fusion, &out.fusion_caches, &g2[2])?;
        let mut g = split_channels(&g_cat, &[3, 1, 1, 1, 1, 1, 1])?;
        let sides = g.split_off(3);
        let s_deep = concat_channels(&[&g2[0], &g2[1], &g[1]])?;
        Ok(FusionGrads {
            s_deep,
            sides,
            s_rbd: g[2].clone(),
        })
    }

    pub fn context_refine(&self, logits: &Tensor) -> Result<ContextOutput> {
        let (output, caches) = chain_forward(&self.context, logits)?;
        Ok(ContextOutput { output, caches })
    }

    /// Runs only the first `depth` context layers.
    pub fn context_prefix(&self, logits: &Tensor, depth: usize) -> Result<Tensor> {
        Ok(chain_forward(&self.context[..depth.min(self.context.len())], logits)?.0)
    }

    pub fn backward_context(&mut self, out: &ContextOutput, grad: &Tensor) -> Result<Tensor> {
        chain_backward(&mut self.context, &out.caches, grad)
    }
}
