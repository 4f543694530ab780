use crate::error::Result;
use crate::tensor::{conv2d_backward, conv2d_forward, relu, relu_backward, ConvSpec, Tensor};

/// A learnable tensor with its gradient and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub velocity: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        Self {
            value,
            grad,
            velocity,
        }
    }
}

/// Convolution, optionally followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub name: String,
    pub spec: ConvSpec,
    pub weight: Param,
    pub bias: Param,
    pub relu: bool,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Tensor,
    /// Pre-activation output (equal to the output when there is no ReLU).
    pub pre: Tensor,
}

impl ConvLayer {
    pub fn new(name: impl Into<String>, spec: ConvSpec, relu: bool) -> Self {
        Self {
            name: name.into(),
            spec,
            weight: Param::new(Tensor::zeros(&spec.weight_shape())),
            bias: Param::new(Tensor::zeros(&[spec.out_channels])),
            relu,
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, LayerCache)> {
        let pre = conv2d_forward(input, &self.weight.value, &self.bias.value, &self.spec)?;
        let out = if self.relu { relu(&pre) } else { pre.clone() };
        Ok((
            out,
            LayerCache {
                input: input.clone(),
                pre,
            },
        ))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &LayerCache, grad_out: &Tensor) -> Result<Tensor> {
        let g = if self.relu {
            relu_backward(&cache.pre, grad_out)?
        } else {
            grad_out.clone()
        };
        let grads = conv2d_backward(&cache.input, &self.weight.value, &self.spec, &g)?;
        self.weight.grad.add_assign(&grads.weights)?;
        self.bias.grad.add_assign(&grads.bias)?;
        Ok(grads.input)
    }

    pub fn zero_grad(&mut self) {
        self.weight.grad.fill(0.0);
        self.bias.grad.fill(0.0);
    }
}

pub fn chain_forward(layers: &[ConvLayer], input: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
    let mut x = input.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for layer in layers {
        let (y, cache) = layer.forward(&x)?;
        caches.push(cache);
        x = y;
    }
    Ok((x, caches))
}

pub fn chain_backward(layers: &mut [ConvLayer], caches: &[LayerCache], grad_out: &Tensor) -> Result<Tensor> {
    let mut g = grad_out.clone();
    for (layer, cache) in layers.iter_mut().zip(caches).rev() {
        g = layer.backward(cache, &g)?;
    }
    Ok(g)
}
