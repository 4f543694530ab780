//! Toy edge-aware FCN: front-end encoder with side outputs, deep-handcrafted
//! fusion, identity-initialized dilated context module, class-balanced
//! loss and momentum SGD.

pub mod checkpoint;
mod layer;
mod loss;
mod model;
mod optim;
mod train;

pub use layer::{ConvLayer, LayerCache, Param};
pub use loss::balanced_loss;
pub use model::{
    identity_init_context, ContextOutput, FrontendOutput, FusionGrads, FusionOutput, Model, ModelConfig,
    CONTEXT_DILATIONS, FUSION_INPUTS, NUM_BLOCKS, NUM_CLASSES, OUTPUT_STRIDE,
};
pub use optim::{sgd_step, TrainConfig};
pub use train::{
    accumulate_gradients, evaluate_loss, final_logits, infer, infer_with_rbd, train, Inference, Sample,
    StepLoss, TraceRow, TrainOutcome,
};
