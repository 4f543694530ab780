//! Edge-aware salient object detection at desk scale.
//!
//! * [`tensor`]: dense CHW tensors, dilated convolution with backward pass.
//! * [`rbd`]: the robust-background-detection handcrafted prior.
//! * [`labelgen`]: background / salient-edge / salient-object relabeling.
//! * [`net`]: the toy edge-aware FCN, balanced loss, and SGD training.
//! * [`metrics`]: MAE, PR curves and F-measure.
//! * [`synth`]: synthetic shape datasets.

pub mod color;
pub mod error;
pub mod labelgen;
pub mod metrics;
pub mod net;
pub mod rbd;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
