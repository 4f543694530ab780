use serde::{Deserialize, Serialize};

use super::model::Model;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    /// Exponent of the poly learning-rate decay.
    pub power: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Square training image extent.
    pub image_size: usize,
    /// Feed the RBD prior to the fusion net; `false` zeroes that channel.
    pub use_rbd: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-3,
            momentum: 0.9,
            power: 0.9,
            max_iter: 1000,
            seed: 0,
            image_size: 64,
            use_rbd: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0) {
            return Err(invalid(format!("base_lr must be > 0, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid(format!("momentum must be in [0, 1), got {}", self.momentum)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be >= 1"));
        }
        if !(self.power >= 0.0) {
            return Err(invalid("power must be >= 0"));
        }
        Ok(())
    }

    /// `base_lr · (1 - iter/max_iter)^power`.
    pub fn learning_rate(&self, iter: usize) -> f64 {
        let frac = 1.0 - iter as f64 / self.max_iter as f64;
        self.base_lr * frac.max(0.0).powf(self.power)
    }
}

/// Momentum SGD with poly decay: `v <- momentum·v - lr·g; w <- w + v`,
/// using the gradients accumulated in the model.
pub fn sgd_step(model: &mut Model, iter: usize, config: &TrainConfig) -> Result<f64> {
    if iter >= config.max_iter {
        return Err(invalid(format!(
            "sgd_step: iteration {iter} is past max_iter {}",
            config.max_iter
        )));
    }
    let lr = config.learning_rate(iter);
    for layer in model.layers_mut() {
        for p in [&mut layer.weight, &mut layer.bias] {
            let (value, grad, velocity) = (p.value.data_mut(), p.grad.data(), p.velocity.data_mut());
            for ((w, &g), v) in value.iter_mut().zip(grad).zip(velocity.iter_mut()) {
                *v = config.momentum * *v - lr * g;
                *w += *v;
            }
        }
    }
    Ok(lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ModelConfig;

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut m = Model::build(ModelConfig::default(), 3).unwrap();
        let before = m.clone();
        let cfg = TrainConfig::default();
        sgd_step(&mut m, 0, &cfg).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn poly_schedule_points() {
        let cfg = TrainConfig {
            max_iter: 1000,
            power: 0.9,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.learning_rate(0), 1e-3);
        let half = cfg.max_iter as f64 * (1.0 - 0.5f64.powf(1.0 / cfg.power));
        let frac = 1.0 - half / cfg.max_iter as f64;
        let lr = cfg.base_lr * frac.powf(cfg.power);
        assert!((lr - 5e-4).abs() < 1e-15);
        let linear = TrainConfig { power: 1.0, ..cfg };
        assert!((linear.learning_rate(500) - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn momentum_update_rule() {
        let mut m = Model::build(ModelConfig::default(), 3).unwrap();
        let cfg = TrainConfig::default();
        m.head.bias.grad.fill(2.0);
        let b0 = m.head.bias.value.data()[0];
        sgd_step(&mut m, 0, &cfg).unwrap();
        let v1 = -1e-3 * 2.0;
        assert_eq!(m.head.bias.value.data()[0], b0 + v1);
        sgd_step(&mut m, 1, &cfg).unwrap();
        let v2 = 0.9 * v1 - cfg.learning_rate(1) * 2.0;
        assert_eq!(m.head.bias.value.data()[0], b0 + v1 + v2);
        assert!(sgd_step(&mut m, cfg.max_iter, &cfg).is_err());
        assert!(TrainConfig { momentum: 1.0, ..cfg }.validate().is_err());
    }
}
