use crate::error::{Error, Result};
use crate::labelgen::TriLabelMap;
use crate::tensor::Tensor;

/// Class-balanced three-class softmax loss, summed over pixels:
///
/// `-beta_b Σ_{Y_b} log P(0) - beta_e Σ_{Y_e} log P(1) - beta_s Σ_{Y_s} log P(2)`
///
/// Returns the loss and its gradient with respect to the logits,
/// `beta_y · (P - onehot(y))` at each pixel.
pub fn balanced_loss(logits: &Tensor, labels: &TriLabelMap) -> Result<(f64, Tensor)> {
    let (c, h, w) = logits.chw()?;
    for (dim, expected, got) in [
        ("channels", 3, c),
        ("height", labels.height(), h),
        ("width", labels.width(), w),
    ] {
        if expected != got {
            return Err(Error::Shape {
                op: "balanced_loss",
                dim,
                expected,
                got,
            });
        }
    }
    let beta = labels.class_weights();
    let plane = h * w;
    let z = logits.data();
    let mut grad = Tensor::zeros(&[3, h, w]);
    let g = grad.data_mut();
    let mut loss = 0.0;
    for (j, &y) in labels.labels().iter().enumerate() {
        let y = y as usize;
        let m = z[j].max(z[plane + j]).max(z[2 * plane + j]);
        let e = [
            (z[j] - m).exp(),
            (z[plane + j] - m).exp(),
            (z[2 * plane + j] - m).exp(),
        ];
        let sum = e[0] + e[1] + e[2];
        let log_p = z[y * plane + j] - m - sum.ln();
        loss -= beta[y] * log_p;
        for k in 0..3 {
            let p = e[k] / sum;
            let target = if k == y { 1.0 } else { 0.0 };
            g[k * plane + j] = beta[y] * (p - target);
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_closed_form() {
        let mut labels = vec![0u8; 50];
        labels.extend(vec![1u8; 10]);
        labels.extend(vec![2u8; 40]);
        let t = TriLabelMap::new(10, 10, labels).unwrap();
        let (loss, _) = balanced_loss(&Tensor::filled(&[3, 10, 10], 0.3), &t).unwrap();
        let expected = (0.5 * 50.0 + 0.9 * 10.0 + 0.6 * 40.0) * 3f64.ln();
        assert!((loss - expected).abs() < 1e-9);
    }

    #[test]
    fn single_class_image_is_finite() {
        let t = TriLabelMap::new(4, 4, vec![0; 16]).unwrap();
        assert_eq!(t.class_weights(), [0.0, 1.0, 1.0]);
        let (loss, grad) = balanced_loss(&Tensor::filled(&[3, 4, 4], 1.0), &t).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.is_finite());
    }

    #[test]
    fn confident_correct_logits_near_zero() {
        let t = TriLabelMap::new(1, 3, vec![0, 1, 2]).unwrap();
        let mut z = Tensor::filled(&[3, 1, 3], -30.0);
        for k in 0..3 {
            z.set(k, 0, k, 30.0);
        }
        let (loss, _) = balanced_loss(&z, &t).unwrap();
        assert!(loss >= 0.0 && loss < 1e-20);
    }
}
