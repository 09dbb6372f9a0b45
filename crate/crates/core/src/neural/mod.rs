//! Small dense networks with hand-written backprop.

pub mod checkpoint;
pub mod gradcheck;
pub mod mlp;
pub mod optim;

use ndarray::Array2;

pub use checkpoint::{checkpoint_from_str, checkpoint_to_string, load_checkpoint, save_checkpoint};
pub use gradcheck::finite_difference_check;
pub use mlp::{BatchNorm, Gradients, HiddenActivation, Mlp, MlpConfig, Mode, OutputActivation};
pub use optim::{Adam, AdamConfig};

/// Summed binary cross-entropy of `pred` against `target` (natural log), and
/// its gradient with respect to `pred`. Predictions are clamped to
/// `[clamp, 1 - clamp]` before the logs.
pub fn binary_cross_entropy(pred: &Array2<f64>, target: &Array2<f64>, clamp: f64) -> (f64, Array2<f64>) {
    let mut loss = 0.0;
    let grad = ndarray::Zip::from(pred).and(target).map_collect(|&p, &t| {
        let p = p.clamp(clamp, 1.0 - clamp);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        (p - t) / (p * (1.0 - p))
    });
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bce_matches_hand_values() {
        let (l, g) = binary_cross_entropy(&array![[0.9, 0.2]], &array![[1.0, 0.0]], 1e-12);
        assert!((l - (-(0.9f64).ln() - (0.8f64).ln())).abs() < 1e-15);
        assert!((g[[0, 0]] + 1.0 / 0.9).abs() < 1e-12);
        assert!((g[[0, 1]] - 1.0 / 0.8).abs() < 1e-12);
    }
}
