use ndarray::Array2;

use super::mlp::{Mlp, Mode};
use crate::error::{param, Result};

/// Loss evaluated on the network output; returns `(loss, dloss/doutput)`.
pub type LossFn<'a> = dyn Fn(&Array2<f64>) -> (f64, Array2<f64>) + 'a;

/// Largest relative error between backprop and central differences over all
/// parameters (and inputs) whose analytic gradient is above the resolution
/// of the difference quotient. Rounding in the loss is about
/// `eps * |loss| / epsilon_fd`. Components within 1e4 times that are skipped.
/// They cannot be compared to 1e-4 relative accuracy, e.g. a weight that
/// batch norm makes scale invariant has a true gradient of exactly zero.
pub fn finite_difference_check(
    net: &Mlp,
    batch: &Array2<f64>,
    loss: &LossFn<'_>,
    epsilon_fd: f64,
    mode: Mode,
) -> Result<f64> {
    if !(epsilon_fd > 0.0) {
        return Err(param("finite-difference step must be positive"));
    }
    let mut probe = net.clone();
    let out = probe.forward_frozen_stats_or_eval(batch, mode)?;
    let (value, upstream) = loss(&out);
    let grads = probe.backward(&upstream)?;
    let floor = (1e4 * f64::EPSILON * value.abs().max(1.0) / epsilon_fd).max(1e-8);

    let eval = |n: &Mlp, x: &Array2<f64>| -> Result<f64> {
        let mut n = n.clone();
        let out = n.forward_frozen_stats_or_eval(x, mode)?;
        Ok(loss(&out).0)
    };

    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, numeric: f64| {
        if analytic.abs() > floor {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            worst = worst.max(rel);
        }
    };

    let analytic: Vec<Vec<f64>> = grads.slices().into_iter().map(|(_, g)| g.to_vec()).collect();
    for (i, g) in analytic.iter().enumerate() {
        for (j, &a) in g.iter().enumerate() {
            let mut plus = net.clone();
            plus.parameters_mut()[i].1[j] += epsilon_fd;
            let mut minus = net.clone();
            minus.parameters_mut()[i].1[j] -= epsilon_fd;
            let numeric = (eval(&plus, batch)? - eval(&minus, batch)?) / (2.0 * epsilon_fd);
            record(a, numeric);
        }
    }
    for ((r, c), &a) in grads.input.indexed_iter() {
        let mut plus = batch.clone();
        plus[[r, c]] += epsilon_fd;
        let mut minus = batch.clone();
        minus[[r, c]] -= epsilon_fd;
        let numeric = (eval(net, &plus)? - eval(net, &minus)?) / (2.0 * epsilon_fd);
        record(a, numeric);
    }
    Ok(worst)
}

impl Mlp {
    fn forward_frozen_stats_or_eval(&mut self, batch: &Array2<f64>, mode: Mode) -> Result<Array2<f64>> {
        match mode {
            Mode::Train => self.forward_frozen_stats(batch),
            Mode::Eval => self.forward(batch, Mode::Eval),
        }
    }
}
