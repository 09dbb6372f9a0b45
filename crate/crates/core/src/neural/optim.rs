use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use crate::error::{param, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Multiplier applied to the learning rate once per epoch.
    pub decay_rate: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
            decay_rate: 0.988,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    epochs: i32,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, net: &Mlp) -> Result<Self> {
        let c = &config;
        if !(c.learning_rate > 0.0) || !(0.0..1.0).contains(&c.beta1) || !(0.0..1.0).contains(&c.beta2) {
            return Err(param("Adam needs lr > 0 and betas in [0, 1)"));
        }
        if !(c.eps > 0.0) || c.weight_decay < 0.0 || !(c.decay_rate > 0.0 && c.decay_rate <= 1.0) {
            return Err(param("Adam needs eps > 0, weight decay >= 0 and decay rate in (0, 1]"));
        }
        let shapes: Vec<usize> = net.parameters().iter().map(|(_, p)| p.len()).collect();
        Ok(Self {
            config,
            epochs: 0,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    /// `lr0 * decay^epochs`, computed in closed form so it never drifts.
    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate * self.config.decay_rate.powf(f64::from(self.epochs))
    }

    pub fn epochs(&self) -> i32 {
        self.epochs
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected update. Fails before touching anything if a
    /// gradient is non-finite.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let slices = grads.slices();
        if slices.len() != self.first.len() {
            return Err(param("gradient layout does not match the optimizer state"));
        }
        for (path, g) in &slices {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient at {path}[{i}]")));
            }
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let lr = self.learning_rate();
        for (i, ((_, p), (_, g))) in net.parameters_mut().into_iter().zip(slices).enumerate() {
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for j in 0..p.len() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= lr * (mhat / (vhat.sqrt() + c.eps) + c.weight_decay * p[j]);
            }
        }
        Ok(())
    }

    /// End-of-epoch exponential decay.
    pub fn decay_learning_rate(&mut self) {
        self.epochs += 1;
    }
}
