use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    LeakyRelu { slope: f64 },
}

impl HiddenActivation {
    pub fn leaky() -> Self {
        HiddenActivation::LeakyRelu { slope: LEAKY_SLOPE }
    }

    fn slope(self) -> f64 {
        match self {
            HiddenActivation::Relu => 0.0,
            HiddenActivation::LeakyRelu { slope } => slope,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    /// `sigmoid(z) - 0.5`, a value in `(-0.5, 0.5)`.
    ScaledSigmoid,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    pub hidden: HiddenActivation,
    pub output: OutputActivation,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default)]
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(widths: Vec<usize>, hidden: HiddenActivation, output: OutputActivation) -> Self {
        Self {
            widths,
            hidden,
            output,
            batch_norm: false,
            seed: 0,
        }
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.batch_norm = on;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 {
            return Err(param("an MLP needs an input, at least one hidden and an output layer"));
        }
        if self.widths.contains(&0) {
            return Err(param("layer widths must be positive"));
        }
        if let HiddenActivation::LeakyRelu { slope } = self.hidden {
            if !(0.0..1.0).contains(&slope) {
                return Err(param(format!("leak slope {slope} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Array2<f64>,
    /// Normalized pre-activation (batch norm only).
    normalized: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    /// Pre-activation after the optional affine normalization.
    pre: Array2<f64>,
}

/// Per-layer batch mean and variance, present for batch-norm layers.
type BatchStats = (Array1<f64>, Array1<f64>);

#[derive(Clone, Debug)]
struct Cache {
    layers: Vec<LayerCache>,
    output: Array2<f64>,
    mode: Mode,
}

/// Dense feedforward network; weights are stored `(fan_in, fan_out)`.
#[derive(Clone, Debug)]
pub struct Mlp {
    config: MlpConfig,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    pub(crate) norms: Vec<Option<BatchNorm>>,
    cache: Option<Cache>,
}

/// Gradients in the same layout as the network, plus the input gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub gammas: Vec<Option<Array1<f64>>>,
    pub betas: Vec<Option<Array1<f64>>>,
    pub input: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in config.widths.windows(2) {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            weights.push(Array2::from_shape_fn((pair[0], pair[1]), |_| rng.gen_range(-bound..=bound)));
            biases.push(Array1::from_shape_fn(pair[1], |_| rng.gen_range(-bound..=bound)));
        }
        let norms = Self::fresh_norms(&config);
        Ok(Self {
            config,
            weights,
            biases,
            norms,
            cache: None,
        })
    }

    /// Every weight and bias zero (batch-norm scale stays 1).
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let weights = config.widths.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let biases = config.widths[1..].iter().map(|&w| Array1::zeros(w)).collect();
        let norms = Self::fresh_norms(&config);
        Ok(Self {
            config,
            weights,
            biases,
            norms,
            cache: None,
        })
    }

    fn fresh_norms(config: &MlpConfig) -> Vec<Option<BatchNorm>> {
        let hidden = &config.widths[1..config.widths.len() - 1];
        let mut norms: Vec<Option<BatchNorm>> = hidden
            .iter()
            .map(|&w| config.batch_norm.then(|| BatchNorm::new(w)))
            .collect();
        norms.push(None);
        norms
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn norms(&self) -> &[Option<BatchNorm>] {
        &self.norms
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, v)| v.len()).sum()
    }

    fn check_input(&self, batch: &Array2<f64>) -> Result<()> {
        if batch.ncols() != self.config.input_width() {
            return Err(param(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.config.input_width()
            )));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value in network input".into()));
        }
        Ok(())
    }

    /// Forward pass; also returns the batch moments of every normalized layer.
    fn run(&self, batch: &Array2<f64>, mode: Mode) -> Result<(Cache, Vec<Option<BatchStats>>)> {
        self.check_input(batch)?;
        let last = self.weights.len() - 1;
        let slope = self.config.hidden.slope();
        let mut layers = Vec::with_capacity(self.weights.len());
        let mut moments = Vec::with_capacity(self.weights.len());
        let mut a = batch.to_owned();
        for l in 0..=last {
            let z = a.dot(&self.weights[l]) + &self.biases[l];
            let mut batch_moments = None;
            let (pre, normalized, inv_std) = match &self.norms[l] {
                Some(bn) => {
                    let (mean, var) = match mode {
                        Mode::Train => {
                            let mean = z.mean_axis(Axis(0)).unwrap();
                            let var = z.var_axis(Axis(0), 0.0);
                            batch_moments = Some((mean.clone(), var.clone()));
                            (mean, var)
                        }
                        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                    let zn = (&z - &mean) * &inv_std;
                    let y = &zn * &bn.gamma + &bn.beta;
                    (y, Some(zn), Some(inv_std))
                }
                None => (z, None, None),
            };
            let out = if l == last {
                match self.config.output {
                    OutputActivation::Sigmoid => pre.mapv(sigmoid),
                    OutputActivation::ScaledSigmoid => {
                        // saturated sigmoids round to exactly 1; keep the open interval
                        let b = 0.5f64.next_down();
                        pre.mapv(|v| (sigmoid(v) - 0.5).clamp(-b, b))
                    }
                    OutputActivation::Identity => pre.clone(),
                }
            } else {
                pre.mapv(|v| if v > 0.0 { v } else { slope * v })
            };
            moments.push(batch_moments);
            layers.push(LayerCache {
                input: a,
                normalized,
                inv_std,
                pre,
            });
            a = out;
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("network produced a non-finite output".into()));
        }
        let cache = Cache {
            layers,
            output: a,
            mode,
        };
        Ok((cache, moments))
    }

    /// Forward pass that records the activations for [`Mlp::backward`].
    /// Train mode normalizes with batch statistics and updates running moments.
    pub fn forward(&mut self, batch: &Array2<f64>, mode: Mode) -> Result<Array2<f64>> {
        let (cache, moments) = self.run(batch, mode)?;
        for (bn, m) in self.norms.iter_mut().zip(moments) {
            if let (Some(bn), Some((mean, var))) = (bn, m) {
                bn.running_mean = &bn.running_mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM);
                bn.running_var = &bn.running_var * BN_MOMENTUM + &var * (1.0 - BN_MOMENTUM);
            }
        }
        let out = cache.output.clone();
        self.cache = Some(cache);
        Ok(out)
    }

    /// Train-mode forward that leaves running moments untouched.
    pub fn forward_frozen_stats(&mut self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        let (cache, _) = self.run(batch, Mode::Train)?;
        let out = cache.output.clone();
        self.cache = Some(cache);
        Ok(out)
    }

    /// Eval-mode forward without touching the cache.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.run(batch, Mode::Eval)?.0.output)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Gradients of `sum(loss_grad * output)` with respect to every parameter
    /// and to the input of the most recent [`Mlp::forward`].
    pub fn backward(&self, loss_grad: &Array2<f64>) -> Result<Gradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached forward pass".into()))?;
        if loss_grad.dim() != cache.output.dim() {
            return Err(param(format!(
                "loss gradient shape {:?} does not match output {:?}",
                loss_grad.dim(),
                cache.output.dim()
            )));
        }
        let last = self.weights.len() - 1;
        let slope = self.config.hidden.slope();
        let n = loss_grad.nrows() as f64;
        let mut gw = vec![Array2::zeros((0, 0)); last + 1];
        let mut gb = vec![Array1::zeros(0); last + 1];
        let mut gg = vec![None; last + 1];
        let mut gbeta = vec![None; last + 1];

        let mut upstream = loss_grad.to_owned();
        for l in (0..=last).rev() {
            let lc = &cache.layers[l];
            let mut d = if l == last {
                match self.config.output {
                    OutputActivation::Sigmoid | OutputActivation::ScaledSigmoid => {
                        let s = lc.pre.mapv(sigmoid);
                        upstream * &s.mapv(|v| v * (1.0 - v))
                    }
                    OutputActivation::Identity => upstream,
                }
            } else {
                upstream * &lc.pre.mapv(|v| if v > 0.0 { 1.0 } else { slope })
            };
            if let (Some(bn), Some(zn), Some(inv_std)) = (&self.norms[l], &lc.normalized, &lc.inv_std) {
                gg[l] = Some((&d * zn).sum_axis(Axis(0)));
                gbeta[l] = Some(d.sum_axis(Axis(0)));
                let dzn = &d * &bn.gamma;
                d = match cache.mode {
                    Mode::Train => {
                        let sum_dzn = dzn.sum_axis(Axis(0));
                        let sum_dzn_zn = (&dzn * zn).sum_axis(Axis(0));
                        let centered = &dzn * n - &sum_dzn - &(zn * &sum_dzn_zn);
                        centered * &(inv_std / n)
                    }
                    Mode::Eval => dzn * inv_std,
                };
            }
            gw[l] = lc.input.t().dot(&d).as_standard_layout().into_owned();
            gb[l] = d.sum_axis(Axis(0));
            upstream = d.dot(&self.weights[l].t());
        }
        Ok(Gradients {
            weights: gw,
            biases: gb,
            gammas: gg,
            betas: gbeta,
            input: upstream,
        })
    }

    /// Named flat views of every trainable parameter, in a fixed order.
    pub fn parameters(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.push((format!("layer{l}.weight"), self.weights[l].as_slice().unwrap()));
            out.push((format!("layer{l}.bias"), self.biases[l].as_slice().unwrap()));
            if let Some(bn) = &self.norms[l] {
                out.push((format!("layer{l}.bn_gamma"), bn.gamma.as_slice().unwrap()));
                out.push((format!("layer{l}.bn_beta"), bn.beta.as_slice().unwrap()));
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        let layers = self.weights.iter_mut().zip(self.biases.iter_mut()).zip(self.norms.iter_mut());
        for (l, ((w, b), bn)) in layers.enumerate() {
            out.push((format!("layer{l}.weight"), w.as_slice_mut().unwrap()));
            out.push((format!("layer{l}.bias"), b.as_slice_mut().unwrap()));
            if let Some(bn) = bn {
                out.push((format!("layer{l}.bn_gamma"), bn.gamma.as_slice_mut().unwrap()));
                out.push((format!("layer{l}.bn_beta"), bn.beta.as_slice_mut().unwrap()));
            }
        }
        out
    }
}

impl Gradients {
    /// Flat views in the same order as [`Mlp::parameters`].
    pub fn slices(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for l in 0..self.weights.len() {
            out.push((format!("layer{l}.weight"), self.weights[l].as_slice().unwrap()));
            out.push((format!("layer{l}.bias"), self.biases[l].as_slice().unwrap()));
            if let (Some(g), Some(b)) = (&self.gammas[l], &self.betas[l]) {
                out.push((format!("layer{l}.bn_gamma"), g.as_slice().unwrap()));
                out.push((format!("layer{l}.bn_beta"), b.as_slice().unwrap()));
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.slices().iter().all(|(_, s)| s.iter().all(|v| *v == 0.0)) && self.input.iter().all(|v| *v == 0.0)
    }
}
