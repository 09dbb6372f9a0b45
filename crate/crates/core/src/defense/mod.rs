//! Defender objectives, frozen releases, and the DP baseline calibration.

mod game;
mod lrt;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MembershipVector, PopulationDataset};
use crate::error::{param, Error, Result};
use crate::mechanisms::{
    clip_unit, member_frequencies, sample_laplace, sensitivity_frequency, DpParams, NoiseVector, SummaryStats,
};
use crate::neural::{AdamConfig, HiddenActivation, Mlp, MlpConfig, OutputActivation};

pub use game::{evaluate_game, train_bngp, GameMetrics, GameResult, GameTrace};
pub use lrt::{lrt_threshold_for_fpr, train_lrt_best_response_defender, LrtDefenseResult};

/// Per-attribute utility weights: one `kappa` for every attribute or one per attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Kappa {
    pub fn validate(&self, attributes: usize) -> Result<()> {
        match self {
            Kappa::Scalar(k) if !(*k >= 0.0 && k.is_finite()) => Err(param(format!("kappa {k} must be finite and >= 0"))),
            Kappa::Vector(v) if v.len() != attributes => Err(param(format!(
                "kappa vector has {} entries for {attributes} attributes",
                v.len()
            ))),
            Kappa::Vector(v) if v.iter().any(|k| !(*k >= 0.0 && k.is_finite())) => {
                Err(param("every kappa_j must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// `kappa_j = 0` on the first `round(zero_fraction * m)` attributes and
    /// `weight` on the rest.
    pub fn mostly_free(attributes: usize, zero_fraction: f64, weight: f64) -> Self {
        let zeros = (zero_fraction * attributes as f64).round() as usize;
        Kappa::Vector((0..attributes).map(|j| if j < zeros { 0.0 } else { weight }).collect())
    }

    pub fn weights(&self, attributes: usize) -> Vec<f64> {
        match self {
            Kappa::Scalar(k) => vec![*k; attributes],
            Kappa::Vector(v) => v.clone(),
        }
    }
}

/// Monotone map applied to the normalized distortion in scalar mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum UtilityShape {
    Identity,
    Power { exponent: f64 },
}

impl UtilityShape {
    fn eval(self, u: f64) -> (f64, f64) {
        match self {
            UtilityShape::Identity => (u, 1.0),
            UtilityShape::Power { exponent } => {
                let d = if u > 0.0 { exponent * u.powf(exponent - 1.0) } else { 0.0 };
                (u.powf(exponent), d)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySpec {
    pub kappa: Kappa,
    #[serde(default = "one")]
    pub norm_order: f64,
    #[serde(default = "identity_shape")]
    pub shape: UtilityShape,
}

fn one() -> f64 {
    1.0
}

fn identity_shape() -> UtilityShape {
    UtilityShape::Identity
}

impl UtilitySpec {
    pub fn new(kappa: Kappa) -> Self {
        Self {
            kappa,
            norm_order: 1.0,
            shape: UtilityShape::Identity,
        }
    }

    pub fn validate(&self, attributes: usize) -> Result<()> {
        self.kappa.validate(attributes)?;
        if !(self.norm_order >= 1.0) {
            return Err(param(format!("norm order {} must be >= 1", self.norm_order)));
        }
        if let UtilityShape::Power { exponent } = self.shape {
            if !(exponent > 0.0) {
                return Err(param("utility power must be positive"));
            }
        }
        Ok(())
    }

    /// Loss and its gradient with respect to `x`.
    ///
    /// Scalar kappa: `kappa * shape(||x - xhat||_p / m)`.
    /// Vector kappa: `sum_j kappa_j |x_j - xhat_j| / m` (norm order and shape unused).
    pub fn loss_and_gradient(&self, x: &[f64], xhat: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != xhat.len() {
            return Err(param("release and statistics differ in length"));
        }
        let m = x.len() as f64;
        let delta: Vec<f64> = x.iter().zip(xhat).map(|(a, b)| a - b).collect();
        let sign = |d: f64| if d > 0.0 { 1.0 } else if d < 0.0 { -1.0 } else { 0.0 };
        match &self.kappa {
            Kappa::Vector(w) => {
                if w.len() != x.len() {
                    return Err(param("kappa vector length does not match the release"));
                }
                let loss = w.iter().zip(&delta).map(|(k, d)| k * d.abs()).sum::<f64>() / m;
                let grad = w.iter().zip(&delta).map(|(k, d)| k * sign(*d) / m).collect();
                Ok((loss, grad))
            }
            Kappa::Scalar(k) => {
                let p = self.norm_order;
                let norm = delta.iter().map(|d| d.abs().powf(p)).sum::<f64>().powf(1.0 / p);
                let (value, slope) = self.shape.eval(norm / m);
                let grad = delta
                    .iter()
                    .map(|&d| {
                        if norm == 0.0 {
                            0.0
                        } else {
                            k * slope / m * sign(d) * (d.abs() / norm).powf(p - 1.0)
                        }
                    })
                    .collect();
                Ok((k * value, grad))
            }
        }
    }

    pub fn loss(&self, x: &[f64], xhat: &[f64]) -> Result<f64> {
        Ok(self.loss_and_gradient(x, xhat)?.0)
    }
}

/// `utility_loss` with the identity shape.
pub fn utility_loss(x: &SummaryStats, xhat: &SummaryStats, kappa: &Kappa, norm_order: f64) -> Result<f64> {
    let spec = UtilitySpec {
        kappa: kappa.clone(),
        norm_order,
        shape: UtilityShape::Identity,
    };
    spec.validate(x.len())?;
    spec.loss(x.values(), xhat.values())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Objective {
    /// `privacy + utility`.
    Preference,
    /// Minimize utility loss subject to `privacy <= budget`.
    PrivacyBudget { budget: f64 },
    /// Minimize privacy loss subject to `utility <= budget`.
    UtilityBudget { budget: f64 },
}

/// Defender loss with budget violations priced by a hinge penalty; also
/// returns the partial derivatives with respect to the privacy and utility
/// terms.
pub fn defender_loss_with_weights(objective: Objective, privacy: f64, utility: f64, penalty: f64) -> (f64, f64, f64) {
    match objective {
        Objective::Preference => (privacy + utility, 1.0, 1.0),
        Objective::PrivacyBudget { budget } => {
            let v = privacy - budget;
            if v > 0.0 {
                (utility + penalty * v, penalty, 1.0)
            } else {
                (utility, 0.0, 1.0)
            }
        }
        Objective::UtilityBudget { budget } => {
            let v = utility - budget;
            if v > 0.0 {
                (privacy + penalty * v, 1.0, penalty)
            } else {
                (privacy, 1.0, 0.0)
            }
        }
    }
}

pub fn defender_loss(objective: Objective, privacy: f64, utility: f64, penalty: f64) -> Result<f64> {
    if !matches!(objective, Objective::Preference) && !(penalty > 0.0) {
        return Err(param("budget modes need a positive penalty"));
    }
    Ok(defender_loss_with_weights(objective, privacy, utility, penalty).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSchedule {
    pub rounds: usize,
    /// Discriminator updates per generator update.
    pub attacker_steps: usize,
    pub batch_size: usize,
    /// Both learning rates decay once every this many rounds.
    pub rounds_per_epoch: usize,
    /// Stop once the smoothed defender loss has not improved by
    /// `min_improvement` for this many rounds.
    pub patience: Option<usize>,
    pub min_improvement: f64,
}

impl Default for GameSchedule {
    fn default() -> Self {
        Self {
            rounds: 1000,
            attacker_steps: 5,
            batch_size: 128,
            rounds_per_epoch: 50,
            patience: None,
            min_improvement: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenderConfig {
    pub objective: Objective,
    pub utility: UtilitySpec,
    /// Input width must be `K + aux_dim`, output width `m`.
    pub generator: MlpConfig,
    pub aux_dim: usize,
    #[serde(default)]
    pub schedule: GameSchedule,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
}

fn default_penalty() -> f64 {
    100.0
}

impl DefenderConfig {
    /// Two hidden ReLU layers with batch norm and a scaled-sigmoid output.
    pub fn two_hidden(population: usize, attributes: usize, aux_dim: usize, widths: (usize, usize), kappa: Kappa, seed: u64) -> Self {
        let generator = MlpConfig::new(
            vec![population + aux_dim, widths.0, widths.1, attributes],
            HiddenActivation::Relu,
            OutputActivation::ScaledSigmoid,
        )
        .with_batch_norm(true)
        .with_seed(seed);
        Self {
            objective: Objective::Preference,
            utility: UtilitySpec::new(kappa),
            generator,
            aux_dim,
            schedule: GameSchedule::default(),
            optimizer: AdamConfig::default(),
            penalty: default_penalty(),
        }
    }

    pub fn validate(&self, population: usize, attributes: usize) -> Result<()> {
        self.generator.validate()?;
        self.utility.validate(attributes)?;
        if self.generator.output != OutputActivation::ScaledSigmoid {
            return Err(param("the generator needs a scaled-sigmoid output"));
        }
        if self.generator.input_width() != population + self.aux_dim || self.generator.output_width() != attributes {
            return Err(param(format!(
                "generator is {} -> {}, game needs {} -> {attributes}",
                self.generator.input_width(),
                self.generator.output_width(),
                population + self.aux_dim
            )));
        }
        let s = &self.schedule;
        if s.attacker_steps == 0 || s.batch_size == 0 || s.rounds_per_epoch == 0 {
            return Err(param("attacker steps, batch size and rounds per epoch must be positive"));
        }
        if !matches!(self.objective, Objective::Preference) && !(self.penalty > 0.0) {
            return Err(param("budget modes need a positive penalty"));
        }
        Ok(())
    }
}

/// Rows `[b, r]` of generator inputs.
pub(crate) fn generator_batch<R: Rng + ?Sized>(bs: &[MembershipVector], aux_dim: usize, rng: &mut R) -> Array2<f64> {
    let k = bs.first().map_or(0, MembershipVector::len);
    let mut out = Array2::zeros((bs.len(), k + aux_dim));
    for (i, b) in bs.iter().enumerate() {
        for (j, &bit) in b.bits().iter().enumerate() {
            out[[i, j]] = f64::from(bit);
        }
        for j in 0..aux_dim {
            out[[i, k + j]] = rng.gen::<f64>();
        }
    }
    out
}

/// Eval-mode generator noise for one membership and auxiliary draw `r`.
pub fn generator_forward(generator: &Mlp, b: &MembershipVector, r: &[f64]) -> Result<NoiseVector> {
    let width = generator.config().input_width();
    if b.len() + r.len() != width {
        return Err(param(format!("generator expects {width} inputs, got {}", b.len() + r.len())));
    }
    let mut row = b.as_f64();
    row.extend_from_slice(r);
    let out = generator.predict(&Array2::from_shape_vec((1, width), row).map_err(|e| param(e.to_string()))?)?;
    NoiseVector::bounded(out.row(0).to_vec(), 0.5)
}

/// DP parameters whose Laplace scale equals `target_mean_abs_noise`, with
/// the frequency-vector sensitivity `m / k_dagger`.
pub fn calibrate_dp_epsilon(target_mean_abs_noise: f64, attributes: usize, k_dagger: usize) -> Result<DpParams> {
    if !(target_mean_abs_noise > 0.0 && target_mean_abs_noise.is_finite()) {
        return Err(param("target noise must be positive and finite"));
    }
    let sensitivity = sensitivity_frequency(attributes, k_dagger)?;
    DpParams::new(sensitivity / target_mean_abs_noise, 0.0, sensitivity)
}

/// One draw from a frozen defense.
#[derive(Clone, Debug, PartialEq)]
pub struct ReleaseDraw {
    pub x: SummaryStats,
    pub xhat: SummaryStats,
    /// Noise before clipping.
    pub noise: Vec<f64>,
}

/// A defender strategy held fixed while attackers are trained and scored.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Defense {
    None,
    Generator { net: Mlp, aux_dim: usize },
    Laplace(DpParams),
}

impl Defense {
    pub fn name(&self) -> &'static str {
        match self {
            Defense::None => "none",
            Defense::Generator { .. } => "generator",
            Defense::Laplace(_) => "laplace",
        }
    }

    /// Releases for a batch of memberships; empty memberships are a domain error.
    pub fn release_batch<R: Rng + ?Sized>(
        &self,
        dataset: &PopulationDataset,
        bs: &[MembershipVector],
        rng: &mut R,
    ) -> Result<Vec<ReleaseDraw>> {
        let xhats = bs
            .iter()
            .map(|b| member_frequencies(dataset, b))
            .collect::<Result<Vec<_>>>()?;
        let m = dataset.attribute_count();
        let noise: Vec<Vec<f64>> = match self {
            Defense::None => vec![vec![0.0; m]; bs.len()],
            Defense::Laplace(p) => {
                let scale = p.laplace_scale()?;
                (0..bs.len()).map(|_| (0..m).map(|_| sample_laplace(scale, rng)).collect()).collect()
            }
            Defense::Generator { net, aux_dim } => {
                if bs.is_empty() {
                    return Ok(Vec::new());
                }
                let out = net.predict(&generator_batch(bs, *aux_dim, rng))?;
                if out.ncols() != m {
                    return Err(param("generator output width does not match the dataset"));
                }
                out.rows().into_iter().map(|r| r.to_vec()).collect()
            }
        };
        xhats
            .into_iter()
            .zip(noise)
            .map(|(xhat, noise)| {
                let pre: Vec<f64> = xhat.iter().zip(&noise).map(|(a, b)| a + b).collect();
                Ok(ReleaseDraw {
                    x: clip_unit(&pre),
                    xhat: SummaryStats::new(xhat)?,
                    noise,
                })
            })
            .collect()
    }

    pub fn release<R: Rng + ?Sized>(&self, dataset: &PopulationDataset, b: &MembershipVector, rng: &mut R) -> Result<ReleaseDraw> {
        self.release_batch(dataset, std::slice::from_ref(b), rng)?
            .pop()
            .ok_or_else(|| Error::State("empty release batch".into()))
    }
}

/// `sum_j kappa_j |delta_j| / sum_j kappa_j` averaged over draws: the noise
/// level a homogeneous mechanism needs for the same weighted utility loss.
/// With every weight zero this is the plain mean `|delta|`.
pub fn weighted_mean_abs_noise(draws: &[ReleaseDraw], kappa: &Kappa) -> f64 {
    if draws.is_empty() {
        return 0.0;
    }
    let m = draws[0].x.len();
    let mut w = kappa.weights(m);
    if w.iter().sum::<f64>() <= 0.0 {
        w = vec![1.0; m];
    }
    let total: f64 = w.iter().sum();
    draws
        .iter()
        .map(|d| {
            d.x.values()
                .iter()
                .zip(d.xhat.values())
                .zip(&w)
                .map(|((a, b), k)| k * (a - b).abs())
                .sum::<f64>()
                / total
        })
        .sum::<f64>()
        / draws.len() as f64
}
