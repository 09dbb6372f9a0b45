//! The learned attacker: a discriminator trained to minimize expected CEL
//! against a frozen release.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttackScores, P_CLAMP};
use crate::data::{MembershipPrior, MembershipVector};
use crate::error::{param, Error, Result};
use crate::mechanisms::DiscreteMechanism;
use crate::neural::{binary_cross_entropy, Adam, AdamConfig, HiddenActivation, Mlp, MlpConfig, Mode, OutputActivation};
use crate::oracle::{joint_marginals, PriorTable};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub steps: usize,
    pub batch_size: usize,
    /// The learning rate decays once every this many steps.
    pub steps_per_epoch: usize,
    pub optimizer: AdamConfig,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 128,
            steps_per_epoch: 100,
            optimizer: AdamConfig::with_lr(1e-4),
        }
    }
}

impl TrainingSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.steps_per_epoch == 0 {
            return Err(param("batch size and steps per epoch must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub gamma: f64,
    /// The attacker's belief about memberships; `None` means the true prior.
    #[serde(default)]
    pub subjective_prior: Option<MembershipPrior>,
    pub discriminator: MlpConfig,
    #[serde(default)]
    pub schedule: TrainingSchedule,
}

impl AttackConfig {
    /// One hidden layer with batch norm and ReLU, sigmoid outputs.
    pub fn single_hidden(input: usize, population: usize, width: usize, seed: u64) -> Self {
        Self {
            gamma: 0.5,
            subjective_prior: None,
            discriminator: MlpConfig::new(vec![input, width, population], HiddenActivation::Relu, OutputActivation::Sigmoid)
                .with_batch_norm(true)
                .with_seed(seed),
            schedule: TrainingSchedule::default(),
        }
    }

    pub fn validate(&self, input: usize, population: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(param(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        self.discriminator.validate()?;
        self.schedule.validate()?;
        if self.discriminator.output != OutputActivation::Sigmoid {
            return Err(param("the discriminator needs sigmoid outputs"));
        }
        if self.discriminator.input_width() != input || self.discriminator.output_width() != population {
            return Err(param(format!(
                "discriminator is {} -> {}, release needs {input} -> {population}",
                self.discriminator.input_width(),
                self.discriminator.output_width()
            )));
        }
        if let Some(sigma) = &self.subjective_prior {
            if sigma.population_size() != population {
                return Err(param("subjective prior has the wrong population size"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BgpResponse {
    pub discriminator: Mlp,
    /// Mean per-sample CEL (summed over individuals) at each step.
    pub trace: Vec<f64>,
}

/// Eval-mode scores for one release.
pub fn discriminator_scores(net: &Mlp, features: &[f64]) -> Result<AttackScores> {
    let batch = Array2::from_shape_vec((1, features.len()), features.to_vec())
        .map_err(|e| param(e.to_string()))?;
    let out = net.predict(&batch)?;
    AttackScores::from_soft(out.row(0).to_vec(), 0.5)
}

/// One optimizer step on a batch; returns the mean per-row CEL.
pub(crate) fn discriminator_step(
    net: &mut Mlp,
    opt: &mut Adam,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    row_weights: Option<&[f64]>,
) -> Result<f64> {
    let pred = net.forward(inputs, Mode::Train)?;
    let (_, mut grad) = binary_cross_entropy(&pred, targets, P_CLAMP);
    let rows = inputs.nrows() as f64;
    let loss = match row_weights {
        None => {
            grad /= rows;
            cel_sum(&pred, targets) / rows
        }
        Some(w) => {
            for (mut row, &wi) in grad.axis_iter_mut(Axis(0)).zip(w) {
                row *= wi;
            }
            pred.axis_iter(Axis(0))
                .zip(targets.axis_iter(Axis(0)))
                .zip(w)
                .map(|((p, t), &wi)| wi * cel_row(p.iter(), t.iter()))
                .sum()
        }
    };
    let grads = net.backward(&grad)?;
    opt.step(net, &grads)?;
    Ok(loss)
}

fn cel_row<'a>(p: impl Iterator<Item = &'a f64>, t: impl Iterator<Item = &'a f64>) -> f64 {
    p.zip(t)
        .map(|(&p, &t)| {
            let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

fn cel_sum(pred: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    cel_row(pred.iter(), targets.iter())
}

/// Trains a discriminator on fresh `(b, x)` draws with `b` from the
/// attacker's prior (the subjective one when configured). `release` maps a
/// membership to the discriminator's input features; draws where it rejects
/// the empty membership are redrawn.
pub fn train_bgp_response(
    release: &mut dyn FnMut(&MembershipVector, &mut ChaCha8Rng) -> Result<Vec<f64>>,
    prior: &MembershipPrior,
    cfg: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BgpResponse> {
    let belief = cfg.subjective_prior.as_ref().unwrap_or(prior);
    let k = belief.population_size();
    let m = cfg.discriminator.input_width();
    cfg.validate(m, k)?;
    let mut net = Mlp::new(cfg.discriminator.clone())?;
    let mut opt = Adam::new(cfg.schedule.optimizer.clone(), &net)?;
    let n = cfg.schedule.batch_size;
    let mut trace = Vec::with_capacity(cfg.schedule.steps);
    for step in 0..cfg.schedule.steps {
        let mut inputs = Array2::zeros((n, m));
        let mut targets = Array2::zeros((n, k));
        let mut row = 0;
        let mut rejected = 0usize;
        while row < n {
            let b = belief.sample(rng);
            let x = match release(&b, rng) {
                Ok(x) => x,
                Err(Error::Domain(_)) if b.member_count() == 0 && rejected < 1000 * n => {
                    rejected += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            if x.len() != m {
                return Err(param(format!("release produced {} features, expected {m}", x.len())));
            }
            inputs.row_mut(row).assign(&ndarray::ArrayView1::from(&x));
            targets.row_mut(row).assign(&ndarray::Array1::from(b.as_f64()));
            row += 1;
        }
        let loss = discriminator_step(&mut net, &mut opt, &inputs, &targets, None).map_err(|e| training(step, e))?;
        if !loss.is_finite() {
            return Err(Error::Training {
                step,
                message: "non-finite discriminator loss".into(),
            });
        }
        trace.push(loss);
        if (step + 1) % cfg.schedule.steps_per_epoch == 0 {
            opt.decay_learning_rate();
        }
    }
    net.clear_cache();
    Ok(BgpResponse {
        discriminator: net,
        trace,
    })
}

pub(crate) fn training(step: usize, e: Error) -> Error {
    match e {
        Error::Training { .. } => e,
        other => Error::Training {
            step,
            message: other.to_string(),
        },
    }
}

/// Full-batch training on the exact expected CEL of a discrete mechanism:
/// every output with positive mass is one row, weighted by `P(x)`, with the
/// posterior marginals as soft targets. Deterministic given the config seed.
pub fn train_bgp_exact(mech: &dyn DiscreteMechanism, prior: &PriorTable, cfg: &AttackConfig) -> Result<BgpResponse> {
    let (px, ones) = joint_marginals(mech, prior)?;
    let support: Vec<usize> = (0..px.len()).filter(|&x| px[x] > 0.0).collect();
    let k = prior.population_size();
    let m = mech.features(support[0]).len();
    cfg.validate(m, k)?;
    let mut inputs = Array2::zeros((support.len(), m));
    let mut targets = Array2::zeros((support.len(), k));
    let mut weights = Vec::with_capacity(support.len());
    for (row, &x) in support.iter().enumerate() {
        inputs.row_mut(row).assign(&ndarray::Array1::from(mech.features(x)));
        for i in 0..k {
            targets[[row, i]] = (ones[x][i] / px[x]).clamp(0.0, 1.0);
        }
        weights.push(px[x]);
    }
    let mut net = Mlp::new(cfg.discriminator.clone())?;
    let mut opt = Adam::new(cfg.schedule.optimizer.clone(), &net)?;
    let mut trace = Vec::with_capacity(cfg.schedule.steps);
    for step in 0..cfg.schedule.steps {
        let loss = discriminator_step(&mut net, &mut opt, &inputs, &targets, Some(&weights)).map_err(|e| training(step, e))?;
        trace.push(loss);
        if (step + 1) % cfg.schedule.steps_per_epoch == 0 {
            opt.decay_learning_rate();
        }
    }
    net.clear_cache();
    Ok(BgpResponse {
        discriminator: net,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{bitflip_mechanism, TableMechanism};
    use crate::metrics::roc_auc;
    use crate::oracle::{exact_conditional_entropy, exact_marginal_cel, posterior_marginals, predictor_cel, LOG_CLAMP};
    use rand::{Rng, SeedableRng};

    fn config(k: usize, m: usize, width: usize, steps: usize, lr: f64) -> AttackConfig {
        let mut cfg = AttackConfig::single_hidden(m, k, width, 3);
        cfg.schedule = TrainingSchedule {
            steps,
            batch_size: 256,
            steps_per_epoch: 100,
            optimizer: AdamConfig {
                learning_rate: lr,
                decay_rate: 0.99,
                ..AdamConfig::default()
            },
        };
        cfg
    }

    fn trained_cel(net: &Mlp, mech: &dyn DiscreteMechanism, prior: &PriorTable) -> f64 {
        predictor_cel(
            mech,
            prior,
            &|x| discriminator_scores(net, &mech.features(x)).unwrap().soft,
            LOG_CLAMP,
        )
        .unwrap()
    }

    #[test]
    fn uninformative_release_learns_the_prior() {
        let k = 4;
        let mech = TableMechanism::constant(k, vec![0.25; 4]).unwrap();
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = config(k, 4, 16, 600, 1e-2);
        let mut release = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(mech.features(mech.sample(b, r)));
        let res = train_bgp_response(&mut release, &prior, &cfg, &mut rng).unwrap();
        let table = PriorTable::from_prior(&prior).unwrap();
        let cel = trained_cel(&res.discriminator, &mech, &table);
        let full = k as f64 * 2f64.ln();
        assert!((cel - full).abs() < 0.02 * full, "{cel}");
        for x in 0..4 {
            for p in discriminator_scores(&res.discriminator, &mech.features(x)).unwrap().soft {
                assert!((p - 0.5).abs() < 0.05);
            }
        }
    }

    #[test]
    fn noiseless_release_is_fully_learned() {
        let k = 5;
        let mech = bitflip_mechanism(k, 0.0).unwrap();
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = config(k, k, 32, 800, 1e-2);
        let mut release = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(mech.features(mech.sample(b, r)));
        let res = train_bgp_response(&mut release, &prior, &cfg, &mut rng).unwrap();
        let table = PriorTable::from_prior(&prior).unwrap();
        let cel = trained_cel(&res.discriminator, &mech, &table);
        assert!(cel < 0.05 * k as f64 * 2f64.ln(), "{cel}");

        let (mut scores, mut labels) = (Vec::new(), Vec::new());
        for _ in 0..300 {
            let b = prior.sample(&mut rng);
            let s = discriminator_scores(&res.discriminator, &mech.features(mech.sample(&b, &mut rng))).unwrap();
            scores.extend(s.ranking);
            labels.extend(b.bits().iter().map(|v| *v == 1));
        }
        assert!(roc_auc(&scores, &labels).unwrap().auc > 0.99);
    }

    #[test]
    fn sampled_training_reaches_the_exact_entropy() {
        let k = 6;
        let mech = bitflip_mechanism(k, 0.25).unwrap();
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = config(k, k, 32, 1500, 5e-3);
        let mut release = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(mech.features(mech.sample(b, r)));
        let res = train_bgp_response(&mut release, &prior, &cfg, &mut rng).unwrap();
        let table = PriorTable::from_prior(&prior).unwrap();
        let exact = exact_conditional_entropy(&mech, &table).unwrap();
        let cel = trained_cel(&res.discriminator, &mech, &table);
        assert!((cel - exact).abs() < 0.05 * exact, "{cel} vs {exact}");
        assert_eq!(res.trace.len(), 1500);
    }

    #[test]
    fn exact_training_matches_posterior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 4;
        let prior = PriorTable::random(k, &mut rng).unwrap();
        let mech = TableMechanism::random(k, 6, &mut rng);
        let cfg = config(k, 6, 32, 3000, 1e-2);
        let res = train_bgp_exact(&mech, &prior, &cfg).unwrap();
        let post = posterior_marginals(&mech, &prior).unwrap();
        let px = crate::oracle::output_marginal(&mech, &prior).unwrap();
        let mut err = 0.0;
        let mut count = 0.0;
        for x in (0..6).filter(|&x| px[x] > 0.0) {
            let s = discriminator_scores(&res.discriminator, &mech.features(x)).unwrap().soft;
            for (a, b) in s.iter().zip(&post[x]) {
                err += (a - b).abs();
                count += 1.0;
            }
        }
        assert!(err / count < 0.05, "{}", err / count);
        let cel = trained_cel(&res.discriminator, &mech, &prior);
        let floor = exact_marginal_cel(&mech, &prior).unwrap();
        assert!(cel >= floor - 1e-9 && cel < floor + 0.01, "{cel} vs {floor}");
        // the last trace entry is the training objective, i.e. that CEL under
        // train-mode normalization
        assert!((res.trace.last().unwrap() - cel).abs() < 0.01);
    }

    #[test]
    fn subjective_prior_drives_the_sampling() {
        // A constant release teaches the attacker only its own belief.
        let k = 3;
        let mech = TableMechanism::constant(k, vec![1.0]).unwrap();
        let theta = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mut cfg = config(k, 1, 8, 500, 1e-2);
        cfg.subjective_prior = Some(MembershipPrior::uniform_bernoulli(k, 0.9).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut release = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(mech.features(mech.sample(b, r)));
        let res = train_bgp_response(&mut release, &theta, &cfg, &mut rng).unwrap();
        for p in discriminator_scores(&res.discriminator, &[1.0]).unwrap().soft {
            assert!((p - 0.9).abs() < 0.05, "{p}");
        }
    }

    #[test]
    fn divergence_is_reported_with_its_step() {
        let k = 2;
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let cfg = config(k, 1, 4, 50, 1e-2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut calls = 0;
        let mut release = |_: &MembershipVector, r: &mut ChaCha8Rng| {
            calls += 1;
            Ok(vec![if calls > 256 * 3 { f64::NAN } else { r.gen::<f64>() }])
        };
        match train_bgp_response(&mut release, &prior, &cfg, &mut rng) {
            Err(Error::Training { step, .. }) => assert_eq!(step, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let cfg = AttackConfig::single_hidden(4, 3, 8, 0);
        assert!(cfg.validate(4, 3).is_ok());
        assert!(cfg.validate(5, 3).is_err());
        let mut bad = cfg.clone();
        bad.gamma = 0.0;
        assert!(bad.validate(4, 3).is_err());
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<AttackConfig>(&text).unwrap(), cfg);
    }
}
