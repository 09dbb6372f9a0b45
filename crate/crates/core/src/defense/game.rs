//! The general-sum GAN between the noise generator and the discriminator.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{defender_loss_with_weights, generator_batch, weighted_mean_abs_noise, DefenderConfig, Defense};
use crate::attacks::{bwma, discriminator_scores, discriminator_step, training, AttackConfig, BwmaEstimate, P_CLAMP};
use crate::data::{MembershipPrior, MembershipVector, PopulationDataset};
use crate::error::{param, Error, Result};
use crate::mechanisms::{member_frequencies, SummaryStats};
use crate::metrics::roc_auc;
use crate::neural::{binary_cross_entropy, Adam, Mlp, Mode};

/// Per-round traces; every vector has one entry per round played.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GameTrace {
    pub defender_loss: Vec<f64>,
    /// Mean per-sample CEL of the last discriminator step in the round.
    pub attacker_cel: Vec<f64>,
    /// `-CEL / K` seen by the generator step.
    pub privacy: Vec<f64>,
    pub utility: Vec<f64>,
    /// Share of released coordinates pinned by the clip.
    pub saturated_fraction: Vec<f64>,
}

impl GameTrace {
    pub fn len(&self) -> usize {
        self.defender_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defender_loss.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GameMetrics {
    pub auc: f64,
    pub auc_oriented: f64,
    pub bwma: Vec<(f64, BwmaEstimate)>,
    /// Mean per-sample CEL of the game's discriminator on fresh draws.
    pub cel: f64,
    pub oracle_cel: Option<f64>,
    pub utility_loss: f64,
    /// Mean absolute effective perturbation `|x - xhat|` after the clip.
    pub mean_abs_noise: f64,
    /// Mean absolute generator output before the clip.
    pub mean_abs_raw_noise: f64,
    /// Kappa-weighted mean absolute post-clip distortion.
    pub weighted_noise: f64,
}

#[derive(Clone, Debug)]
pub struct GameResult {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub trace: GameTrace,
    pub rounds: usize,
    pub early_stopped: bool,
    /// Empty memberships drawn and redrawn during training.
    pub rejected_memberships: usize,
    pub defender: DefenderConfig,
    pub attacker: AttackConfig,
    /// Seed and word position of the random stream at the start of training.
    pub rng_seed: [u8; 32],
    pub rng_word_pos: u128,
    pub metrics: Option<GameMetrics>,
}

impl GameResult {
    pub fn defense(&self) -> Defense {
        Defense::Generator {
            net: self.generator.clone(),
            aux_dim: self.defender.aux_dim,
        }
    }
}

pub(crate) fn sample_batch(
    prior: &MembershipPrior,
    n: usize,
    rng: &mut ChaCha8Rng,
    rejected: &mut usize,
) -> Result<Vec<MembershipVector>> {
    (0..n)
        .map(|_| {
            let (b, r) = prior.sample_nonempty(rng)?;
            *rejected += r;
            Ok(b)
        })
        .collect()
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>], width: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            out[[i, j]] = *v;
        }
    }
    out
}

pub(crate) fn membership_array(bs: &[MembershipVector]) -> Array2<f64> {
    let k = bs.first().map_or(0, MembershipVector::len);
    rows_to_array(&bs.iter().map(MembershipVector::as_f64).collect::<Vec<_>>(), k)
}

/// Clip to `[0, 1]` and the clip subgradient mask (1 strictly inside).
pub(crate) fn clip_with_mask(pre: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let x = pre.mapv(|v| v.clamp(0.0, 1.0));
    let mask = pre.mapv(|v| if v > 0.0 && v < 1.0 { 1.0 } else { 0.0 });
    (x, mask)
}

/// Plateau detector on an exponentially smoothed loss.
pub(crate) struct Plateau {
    smoothed: Option<f64>,
    best: f64,
    since: usize,
    patience: Option<usize>,
    min_improvement: f64,
}

impl Plateau {
    pub(crate) fn new(patience: Option<usize>, min_improvement: f64) -> Self {
        Self {
            smoothed: None,
            best: f64::INFINITY,
            since: 0,
            patience,
            min_improvement,
        }
    }

    /// Feeds one loss; true once the run should stop.
    pub(crate) fn update(&mut self, loss: f64) -> bool {
        let s = match self.smoothed {
            None => loss,
            Some(prev) => 0.95 * prev + 0.05 * loss,
        };
        self.smoothed = Some(s);
        if s < self.best - self.min_improvement {
            self.best = s;
            self.since = 0;
        } else {
            self.since += 1;
        }
        self.patience.is_some_and(|p| self.since >= p)
    }
}

/// Alternating training: each round runs `attacker_steps` discriminator
/// updates on fresh releases (memberships from the attacker's belief), then
/// one generator update on the defender loss with privacy term `-CEL / K`
/// of the current discriminator, differentiated through the clip.
pub fn train_bngp(
    dataset: &PopulationDataset,
    prior: &MembershipPrior,
    def: &DefenderConfig,
    att: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GameResult> {
    let k = dataset.population_size();
    let m = dataset.attribute_count();
    if prior.population_size() != k {
        return Err(param("prior and dataset disagree on the population size"));
    }
    def.validate(k, m)?;
    att.validate(m, k)?;
    let belief = att.subjective_prior.as_ref().unwrap_or(prior);
    let (rng_seed, rng_word_pos) = (rng.get_seed(), rng.get_word_pos());

    let mut generator = Mlp::new(def.generator.clone())?;
    let mut disc = Mlp::new(att.discriminator.clone())?;
    let mut gopt = Adam::new(def.optimizer.clone(), &generator)?;
    let mut dopt = Adam::new(att.schedule.optimizer.clone(), &disc)?;
    let schedule = &def.schedule;
    let n = schedule.batch_size;
    let mut trace = GameTrace::default();
    let mut rejected = 0;
    let mut plateau = Plateau::new(schedule.patience, schedule.min_improvement);
    let mut early_stopped = false;

    for round in 0..schedule.rounds {
        let fail = |e| training(round, e);
        let mut attacker_cel = f64::NAN;
        for _ in 0..schedule.attacker_steps {
            let bs = sample_batch(belief, n, rng, &mut rejected)?;
            let xhat = rows_to_array(&bs.iter().map(|b| member_frequencies(dataset, b)).collect::<Result<Vec<_>>>()?, m);
            let noise = generator.predict(&generator_batch(&bs, def.aux_dim, rng)).map_err(fail)?;
            let (x, _) = clip_with_mask(&(&xhat + &noise));
            attacker_cel = discriminator_step(&mut disc, &mut dopt, &x, &membership_array(&bs), None).map_err(fail)?;
        }

        let bs = sample_batch(prior, n, rng, &mut rejected)?;
        let xhat_rows = bs.iter().map(|b| member_frequencies(dataset, b)).collect::<Result<Vec<_>>>()?;
        let xhat = rows_to_array(&xhat_rows, m);
        let noise = generator.forward(&generator_batch(&bs, def.aux_dim, rng), Mode::Train).map_err(fail)?;
        let pre = &xhat + &noise;
        let (x, mask) = clip_with_mask(&pre);
        let pred = disc.forward(&x, Mode::Eval).map_err(fail)?;
        let (cel, dcel) = binary_cross_entropy(&pred, &membership_array(&bs), P_CLAMP);
        let scale = (n * k) as f64;
        let privacy = -cel / scale;

        let mut utility = 0.0;
        let mut dutility = Array2::zeros((n, m));
        for (i, row) in xhat_rows.iter().enumerate() {
            let xr = x.row(i).to_vec();
            let (u, g) = def.utility.loss_and_gradient(&xr, row)?;
            utility += u / n as f64;
            for (j, gj) in g.into_iter().enumerate() {
                dutility[[i, j]] = gj / n as f64;
            }
        }
        let (loss, wp, wu) = defender_loss_with_weights(def.objective, privacy, utility, def.penalty);
        if !loss.is_finite() || !attacker_cel.is_finite() {
            return Err(Error::Training {
                step: round,
                message: format!("non-finite loss (defender {loss}, attacker {attacker_cel})"),
            });
        }
        let dx = if wp != 0.0 {
            let dpred = dcel * (-wp / scale);
            disc.backward(&dpred).map_err(fail)?.input + &dutility * wu
        } else {
            &dutility * wu
        };
        let dnoise = &dx * &mask;
        let grads = generator.backward(&dnoise).map_err(fail)?;
        gopt.step(&mut generator, &grads).map_err(fail)?;

        let saturated = 1.0 - mask.sum() / mask.len() as f64;
        trace.defender_loss.push(loss);
        trace.attacker_cel.push(attacker_cel);
        trace.privacy.push(privacy);
        trace.utility.push(utility);
        trace.saturated_fraction.push(saturated);

        if (round + 1) % schedule.rounds_per_epoch == 0 {
            gopt.decay_learning_rate();
            dopt.decay_learning_rate();
        }
        if plateau.update(loss) {
            early_stopped = true;
            break;
        }
    }
    generator.clear_cache();
    disc.clear_cache();
    Ok(GameResult {
        generator,
        discriminator: disc,
        rounds: trace.len(),
        trace,
        early_stopped,
        rejected_memberships: rejected,
        defender: def.clone(),
        attacker: att.clone(),
        rng_seed,
        rng_word_pos,
        metrics: None,
    })
}

/// Scores the game's own discriminator against its generator on `samples`
/// fresh releases and stores the result in `result.metrics`.
pub fn evaluate_game(
    result: &mut GameResult,
    dataset: &PopulationDataset,
    prior: &MembershipPrior,
    gammas: &[f64],
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GameMetrics> {
    if samples == 0 {
        return Err(param("evaluation needs at least one sample"));
    }
    let defense = result.defense();
    let mut rejected = 0;
    let bs = sample_batch(prior, samples, rng, &mut rejected)?;
    let draws = defense.release_batch(dataset, &bs, rng)?;
    let x = rows_to_array(&draws.iter().map(|d| d.x.values().to_vec()).collect::<Vec<_>>(), dataset.attribute_count());
    let pred = result.discriminator.predict(&x)?;
    let labels = membership_array(&bs);
    let (cel, _) = binary_cross_entropy(&pred, &labels, P_CLAMP);
    let scores: Vec<f64> = pred.iter().copied().collect();
    let truth: Vec<bool> = labels.iter().map(|v| *v == 1.0).collect();
    let roc = roc_auc(&scores, &truth)?;

    let disc = &result.discriminator;
    let attacker = |x: &SummaryStats| discriminator_scores(disc, x.values());
    let release = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(defense.release(dataset, b, r)?.x);
    let bwma_grid = gammas
        .iter()
        .map(|&g| Ok((g, bwma(&attacker, &release, prior, g, samples, rng)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut utility = 0.0;
    for d in &draws {
        utility += result.defender.utility.loss(d.x.values(), d.xhat.values())?;
    }
    let (mut mean_abs, mut mean_raw) = (0.0, 0.0);
    for d in &draws {
        let m = d.noise.len() as f64;
        mean_abs += d.x.values().iter().zip(d.xhat.values()).map(|(a, b)| (a - b).abs()).sum::<f64>() / m;
        mean_raw += d.noise.iter().map(|v| v.abs()).sum::<f64>() / m;
    }
    let metrics = GameMetrics {
        auc: roc.auc,
        auc_oriented: roc.oriented_auc(),
        bwma: bwma_grid,
        cel: cel / samples as f64,
        oracle_cel: None,
        utility_loss: utility / samples as f64,
        mean_abs_noise: mean_abs / samples as f64,
        mean_abs_raw_noise: mean_raw / samples as f64,
        weighted_noise: weighted_mean_abs_noise(&draws, &result.defender.utility.kappa),
    };
    result.metrics = Some(metrics.clone());
    Ok(metrics)
}
