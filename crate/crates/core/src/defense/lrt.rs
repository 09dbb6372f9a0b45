//! Defenders that best-respond to a known LRT attacker through the sigmoid
//! surrogate of its rejection rule.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use super::game::{clip_with_mask, rows_to_array, sample_batch, Plateau};
use super::{defender_loss_with_weights, generator_batch, DefenderConfig, Defense};
use crate::attacks::{lrs, lrs_gradient, sigmoid, training, LrtConfig};
use crate::data::{MembershipPrior, PopulationDataset};
use crate::error::{param, Error, Result};
use crate::mechanisms::member_frequencies;
use crate::neural::{Adam, Mlp, Mode};

#[derive(Clone, Debug)]
pub struct LrtDefenseResult {
    pub generator: Mlp,
    pub aux_dim: usize,
    /// Defender loss per round.
    pub trace: Vec<f64>,
    /// Surrogate privacy term per round.
    pub privacy: Vec<f64>,
    pub utility: Vec<f64>,
    pub rejected_memberships: usize,
}

impl LrtDefenseResult {
    pub fn defense(&self) -> Defense {
        Defense::Generator {
            net: self.generator.clone(),
            aux_dim: self.aux_dim,
        }
    }
}

/// Surrogate claim rate `(1/K) sum_k b_k sigmoid(tau - lrs_k)` of one release
/// and its gradient with respect to `x`.
fn surrogate(dataset: &PopulationDataset, b: &[u8], x: &[f64], lrt: &LrtConfig) -> (f64, Vec<f64>) {
    let p = dataset.reference_frequencies();
    let floor = dataset.p_floor();
    let k = dataset.population_size();
    let m = x.len();
    let stats: Vec<f64> = dataset.records().map(|d| lrs(d, x, p, floor)).collect();
    let mut dtau = vec![0.0; m];
    let tau = match lrt {
        LrtConfig::Fixed { tau } => *tau,
        LrtConfig::Adaptive { reference_ids, n } => {
            let mut order: Vec<usize> = reference_ids.clone();
            order.sort_by(|&a, &c| stats[a].total_cmp(&stats[c]));
            for &i in &order[..*n] {
                for (g, gi) in dtau.iter_mut().zip(lrs_gradient(dataset.record(i), x, floor)) {
                    *g += gi / *n as f64;
                }
            }
            order[..*n].iter().map(|&i| stats[i]).sum::<f64>() / *n as f64
        }
        LrtConfig::Optimal => unreachable!("rejected before training"),
    };
    let mut value = 0.0;
    let mut grad = vec![0.0; m];
    for (kk, &bit) in b.iter().enumerate() {
        if bit == 0 {
            continue;
        }
        let s = sigmoid(tau - stats[kk]);
        value += s / k as f64;
        let w = s * (1.0 - s) / k as f64;
        for ((g, gl), dt) in grad.iter_mut().zip(lrs_gradient(dataset.record(kk), x, floor)).zip(&dtau) {
            *g += w * (dt - gl);
        }
    }
    (value, grad)
}

/// Trains a generator against a fixed or adaptive LRT attacker whose
/// threshold rule is smoothed by a sigmoid. The optimal LRT has no tractable
/// surrogate and is refused.
pub fn train_lrt_best_response_defender(
    dataset: &PopulationDataset,
    prior: &MembershipPrior,
    def: &DefenderConfig,
    lrt: &LrtConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LrtDefenseResult> {
    let k = dataset.population_size();
    let m = dataset.attribute_count();
    if prior.population_size() != k {
        return Err(param("prior and dataset disagree on the population size"));
    }
    def.validate(k, m)?;
    match lrt {
        LrtConfig::Optimal => {
            return Err(Error::Capability("the optimal LRT cannot be trained against".into()));
        }
        LrtConfig::Adaptive { reference_ids, .. } => {
            lrt.validate(&[])?;
            if let Some(bad) = reference_ids.iter().find(|&&i| i >= k) {
                return Err(param(format!("reference id {bad} outside the population")));
            }
        }
        LrtConfig::Fixed { .. } => lrt.validate(&[])?,
    }

    let mut generator = Mlp::new(def.generator.clone())?;
    let mut opt = Adam::new(def.optimizer.clone(), &generator)?;
    let schedule = &def.schedule;
    let n = schedule.batch_size;
    let mut out = LrtDefenseResult {
        generator: generator.clone(),
        aux_dim: def.aux_dim,
        trace: Vec::new(),
        privacy: Vec::new(),
        utility: Vec::new(),
        rejected_memberships: 0,
    };
    let mut plateau = Plateau::new(schedule.patience, schedule.min_improvement);

    for round in 0..schedule.rounds {
        let fail = |e| training(round, e);
        let bs = sample_batch(prior, n, rng, &mut out.rejected_memberships)?;
        let xhat_rows = bs.iter().map(|b| member_frequencies(dataset, b)).collect::<Result<Vec<_>>>()?;
        let xhat = rows_to_array(&xhat_rows, m);
        let noise = generator.forward(&generator_batch(&bs, def.aux_dim, rng), Mode::Train).map_err(fail)?;
        let (x, mask) = clip_with_mask(&(&xhat + &noise));

        let (mut privacy, mut utility) = (0.0, 0.0);
        let mut dprivacy = Array2::zeros((n, m));
        let mut dutility = Array2::zeros((n, m));
        for (i, b) in bs.iter().enumerate() {
            let xr = x.row(i).to_vec();
            let (s, gs) = surrogate(dataset, b.bits(), &xr, lrt);
            let (u, gu) = def.utility.loss_and_gradient(&xr, &xhat_rows[i])?;
            privacy += s / n as f64;
            utility += u / n as f64;
            for j in 0..m {
                dprivacy[[i, j]] = gs[j] / n as f64;
                dutility[[i, j]] = gu[j] / n as f64;
            }
        }
        let (loss, wp, wu) = defender_loss_with_weights(def.objective, privacy, utility, def.penalty);
        if !loss.is_finite() {
            return Err(Error::Training {
                step: round,
                message: format!("non-finite defender loss {loss}"),
            });
        }
        let dnoise = (dprivacy * wp + dutility * wu) * &mask;
        let grads = generator.backward(&dnoise).map_err(fail)?;
        opt.step(&mut generator, &grads).map_err(fail)?;
        out.trace.push(loss);
        out.privacy.push(privacy);
        out.utility.push(utility);
        if (round + 1) % schedule.rounds_per_epoch == 0 {
            opt.decay_learning_rate();
        }
        if plateau.update(loss) {
            break;
        }
    }
    generator.clear_cache();
    out.generator = generator;
    Ok(out)
}

/// Fixed-LRT threshold whose false-positive rate on undefended releases is
/// about `fpr`: the `fpr`-quantile of non-member LRS over `samples` draws.
pub fn lrt_threshold_for_fpr(
    dataset: &PopulationDataset,
    prior: &MembershipPrior,
    fpr: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&fpr) || samples == 0 {
        return Err(param("need fpr in [0, 1] and at least one sample"));
    }
    let p = dataset.reference_frequencies();
    let floor = dataset.p_floor();
    let mut rejected = 0;
    let mut null = Vec::new();
    for b in sample_batch(prior, samples, rng, &mut rejected)? {
        let x = member_frequencies(dataset, &b)?;
        for (kk, d) in dataset.records().enumerate() {
            if !b.is_member(kk) {
                null.push(lrs(d, &x, p, floor));
            }
        }
    }
    if null.is_empty() {
        return Err(Error::Domain("no non-members drawn".into()));
    }
    null.sort_by(f64::total_cmp);
    let idx = ((fpr * null.len() as f64).floor() as usize).min(null.len() - 1);
    Ok(null[idx])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::fixed_lrt_attack;
    use crate::data::generate_synthetic_population;
    use crate::defense::{GameSchedule, Kappa};
    use crate::neural::AdamConfig;
    use rand::SeedableRng;

    fn setup(kappa: f64, rounds: usize) -> (PopulationDataset, MembershipPrior, DefenderConfig) {
        let (k, m) = (10, 30);
        let data = generate_synthetic_population(k, m, 0.1, 0.5, 4).unwrap();
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mut def = DefenderConfig::two_hidden(k, m, 4, (16, 16), Kappa::Scalar(kappa), 3);
        def.schedule = GameSchedule {
            rounds,
            batch_size: 32,
            rounds_per_epoch: 50,
            ..GameSchedule::default()
        };
        def.optimizer = AdamConfig::with_lr(1e-2);
        (data, prior, def)
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let (data, _, _) = setup(1.0, 1);
        let b: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let x: Vec<f64> = (0..30).map(|j| 0.2 + 0.02 * j as f64).collect();
        for lrt in [
            LrtConfig::Fixed { tau: -0.5 },
            LrtConfig::Adaptive {
                reference_ids: vec![1, 3, 5],
                n: 2,
            },
        ] {
            let (_, g) = surrogate(&data, &b, &x, &lrt);
            for j in [0, 7, 29] {
                let h = 1e-6;
                let mut up = x.clone();
                up[j] += h;
                let mut dn = x.clone();
                dn[j] -= h;
                let fd = (surrogate(&data, &b, &up, &lrt).0 - surrogate(&data, &b, &dn, &lrt).0) / (2.0 * h);
                assert!((fd - g[j]).abs() < 1e-6, "{lrt:?} j={j}: {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn unreachable_threshold_leaves_only_utility() {
        let (data, prior, def) = setup(1.0, 300);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = train_lrt_best_response_defender(&data, &prior, &def, &LrtConfig::Fixed { tau: -1e6 }, &mut rng).unwrap();
        assert!(r.privacy.iter().all(|p| *p < 1e-12));
        let defense = r.defense();
        let draws = defense.release_batch(&data, &[prior.sample_nonempty(&mut rng).unwrap().0], &mut rng).unwrap();
        let mean: f64 = draws[0].noise.iter().map(|v| v.abs()).sum::<f64>() / 30.0;
        assert!(mean < 0.01, "mean |noise| {mean}");
    }

    #[test]
    fn defended_tpr_is_below_undefended_at_matched_fpr() {
        let (data, prior, def) = setup(0.05, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tau = lrt_threshold_for_fpr(&data, &prior, 0.1, 400, &mut rng).unwrap();
        let lrt = LrtConfig::Fixed { tau };
        let r = train_lrt_best_response_defender(&data, &prior, &def, &lrt, &mut rng).unwrap();
        let evaluate = |defense: &Defense, rng: &mut ChaCha8Rng| {
            let mut pairs = Vec::new();
            for _ in 0..400 {
                let (b, _) = prior.sample_nonempty(rng).unwrap();
                let x = defense.release(&data, &b, rng).unwrap().x;
                pairs.push((fixed_lrt_attack(&data, &x, tau).unwrap(), b));
            }
            let (mut tp, mut pos, mut fp, mut neg) = (0.0, 0.0, 0.0, 0.0);
            for (scores, b) in &pairs {
                for (kk, claim) in scores.decisions().into_iter().enumerate() {
                    let c = f64::from(u8::from(claim));
                    if b.is_member(kk) {
                        tp += c;
                        pos += 1.0;
                    } else {
                        fp += c;
                        neg += 1.0;
                    }
                }
            }
            (tp / pos, fp / neg)
        };
        let (tpr0, fpr0) = evaluate(&Defense::None, &mut rng);
        let (tpr1, fpr1) = evaluate(&r.defense(), &mut rng);
        assert!(tpr1 < tpr0, "defended {tpr1} (fpr {fpr1}) vs undefended {tpr0} (fpr {fpr0})");
        assert!(fpr1 <= fpr0 + 0.05, "fpr drifted: {fpr1} vs {fpr0}");
    }

    #[test]
    fn optimal_lrt_is_refused() {
        let (data, prior, def) = setup(1.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = train_lrt_best_response_defender(&data, &prior, &def, &LrtConfig::Optimal, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn threshold_quantile_hits_requested_rate() {
        let (data, prior, _) = setup(1.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tau = lrt_threshold_for_fpr(&data, &prior, 0.2, 2000, &mut rng).unwrap();
        let mut claimed = 0usize;
        let mut total = 0usize;
        for _ in 0..1000 {
            let (b, _) = prior.sample_nonempty(&mut rng).unwrap();
            let x = member_frequencies(&data, &b).unwrap();
            for (kk, d) in data.records().enumerate() {
                if !b.is_member(kk) {
                    total += 1;
                    claimed += usize::from(lrs(d, &x, data.reference_frequencies(), data.p_floor()) <= tau);
                }
            }
        }
        let rate = claimed as f64 / total as f64;
        assert!((rate - 0.2).abs() < 0.03, "{rate}");
    }
}
