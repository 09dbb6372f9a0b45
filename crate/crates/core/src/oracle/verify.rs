//! Enumeration checks of the game-theoretic privacy claims on small instances.

use rand::Rng;
use serde::Serialize;

use super::{
    check_guards, exact_conditional_entropy, joint_marginals, output_marginal, posterior_marginals,
    predictor_cel, PriorTable, LOG_CLAMP,
};
use crate::data::MembershipVector;
use crate::error::{param, Error, Result};
use crate::mechanisms::{bitflip_mechanism, quantize_postprocess, DiscreteMechanism, MechanismRef};
use std::sync::Arc;

/// Exact Bayes-weighted membership advantage of a (possibly randomized)
/// decision rule `x -> Pr[s_k = 1 | x]`.
///
/// `*_joint` fields use the unnormalized sums `sum_k Pr[s_k=1, b_k=1]` and
/// `sum_k Pr[s_k=1, b_k=0]`; the plain fields divide them by the expected
/// number of members and non-members.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactBwma {
    pub adv: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub adv_joint: f64,
    pub tpr_joint: f64,
    pub fpr_joint: f64,
}

pub fn bwma_exact(
    mech: &dyn DiscreteMechanism,
    prior: &PriorTable,
    claim: &dyn Fn(usize) -> Vec<f64>,
    gamma: f64,
) -> Result<ExactBwma> {
    let (px, ones) = joint_marginals(mech, prior)?;
    let (mut tp, mut fp) = (0.0, 0.0);
    for (x, (p, row)) in px.iter().zip(&ones).enumerate() {
        if *p <= 0.0 {
            continue;
        }
        let h = claim(x);
        if h.len() != row.len() || h.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract(format!("decision rule returned {h:?} at output {x}")));
        }
        for (&hk, &j1) in h.iter().zip(row) {
            tp += hk * j1;
            fp += hk * (p - j1).max(0.0);
        }
    }
    let k = prior.population_size();
    let members: f64 = (0..k).map(|i| prior.marginal(i)).sum();
    let nonmembers = k as f64 - members;
    let tpr = if members > 0.0 { tp / members } else { 0.0 };
    let fpr = if nonmembers > 0.0 { fp / nonmembers } else { 0.0 };
    Ok(ExactBwma {
        adv: (1.0 - gamma) * tpr - gamma * fpr,
        tpr,
        fpr,
        adv_joint: (1.0 - gamma) * tp - gamma * fp,
        tpr_joint: tp,
        fpr_joint: fp,
    })
}

/// `E[-sum_k s_k b_k + gamma sum_k s_k]` by literal enumeration of every
/// `(s, b, x)` with `s_k ~ Bernoulli(claim(x)_k)` independently.
pub fn attacker_loss_exact(
    mech: &dyn DiscreteMechanism,
    prior: &PriorTable,
    claim: &dyn Fn(usize) -> Vec<f64>,
    gamma: f64,
) -> Result<f64> {
    check_guards(mech, prior)?;
    let k = prior.population_size();
    if k > 8 {
        return Err(Error::Capability("(s, b, x) enumeration needs K <= 8".into()));
    }
    let claims: Vec<Vec<f64>> = (0..mech.output_count()).map(claim).collect();
    let mut total = 0.0;
    for (_, b, pb) in prior.support() {
        let cond = mech.conditional(&b);
        for (x, &r) in cond.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for s in 0..1usize << k {
                let mut ps = 1.0;
                let mut loss = 0.0;
                for i in 0..k {
                    let claimed = s >> i & 1 == 1;
                    let h = claims[x][i];
                    ps *= if claimed { h } else { 1.0 - h };
                    if claimed {
                        loss += gamma - f64::from(b.bits()[i]);
                    }
                }
                total += pb * r * ps * loss;
            }
        }
    }
    Ok(total)
}

/// Largest joint-form advantage over all decision rules:
/// `sum_k sum_x max(0, P(x, b_k=1) - gamma P(x))`.
pub fn max_bwma_exact(mech: &dyn DiscreteMechanism, prior: &PriorTable, gamma: f64) -> Result<f64> {
    let (px, ones) = joint_marginals(mech, prior)?;
    Ok(px
        .iter()
        .zip(&ones)
        .map(|(p, row)| row.iter().map(|j1| (j1 - gamma * p).max(0.0)).sum::<f64>())
        .sum())
}

/// Smallest `(jittered CEL - posterior CEL)` over `trials` predictors whose
/// scores are the posterior marginals plus uniform noise in `[-jitter, jitter]`.
pub fn verify_bgp_risk<R: Rng + ?Sized>(
    mech: &dyn DiscreteMechanism,
    prior: &PriorTable,
    trials: usize,
    jitter: f64,
    rng: &mut R,
) -> Result<f64> {
    let post = posterior_marginals(mech, prior)?;
    let base = predictor_cel(mech, prior, &|x| post[x].clone(), LOG_CLAMP)?;
    let mut margin = f64::INFINITY;
    for _ in 0..trials {
        let noisy: Vec<Vec<f64>> = post
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| {
                        let d = if jitter > 0.0 { rng.gen_range(-jitter..=jitter) } else { 0.0 };
                        (p + d).clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
                    })
                    .collect()
            })
            .collect();
        let cel = predictor_cel(mech, prior, &|x| noisy[x].clone(), LOG_CLAMP)?;
        margin = margin.min(cel - base);
    }
    Ok(margin)
}

/// `(H(B|X), H(B|Proc(X)))` for a deterministic coarsening of the output.
pub fn verify_post_processing(mech: MechanismRef, partition: Vec<usize>, prior: &PriorTable) -> Result<(f64, f64)> {
    let before = exact_conditional_entropy(mech.as_ref(), prior)?;
    let coarse = quantize_postprocess(mech, partition)?;
    let after = exact_conditional_entropy(&coarse, prior)?;
    Ok((before, after))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriorMismatch {
    /// BGP risk of the attacker holding the true prior.
    pub matched: f64,
    /// CEL, under the true prior, of the joint posterior built from the
    /// subjective prior.
    pub mismatched: f64,
    pub kl: f64,
    /// Set when the subjective posterior gave zero mass to a realizable
    /// `(b, x)` and the log had to be clamped.
    pub flagged: bool,
}

pub fn verify_prior_mismatch(mech: &dyn DiscreteMechanism, theta: &PriorTable, sigma: &PriorTable) -> Result<PriorMismatch> {
    check_guards(mech, sigma)?;
    let matched = exact_conditional_entropy(mech, theta)?;
    let evidence_sigma = output_marginal(mech, sigma)?;
    let mut mismatched = 0.0;
    let mut flagged = false;
    for (i, b, pb) in theta.support() {
        for (x, r) in mech.conditional(&b).into_iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let mu = if evidence_sigma[x] > 0.0 { sigma.prob(i) * r / evidence_sigma[x] } else { 0.0 };
            let mu = if mu > 0.0 {
                mu
            } else {
                flagged = true;
                LOG_CLAMP
            };
            mismatched -= pb * r * mu.ln();
        }
    }
    Ok(PriorMismatch {
        matched,
        mismatched,
        kl: theta.kl(sigma),
        flagged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointwiseRefinement {
    pub signal: usize,
    pub membership: usize,
    /// `E[-ln mu_theta(b|x) | b]`.
    pub base: f64,
    /// `E[-ln mu_{sigma_q}(b|x) | b]`.
    pub refined: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalRefinement {
    pub base_cel: f64,
    /// `sum_q P(q) H_{sigma_q}(B|X)` where `sigma_q` is the Bayes posterior of
    /// `b` given the signal.
    pub expected_refined_cel: f64,
    pub pointwise: Vec<PointwiseRefinement>,
}

fn conditional_surprise(mech: &dyn DiscreteMechanism, prior: &PriorTable, index: usize) -> Result<f64> {
    let px = output_marginal(mech, prior)?;
    let k = prior.population_size();
    let b = MembershipVector::from_index(index, k);
    let pb = prior.prob(index);
    let mut e = 0.0;
    for (x, r) in mech.conditional(&b).into_iter().enumerate() {
        if r > 0.0 {
            e -= r * (pb * r / px[x]).ln();
        }
    }
    Ok(e)
}

/// `kernel[b][q]` is the probability of signal `q` given membership index `b`.
pub fn verify_signal_refinement(
    mech: &dyn DiscreteMechanism,
    theta: &PriorTable,
    kernel: &[Vec<f64>],
) -> Result<SignalRefinement> {
    let k = theta.population_size();
    if kernel.len() != 1 << k {
        return Err(param("signal kernel needs one row per membership vector"));
    }
    let signals = kernel[0].len();
    for row in kernel {
        let total: f64 = row.iter().sum();
        if row.len() != signals || (total - 1.0).abs() > 1e-9 || row.iter().any(|v| *v < 0.0) {
            return Err(param("every signal kernel row must be a distribution of equal length"));
        }
    }
    let base_cel = exact_conditional_entropy(mech, theta)?;
    let mut refined = 0.0;
    let mut pointwise = Vec::new();
    for q in 0..signals {
        let weights: Vec<f64> = (0..1usize << k).map(|b| theta.prob(b) * kernel[b][q]).collect();
        let pq: f64 = weights.iter().sum();
        if pq <= 0.0 {
            continue;
        }
        let sigma_q = PriorTable::new(k, weights)?;
        refined += pq * exact_conditional_entropy(mech, &sigma_q)?;
        for b in (0..1usize << k).filter(|&b| sigma_q.prob(b) > 0.0) {
            pointwise.push(PointwiseRefinement {
                signal: q,
                membership: b,
                base: conditional_surprise(mech, theta, b)?,
                refined: conditional_surprise(mech, &sigma_q, b)?,
            });
        }
    }
    Ok(SignalRefinement {
        base_cel,
        expected_refined_cel: refined,
        pointwise,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BlackwellReport {
    pub checks: usize,
    pub violations: Vec<String>,
    /// Largest `|difference|` seen per relation, used to confirm equality
    /// when both mechanisms coincide.
    pub max_cel_gap: f64,
    pub max_delta_gap: f64,
    pub max_bwma_gap: f64,
    /// Largest disagreement between the closed-form profile and event search.
    pub profile_check_error: f64,
}

impl BlackwellReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Compares `bitflip(flip_a)` with `bitflip(flip_b)`. The noisier mechanism
/// must have (1) no smaller conditional entropy under every sampled prior,
/// (2) no larger privacy profile on the epsilon grid, and (3) no larger
/// maximal BWMA for every sampled prior and gamma.
pub fn verify_blackwell_ordering<R: Rng + ?Sized>(
    flip_a: f64,
    flip_b: f64,
    population: usize,
    prior_samples: usize,
    gammas: &[f64],
    epsilons: &[f64],
    rng: &mut R,
) -> Result<BlackwellReport> {
    use super::profile::{privacy_profile_bitflip, privacy_profile_exhaustive};
    let (noisy_q, sharp_q) = if flip_a >= flip_b { (flip_a, flip_b) } else { (flip_b, flip_a) };
    let noisy = bitflip_mechanism(population, noisy_q)?;
    let sharp = bitflip_mechanism(population, sharp_q)?;
    let mut report = BlackwellReport::default();

    let single_noisy = bitflip_mechanism(1, noisy_q)?;
    let single_sharp = bitflip_mechanism(1, sharp_q)?;
    for &eps in epsilons {
        let dn = privacy_profile_bitflip(noisy_q, eps)?;
        let ds = privacy_profile_bitflip(sharp_q, eps)?;
        let brute_n = privacy_profile_exhaustive(&single_noisy, eps)?;
        let brute_s = privacy_profile_exhaustive(&single_sharp, eps)?;
        report.profile_check_error = report.profile_check_error.max((dn - brute_n).abs()).max((ds - brute_s).abs());
        report.max_delta_gap = report.max_delta_gap.max((dn - ds).abs());
        report.checks += 1;
        if dn > ds + 1e-12 {
            report.violations.push(format!("delta({eps}): {dn} > {ds}"));
        }
    }
    if report.profile_check_error > 1e-12 {
        report.violations.push(format!("closed-form profile off by {}", report.profile_check_error));
    }

    for s in 0..prior_samples {
        let sigma = PriorTable::random(population, rng)?;
        let hn = exact_conditional_entropy(&noisy, &sigma)?;
        let hs = exact_conditional_entropy(&sharp, &sigma)?;
        report.max_cel_gap = report.max_cel_gap.max((hn - hs).abs());
        report.checks += 1;
        if hn < hs - 1e-9 {
            report.violations.push(format!("prior {s}: CEL {hn} < {hs}"));
        }
        for &g in gammas {
            let an = max_bwma_exact(&noisy, &sigma, g)?;
            let as_ = max_bwma_exact(&sharp, &sigma, g)?;
            report.max_bwma_gap = report.max_bwma_gap.max((an - as_).abs());
            report.checks += 1;
            if an > as_ + 1e-9 {
                report.violations.push(format!("prior {s}, gamma {g}: max BWMA {an} > {as_}"));
            }
        }
    }
    Ok(report)
}

/// A one-parameter family of mechanisms ordered by noise level.
#[derive(Clone, Debug)]
pub struct NoiseFamily {
    pub params: Vec<f64>,
    pub mechanisms: Vec<MechanismRef>,
    /// Expected utility loss of each member.
    pub utility_loss: Vec<f64>,
}

impl NoiseFamily {
    /// `bitflip(q)` for `q` evenly spaced on `[0, 0.5]`; utility loss is the
    /// expected fraction of flipped bits, `q`.
    pub fn bitflip(population: usize, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(param("a family grid needs at least two points"));
        }
        let params: Vec<f64> = (0..points).map(|i| 0.5 * i as f64 / (points - 1) as f64).collect();
        let mechanisms = params
            .iter()
            .map(|&q| Ok(Arc::new(bitflip_mechanism(population, q)?) as MechanismRef))
            .collect::<Result<_>>()?;
        Ok(Self {
            utility_loss: params.clone(),
            params,
            mechanisms,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BudgetMode {
    /// Utility loss may not exceed the budget; minimize privacy loss.
    Utility(f64),
    /// Privacy loss (negative CEL) may not exceed the budget; minimize utility loss.
    Privacy(f64),
}

/// How the defender models the attacker when planning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum AttackerModel {
    /// Exact Bayes posterior: CEL is the conditional entropy.
    ExactPosterior,
    /// Per-bit likelihood-ratio posterior that assumes a fixed flip rate,
    /// ignoring the defense actually deployed.
    FixedLrt { assumed_flip: f64 },
    /// Logistic score `sigmoid(logit(pi_k) + weight (2 y_k - 1))`.
    Score { weight: f64 },
}

impl AttackerModel {
    pub fn name(&self) -> String {
        match self {
            Self::ExactPosterior => "exact-posterior".into(),
            Self::FixedLrt { assumed_flip } => format!("fixed-lrt(q0={assumed_flip})"),
            Self::Score { weight } => format!("score(w={weight})"),
        }
    }

    /// Expected CEL this attacker model achieves against `mech`.
    pub fn cel(&self, mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<f64> {
        let k = prior.population_size();
        let pis: Vec<f64> = (0..k).map(|i| prior.marginal(i)).collect();
        let bits = |x: usize| -> Result<Vec<f64>> {
            let f = mech.features(x);
            if f.len() != k {
                return Err(param("baseline attacker models need one feature bit per individual"));
            }
            Ok(f)
        };
        match *self {
            Self::ExactPosterior => exact_conditional_entropy(mech, prior),
            Self::FixedLrt { assumed_flip: q0 } => {
                let table = (0..mech.output_count()).map(bits).collect::<Result<Vec<_>>>()?;
                predictor_cel(
                    mech,
                    prior,
                    &|x| {
                        table[x]
                            .iter()
                            .zip(&pis)
                            .map(|(&y, &pi)| {
                                let (l1, l0) = if y > 0.5 { (1.0 - q0, q0) } else { (q0, 1.0 - q0) };
                                pi * l1 / (pi * l1 + (1.0 - pi) * l0)
                            })
                            .collect()
                    },
                    LOG_CLAMP,
                )
            }
            Self::Score { weight } => {
                let table = (0..mech.output_count()).map(bits).collect::<Result<Vec<_>>>()?;
                predictor_cel(
                    mech,
                    prior,
                    &|x| {
                        table[x]
                            .iter()
                            .zip(&pis)
                            .map(|(&y, &pi)| {
                                let pi = pi.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                                let z = (pi / (1.0 - pi)).ln() + weight * (2.0 * y - 1.0);
                                1.0 / (1.0 + (-z).exp())
                            })
                            .collect()
                    },
                    LOG_CLAMP,
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlannedStrategy {
    pub model: String,
    pub index: usize,
    pub param: f64,
    /// True BGP risk of the chosen strategy.
    pub exact_cel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackerModelReport {
    pub exact: Option<PlannedStrategy>,
    pub baselines: Vec<Option<PlannedStrategy>>,
    /// One grid cell of CEL: the largest jump between neighbouring params.
    pub slack: f64,
    pub violations: Vec<String>,
}

impl AttackerModelReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Grid-searches the budget-constrained optimum of the family once per
/// attacker model, then checks that planning against the exact posterior
/// leaves the true BGP risk no lower than planning against any baseline.
pub fn verify_attacker_model_comparison(
    family: &NoiseFamily,
    prior: &PriorTable,
    mode: BudgetMode,
    baselines: &[AttackerModel],
) -> Result<AttackerModelReport> {
    let n = family.params.len();
    if n == 0 || family.mechanisms.len() != n || family.utility_loss.len() != n {
        return Err(param("noise family arrays must be nonempty and aligned"));
    }
    let exact: Vec<f64> = family
        .mechanisms
        .iter()
        .map(|m| exact_conditional_entropy(m.as_ref(), prior))
        .collect::<Result<_>>()?;
    for i in 0..n - 1 {
        if exact[i + 1] < exact[i] - 1e-12 || family.utility_loss[i + 1] < family.utility_loss[i] {
            return Err(param(format!(
                "family not monotone between params {} and {}",
                family.params[i],
                family.params[i + 1]
            )));
        }
    }
    let slack = exact.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);

    let plan = |model: AttackerModel| -> Result<Option<PlannedStrategy>> {
        let cels: Vec<f64> = family
            .mechanisms
            .iter()
            .map(|m| model.cel(m.as_ref(), prior))
            .collect::<Result<_>>()?;
        let pick = match mode {
            BudgetMode::Utility(budget) => (0..n)
                .filter(|&i| family.utility_loss[i] <= budget)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if cels[b] >= cels[i] => Some(b),
                    _ => Some(i),
                }),
            BudgetMode::Privacy(budget) => (0..n)
                .filter(|&i| -cels[i] <= budget)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if family.utility_loss[b] <= family.utility_loss[i] => Some(b),
                    _ => Some(i),
                }),
        };
        Ok(pick.map(|i| PlannedStrategy {
            model: model.name(),
            index: i,
            param: family.params[i],
            exact_cel: exact[i],
        }))
    };

    let exact_plan = plan(AttackerModel::ExactPosterior)?;
    let baseline_plans = baselines.iter().map(|&m| plan(m)).collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    match &exact_plan {
        None => violations.push("no feasible strategy against the exact-posterior attacker".to_string()),
        Some(e) => {
            for b in baseline_plans.iter().flatten() {
                if e.exact_cel < b.exact_cel - slack - 1e-12 {
                    violations.push(format!(
                        "{}: planned CEL {} exceeds exact-planned CEL {}",
                        b.model, b.exact_cel, e.exact_cel
                    ));
                }
            }
        }
    }
    Ok(AttackerModelReport {
        exact: exact_plan,
        baselines: baseline_plans,
        slack,
        violations,
    })
}
