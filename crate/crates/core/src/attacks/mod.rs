//! Membership-inference attackers: likelihood-ratio tests, the score test,
//! and the learned BGP discriminator.

mod bgp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MembershipPrior, MembershipVector, PopulationDataset};
use crate::error::{param, Error, Result};
use crate::mechanisms::SummaryStats;

pub use crate::oracle::optimal_lrt_scores;
pub(crate) use bgp::{discriminator_step, training};
pub use bgp::{
    discriminator_scores, train_bgp_exact, train_bgp_response, AttackConfig, BgpResponse, TrainingSchedule,
};

/// Clamp applied to soft scores before taking logs.
pub const P_CLAMP: f64 = 1e-12;

/// Soft scores `p_k`, a ranking score per individual for ROC analysis, and
/// the threshold that turns soft scores into claims.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackScores {
    pub soft: Vec<f64>,
    /// Any score monotone in the attacker's confidence; higher means member.
    pub ranking: Vec<f64>,
    pub threshold: f64,
}

impl AttackScores {
    /// Scores whose ranking is the soft score itself.
    pub fn from_soft(soft: Vec<f64>, threshold: f64) -> Result<Self> {
        Self::new(soft.clone(), soft, threshold)
    }

    pub fn new(soft: Vec<f64>, ranking: Vec<f64>, threshold: f64) -> Result<Self> {
        if soft.len() != ranking.len() {
            return Err(param("soft and ranking scores differ in length"));
        }
        if let Some(p) = soft.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Contract(format!("soft score {p} outside [0, 1]")));
        }
        if ranking.iter().any(|r| r.is_nan()) {
            return Err(Error::Contract("NaN ranking score".into()));
        }
        Ok(Self {
            soft,
            ranking,
            threshold,
        })
    }

    pub fn len(&self) -> usize {
        self.soft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soft.is_empty()
    }

    /// `s_k = 1[p_k >= threshold]`; ties claim.
    pub fn decisions(&self) -> Vec<bool> {
        self.soft.iter().map(|p| *p >= self.threshold).collect()
    }
}

/// `-sum_k [b_k ln p_k + (1 - b_k) ln(1 - p_k)]` with `p` clamped to
/// `[P_CLAMP, 1 - P_CLAMP]`.
pub fn cel_loss(p: &[f64], b: &MembershipVector) -> Result<f64> {
    if p.len() != b.len() {
        return Err(param(format!("{} scores for {} individuals", p.len(), b.len())));
    }
    Ok(p
        .iter()
        .zip(b.bits())
        .map(|(&p, &bit)| {
            let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
            if bit == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

/// `-sum_k s_k b_k + gamma sum_k s_k`.
pub fn attacker_loss(s: &[bool], b: &MembershipVector, gamma: f64) -> Result<f64> {
    if s.len() != b.len() {
        return Err(param(format!("{} decisions for {} individuals", s.len(), b.len())));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(param(format!("gamma {gamma} outside (0, 1]")));
    }
    Ok(s.iter()
        .zip(b.bits())
        .filter(|(s, _)| **s)
        .map(|(_, &bit)| gamma - f64::from(bit))
        .sum())
}

fn clamp_freq(v: f64, floor: f64) -> f64 {
    v.clamp(floor, 1.0 - floor)
}

/// Log-likelihood ratio statistic of genotype `d` against release `x`; low
/// values point to membership. `x` is clamped to `[floor, 1 - floor]`
/// like the reference frequencies.
pub fn lrs(d: &[u8], x: &[f64], reference: &[f64], floor: f64) -> f64 {
    d.iter()
        .zip(x)
        .zip(reference)
        .map(|((&dj, &xj), &pj)| {
            let xj = clamp_freq(xj, floor);
            if dj == 1 {
                (pj / xj).ln()
            } else {
                ((1.0 - pj) / (1.0 - xj)).ln()
            }
        })
        .sum()
}

/// `d lrs / d x_j` for the clamped statistic (zero where the clamp is active).
pub fn lrs_gradient(d: &[u8], x: &[f64], floor: f64) -> Vec<f64> {
    d.iter()
        .zip(x)
        .map(|(&dj, &xj)| {
            if xj <= floor || xj >= 1.0 - floor {
                0.0
            } else if dj == 1 {
                -1.0 / xj
            } else {
                1.0 / (1.0 - xj)
            }
        })
        .collect()
}

/// Centered inner product `<d - p, x - p>`; high values point to membership.
pub fn score_attack(d: &[u8], x: &[f64], reference: &[f64]) -> f64 {
    d.iter()
        .zip(x)
        .zip(reference)
        .map(|((&dj, &xj), &pj)| (f64::from(dj) - pj) * (xj - pj))
        .sum()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(margin)`, pushed strictly below one half when the margin is
/// negative so that thresholding at 0.5 reproduces `margin >= 0` exactly.
fn soft_from_margin(margin: f64) -> f64 {
    let s = sigmoid(margin);
    if margin < 0.0 && s >= 0.5 {
        0.5f64.next_down()
    } else {
        s
    }
}

fn check_release(dataset: &PopulationDataset, x: &SummaryStats) -> Result<()> {
    if x.len() != dataset.attribute_count() {
        return Err(param(format!(
            "release has {} attributes, dataset has {}",
            x.len(),
            dataset.attribute_count()
        )));
    }
    Ok(())
}

pub fn lrs_all(dataset: &PopulationDataset, x: &SummaryStats) -> Result<Vec<f64>> {
    check_release(dataset, x)?;
    let p = dataset.reference_frequencies();
    let floor = dataset.p_floor();
    Ok(dataset.records().map(|d| lrs(d, x.values(), p, floor)).collect())
}

/// Claims individual `k` iff `lrs(d_k, x) <= tau`. Soft scores are
/// `sigmoid(tau - lrs)`, ranking scores `-lrs`.
pub fn fixed_lrt_attack(dataset: &PopulationDataset, x: &SummaryStats, tau: f64) -> Result<AttackScores> {
    let stats = lrs_all(dataset, x)?;
    scores_from_lrs(&stats, tau)
}

fn scores_from_lrs(stats: &[f64], tau: f64) -> Result<AttackScores> {
    let soft = stats.iter().map(|s| soft_from_margin(tau - s)).collect();
    let ranking = stats.iter().map(|s| -s).collect();
    AttackScores::new(soft, ranking, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdaptiveLrt {
    pub scores: AttackScores,
    /// Realized threshold `tau^(N)(x)`.
    pub tau: f64,
}

/// Fixed LRT with `tau` set to the mean of the `n` smallest LRS values
/// among the reference individuals.
pub fn adaptive_lrt_attack(
    dataset: &PopulationDataset,
    x: &SummaryStats,
    reference_ids: &[usize],
    n: usize,
) -> Result<AdaptiveLrt> {
    if reference_ids.is_empty() {
        return Err(param("adaptive LRT needs a nonempty reference set"));
    }
    if n == 0 || n > reference_ids.len() {
        return Err(param(format!("N = {n} must lie in 1..={}", reference_ids.len())));
    }
    if let Some(bad) = reference_ids.iter().find(|&&k| k >= dataset.population_size()) {
        return Err(param(format!("reference id {bad} outside the population")));
    }
    let stats = lrs_all(dataset, x)?;
    let reference: Vec<f64> = reference_ids.iter().map(|&k| stats[k]).collect();
    let tau = adaptive_threshold(&reference, n)?;
    Ok(AdaptiveLrt {
        scores: scores_from_lrs(&stats, tau)?,
        tau,
    })
}

/// Mean of the `n` smallest reference statistics.
pub fn adaptive_threshold(reference_lrs: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > reference_lrs.len() {
        return Err(param(format!("N = {n} must lie in 1..={}", reference_lrs.len())));
    }
    let mut sorted = reference_lrs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[..n].iter().sum::<f64>() / n as f64)
}

/// Score test for every individual; claims where the score reaches `threshold`.
pub fn score_attack_all(dataset: &PopulationDataset, x: &SummaryStats, threshold: f64) -> Result<AttackScores> {
    check_release(dataset, x)?;
    let p = dataset.reference_frequencies();
    let ranking: Vec<f64> = dataset.records().map(|d| score_attack(d, x.values(), p)).collect();
    let soft = ranking.iter().map(|s| soft_from_margin(s - threshold)).collect();
    AttackScores::new(soft, ranking, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum LrtConfig {
    Fixed { tau: f64 },
    Adaptive { reference_ids: Vec<usize>, n: usize },
    /// Exact likelihood ratios; needs an enumerable mechanism.
    Optimal,
}

impl LrtConfig {
    pub fn validate(&self, targets: &[usize]) -> Result<()> {
        match self {
            LrtConfig::Fixed { tau } if !tau.is_finite() => Err(param("fixed LRT threshold must be finite")),
            LrtConfig::Adaptive { reference_ids, n } => {
                if *n == 0 || *n > reference_ids.len() {
                    return Err(param(format!("N = {n} must lie in 1..={}", reference_ids.len())));
                }
                if let Some(k) = reference_ids.iter().find(|k| targets.contains(k)) {
                    return Err(param(format!("reference individual {k} is also an attack target")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Monte Carlo estimate of the Bayes-weighted membership advantage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BwmaEstimate {
    pub adv: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Linearized standard error of `adv`.
    pub std_error: f64,
    /// Draws of the empty membership that the release refused and were redrawn.
    pub rejected: usize,
}

/// `(1 - gamma) TPR - gamma FPR` where TPR and FPR pool claims over all
/// individuals and trials: `TPR = sum s_k b_k / sum b_k`.
///
/// If the release fails on an empty membership, that draw is rejected and
/// redrawn (and counted).
pub fn bwma<X, R: Rng>(
    attacker: &dyn Fn(&X) -> Result<AttackScores>,
    release: &dyn Fn(&MembershipVector, &mut R) -> Result<X>,
    prior: &MembershipPrior,
    gamma: f64,
    trials: usize,
    rng: &mut R,
) -> Result<BwmaEstimate> {
    if trials == 0 {
        return Err(param("need at least one Monte Carlo trial"));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(param(format!("gamma {gamma} outside [0, 1]")));
    }
    let k = prior.population_size();
    let mut rows = Vec::with_capacity(trials);
    let mut rejected = 0;
    while rows.len() < trials {
        let b = prior.sample(rng);
        let x = match release(&b, rng) {
            Ok(x) => x,
            Err(Error::Domain(_)) if b.member_count() == 0 => {
                rejected += 1;
                if rejected > 1000 * trials {
                    return Err(Error::Domain("prior almost never yields a nonempty membership".into()));
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let scores = attacker(&x)?;
        if scores.len() != k {
            return Err(Error::Contract(format!("attacker scored {} of {k} individuals", scores.len())));
        }
        let s = scores.decisions();
        let (mut tp, mut fp) = (0.0, 0.0);
        for (&sk, &bk) in s.iter().zip(b.bits()) {
            if sk {
                if bk == 1 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let members = b.member_count() as f64;
        rows.push((tp, members, fp, k as f64 - members));
    }
    let t = trials as f64;
    let sum = |f: fn(&(f64, f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>();
    let (tp, pos, fp, neg) = (sum(|r| r.0), sum(|r| r.1), sum(|r| r.2), sum(|r| r.3));
    let tpr = if pos > 0.0 { tp / pos } else { 0.0 };
    let fpr = if neg > 0.0 { fp / neg } else { 0.0 };
    let (pos_mean, neg_mean) = (pos / t, neg / t);
    let influence: Vec<f64> = rows
        .iter()
        .map(|(a, n, c, z)| {
            let u = if pos_mean > 0.0 { (a - tpr * n) / pos_mean } else { 0.0 };
            let v = if neg_mean > 0.0 { (c - fpr * z) / neg_mean } else { 0.0 };
            (1.0 - gamma) * u - gamma * v
        })
        .collect();
    let mean = influence.iter().sum::<f64>() / t;
    let var = influence.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (t - 1.0).max(1.0);
    Ok(BwmaEstimate {
        adv: (1.0 - gamma) * tpr - gamma * fpr,
        tpr,
        fpr,
        std_error: (var / t).sqrt(),
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_population;
    use crate::mechanisms::{bitflip_mechanism, summary_statistics, DiscreteMechanism, TableMechanism};
    use crate::oracle::{bwma_exact, PriorTable};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mv(bits: &[u8]) -> MembershipVector {
        MembershipVector::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn cel_examples() {
        let b = mv(&[1, 0, 1]);
        assert!(cel_loss(&[1.0, 0.0, 1.0], &b).unwrap() < 1e-11);
        assert!((cel_loss(&[0.5; 3], &b).unwrap() - 3.0 * 2f64.ln()).abs() < 1e-15);
        let v = cel_loss(&[0.9, 0.2], &mv(&[1, 0])).unwrap();
        assert!((v - (-(0.9f64.ln()) - 0.8f64.ln())).abs() < 1e-15);
        assert!((v - 0.32850).abs() < 1e-5);
        assert!(cel_loss(&[0.5], &b).is_err());
    }

    #[test]
    fn attacker_loss_examples() {
        let b = mv(&[1, 1, 1, 1]);
        assert_eq!(attacker_loss(&[false; 4], &b, 0.3).unwrap(), 0.0);
        assert_eq!(attacker_loss(&[true; 4], &b, 0.5).unwrap(), -2.0);
        assert_eq!(attacker_loss(&[true; 4], &mv(&[0; 4]), 1.0).unwrap(), 4.0);
        assert!(attacker_loss(&[true; 4], &b, 0.0).is_err());
    }

    #[test]
    fn lrs_examples() {
        assert_eq!(lrs(&[1, 0, 1], &[0.2, 0.4, 0.7], &[0.2, 0.4, 0.7], 1e-3), 0.0);
        assert!((lrs(&[1], &[0.25], &[0.5], 1e-3) - 2f64.ln()).abs() < 1e-15);
        assert!((lrs(&[0], &[0.25], &[0.5], 1e-3) - (0.5f64 / 0.75).ln()).abs() < 1e-15);
        assert!((lrs(&[0], &[0.25], &[0.5], 1e-3) + 0.4055).abs() < 1e-4);
        // clamped release stays finite
        assert!(lrs(&[1, 0], &[0.0, 1.0], &[0.5, 0.5], 1e-3).is_finite());
    }

    #[test]
    fn lrs_gradient_matches_differences() {
        let d = [1u8, 0, 1, 0];
        let x = [0.3, 0.6, 0.9, 0.05];
        let p = [0.4, 0.5, 0.5, 0.2];
        let g = lrs_gradient(&d, &x, 1e-3);
        for j in 0..4 {
            let mut hi = x;
            let mut lo = x;
            hi[j] += 1e-6;
            lo[j] -= 1e-6;
            let fd = (lrs(&d, &hi, &p, 1e-3) - lrs(&d, &lo, &p, 1e-3)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_attack(&[1, 0], &[0.3, 0.6], &[0.3, 0.6]), 0.0);
        assert!((score_attack(&[1, 0], &[0.75, 0.25], &[0.5, 0.5]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn score_separates_members_on_average() {
        let data = generate_synthetic_population(30, 200, 0.1, 0.9, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prior = MembershipPrior::uniform_bernoulli(30, 0.5).unwrap();
        let mut wins = 0;
        for _ in 0..1000 {
            let (mut with, _) = prior.sample_nonempty(&mut rng).unwrap();
            let mut bits = with.bits().to_vec();
            bits[0] = 1;
            with = mv(&bits);
            bits[0] = 0;
            if bits.iter().all(|b| *b == 0) {
                bits[1] = 1;
            }
            let without = mv(&bits);
            let d = data.record(0);
            let p = data.reference_frequencies();
            let xi = summary_statistics(&data, &with).unwrap();
            let xo = summary_statistics(&data, &without).unwrap();
            if score_attack(d, xi.values(), p) > score_attack(d, xo.values(), p) {
                wins += 1;
            }
        }
        assert!(wins > 900, "{wins}");
    }

    fn separable() -> (PopulationDataset, SummaryStats, MembershipVector) {
        // Members carry the rare allele everywhere; non-members never do.
        let rows = vec![
            vec![1, 1, 1, 1],
            vec![1, 1, 1, 1],
            vec![0, 0, 0, 0],
            vec![0, 0, 0, 0],
        ];
        let data = PopulationDataset::new(rows, vec![0.2; 4], 1e-3).unwrap();
        let b = mv(&[1, 1, 0, 0]);
        let x = summary_statistics(&data, &b).unwrap();
        (data, x, b)
    }

    #[test]
    fn fixed_lrt_examples() {
        let (data, x, b) = separable();
        let stats = lrs_all(&data, &x).unwrap();
        let max = stats.iter().copied().fold(f64::MIN, f64::max);
        let min = stats.iter().copied().fold(f64::MAX, f64::min);
        assert!(fixed_lrt_attack(&data, &x, max).unwrap().decisions().iter().all(|d| *d));
        assert!(fixed_lrt_attack(&data, &x, min - 1e-9).unwrap().decisions().iter().all(|d| !*d));

        // the members' statistic sits well below the non-members'
        let member_max = stats[0].max(stats[1]);
        let other_min = stats[2].min(stats[3]);
        assert!(member_max < other_min);
        let tau = (member_max + other_min) / 2.0;
        let s = fixed_lrt_attack(&data, &x, tau).unwrap();
        let truth: Vec<bool> = b.bits().iter().map(|v| *v == 1).collect();
        assert_eq!(s.decisions(), truth);
    }

    #[test]
    fn fixed_lrt_tie_rule_is_exact() {
        let s = scores_from_lrs(&[1.0, 1.0 + 1e-17, 1.0 + 1e-15], 1.0).unwrap();
        assert_eq!(s.decisions(), vec![true, true, false]);
        let s = scores_from_lrs(&[0.3], 0.3 + 1e-300).unwrap();
        assert!(s.decisions()[0]);
    }

    #[test]
    fn adaptive_examples() {
        let rows = vec![vec![1, 0], vec![1, 0], vec![1, 0], vec![0, 1]];
        let data = PopulationDataset::new(rows, vec![0.5, 0.5], 1e-3).unwrap();
        let x = SummaryStats::new(vec![0.6, 0.3]).unwrap();
        let stats = lrs_all(&data, &x).unwrap();
        // equal reference statistics
        for n in 1..=3 {
            let a = adaptive_lrt_attack(&data, &x, &[0, 1, 2], n).unwrap();
            assert!((a.tau - stats[0]).abs() < 1e-15);
        }
        let all = adaptive_lrt_attack(&data, &x, &[0, 1, 2, 3], 4).unwrap();
        assert!((all.tau - stats.iter().sum::<f64>() / 4.0).abs() < 1e-15);
        assert!(adaptive_lrt_attack(&data, &x, &[], 1).is_err());
        assert!(adaptive_lrt_attack(&data, &x, &[0], 2).is_err());
    }

    #[test]
    fn adaptive_threshold_from_hand_sorted_values() {
        assert_eq!(adaptive_threshold(&[4.0, 1.0, 3.0, 2.0], 2).unwrap(), 1.5);
        assert_eq!(adaptive_threshold(&[4.0, 1.0, 3.0, 2.0], 4).unwrap(), 2.5);
        assert!(adaptive_threshold(&[1.0], 0).is_err());
    }

    #[test]
    fn lrt_config_checks_reference_disjointness() {
        let cfg = LrtConfig::Adaptive { reference_ids: vec![5, 6], n: 2 };
        assert!(cfg.validate(&[0, 1, 2]).is_ok());
        assert!(cfg.validate(&[0, 6]).is_err());
        assert!(LrtConfig::Adaptive { reference_ids: vec![5], n: 2 }.validate(&[]).is_err());
    }

    #[test]
    fn out_of_range_scores_are_contract_errors() {
        assert!(matches!(AttackScores::from_soft(vec![1.2], 0.5), Err(Error::Contract(_))));
        assert!(matches!(AttackScores::from_soft(vec![f64::NAN], 0.5), Err(Error::Contract(_))));
    }

    type Rng8 = ChaCha8Rng;

    fn bitflip_release(mech: &dyn DiscreteMechanism) -> impl Fn(&MembershipVector, &mut Rng8) -> Result<usize> + '_ {
        move |b, rng| Ok(mech.sample(b, rng))
    }

    #[test]
    fn bwma_examples() {
        let k = 5;
        let prior = MembershipPrior::uniform_bernoulli(k, 0.5).unwrap();
        let mech = bitflip_mechanism(k, 0.3).unwrap();
        let release = bitflip_release(&mech);
        let mut rng = ChaCha8Rng::seed_from_u64(2);

        let coin = |_: &usize| AttackScores::from_soft(vec![0.5; k], 0.5);
        let est = bwma(&coin, &release, &prior, 0.5, 4000, &mut rng).unwrap();
        assert!(est.adv.abs() <= 3.0 * est.std_error + 1e-12);
        assert_eq!((est.tpr, est.fpr), (1.0, 1.0));

        // the oracle attacker sees b itself
        let oracle = |b: &MembershipVector| AttackScores::from_soft(b.as_f64(), 0.5);
        let id = |b: &MembershipVector, _: &mut Rng8| Ok(b.clone());
        let est = bwma(&oracle, &id, &prior, 0.5, 500, &mut rng).unwrap();
        assert_eq!(est.adv, 0.5);
    }

    #[test]
    fn bwma_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in [2, 4, 6] {
            let mech = TableMechanism::random(k, 8, &mut rng);
            let probs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..0.8)).collect();
            let prior = MembershipPrior::independent(probs).unwrap();
            let table = PriorTable::from_prior(&prior).unwrap();
            let rule: Vec<Vec<f64>> = (0..8).map(|_| (0..k).map(|_| f64::from(rng.gen::<bool>())).collect()).collect();
            for gamma in [0.2, 0.5, 0.9] {
                let exact = bwma_exact(&mech, &table, &|x| rule[x].clone(), gamma).unwrap();
                let attacker = |x: &usize| AttackScores::from_soft(rule[*x].clone(), 0.5);
                let est = bwma(&attacker, &bitflip_release(&mech), &prior, gamma, 20_000, &mut rng).unwrap();
                assert!(
                    (est.adv - exact.adv).abs() < 3.0 * est.std_error + 1e-12,
                    "K={k} gamma={gamma}: {} vs {} (se {})",
                    est.adv,
                    exact.adv,
                    est.std_error
                );
            }
        }
    }

    #[test]
    fn bwma_redraws_empty_memberships() {
        let data = generate_synthetic_population(3, 4, 0.2, 0.8, 1).unwrap();
        let prior = MembershipPrior::uniform_bernoulli(3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let release = |b: &MembershipVector, _: &mut Rng8| summary_statistics(&data, b);
        let attacker = |x: &SummaryStats| fixed_lrt_attack(&data, x, 0.0);
        let est = bwma(&attacker, &release, &prior, 0.5, 2000, &mut rng).unwrap();
        assert!(est.rejected > 0);
    }

    proptest! {
        #[test]
        fn fixed_lrt_monotone_in_tau(seed in 0u64..500, t1 in -5.0f64..5.0, dt in 0.0f64..3.0) {
            let data = generate_synthetic_population(12, 30, 0.05, 0.95, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (b, _) = MembershipPrior::uniform_bernoulli(12, 0.5).unwrap().sample_nonempty(&mut rng).unwrap();
            let x = summary_statistics(&data, &b).unwrap();
            let lo = fixed_lrt_attack(&data, &x, t1).unwrap().decisions();
            let hi = fixed_lrt_attack(&data, &x, t1 + dt).unwrap().decisions();
            for (a, c) in lo.iter().zip(&hi) {
                prop_assert!(!a || *c);
            }
        }

        #[test]
        fn soft_scores_stay_in_unit_interval(seed in 0u64..500, tau in -50.0f64..50.0) {
            let data = generate_synthetic_population(6, 40, 0.01, 0.99, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
            let (b, _) = MembershipPrior::uniform_bernoulli(6, 0.5).unwrap().sample_nonempty(&mut rng).unwrap();
            let x = summary_statistics(&data, &b).unwrap();
            let s = fixed_lrt_attack(&data, &x, tau).unwrap();
            prop_assert!(s.soft.iter().all(|p| (0.0..=1.0).contains(p)));
            let stats = lrs_all(&data, &x).unwrap();
            for (d, l) in s.decisions().iter().zip(stats) {
                prop_assert_eq!(*d, l <= tau);
            }
        }
    }
}
