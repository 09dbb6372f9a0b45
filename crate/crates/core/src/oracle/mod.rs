//! Exact enumeration over every `(b, x)` pair of small instances.
//!
//! All logarithms are natural.

pub mod composition;
pub mod profile;
pub mod verify;

use rand::Rng;

use crate::data::{MembershipPrior, MembershipVector};
use crate::error::{param, Error, Result};
use crate::mechanisms::DiscreteMechanism;

pub use composition::{composition_decomposition, composition_decomposition_dual, CompositionReport};
pub use profile::{
    dp_membership_advantage_bound, privacy_profile_bitflip, privacy_profile_exhaustive,
};
pub use verify::{
    attacker_loss_exact, bwma_exact, max_bwma_exact, verify_attacker_model_comparison,
    verify_bgp_risk, verify_post_processing, verify_prior_mismatch, verify_signal_refinement,
    verify_blackwell_ordering, AttackerModelReport, AttackerModel, BudgetMode, ExactBwma,
    NoiseFamily, PriorMismatch, SignalRefinement, BlackwellReport,
};

pub const MAX_POPULATION: usize = 12;
pub const MAX_OUTPUTS: usize = 1 << 16;
/// Largest materialized posterior table (outputs x 2^K cells).
pub const MAX_TABLE_CELLS: usize = 1 << 24;
/// Floor applied to probabilities before taking logs of predictions.
pub const LOG_CLAMP: f64 = 1e-12;

/// Dense distribution over `{0,1}^K`, indexed by [`MembershipVector::to_index`].
/// Unlike [`MembershipPrior`] it can express arbitrary correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorTable {
    population: usize,
    pmf: Vec<f64>,
}

impl PriorTable {
    /// Normalizes nonnegative weights.
    pub fn new(population: usize, weights: Vec<f64>) -> Result<Self> {
        if population == 0 || population > MAX_POPULATION {
            return Err(Error::Capability(format!(
                "exact enumeration needs 1 <= K <= {MAX_POPULATION}, got {population}"
            )));
        }
        if weights.len() != 1 << population {
            return Err(param(format!("prior table needs 2^{population} weights")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(param("prior weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(param("prior weights sum to zero"));
        }
        Ok(Self {
            population,
            pmf: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn from_prior(prior: &MembershipPrior) -> Result<Self> {
        let k = prior.population_size();
        if k > MAX_POPULATION {
            return Err(Error::Capability(format!(
                "exact enumeration needs K <= {MAX_POPULATION}, got {k}; use Monte Carlo estimates instead"
            )));
        }
        Self::new(k, prior.dense_pmf()?)
    }

    pub fn uniform(population: usize) -> Result<Self> {
        Self::new(population, vec![1.0; 1 << population])
    }

    /// Flat-Dirichlet draw over all `2^K` vectors.
    pub fn random<R: Rng + ?Sized>(population: usize, rng: &mut R) -> Result<Self> {
        let w = (0..1usize << population).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        Self::new(population, w)
    }

    pub fn population_size(&self) -> usize {
        self.population
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.pmf[index]
    }

    pub fn marginal(&self, k: usize) -> f64 {
        self.pmf.iter().enumerate().filter(|(i, _)| (i >> k) & 1 == 1).map(|(_, p)| p).sum()
    }

    pub fn entropy(&self) -> f64 {
        -self.pmf.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// `(index, b, prior(b))` for every vector with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, MembershipVector, f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(move |(i, &p)| (i, MembershipVector::from_index(i, self.population), p))
    }

    /// Kullback-Leibler divergence `KL(self || other)`; infinite when `other`
    /// misses mass of `self`.
    pub fn kl(&self, other: &PriorTable) -> f64 {
        self.pmf
            .iter()
            .zip(&other.pmf)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, q)| if *q > 0.0 { p * (p / q).ln() } else { f64::INFINITY })
            .sum()
    }
}

pub(crate) fn check_guards(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<()> {
    if mech.membership_len() != prior.population_size() {
        return Err(param(format!(
            "mechanism expects K={}, prior has K={}",
            mech.membership_len(),
            prior.population_size()
        )));
    }
    if mech.output_count() > MAX_OUTPUTS {
        return Err(Error::Capability(format!(
            "{} outputs exceed the enumeration guard of {MAX_OUTPUTS}",
            mech.output_count()
        )));
    }
    Ok(())
}

/// `P(x) = sum_b prior(b) rho(x|b)`.
pub fn output_marginal(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<Vec<f64>> {
    check_guards(mech, prior)?;
    let mut px = vec![0.0; mech.output_count()];
    for (_, b, p) in prior.support() {
        for (acc, r) in px.iter_mut().zip(mech.conditional(&b)) {
            *acc += p * r;
        }
    }
    Ok(px)
}

/// `P(x)` together with `P(x, b_k = 1)` for every output and individual.
pub fn joint_marginals(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_guards(mech, prior)?;
    let n = mech.output_count();
    let k = prior.population_size();
    let mut px = vec![0.0; n];
    let mut ones = vec![vec![0.0; k]; n];
    for (_, b, p) in prior.support() {
        for (x, r) in mech.conditional(&b).into_iter().enumerate() {
            let j = p * r;
            if j == 0.0 {
                continue;
            }
            px[x] += j;
            for (i, &bit) in b.bits().iter().enumerate() {
                if bit == 1 {
                    ones[x][i] += j;
                }
            }
        }
    }
    Ok((px, ones))
}

/// Exact posterior `mu(b|x)` for every output of positive probability.
#[derive(Clone, Debug)]
pub struct PosteriorTable {
    pub population: usize,
    /// Outputs with positive marginal mass, ascending.
    pub outputs: Vec<usize>,
    /// `P(x)` for each listed output.
    pub evidence: Vec<f64>,
    /// `mu(. | x)` over all `2^K` vectors for each listed output.
    pub posterior: Vec<Vec<f64>>,
    /// `mu(b_k = 1 | x)` for each listed output.
    pub marginals: Vec<Vec<f64>>,
}

impl PosteriorTable {
    pub fn row(&self, output: usize) -> Option<usize> {
        self.outputs.binary_search(&output).ok()
    }
}

pub fn enumerate_posterior(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<PosteriorTable> {
    check_guards(mech, prior)?;
    let k = prior.population_size();
    let n = mech.output_count();
    if n.saturating_mul(1 << k) > MAX_TABLE_CELLS {
        return Err(Error::Capability(format!(
            "posterior table of {n} x 2^{k} cells exceeds {MAX_TABLE_CELLS}"
        )));
    }
    let mut joint = vec![vec![0.0; 1 << k]; n];
    for (i, b, p) in prior.support() {
        for (x, r) in mech.conditional(&b).into_iter().enumerate() {
            joint[x][i] = p * r;
        }
    }
    let mut table = PosteriorTable {
        population: k,
        outputs: Vec::new(),
        evidence: Vec::new(),
        posterior: Vec::new(),
        marginals: Vec::new(),
    };
    for (x, row) in joint.into_iter().enumerate() {
        let px: f64 = row.iter().sum();
        if px <= 0.0 {
            continue;
        }
        let post: Vec<f64> = row.iter().map(|j| j / px).collect();
        let marg = (0..k)
            .map(|i| post.iter().enumerate().filter(|(b, _)| (b >> i) & 1 == 1).map(|(_, p)| p).sum())
            .collect();
        table.outputs.push(x);
        table.evidence.push(px);
        table.posterior.push(post);
        table.marginals.push(marg);
    }
    Ok(table)
}

/// `H(B | X) = -sum_{b,x} prior(b) rho(x|b) ln mu(b|x)`.
pub fn exact_conditional_entropy(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<f64> {
    let px = output_marginal(mech, prior)?;
    let mut h = 0.0;
    for (_, b, p) in prior.support() {
        for (x, r) in mech.conditional(&b).into_iter().enumerate() {
            let j = p * r;
            if j > 0.0 {
                h -= j * (j / px[x]).ln();
            }
        }
    }
    Ok(h)
}

/// `sum_k H(B_k | X)`: the smallest expected CEL any per-individual soft
/// scorer can reach. Equals [`exact_conditional_entropy`] when memberships are
/// conditionally independent given the output, and exceeds it otherwise.
pub fn exact_marginal_cel(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<f64> {
    let (px, ones) = joint_marginals(mech, prior)?;
    let mut h = 0.0;
    for (p, row) in px.iter().zip(&ones) {
        for &j1 in row {
            let j0 = (p - j1).max(0.0);
            if j1 > 0.0 {
                h -= j1 * (j1 / p).ln();
            }
            if j0 > 0.0 {
                h -= j0 * (j0 / p).ln();
            }
        }
    }
    Ok(h)
}

/// Expected CEL of a per-individual soft scorer `x -> (p_1..p_K)`.
/// Scores are clamped to `[clamp, 1 - clamp]` before the logs.
pub fn predictor_cel(
    mech: &dyn DiscreteMechanism,
    prior: &PriorTable,
    predictor: &dyn Fn(usize) -> Vec<f64>,
    clamp: f64,
) -> Result<f64> {
    let (px, ones) = joint_marginals(mech, prior)?;
    let mut cel = 0.0;
    for (x, (p, row)) in px.iter().zip(&ones).enumerate() {
        if *p <= 0.0 {
            continue;
        }
        let scores = predictor(x);
        if scores.len() != row.len() {
            return Err(param("predictor returned the wrong number of scores"));
        }
        for (&j1, &s) in row.iter().zip(&scores) {
            let s = s.clamp(clamp, 1.0 - clamp);
            let j0 = (p - j1).max(0.0);
            cel -= j1 * s.ln() + j0 * (1.0 - s).ln();
        }
    }
    Ok(cel)
}

/// Posterior marginals `mu(b_k=1|x)` for every output (0.5 where `P(x) = 0`).
pub fn posterior_marginals(mech: &dyn DiscreteMechanism, prior: &PriorTable) -> Result<Vec<Vec<f64>>> {
    let (px, ones) = joint_marginals(mech, prior)?;
    Ok(px
        .iter()
        .zip(ones)
        .map(|(p, row)| row.into_iter().map(|j| if *p > 0.0 { j / p } else { 0.5 }).collect())
        .collect())
}

/// Per-individual likelihood ratios `P(x | b_k=0) / P(x | b_k=1)` with the
/// other coordinates marginalized under the prior. `0/0` is reported as 1.
pub fn optimal_lrt_scores(mech: &dyn DiscreteMechanism, prior: &PriorTable, output: usize) -> Result<Vec<f64>> {
    check_guards(mech, prior)?;
    let k = prior.population_size();
    let mut with = vec![0.0; k];
    let mut without = vec![0.0; k];
    for (_, b, p) in prior.support() {
        let j = p * mech.pmf(output, &b);
        for (i, &bit) in b.bits().iter().enumerate() {
            if bit == 1 {
                with[i] += j;
            } else {
                without[i] += j;
            }
        }
    }
    (0..k)
        .map(|i| {
            let pi = prior.marginal(i);
            if pi <= 0.0 || pi >= 1.0 {
                return Err(param(format!("individual {i} has prior marginal {pi}; ratio undefined")));
            }
            let l0 = without[i] / (1.0 - pi);
            let l1 = with[i] / pi;
            Ok(match (l0 > 0.0, l1 > 0.0) {
                (false, false) => 1.0,
                (true, false) => f64::INFINITY,
                _ => l0 / l1,
            })
        })
        .collect()
}

/// Exact ROC of the test "claim b_k = 1 when score(x) >= t" over every
/// threshold, as `(fpr, tpr)` points from `(0,0)` to `(1,1)`.
pub fn exact_roc(
    mech: &dyn DiscreteMechanism,
    prior: &PriorTable,
    individual: usize,
    score: &dyn Fn(usize) -> f64,
) -> Result<Vec<(f64, f64)>> {
    let (px, ones) = joint_marginals(mech, prior)?;
    let pi = prior.marginal(individual);
    if pi <= 0.0 || pi >= 1.0 {
        return Err(param("ROC needs both membership outcomes to have positive mass"));
    }
    let mut cells: Vec<(f64, f64, f64)> = px
        .iter()
        .zip(&ones)
        .enumerate()
        .map(|(x, (p, row))| (score(x), row[individual] / pi, (p - row[individual]).max(0.0) / (1.0 - pi)))
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tpr, mut fpr) = (0.0, 0.0);
    let mut i = 0;
    while i < cells.len() {
        let s = cells[i].0;
        while i < cells.len() && cells[i].0 == s {
            tpr += cells[i].1;
            fpr += cells[i].2;
            i += 1;
        }
        points.push((fpr, tpr));
    }
    Ok(points)
}

/// Value at `fpr` of the piecewise-linear curve through `points`
/// (sorted by fpr).
pub fn interpolate_roc(points: &[(f64, f64)], fpr: f64) -> f64 {
    let mut best: f64 = 0.0;
    if let Some(&(f, t)) = points.last() {
        // rounding can leave the final fpr a hair under 1
        if fpr >= f {
            return t;
        }
    }
    for w in points.windows(2) {
        let ((f0, t0), (f1, t1)) = (w[0], w[1]);
        if fpr >= f0 && fpr <= f1 {
            let v = if f1 > f0 { t0 + (t1 - t0) * (fpr - f0) / (f1 - f0) } else { t0.max(t1) };
            best = best.max(v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{bitflip_mechanism, TableMechanism};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h2(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn posterior_examples() {
        let prior = PriorTable::uniform(3).unwrap();
        let constant = TableMechanism::constant(3, vec![0.2, 0.5, 0.3]).unwrap();
        let t = enumerate_posterior(&constant, &prior).unwrap();
        for post in &t.posterior {
            for (a, b) in post.iter().zip(prior.pmf()) {
                assert!((a - b).abs() < 1e-15);
            }
        }

        let exact = bitflip_mechanism(3, 0.0).unwrap();
        let t = enumerate_posterior(&exact, &prior).unwrap();
        for (x, post) in t.outputs.iter().zip(&t.posterior) {
            assert_eq!(post[*x], 1.0);
        }

        let one = bitflip_mechanism(1, 0.25).unwrap();
        let t = enumerate_posterior(&one, &PriorTable::uniform(1).unwrap()).unwrap();
        assert!((t.marginals[t.row(1).unwrap()][0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn conditional_entropy_examples() {
        let prior = PriorTable::uniform(4).unwrap();
        let constant = TableMechanism::constant(4, vec![0.6, 0.4]).unwrap();
        let h = exact_conditional_entropy(&constant, &prior).unwrap();
        assert!((h - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert_eq!(exact_conditional_entropy(&bitflip_mechanism(4, 0.0).unwrap(), &prior).unwrap(), 0.0);
        let h = exact_conditional_entropy(&bitflip_mechanism(1, 0.25).unwrap(), &PriorTable::uniform(1).unwrap()).unwrap();
        assert!((h - h2(0.75)).abs() < 1e-15);
        assert!((h - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn entropy_bounds_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = rng.gen_range(1..=5);
            let prior = PriorTable::random(k, &mut rng).unwrap();
            let mech = TableMechanism::random(k, rng.gen_range(1..=9), &mut rng);
            let h = exact_conditional_entropy(&mech, &prior).unwrap();
            assert!(h >= -1e-12 && h <= prior.entropy() + 1e-12);
            let marginal = exact_marginal_cel(&mech, &prior).unwrap();
            assert!(marginal >= h - 1e-12);
            let t = enumerate_posterior(&mech, &prior).unwrap();
            for (post, marg) in t.posterior.iter().zip(&t.marginals) {
                assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (i, m) in marg.iter().enumerate() {
                    let direct: f64 = post.iter().enumerate().filter(|(b, _)| b >> i & 1 == 1).map(|(_, p)| p).sum();
                    assert!((m - direct).abs() < 1e-15 && (0.0..=1.0 + 1e-15).contains(m));
                }
            }
        }
    }

    #[test]
    fn guards() {
        let big = bitflip_mechanism(13, 0.1).unwrap();
        assert!(matches!(PriorTable::uniform(13), Err(Error::Capability(_))));
        let prior = MembershipPrior::uniform_bernoulli(13, 0.5).unwrap();
        assert!(matches!(PriorTable::from_prior(&prior), Err(Error::Capability(_))));
        let p4 = PriorTable::uniform(4).unwrap();
        assert!(exact_conditional_entropy(&big, &p4).is_err());
    }

    #[test]
    fn lrt_ratio_examples() {
        let prior = PriorTable::uniform(3).unwrap();
        let constant = TableMechanism::constant(3, vec![0.5, 0.5]).unwrap();
        assert_eq!(optimal_lrt_scores(&constant, &prior, 1).unwrap(), vec![1.0; 3]);
        let one = bitflip_mechanism(1, 0.25).unwrap();
        let r = optimal_lrt_scores(&one, &PriorTable::uniform(1).unwrap(), 1).unwrap();
        assert!((r[0] - 1.0 / 3.0).abs() < 1e-15);
        let degenerate = PriorTable::new(1, vec![1.0, 0.0]).unwrap();
        assert!(optimal_lrt_scores(&one, &degenerate, 1).is_err());
    }

    #[test]
    fn likelihood_ratio_roc_dominates_random_scorers() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = 4;
        let prior = PriorTable::random(k, &mut rng).unwrap();
        let mech = TableMechanism::random(k, 12, &mut rng);
        for i in 0..k {
            let ratios: Vec<f64> = (0..12).map(|x| optimal_lrt_scores(&mech, &prior, x).unwrap()[i]).collect();
            let lr_roc = exact_roc(&mech, &prior, i, &|x| -ratios[x]).unwrap();
            for _ in 0..200 {
                let s: Vec<f64> = (0..12).map(|_| rng.gen::<f64>()).collect();
                for (f, t) in exact_roc(&mech, &prior, i, &|x| s[x]).unwrap() {
                    assert!(t <= interpolate_roc(&lr_roc, f) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn predictor_cel_of_posterior_is_marginal_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let prior = PriorTable::random(3, &mut rng).unwrap();
        let mech = TableMechanism::random(3, 6, &mut rng);
        let post = posterior_marginals(&mech, &prior).unwrap();
        let cel = predictor_cel(&mech, &prior, &|x| post[x].clone(), LOG_CLAMP).unwrap();
        assert!((cel - exact_marginal_cel(&mech, &prior).unwrap()).abs() < 1e-12);
    }
}
