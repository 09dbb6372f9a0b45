//! Summary statistics, output perturbation and the Laplace baseline.
//!
//! The released output is `x = clip(f(D) + xi)` where `f(D)` is the
//! per-attribute member frequency. Discrete mechanisms with exactly
//! computable conditional pmfs live in [`discrete`].

pub mod discrete;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MembershipVector, PopulationDataset};
use crate::error::{param, Error, Result};

pub use discrete::{
    bitflip_mechanism, compose_mechanisms, discretized_summary_mechanism, quantize_postprocess,
    BitFlip, Composition, Coupling, DiscreteMechanism, DiscretizedSummary, MechanismRef,
    Quantized, TableMechanism,
};

/// Released (or unperturbed) frequency vector; every coordinate in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats(Vec<f64>);

impl SummaryStats {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(param(format!("summary statistic {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Additive noise `xi`, optionally bounded coordinate-wise by `|xi_j| <= bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseVector {
    values: Vec<f64>,
    bound: Option<f64>,
}

impl NoiseVector {
    pub fn unbounded(values: Vec<f64>) -> Self {
        Self {
            values,
            bound: None,
        }
    }

    pub fn bounded(values: Vec<f64>, bound: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| v.abs() > bound) {
            return Err(param(format!("noise {v} exceeds bound {bound}")));
        }
        Ok(Self {
            values,
            bound: Some(bound),
        })
    }

    pub fn zeros(len: usize) -> Self {
        Self::unbounded(vec![0.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub epsilon: f64,
    pub delta: f64,
    pub sensitivity: f64,
}

impl DpParams {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !(0.0..=1.0).contains(&delta) || !(sensitivity > 0.0) {
            return Err(param(format!(
                "invalid DP parameters: epsilon={epsilon}, delta={delta}, sensitivity={sensitivity}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            sensitivity,
        })
    }

    /// Laplace scale `sensitivity / epsilon`.
    pub fn laplace_scale(&self) -> Result<f64> {
        if self.epsilon <= 0.0 {
            return Err(param("epsilon = 0 gives an infinite Laplace scale"));
        }
        Ok(self.sensitivity / self.epsilon)
    }
}

/// `x_j = sum_k b_k d_kj / sum_k b_k`.
pub fn summary_statistics(dataset: &PopulationDataset, b: &MembershipVector) -> Result<SummaryStats> {
    Ok(SummaryStats(member_frequencies(dataset, b)?))
}

pub(crate) fn member_frequencies(dataset: &PopulationDataset, b: &MembershipVector) -> Result<Vec<f64>> {
    if b.len() != dataset.population_size() {
        return Err(param(format!(
            "membership length {} does not match population {}",
            b.len(),
            dataset.population_size()
        )));
    }
    let n = b.member_count();
    if n == 0 {
        return Err(Error::Domain(
            "summary statistics are undefined for the empty membership".into(),
        ));
    }
    let mut counts = vec![0u32; dataset.attribute_count()];
    for (row, &bit) in dataset.records().zip(b.bits()) {
        if bit == 1 {
            for (c, &v) in counts.iter_mut().zip(row) {
                *c += u32::from(v);
            }
        }
    }
    Ok(counts.iter().map(|&c| f64::from(c) / n as f64).collect())
}

/// Coordinate-wise `min(1, max(0, v_j))`.
pub fn clip_unit(v: &[f64]) -> SummaryStats {
    SummaryStats(v.iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

/// `clip(stats + noise)`.
pub fn perturb_output(stats: &SummaryStats, noise: &NoiseVector) -> Result<SummaryStats> {
    if stats.len() != noise.values.len() {
        return Err(param(format!(
            "noise has {} coordinates, statistics have {}",
            noise.values.len(),
            stats.len()
        )));
    }
    let sum: Vec<f64> = stats.0.iter().zip(&noise.values).map(|(a, b)| a + b).collect();
    Ok(clip_unit(&sum))
}

/// Draws one Laplace(0, scale) variate by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    // u in (-0.5, 0.5]; the open lower end keeps ln finite.
    let u: f64 = 0.5 - rng.gen::<f64>();
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
}

/// Output of [`laplace_mechanism`]: the clipped release and the pre-clip noise.
#[derive(Clone, Debug)]
pub struct LaplaceRelease {
    pub released: SummaryStats,
    pub noise: Vec<f64>,
}

impl LaplaceRelease {
    /// Mean absolute pre-clip noise.
    pub fn mean_abs_noise(&self) -> f64 {
        self.noise.iter().map(|v| v.abs()).sum::<f64>() / self.noise.len().max(1) as f64
    }
}

/// Adds i.i.d. Laplace(0, sensitivity/epsilon) noise and clips.
pub fn laplace_mechanism<R: Rng + ?Sized>(
    stats: &SummaryStats,
    params: &DpParams,
    rng: &mut R,
) -> Result<LaplaceRelease> {
    let scale = params.laplace_scale()?;
    let noise: Vec<f64> = (0..stats.len()).map(|_| sample_laplace(scale, rng)).collect();
    let released = perturb_output(stats, &NoiseVector::unbounded(noise.clone()))?;
    Ok(LaplaceRelease { released, noise })
}

/// Sensitivity `m / k_dagger` of the frequency vector.
pub fn sensitivity_frequency(attributes: usize, k_dagger: usize) -> Result<f64> {
    if k_dagger == 0 {
        return Err(param("k_dagger must be at least 1"));
    }
    Ok(attributes as f64 / k_dagger as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic_population;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn summary_examples() {
        let d = PopulationDataset::new(vec![vec![1, 0], vec![1, 1]], vec![0.5, 0.5], 1e-3).unwrap();
        let b = MembershipVector::ones(2);
        assert_eq!(summary_statistics(&d, &b).unwrap().values(), &[1.0, 0.5]);
        let single = MembershipVector::new(vec![0, 1]).unwrap();
        assert_eq!(summary_statistics(&d, &single).unwrap().values(), &[1.0, 1.0]);
        assert!(matches!(
            summary_statistics(&d, &MembershipVector::zeros(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn summary_matches_recount_exhaustively() {
        let d = generate_synthetic_population(6, 4, 0.2, 0.8, 3).unwrap();
        for idx in 1..64 {
            let b = MembershipVector::from_index(idx, 6);
            let got = summary_statistics(&d, &b).unwrap();
            for j in 0..4 {
                let mut ones = 0usize;
                let mut members = 0usize;
                for k in 0..6 {
                    if (idx >> k) & 1 == 1 {
                        members += 1;
                        ones += d.get(k, j) as usize;
                    }
                }
                assert_eq!(got.values()[j], ones as f64 / members as f64);
            }
        }
    }

    #[test]
    fn clip_and_perturb_examples() {
        assert_eq!(clip_unit(&[1.2, -0.3]).values(), &[1.0, 0.0]);
        assert_eq!(clip_unit(&[0.25, 0.75]).values(), &[0.25, 0.75]);
        let s = SummaryStats::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(perturb_output(&s, &NoiseVector::zeros(2)).unwrap(), s);
        let s = SummaryStats::new(vec![0.9, 0.1]).unwrap();
        let xi = NoiseVector::bounded(vec![0.5, -0.5], 0.5).unwrap();
        assert_eq!(perturb_output(&s, &xi).unwrap().values(), &[1.0, 0.0]);
        assert!(perturb_output(&s, &NoiseVector::zeros(3)).is_err());
        assert!(NoiseVector::bounded(vec![0.6], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn clip_matches_min_max(v in proptest::collection::vec(-2.0f64..2.0, 1..20)) {
            let c = clip_unit(&v);
            for (a, b) in c.values().iter().zip(&v) {
                prop_assert_eq!(*a, b.clamp(0.0, 1.0));
            }
        }

        #[test]
        fn perturb_is_clip_of_sum(
            pairs in proptest::collection::vec((0.0f64..=1.0, -0.5f64..=0.5), 1..20)
        ) {
            let (x, xi): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let s = SummaryStats::new(x.clone()).unwrap();
            let out = perturb_output(&s, &NoiseVector::bounded(xi.clone(), 0.5).unwrap()).unwrap();
            let sum: Vec<f64> = x.iter().zip(&xi).map(|(a, b)| a + b).collect();
            prop_assert_eq!(out, clip_unit(&sum));
        }
    }

    #[test]
    fn laplace_vanishing_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SummaryStats::new(vec![0.3, 0.7, 0.5]).unwrap();
        let p = DpParams::new(1e12, 0.0, 1.0).unwrap();
        let out = laplace_mechanism(&s, &p, &mut rng).unwrap();
        for (a, b) in out.released.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-6);
        }
        let zero = DpParams::new(0.0, 0.0, 1.0).unwrap();
        assert!(laplace_mechanism(&s, &zero, &mut rng).is_err());
    }

    #[test]
    fn laplace_scale_for_genomic_calibration_example() {
        let p = DpParams::new(1.25e5, 0.0, 12.5).unwrap();
        let scale = p.laplace_scale().unwrap();
        assert!((scale - 1e-4).abs() < 1e-18);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = SummaryStats::new(vec![0.5; 200_000]).unwrap();
        let out = laplace_mechanism(&s, &p, &mut rng).unwrap();
        assert!((out.mean_abs_noise() - 1e-4).abs() < 1e-4 * 0.01);
    }

    #[test]
    fn laplace_mean_abs_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_laplace(0.1, &mut rng).abs()).sum::<f64>() / n as f64;
        assert!((mean - 0.1).abs() < 0.001, "{mean}");
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(sensitivity_frequency(5000, 400).unwrap(), 12.5);
        assert_eq!(sensitivity_frequency(7, 7).unwrap(), 1.0);
        assert_eq!(sensitivity_frequency(1, 2).unwrap(), 0.5);
        assert!(sensitivity_frequency(1, 0).is_err());
    }
}
