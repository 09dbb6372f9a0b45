//! Mechanisms over a finite output space with exact conditional pmfs.
//!
//! Outputs are indexed `0..output_count()`. Every mechanism can be sampled by
//! inverting its conditional CDF with a single uniform draw, which is also how
//! shared-noise compositions couple their components.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::member_frequencies;
use crate::data::{MembershipVector, PopulationDataset};
use crate::error::{param, Error, Result};

pub type MechanismRef = Arc<dyn DiscreteMechanism>;

/// A randomized map from membership vectors to a finite set of symbols.
pub trait DiscreteMechanism: Send + Sync + fmt::Debug {
    /// Length `K` of the membership vectors the mechanism accepts.
    fn membership_len(&self) -> usize;

    fn output_count(&self) -> usize;

    /// `rho(output | b)`.
    fn pmf(&self, output: usize, b: &MembershipVector) -> f64;

    /// The whole conditional distribution `rho(. | b)`.
    fn conditional(&self, b: &MembershipVector) -> Vec<f64> {
        (0..self.output_count()).map(|x| self.pmf(x, b)).collect()
    }

    /// Inverse-CDF sample driven by `u in [0, 1)`.
    fn sample_with_uniform(&self, b: &MembershipVector, u: f64) -> usize {
        invert_cdf(&self.conditional(b), u)
    }

    fn sample(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> usize {
        self.sample_with_uniform(b, rng.gen::<f64>())
    }

    /// Numeric encoding of an output, used as input to learned attackers.
    fn features(&self, output: usize) -> Vec<f64> {
        vec![output as f64]
    }

    fn label(&self, output: usize) -> String {
        output.to_string()
    }
}

fn invert_cdf(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (x, &p) in pmf.iter().enumerate() {
        if p > 0.0 {
            last_positive = x;
            acc += p;
            if u < acc {
                return x;
            }
        }
    }
    last_positive
}

fn check_len(mech: &dyn DiscreteMechanism, b: &MembershipVector) {
    debug_assert_eq!(mech.membership_len(), b.len(), "membership length mismatch");
}

/// Flips each membership bit independently with probability `flip`.
/// Output `y` is encoded as an index whose bit `k` is `y_k`.
#[derive(Clone, Debug)]
pub struct BitFlip {
    population: usize,
    flip: f64,
}

impl BitFlip {
    pub fn flip_prob(&self) -> f64 {
        self.flip
    }
}

pub fn bitflip_mechanism(population: usize, flip_prob: f64) -> Result<BitFlip> {
    if !(0.0..=0.5).contains(&flip_prob) {
        return Err(param(format!("flip probability {flip_prob} outside [0, 0.5]")));
    }
    if population == 0 || population > 24 {
        return Err(param(format!("bit-flip population must be in 1..=24, got {population}")));
    }
    Ok(BitFlip {
        population,
        flip: flip_prob,
    })
}

impl DiscreteMechanism for BitFlip {
    fn membership_len(&self) -> usize {
        self.population
    }

    fn output_count(&self) -> usize {
        1 << self.population
    }

    fn pmf(&self, output: usize, b: &MembershipVector) -> f64 {
        check_len(self, b);
        let flips = (output ^ b.to_index()).count_ones() as i32;
        self.flip.powi(flips) * (1.0 - self.flip).powi(self.population as i32 - flips)
    }

    fn sample(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> usize {
        let mut y = b.to_index();
        for k in 0..self.population {
            if rng.gen::<f64>() < self.flip {
                y ^= 1 << k;
            }
        }
        y
    }

    fn features(&self, output: usize) -> Vec<f64> {
        (0..self.population).map(|k| ((output >> k) & 1) as f64).collect()
    }

    fn label(&self, output: usize) -> String {
        MembershipVector::from_index(output, self.population).to_string()
    }
}

/// Explicit conditional table; row `b.to_index()` holds `rho(. | b)`.
#[derive(Clone, Debug)]
pub struct TableMechanism {
    population: usize,
    outputs: usize,
    table: Vec<f64>,
}

impl TableMechanism {
    pub fn new(population: usize, outputs: usize, table: Vec<f64>) -> Result<Self> {
        if population > 16 {
            return Err(Error::Capability(format!("table mechanism needs K <= 16, got {population}")));
        }
        if outputs == 0 || table.len() != (1 << population) * outputs {
            return Err(param("table shape does not match 2^K x outputs"));
        }
        for row in table.chunks_exact(outputs) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(param(format!("conditional row sums to {total}, expected 1")));
            }
        }
        Ok(Self {
            population,
            outputs,
            table,
        })
    }

    /// Same output distribution for every membership vector.
    pub fn constant(population: usize, dist: Vec<f64>) -> Result<Self> {
        let outputs = dist.len();
        let table = dist.iter().copied().cycle().take((1 << population) * outputs).collect();
        Self::new(population, outputs, table)
    }

    /// Random conditional table with rows drawn from a flat Dirichlet.
    pub fn random<R: Rng + ?Sized>(population: usize, outputs: usize, rng: &mut R) -> Self {
        let mut table = Vec::with_capacity((1 << population) * outputs);
        for _ in 0..1usize << population {
            let row: Vec<f64> = (0..outputs).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = row.iter().sum();
            table.extend(row.iter().map(|v| v / total));
        }
        // Renormalizing can leave a row a few ulps off 1; fix the largest cell.
        for row in table.chunks_exact_mut(outputs) {
            let total: f64 = row.iter().sum();
            let (imax, _) = row
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            row[imax] += 1.0 - total;
        }
        Self {
            population,
            outputs,
            table,
        }
    }
}

impl DiscreteMechanism for TableMechanism {
    fn membership_len(&self) -> usize {
        self.population
    }

    fn output_count(&self) -> usize {
        self.outputs
    }

    fn pmf(&self, output: usize, b: &MembershipVector) -> f64 {
        check_len(self, b);
        self.table[b.to_index() * self.outputs + output]
    }

    fn conditional(&self, b: &MembershipVector) -> Vec<f64> {
        let i = b.to_index() * self.outputs;
        self.table[i..i + self.outputs].to_vec()
    }

    fn features(&self, output: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.outputs];
        v[output] = 1.0;
        v
    }
}

/// Frequencies rounded onto a grid of `grid_size` points in `[0, 1]`, then
/// shifted by an independent random number of grid steps per attribute and
/// clipped to the grid ends.
///
/// The empty membership has no frequencies; its pmf treats `x_hat` as the
/// zero vector so that the conditional is defined for every `b`. Sampling it
/// is still an error via [`DiscretizedSummary::try_sample`].
#[derive(Clone, Debug)]
pub struct DiscretizedSummary {
    dataset: Arc<PopulationDataset>,
    grid_size: usize,
    shifts: Vec<(i64, f64)>,
    outputs: usize,
}

pub fn discretized_summary_mechanism(
    dataset: Arc<PopulationDataset>,
    grid_size: usize,
    noise: &[(i64, f64)],
) -> Result<DiscretizedSummary> {
    if grid_size < 2 {
        return Err(param("grid size must be at least 2"));
    }
    let total: f64 = noise.iter().map(|(_, p)| p).sum();
    if noise.is_empty() || noise.iter().any(|(_, p)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(param(format!("noise pmf must be nonnegative and sum to 1, got {total}")));
    }
    let outputs = (0..dataset.attribute_count())
        .try_fold(1usize, |acc, _| acc.checked_mul(grid_size))
        .filter(|&n| n <= 1 << 20)
        .ok_or_else(|| Error::Capability("grid_size^m exceeds 2^20 outputs".into()))?;
    Ok(DiscretizedSummary {
        dataset,
        grid_size,
        shifts: noise.to_vec(),
        outputs,
    })
}

impl DiscretizedSummary {
    fn grid_indices(&self, b: &MembershipVector) -> Vec<usize> {
        let scale = (self.grid_size - 1) as f64;
        match member_frequencies(&self.dataset, b) {
            Ok(freqs) => freqs.iter().map(|f| (f * scale).round() as usize).collect(),
            Err(_) => vec![0; self.dataset.attribute_count()],
        }
    }

    /// Per-attribute pmf over grid points starting from grid index `start`.
    fn shifted(&self, start: usize) -> Vec<f64> {
        let top = (self.grid_size - 1) as i64;
        let mut pmf = vec![0.0; self.grid_size];
        for &(shift, p) in &self.shifts {
            let target = (start as i64 + shift).clamp(0, top) as usize;
            pmf[target] += p;
        }
        pmf
    }

    fn decode(&self, output: usize) -> Vec<usize> {
        let mut rest = output;
        (0..self.dataset.attribute_count())
            .map(|_| {
                let g = rest % self.grid_size;
                rest /= self.grid_size;
                g
            })
            .collect()
    }

    pub fn grid_value(&self, index: usize) -> f64 {
        index as f64 / (self.grid_size - 1) as f64
    }

    /// Samples a release, refusing the empty membership.
    pub fn try_sample(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> Result<usize> {
        if b.member_count() == 0 {
            return Err(Error::Domain("cannot release statistics of an empty membership".into()));
        }
        Ok(self.sample(b, rng))
    }
}

impl DiscreteMechanism for DiscretizedSummary {
    fn membership_len(&self) -> usize {
        self.dataset.population_size()
    }

    fn output_count(&self) -> usize {
        self.outputs
    }

    fn pmf(&self, output: usize, b: &MembershipVector) -> f64 {
        check_len(self, b);
        self.grid_indices(b)
            .iter()
            .zip(self.decode(output))
            .map(|(&start, g)| self.shifted(start)[g])
            .product()
    }

    fn features(&self, output: usize) -> Vec<f64> {
        self.decode(output).iter().map(|&g| self.grid_value(g)).collect()
    }

    fn label(&self, output: usize) -> String {
        let v: Vec<String> = self.features(output).iter().map(|f| format!("{f:.4}")).collect();
        v.join(";")
    }
}

/// Deterministic coarsening `c = partition[x]` applied to another mechanism.
#[derive(Clone, Debug)]
pub struct Quantized {
    inner: MechanismRef,
    partition: Vec<usize>,
    coarse: usize,
}

pub fn quantize_postprocess(inner: MechanismRef, partition: Vec<usize>) -> Result<Quantized> {
    if partition.len() != inner.output_count() {
        return Err(param(format!(
            "partition covers {} of {} outputs",
            partition.len(),
            inner.output_count()
        )));
    }
    let coarse = partition.iter().max().map_or(0, |m| m + 1);
    Ok(Quantized {
        inner,
        partition,
        coarse,
    })
}

impl DiscreteMechanism for Quantized {
    fn membership_len(&self) -> usize {
        self.inner.membership_len()
    }

    fn output_count(&self) -> usize {
        self.coarse
    }

    fn pmf(&self, output: usize, b: &MembershipVector) -> f64 {
        self.conditional(b)[output]
    }

    fn conditional(&self, b: &MembershipVector) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse];
        for (x, p) in self.inner.conditional(b).into_iter().enumerate() {
            out[self.partition[x]] += p;
        }
        out
    }

    fn sample(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> usize {
        self.partition[self.inner.sample(b, rng)]
    }

    fn features(&self, output: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.coarse];
        v[output] = 1.0;
        v
    }
}

/// How the components of a composition draw their randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coupling {
    /// Independent randomness per component given `b`.
    Independent,
    /// One uniform drives every component's inverse CDF.
    SharedUniform,
}

/// `(M_1(b), ..., M_n(b))` with joint output index in mixed radix
/// (component 0 is the least significant digit).
#[derive(Clone, Debug)]
pub struct Composition {
    parts: Vec<MechanismRef>,
    coupling: Coupling,
    outputs: usize,
}

impl Composition {
    pub fn new(parts: Vec<MechanismRef>, coupling: Coupling) -> Result<Self> {
        let first = parts.first().ok_or_else(|| param("composition needs a mechanism"))?;
        let k = first.membership_len();
        if parts.iter().any(|p| p.membership_len() != k) {
            return Err(param("composed mechanisms must share the membership space"));
        }
        let outputs = parts
            .iter()
            .try_fold(1usize, |acc, p| acc.checked_mul(p.output_count()))
            .filter(|&n| n <= 1 << 24)
            .ok_or_else(|| Error::Capability("joint output space exceeds 2^24".into()))?;
        Ok(Self {
            parts,
            coupling,
            outputs,
        })
    }

    pub fn parts(&self) -> &[MechanismRef] {
        &self.parts
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    pub fn split(&self, output: usize) -> Vec<usize> {
        let mut rest = output;
        self.parts
            .iter()
            .map(|p| {
                let x = rest % p.output_count();
                rest /= p.output_count();
                x
            })
            .collect()
    }

    pub fn join(&self, symbols: &[usize]) -> usize {
        self.parts
            .iter()
            .zip(symbols)
            .rev()
            .fold(0, |acc, (p, &x)| acc * p.output_count() + x)
    }

    /// Samples every component and returns the tuple of symbols.
    pub fn sample_components(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> Vec<usize> {
        match self.coupling {
            Coupling::Independent => self.parts.iter().map(|p| p.sample(b, rng)).collect(),
            Coupling::SharedUniform => {
                let u = rng.gen::<f64>();
                self.parts.iter().map(|p| p.sample_with_uniform(b, u)).collect()
            }
        }
    }
}

impl DiscreteMechanism for Composition {
    fn membership_len(&self) -> usize {
        self.parts[0].membership_len()
    }

    fn output_count(&self) -> usize {
        self.outputs
    }

    fn pmf(&self, output: usize, b: &MembershipVector) -> f64 {
        let symbols = self.split(output);
        match self.coupling {
            Coupling::Independent => self
                .parts
                .iter()
                .zip(&symbols)
                .map(|(p, &x)| p.pmf(x, b))
                .product(),
            Coupling::SharedUniform => {
                // Each symbol occupies a u-interval of its component's CDF;
                // the joint mass is the length of their intersection.
                let mut lo: f64 = 0.0;
                let mut hi: f64 = 1.0;
                for (p, &x) in self.parts.iter().zip(&symbols) {
                    let cond = p.conditional(b);
                    if cond[x] <= 0.0 {
                        return 0.0;
                    }
                    let start: f64 = cond[..x].iter().filter(|v| **v > 0.0).sum();
                    lo = lo.max(start);
                    hi = hi.min(start + cond[x]);
                }
                (hi - lo).max(0.0)
            }
        }
    }

    fn conditional(&self, b: &MembershipVector) -> Vec<f64> {
        match self.coupling {
            Coupling::Independent => {
                let mut joint = vec![1.0];
                for p in self.parts.iter() {
                    let cond = p.conditional(b);
                    joint = cond
                        .iter()
                        .flat_map(|&c| joint.iter().map(move |&j| j * c))
                        .collect();
                }
                joint
            }
            Coupling::SharedUniform => (0..self.outputs).map(|x| self.pmf(x, b)).collect(),
        }
    }

    fn sample(&self, b: &MembershipVector, rng: &mut dyn RngCore) -> usize {
        let symbols = self.sample_components(b, rng);
        self.join(&symbols)
    }

    fn features(&self, output: usize) -> Vec<f64> {
        self.parts
            .iter()
            .zip(self.split(output))
            .flat_map(|(p, x)| p.features(x))
            .collect()
    }
}

/// Samples every mechanism for membership `b`, each with its own randomness
/// (`Coupling::Independent`) or all from one shared uniform.
pub fn compose_mechanisms(
    mechs: &[MechanismRef],
    coupling: Coupling,
    b: &MembershipVector,
    rng: &mut dyn RngCore,
) -> Result<Vec<usize>> {
    let comp = Composition::new(mechs.to_vec(), coupling)?;
    Ok(comp.sample_components(b, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_b(k: usize) -> impl Iterator<Item = MembershipVector> {
        (0..1usize << k).map(move |i| MembershipVector::from_index(i, k))
    }

    fn assert_normalized(m: &dyn DiscreteMechanism) {
        for b in all_b(m.membership_len()) {
            let total: f64 = m.conditional(&b).iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{m:?} b={b}: {total}");
        }
    }

    fn chi_square_ok(m: &dyn DiscreteMechanism, b: &MembershipVector, seed: u64) {
        let n = 100_000;
        let pmf = m.conditional(b);
        let mut counts = vec![0usize; pmf.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            counts[m.sample(b, &mut rng)] += 1;
        }
        let mut stat = 0.0;
        let mut cells = 0;
        for (c, p) in counts.iter().zip(&pmf) {
            if *p > 0.0 {
                let e = p * n as f64;
                stat += (*c as f64 - e).powi(2) / e;
                cells += 1;
            } else {
                assert_eq!(*c, 0, "sampled a zero-mass output");
            }
        }
        // Wilson-Hilferty 1e-3 upper quantile.
        let dof = (cells - 1).max(1) as f64;
        let z = 3.09;
        let q = dof * (1.0 - 2.0 / (9.0 * dof) + z * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!(stat < q, "chi-square {stat} >= {q} ({m:?})");
    }

    #[test]
    fn bitflip_examples() {
        let m = bitflip_mechanism(3, 0.0).unwrap();
        let b = MembershipVector::new(vec![1, 0, 1]).unwrap();
        assert_eq!(m.pmf(b.to_index(), &b), 1.0);
        let m = bitflip_mechanism(3, 0.5).unwrap();
        for y in 0..8 {
            assert!((m.pmf(y, &b) - 0.125).abs() < 1e-15);
        }
        let m = bitflip_mechanism(2, 0.25).unwrap();
        let z = MembershipVector::zeros(2);
        // outputs (0,0), (0,1), (1,0), (1,1) with y_1 the high bit
        let expected = [0.5625, 0.1875, 0.1875, 0.0625];
        for (y, e) in [0b00, 0b10, 0b01, 0b11].iter().zip(expected) {
            assert!((m.pmf(*y, &z) - e).abs() < 1e-15);
        }
        assert!(bitflip_mechanism(2, 0.6).is_err());
        assert!(bitflip_mechanism(2, -0.1).is_err());
    }

    #[test]
    fn discretized_examples() {
        let d = Arc::new(PopulationDataset::new(vec![vec![1], vec![0]], vec![0.5], 1e-3).unwrap());
        let both = MembershipVector::ones(2);
        let point = discretized_summary_mechanism(d.clone(), 3, &[(0, 1.0)]).unwrap();
        assert_eq!(point.conditional(&both), vec![0.0, 1.0, 0.0]);

        let third = 1.0 / 3.0;
        let m = discretized_summary_mechanism(d.clone(), 3, &[(-1, third), (0, third), (1, third)]).unwrap();
        for p in m.conditional(&both) {
            assert!((p - third).abs() < 1e-15);
        }

        let top = MembershipVector::new(vec![1, 0]).unwrap();
        let m = discretized_summary_mechanism(d.clone(), 3, &[(0, 0.5), (1, 0.5)]).unwrap();
        assert_eq!(m.conditional(&top), vec![0.0, 0.0, 1.0]);
        assert!(m.try_sample(&MembershipVector::zeros(2), &mut ChaCha8Rng::seed_from_u64(0)).is_err());

        assert!(discretized_summary_mechanism(d.clone(), 1, &[(0, 1.0)]).is_err());
        assert!(discretized_summary_mechanism(d, 3, &[(0, 0.4)]).is_err());
    }

    #[test]
    fn composition_examples() {
        let bf: MechanismRef = Arc::new(bitflip_mechanism(1, 0.25).unwrap());
        let zero = MembershipVector::zeros(1);

        let single = Composition::new(vec![bf.clone()], Coupling::Independent).unwrap();
        assert_eq!(single.conditional(&zero), bf.conditional(&zero));

        let pair = Composition::new(vec![bf.clone(), bf.clone()], Coupling::Independent).unwrap();
        let expected = [0.5625, 0.1875, 0.1875, 0.0625];
        for (x, e) in pair.conditional(&zero).iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }

        let coupled = Composition::new(vec![bf.clone(), bf], Coupling::SharedUniform).unwrap();
        let joint = coupled.conditional(&zero);
        assert!((joint[0] - 0.75).abs() < 1e-15 && (joint[3] - 0.25).abs() < 1e-15);
        assert_eq!((joint[1], joint[2]), (0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let s = coupled.sample_components(&zero, &mut rng);
            assert_eq!(s[0], s[1]);
        }
    }

    #[test]
    fn independent_composition_is_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: MechanismRef = Arc::new(TableMechanism::random(3, 3, &mut rng));
        let c: MechanismRef = Arc::new(TableMechanism::random(3, 4, &mut rng));
        let comp = Composition::new(vec![a.clone(), c.clone()], Coupling::Independent).unwrap();
        for b in all_b(3) {
            for x in 0..12 {
                let s = comp.split(x);
                assert_eq!(comp.join(&s), x);
                assert_eq!(comp.pmf(x, &b), a.pmf(s[0], &b) * c.pmf(s[1], &b));
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let bf: MechanismRef = Arc::new(bitflip_mechanism(2, 0.25).unwrap());
        let id = quantize_postprocess(bf.clone(), (0..4).collect()).unwrap();
        let ones = quantize_postprocess(bf.clone(), vec![0; 4]).unwrap();
        let parity = quantize_postprocess(bf.clone(), vec![0, 1, 1, 0]).unwrap();
        for b in all_b(2) {
            assert_eq!(id.conditional(&b), bf.conditional(&b));
            assert_eq!(ones.conditional(&b), vec![1.0]);
            let even = bf.pmf(0, &b) + bf.pmf(3, &b);
            let odd = bf.pmf(1, &b) + bf.pmf(2, &b);
            assert_eq!(parity.conditional(&b), vec![even, odd]);
        }
        assert!(quantize_postprocess(bf, vec![0, 1]).is_err());
    }

    #[test]
    fn every_mechanism_normalizes_and_samples_faithfully() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = Arc::new(crate::data::generate_synthetic_population(4, 2, 0.2, 0.8, 1).unwrap());
        let table: MechanismRef = Arc::new(TableMechanism::random(4, 5, &mut rng));
        let bf: MechanismRef = Arc::new(bitflip_mechanism(4, 0.3).unwrap());
        let disc: MechanismRef = Arc::new(
            discretized_summary_mechanism(d, 5, &[(-1, 0.25), (0, 0.5), (2, 0.25)]).unwrap(),
        );
        let mechs: Vec<MechanismRef> = vec![
            table.clone(),
            bf.clone(),
            disc.clone(),
            Arc::new(quantize_postprocess(table.clone(), vec![0, 1, 0, 2, 1]).unwrap()),
            Arc::new(Composition::new(vec![table.clone(), bf.clone()], Coupling::Independent).unwrap()),
            Arc::new(Composition::new(vec![table, disc], Coupling::SharedUniform).unwrap()),
        ];
        for (i, m) in mechs.iter().enumerate() {
            assert_normalized(m.as_ref());
            chi_square_ok(m.as_ref(), &MembershipVector::new(vec![1, 0, 1, 1]).unwrap(), i as u64);
        }
        // K = 10 exhaustive normalization.
        assert_normalized(&bitflip_mechanism(10, 0.2).unwrap());
    }
}
