//! Population datasets, membership vectors and membership priors.
//!
//! A population is a `K x m` matrix of bits: row `k` holds the attributes of
//! individual `k`. A membership vector selects which rows form the private
//! dataset. Priors over membership vectors are either independent Bernoulli
//! draws per individual or a uniformly random subset of fixed size.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Clamp applied to reference frequencies (and released frequencies inside
/// the likelihood-ratio statistic) so that logarithms stay finite.
pub const DEFAULT_P_FLOOR: f64 = 1e-3;

/// Largest population for which priors are expanded into dense tables.
pub const DENSE_PRIOR_LIMIT: usize = 20;

/// Binary attribute matrix plus the reference frequencies known to attackers.
///
/// Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationDataset {
    records: Vec<u8>,
    population: usize,
    attributes: usize,
    reference: Vec<f64>,
    p_floor: f64,
}

impl PopulationDataset {
    /// Builds a dataset from rows of bits. Reference frequencies are clamped
    /// to `[p_floor, 1 - p_floor]`.
    pub fn new(rows: Vec<Vec<u8>>, reference: Vec<f64>, p_floor: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(param("population must contain at least one record"));
        }
        let attributes = rows[0].len();
        if attributes == 0 {
            return Err(param("records must have at least one attribute"));
        }
        let population = rows.len();
        let mut records = Vec::with_capacity(population * attributes);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != attributes {
                return Err(param(format!(
                    "record {k} has {} attributes, expected {attributes}",
                    row.len()
                )));
            }
            records.extend_from_slice(row);
        }
        Self::from_flat(records, population, attributes, reference, p_floor)
    }

    /// Builds a dataset from a row-major `population x attributes` buffer.
    pub fn from_flat(
        records: Vec<u8>,
        population: usize,
        attributes: usize,
        reference: Vec<f64>,
        p_floor: f64,
    ) -> Result<Self> {
        if population == 0 || attributes == 0 {
            return Err(param("population and attribute counts must be positive"));
        }
        if records.len() != population * attributes {
            return Err(param("record buffer does not match the declared shape"));
        }
        if let Some(pos) = records.iter().position(|&v| v > 1) {
            return Err(param(format!(
                "record {} attribute {} is {}, expected 0 or 1",
                pos / attributes,
                pos % attributes,
                records[pos]
            )));
        }
        if !(p_floor > 0.0 && p_floor < 0.5) {
            return Err(param(format!("p_floor must lie in (0, 0.5), got {p_floor}")));
        }
        if reference.len() != attributes {
            return Err(param(format!(
                "expected {attributes} reference frequencies, got {}",
                reference.len()
            )));
        }
        if reference.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(param("reference frequencies must lie in [0, 1]"));
        }
        let reference = reference
            .into_iter()
            .map(|p| p.clamp(p_floor, 1.0 - p_floor))
            .collect();
        Ok(Self {
            records,
            population,
            attributes,
            reference,
            p_floor,
        })
    }

    /// `K`, the number of individuals.
    pub fn population_size(&self) -> usize {
        self.population
    }

    /// `m`, the number of attributes per record.
    pub fn attribute_count(&self) -> usize {
        self.attributes
    }

    pub fn record(&self, k: usize) -> &[u8] {
        &self.records[k * self.attributes..(k + 1) * self.attributes]
    }

    pub fn get(&self, k: usize, j: usize) -> u8 {
        self.records[k * self.attributes + j]
    }

    pub fn records(&self) -> impl Iterator<Item = &[u8]> {
        self.records.chunks_exact(self.attributes)
    }

    pub fn reference_frequencies(&self) -> &[f64] {
        &self.reference
    }

    pub fn p_floor(&self) -> f64 {
        self.p_floor
    }

    /// Column means over all records.
    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.attributes];
        for row in self.records() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += f64::from(v);
            }
        }
        sums.iter().map(|s| s / self.population as f64).collect()
    }
}

/// Draws a synthetic population.
///
/// Attribute `j` gets a frequency `q_j ~ U[aaf_low, aaf_high]`; every bit in
/// column `j` is then an independent `Bernoulli(q_j)`. Reference frequencies
/// are the generating `q_j` (clamped).
pub fn generate_synthetic_population(
    population: usize,
    attributes: usize,
    aaf_low: f64,
    aaf_high: f64,
    seed: u64,
) -> Result<PopulationDataset> {
    if population == 0 || attributes == 0 {
        return Err(param("population and attribute counts must be positive"));
    }
    if !(aaf_low > 0.0 && aaf_low <= aaf_high && aaf_high < 1.0) {
        return Err(param(format!(
            "need 0 < aaf_low <= aaf_high < 1, got [{aaf_low}, {aaf_high}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let freqs: Vec<f64> = (0..attributes)
        .map(|_| {
            if aaf_low == aaf_high {
                aaf_low
            } else {
                rng.gen_range(aaf_low..=aaf_high)
            }
        })
        .collect();
    let mut records = Vec::with_capacity(population * attributes);
    for _ in 0..population {
        for &q in &freqs {
            records.push(u8::from(rng.gen::<f64>() < q));
        }
    }
    PopulationDataset::from_flat(records, population, attributes, freqs, DEFAULT_P_FLOOR)
}

/// Membership vector `b`: `b[k] == 1` iff individual `k` is in the dataset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MembershipVector(Vec<u8>);

impl MembershipVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(param("membership bits must be 0 or 1"));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1; len])
    }

    /// Decodes the low `len` bits of `index`; bit `k` is `b_k`.
    pub fn from_index(index: usize, len: usize) -> Self {
        Self((0..len).map(|k| ((index >> k) & 1) as u8).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | (usize::from(b) << k))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_member(&self, k: usize) -> bool {
        self.0[k] == 1
    }

    pub fn member_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

impl fmt::Display for MembershipVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Distribution over membership vectors. One instance plays the true prior,
/// another may play an attacker's subjective prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MembershipPrior {
    /// `b_k ~ Bernoulli(pi_k)` independently.
    IndependentBernoulli { probs: Vec<f64> },
    /// Uniform over vectors with exactly `members` ones.
    FixedSizeUniform { population: usize, members: usize },
}

impl MembershipPrior {
    pub fn independent(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(param("prior needs at least one individual"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(param("Bernoulli probabilities must lie in [0, 1]"));
        }
        Ok(Self::IndependentBernoulli { probs })
    }

    pub fn uniform_bernoulli(population: usize, prob: f64) -> Result<Self> {
        Self::independent(vec![prob; population])
    }

    pub fn fixed_size(population: usize, members: usize) -> Result<Self> {
        if members == 0 || members > population {
            return Err(param(format!(
                "fixed-size prior needs 1 <= n <= K, got n={members}, K={population}"
            )));
        }
        Ok(Self::FixedSizeUniform {
            population,
            members,
        })
    }

    pub fn population_size(&self) -> usize {
        match self {
            Self::IndependentBernoulli { probs } => probs.len(),
            Self::FixedSizeUniform { population, .. } => *population,
        }
    }

    pub fn pmf(&self, b: &MembershipVector) -> f64 {
        if b.len() != self.population_size() {
            return 0.0;
        }
        match self {
            Self::IndependentBernoulli { probs } => probs
                .iter()
                .zip(b.bits())
                .map(|(&p, &bit)| if bit == 1 { p } else { 1.0 - p })
                .product(),
            Self::FixedSizeUniform {
                population,
                members,
            } => {
                if b.member_count() == *members {
                    1.0 / binomial(*population, *members)
                } else {
                    0.0
                }
            }
        }
    }

    /// `Pr[b_k = 1]`.
    pub fn marginal(&self, k: usize) -> f64 {
        match self {
            Self::IndependentBernoulli { probs } => probs[k],
            Self::FixedSizeUniform {
                population,
                members,
            } => *members as f64 / *population as f64,
        }
    }

    /// Probability mass of every vector, indexed by [`MembershipVector::to_index`].
    pub fn dense_pmf(&self) -> Result<Vec<f64>> {
        let k = self.population_size();
        if k > DENSE_PRIOR_LIMIT {
            return Err(Error::Capability(format!(
                "dense prior table needs K <= {DENSE_PRIOR_LIMIT}, got {k}"
            )));
        }
        Ok((0..1usize << k)
            .map(|i| self.pmf(&MembershipVector::from_index(i, k)))
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MembershipVector {
        match self {
            Self::IndependentBernoulli { probs } => MembershipVector(
                probs
                    .iter()
                    .map(|&p| u8::from(rng.gen::<f64>() < p))
                    .collect(),
            ),
            Self::FixedSizeUniform {
                population,
                members,
            } => {
                let mut bits = vec![0u8; *population];
                for i in index::sample(rng, *population, *members) {
                    bits[i] = 1;
                }
                MembershipVector(bits)
            }
        }
    }

    /// Samples until the vector has at least one member; also returns the
    /// number of rejected draws.
    pub fn sample_nonempty<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(MembershipVector, usize)> {
        let can_be_nonempty = match self {
            Self::IndependentBernoulli { probs } => probs.iter().any(|&p| p > 0.0),
            Self::FixedSizeUniform { .. } => true,
        };
        if !can_be_nonempty {
            return Err(Error::Domain("prior only produces the empty membership".into()));
        }
        let mut rejected = 0;
        loop {
            let b = self.sample(rng);
            if b.member_count() > 0 {
                return Ok((b, rejected));
            }
            rejected += 1;
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

const REFERENCE_TAG: &str = "#ref";

/// Reads a dataset whose first line is `#ref,` followed by the `m`
/// reference frequencies; each remaining line is one record of `m` bits.
pub fn load_population_csv(path: impl AsRef<Path>) -> Result<PopulationDataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_row, header) = lines.next().ok_or(Error::Parse {
        row: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields[0] != REFERENCE_TAG {
        return Err(Error::Parse {
            row: header_row + 1,
            column: 1,
            message: format!("missing `{REFERENCE_TAG}` header row"),
        });
    }
    let mut reference = Vec::with_capacity(fields.len() - 1);
    for (j, f) in fields[1..].iter().enumerate() {
        let p: f64 = f.parse().map_err(|_| Error::Parse {
            row: header_row + 1,
            column: j + 2,
            message: format!("reference frequency `{f}` is not a number"),
        })?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parse {
                row: header_row + 1,
                column: j + 2,
                message: format!("reference frequency {p} outside [0, 1]"),
            });
        }
        reference.push(p);
    }
    let rows = parse_rows(lines, reference.len())?;
    PopulationDataset::new(rows, reference, DEFAULT_P_FLOOR)
}

/// Reads a headerless dataset and uses its last `reference_rows` records as
/// the reference split: their column means become the reference frequencies
/// and they are excluded from the returned population.
pub fn load_population_csv_with_reference_split(
    path: impl AsRef<Path>,
    reference_rows: usize,
) -> Result<PopulationDataset> {
    let text = fs::read_to_string(path)?;
    let lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let width = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split(',').count())
        .unwrap_or(0);
    let mut rows = parse_rows(lines, width)?;
    if reference_rows == 0 || reference_rows >= rows.len() {
        return Err(param(format!(
            "reference split of {reference_rows} rows leaves no population (file has {})",
            rows.len()
        )));
    }
    let split = rows.split_off(rows.len() - reference_rows);
    let reference = (0..width)
        .map(|j| split.iter().map(|r| f64::from(r[j])).sum::<f64>() / reference_rows as f64)
        .collect();
    PopulationDataset::new(rows, reference, DEFAULT_P_FLOOR)
}

fn parse_rows<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    width: usize,
) -> Result<Vec<Vec<u8>>> {
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let row_no = line_no + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != width {
            return Err(Error::Parse {
                row: row_no,
                column: cells.len().min(width) + 1,
                message: format!("expected {width} cells, found {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (j, c) in cells.iter().enumerate() {
            match *c {
                "0" => row.push(0),
                "1" => row.push(1),
                other => {
                    return Err(Error::Parse {
                        row: row_no,
                        column: j + 1,
                        message: format!("cell `{other}` is not a bit"),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 2,
            column: 1,
            message: "no records".into(),
        });
    }
    Ok(rows)
}

/// Writes `dataset` in the format read by [`load_population_csv`].
pub fn write_population_csv(dataset: &PopulationDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str(REFERENCE_TAG);
    for p in dataset.reference_frequencies() {
        out.push(',');
        out.push_str(&p.to_string());
    }
    out.push('\n');
    for row in dataset.records() {
        let cells: Vec<&str> = row.iter().map(|&b| if b == 1 { "1" } else { "0" }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
