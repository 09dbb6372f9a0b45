//! `sweep-capacity`: how close does a one-hidden-layer discriminator of each
//! width get to the exact optimal CEL on an enumerable mechanism?

use std::path::{Path, PathBuf};

use bngp::attacks::{discriminator_scores, train_bgp_exact, AttackConfig, TrainingSchedule};
use bngp::mechanisms::{bitflip_mechanism, DiscreteMechanism};
use bngp::metrics::{mean_std, median};
use bngp::neural::AdamConfig;
use bngp::oracle::{exact_conditional_entropy, exact_marginal_cel, predictor_cel, PriorTable, LOG_CLAMP};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PriorSpec;
use crate::error::{CliError, CliResult};
use crate::output::RunWriter;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    pub name: String,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub mechanism: BitflipSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub training: CapacityTraining,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitflipSpec {
    pub population: usize,
    pub flip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityTraining {
    pub steps: usize,
    pub learning_rate: f64,
    pub steps_per_epoch: usize,
    pub decay_rate: f64,
}

impl Default for CapacityTraining {
    fn default() -> Self {
        Self {
            steps: 3000,
            learning_rate: 1e-2,
            steps_per_epoch: 100,
            decay_rate: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRow {
    pub width: usize,
    pub seed: u64,
    pub trained_cel: f64,
    /// Best CEL any per-individual predictor can reach.
    pub oracle_cel: f64,
    pub conditional_entropy: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    pub width: usize,
    pub seeds: usize,
    pub median_gap: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
}

#[derive(Debug)]
pub struct CapacityReport {
    pub dir: PathBuf,
    pub gaps: Vec<GapRow>,
    pub summary: Vec<GapSummary>,
}

impl CapacityReport {
    /// Median gaps never increase along the configured width order.
    pub fn monotone(&self) -> bool {
        self.summary.windows(2).all(|w| w[1].median_gap <= w[0].median_gap)
    }
}

impl CapacityConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::config("name must be a nonempty path component"));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(CliError::config("widths must be a nonempty list of positive sizes"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must be nonempty"));
        }
        let t = &self.training;
        if t.steps == 0 || t.steps_per_epoch == 0 || !(t.learning_rate > 0.0) || !(t.decay_rate > 0.0 && t.decay_rate <= 1.0) {
            return Err(CliError::config("training needs positive steps, epoch length and learning rate, and decay in (0, 1]"));
        }
        // builds the mechanism and prior table, which checks the oracle guards
        self.instance().map(|_| ())
    }

    fn instance(&self) -> CliResult<(impl DiscreteMechanism, PriorTable)> {
        let mech = bitflip_mechanism(self.mechanism.population, self.mechanism.flip)?;
        let prior = PriorTable::from_prior(&self.prior.build(self.mechanism.population)?)?;
        Ok((mech, prior))
    }

    fn attack_config(&self, width: usize, seed: u64) -> AttackConfig {
        let k = self.mechanism.population;
        let mut cfg = AttackConfig::single_hidden(k, k, width, seed);
        let t = &self.training;
        cfg.schedule = TrainingSchedule {
            steps: t.steps,
            batch_size: 1,
            steps_per_epoch: t.steps_per_epoch,
            optimizer: AdamConfig {
                learning_rate: t.learning_rate,
                decay_rate: t.decay_rate,
                ..AdamConfig::default()
            },
        };
        cfg
    }
}

/// Trains one discriminator per (width, seed) on the exact expected CEL and
/// reports its distance to the oracle. Returns a contract error (after
/// writing the tables) when the median gap grows with width.
pub fn capacity_sweep(cfg: &CapacityConfig, workers: usize) -> CliResult<CapacityReport> {
    let report = capacity_tables(cfg, workers)?;
    if !report.monotone() {
        let medians: Vec<String> = report.summary.iter().map(|s| format!("w{}={:.3e}", s.width, s.median_gap)).collect();
        return Err(CliError::Contract(format!(
            "capacity: median CEL gap increases with width ({})",
            medians.join(", ")
        )));
    }
    Ok(report)
}

/// Like [`capacity_sweep`] without the monotonicity verdict.
pub fn capacity_tables(cfg: &CapacityConfig, workers: usize) -> CliResult<CapacityReport> {
    cfg.validate()?;
    let (mech, prior) = cfg.instance()?;
    let oracle = exact_marginal_cel(&mech, &prior)?;
    let entropy = exact_conditional_entropy(&mech, &prior)?;
    let tasks: Vec<(usize, u64)> = cfg
        .widths
        .iter()
        .flat_map(|&w| cfg.seeds.iter().map(move |&s| (w, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let gaps: Vec<GapRow> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(width, seed)| -> CliResult<GapRow> {
                let net = train_bgp_exact(&mech, &prior, &cfg.attack_config(width, seed))
                    .map_err(|e| CliError::Training {
                        context: format!("capacity width {width}, seed {seed}"),
                        message: e.to_string(),
                    })?
                    .discriminator;
                let trained = predictor_cel(
                    &mech,
                    &prior,
                    &|x| discriminator_scores(&net, &mech.features(x)).map(|s| s.soft).unwrap_or_default(),
                    LOG_CLAMP,
                )?;
                Ok(GapRow {
                    width,
                    seed,
                    trained_cel: trained,
                    oracle_cel: oracle,
                    conditional_entropy: entropy,
                    gap: trained - oracle,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let summary: Vec<GapSummary> = cfg
        .widths
        .iter()
        .map(|&w| {
            let g: Vec<f64> = gaps.iter().filter(|r| r.width == w).map(|r| r.gap).collect();
            let (mean, std) = mean_std(&g);
            GapSummary {
                width: w,
                seeds: g.len(),
                median_gap: median(&g),
                mean_gap: mean,
                std_gap: std,
            }
        })
        .collect();
    let dir = cfg.output_dir.join(&cfg.name);
    let mut writer = RunWriter::create(&dir)?;
    writer.write("config.toml", toml::to_string(cfg).map_err(|e| CliError::config(e.to_string()))?.as_bytes())?;
    writer.write_csv("gaps.csv", &gaps)?;
    writer.write_csv("summary.csv", &summary)?;
    writer.finish()?;
    Ok(CapacityReport { dir, gaps, summary })
}
