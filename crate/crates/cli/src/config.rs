//! TOML experiment configs. Unknown keys are rejected everywhere so a typo
//! fails loudly instead of silently running the default.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use bngp::attacks::{AttackConfig, TrainingSchedule};
use bngp::data::{generate_synthetic_population, load_population_csv, load_population_csv_with_reference_split};
use bngp::data::{MembershipPrior, PopulationDataset};
use bngp::defense::{DefenderConfig, GameSchedule, Kappa, Objective};
use bngp::neural::{AdamConfig, HiddenActivation};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Every scalar `kappa` of a trained defender is replaced by each value in turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_grid: Option<Vec<f64>>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub prior: PriorSpec,
    #[serde(default)]
    pub architecture: ArchitectureSpec,
    #[serde(default)]
    pub game: GameSpec,
    #[serde(default)]
    pub attack_training: AttackTrainingSpec,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    pub defenders: Vec<DefenderSpec>,
    pub attackers: Vec<AttackerSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Bernoulli genotypes with allele frequencies drawn from `[aaf_low, aaf_high]`.
    /// Without `seed` every run seed draws its own population.
    Synthetic {
        population: usize,
        attributes: usize,
        aaf_low: f64,
        aaf_high: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// A population file; with `reference_rows` the last rows become the reference panel.
    Csv {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_rows: Option<usize>,
    },
    /// Randomized response on the membership bits themselves: a release
    /// small enough for exact enumeration.
    Bitflip { population: usize, flip: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Bernoulli { prob: f64 },
    Independent { probs: Vec<f64> },
    FixedSize { members: usize },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Bernoulli { prob: 0.5 }
    }
}

impl PriorSpec {
    pub fn build(&self, population: usize) -> CliResult<MembershipPrior> {
        Ok(match self {
            PriorSpec::Bernoulli { prob } => MembershipPrior::uniform_bernoulli(population, *prob)?,
            PriorSpec::Independent { probs } => {
                if probs.len() != population {
                    return Err(CliError::config(format!(
                        "prior lists {} probabilities for a population of {population}",
                        probs.len()
                    )));
                }
                MembershipPrior::independent(probs.clone())?
            }
            PriorSpec::FixedSize { members } => MembershipPrior::fixed_size(population, *members)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchitectureSpec {
    pub generator_widths: [usize; 2],
    pub aux_dim: usize,
    pub generator_leaky: bool,
    pub attacker_width: usize,
}

impl Default for ArchitectureSpec {
    fn default() -> Self {
        Self {
            generator_widths: [64, 64],
            aux_dim: 8,
            generator_leaky: false,
            attacker_width: 64,
        }
    }
}

/// Schedule shared by every trained defender.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameSpec {
    pub rounds: usize,
    pub attacker_steps: usize,
    pub batch_size: usize,
    pub rounds_per_epoch: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    pub min_improvement: f64,
    pub generator_lr: f64,
    pub attacker_lr: f64,
    pub penalty: f64,
}

impl Default for GameSpec {
    fn default() -> Self {
        Self {
            rounds: 1000,
            attacker_steps: 5,
            batch_size: 64,
            rounds_per_epoch: 50,
            patience: None,
            min_improvement: 1e-4,
            generator_lr: 1e-3,
            attacker_lr: 1e-3,
            penalty: 100.0,
        }
    }
}

/// Training of the BGP attackers evaluated against each frozen defender.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackTrainingSpec {
    pub steps: usize,
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    pub learning_rate: f64,
}

impl Default for AttackTrainingSpec {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 64,
            steps_per_epoch: 100,
            learning_rate: 1e-3,
        }
    }
}

pub const METRICS: [&str; 3] = ["auc", "bwma", "utility"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSpec {
    /// Fresh releases per (defender, attacker) evaluation.
    pub releases: usize,
    pub gammas: Vec<f64>,
    pub metrics: Vec<String>,
    pub write_checkpoints: bool,
    pub write_plots: bool,
}

impl Default for EvaluationSpec {
    fn default() -> Self {
        Self {
            releases: 500,
            gammas: vec![0.5],
            metrics: METRICS.iter().map(|s| s.to_string()).collect(),
            write_checkpoints: true,
            write_plots: true,
        }
    }
}

impl EvaluationSpec {
    pub fn wants(&self, metric: &str) -> bool {
        self.metrics.iter().any(|m| m == metric)
    }
}

/// Per-attribute utility weights as written in a config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Scalar(f64),
    Vector(Vec<f64>),
    /// `kappa_j = 0` on the first `zero_fraction` of attributes, `weight` elsewhere.
    MostlyFree { zero_fraction: f64, weight: f64 },
}

impl KappaSpec {
    pub fn build(&self, attributes: usize) -> Kappa {
        match self {
            KappaSpec::Scalar(k) => Kappa::Scalar(*k),
            KappaSpec::Vector(v) => Kappa::Vector(v.clone()),
            KappaSpec::MostlyFree { zero_fraction, weight } => Kappa::mostly_free(attributes, *zero_fraction, *weight),
        }
    }

    pub fn label(&self) -> String {
        match self {
            KappaSpec::Scalar(k) => format!("{k}"),
            _ => "vector".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DefenderSpec {
    None {
        #[serde(default = "none_name")]
        name: String,
    },
    Bngp {
        #[serde(default = "bngp_name")]
        name: String,
        kappa: KappaSpec,
        #[serde(default = "preference")]
        objective: Objective,
        #[serde(default = "one")]
        norm_order: f64,
    },
    /// Best response to a fixed-threshold LRT: give `tau`, or `target_fpr`
    /// to pick the threshold with that false-positive rate on undefended releases.
    FixedLrt {
        #[serde(default = "fixed_lrt_name")]
        name: String,
        kappa: KappaSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_fpr: Option<f64>,
    },
    AdaptiveLrt {
        #[serde(default = "adaptive_lrt_name")]
        name: String,
        kappa: KappaSpec,
        reference_ids: Vec<usize>,
        n: usize,
    },
    /// Laplace noise at a given `epsilon`, or calibrated to the measured
    /// kappa-weighted noise of the trained defender named by `matched_to`.
    Dp {
        #[serde(default = "dp_name")]
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matched_to: Option<String>,
        /// Dataset size in the sensitivity `m / k_dagger`; defaults to the
        /// expected member count under the prior.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_dagger: Option<usize>,
    },
}

fn none_name() -> String {
    "none".into()
}
fn bngp_name() -> String {
    "bngp".into()
}
fn fixed_lrt_name() -> String {
    "fixed-lrt".into()
}
fn adaptive_lrt_name() -> String {
    "adaptive-lrt".into()
}
fn dp_name() -> String {
    "dp".into()
}
fn preference() -> Objective {
    Objective::Preference
}
fn one() -> f64 {
    1.0
}

impl DefenderSpec {
    pub fn name(&self) -> &str {
        match self {
            DefenderSpec::None { name }
            | DefenderSpec::Bngp { name, .. }
            | DefenderSpec::FixedLrt { name, .. }
            | DefenderSpec::AdaptiveLrt { name, .. }
            | DefenderSpec::Dp { name, .. } => name,
        }
    }

    pub fn kappa(&self) -> Option<&KappaSpec> {
        match self {
            DefenderSpec::Bngp { kappa, .. } | DefenderSpec::FixedLrt { kappa, .. } | DefenderSpec::AdaptiveLrt { kappa, .. } => {
                Some(kappa)
            }
            _ => None,
        }
    }

    fn trains_generator(&self) -> bool {
        self.kappa().is_some()
    }

    /// Copy with a scalar kappa replaced by `value`; vector kappas are kept.
    pub fn with_kappa(&self, value: Option<f64>) -> DefenderSpec {
        let mut out = self.clone();
        if let Some(v) = value {
            if let DefenderSpec::Bngp { kappa, .. } | DefenderSpec::FixedLrt { kappa, .. } | DefenderSpec::AdaptiveLrt { kappa, .. } =
                &mut out
            {
                if matches!(kappa, KappaSpec::Scalar(_)) {
                    *kappa = KappaSpec::Scalar(v);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AttackerSpec {
    Bgp {
        #[serde(default = "bgp_name")]
        name: String,
    },
    FixedLrt {
        #[serde(default = "fixed_lrt_name")]
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_fpr: Option<f64>,
    },
    AdaptiveLrt {
        #[serde(default = "adaptive_lrt_name")]
        name: String,
        reference_ids: Vec<usize>,
        n: usize,
    },
    /// Exact likelihood ratios; needs an enumerable (bitflip) dataset.
    OptimalLrt {
        #[serde(default = "optimal_lrt_name")]
        name: String,
    },
    Score {
        #[serde(default = "score_name")]
        name: String,
        #[serde(default)]
        threshold: f64,
    },
}

fn bgp_name() -> String {
    "bgp".into()
}
fn optimal_lrt_name() -> String {
    "optimal-lrt".into()
}
fn score_name() -> String {
    "score".into()
}

impl AttackerSpec {
    pub fn name(&self) -> &str {
        match self {
            AttackerSpec::Bgp { name }
            | AttackerSpec::FixedLrt { name, .. }
            | AttackerSpec::AdaptiveLrt { name, .. }
            | AttackerSpec::OptimalLrt { name }
            | AttackerSpec::Score { name, .. } => name,
        }
    }
}

/// A dataset ready for experiments.
#[derive(Clone, Debug)]
pub enum Instance {
    Population(PopulationDataset),
    Bitflip { population: usize, flip: f64 },
}

impl Instance {
    pub fn population(&self) -> usize {
        match self {
            Instance::Population(d) => d.population_size(),
            Instance::Bitflip { population, .. } => *population,
        }
    }

    pub fn attributes(&self) -> usize {
        match self {
            Instance::Population(d) => d.attribute_count(),
            Instance::Bitflip { population, .. } => *population,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative dataset paths are relative to the config file
        if let DatasetSpec::Csv { path: data, .. } = &mut cfg.dataset {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    /// Kappa values to sweep; `[None]` keeps each defender's own kappa.
    pub fn kappa_values(&self) -> Vec<Option<f64>> {
        match &self.kappa_grid {
            Some(grid) => grid.iter().map(|k| Some(*k)).collect(),
            None => vec![None],
        }
    }

    pub fn build_instance(&self, seed: u64) -> CliResult<Instance> {
        Ok(match &self.dataset {
            DatasetSpec::Synthetic {
                population,
                attributes,
                aaf_low,
                aaf_high,
                seed: data_seed,
            } => Instance::Population(generate_synthetic_population(
                *population,
                *attributes,
                *aaf_low,
                *aaf_high,
                data_seed.unwrap_or(seed),
            )?),
            DatasetSpec::Csv { path, reference_rows } => Instance::Population(match reference_rows {
                Some(r) => load_population_csv_with_reference_split(path, *r)?,
                None => load_population_csv(path)?,
            }),
            DatasetSpec::Bitflip { population, flip } => Instance::Bitflip {
                population: *population,
                flip: *flip,
            },
        })
    }

    pub fn defender_config(&self, population: usize, attributes: usize, spec: &DefenderSpec, seed: u64) -> CliResult<DefenderConfig> {
        let kappa = spec
            .kappa()
            .ok_or_else(|| CliError::config(format!("defender `{}` trains no generator", spec.name())))?
            .build(attributes);
        let a = &self.architecture;
        let mut cfg = DefenderConfig::two_hidden(population, attributes, a.aux_dim, (a.generator_widths[0], a.generator_widths[1]), kappa, seed);
        if a.generator_leaky {
            cfg.generator.hidden = HiddenActivation::leaky();
        }
        if let DefenderSpec::Bngp { objective, norm_order, .. } = spec {
            cfg.objective = *objective;
            cfg.utility.norm_order = *norm_order;
        }
        let g = &self.game;
        cfg.schedule = GameSchedule {
            rounds: g.rounds,
            attacker_steps: g.attacker_steps,
            batch_size: g.batch_size,
            rounds_per_epoch: g.rounds_per_epoch,
            patience: g.patience,
            min_improvement: g.min_improvement,
        };
        cfg.optimizer = AdamConfig::with_lr(g.generator_lr);
        cfg.penalty = g.penalty;
        cfg.validate(population, attributes)?;
        Ok(cfg)
    }

    /// Discriminator played against the generator during the game.
    pub fn game_attacker(&self, input: usize, population: usize, seed: u64) -> AttackConfig {
        let mut cfg = AttackConfig::single_hidden(input, population, self.architecture.attacker_width, seed);
        cfg.schedule.optimizer = AdamConfig::with_lr(self.game.attacker_lr);
        cfg
    }

    /// Freshly trained attacker evaluated against a frozen defense.
    pub fn eval_attacker(&self, input: usize, population: usize, seed: u64) -> AttackConfig {
        let mut cfg = AttackConfig::single_hidden(input, population, self.architecture.attacker_width, seed);
        let t = &self.attack_training;
        cfg.schedule = TrainingSchedule {
            steps: t.steps,
            batch_size: t.batch_size,
            steps_per_epoch: t.steps_per_epoch,
            optimizer: AdamConfig::with_lr(t.learning_rate),
        };
        cfg
    }

    /// Checks everything that can be checked before any training starts.
    pub fn validate(&self) -> CliResult<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::config("name must be a nonempty path component"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds must be nonempty"));
        }
        if self.defenders.is_empty() || self.attackers.is_empty() {
            return Err(CliError::config("need at least one defender and one attacker"));
        }
        if let Some(grid) = &self.kappa_grid {
            if grid.is_empty() || grid.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
                return Err(CliError::config("kappa_grid must be nonempty with finite kappa >= 0"));
            }
        }
        let e = &self.evaluation;
        if e.releases == 0 {
            return Err(CliError::config("evaluation.releases must be positive"));
        }
        if e.gammas.is_empty() || e.gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return Err(CliError::config("evaluation.gammas must be nonempty values in (0, 1]"));
        }
        if let Some(bad) = e.metrics.iter().find(|m| !METRICS.contains(&m.as_str())) {
            return Err(CliError::config(format!("unknown metric `{bad}`; known: {}", METRICS.join(", "))));
        }
        if self.game.attacker_steps == 0 {
            return Err(CliError::config("game.attacker_steps must be at least 1"));
        }

        let discrete = matches!(self.dataset, DatasetSpec::Bitflip { .. });
        let (k, m) = match &self.dataset {
            DatasetSpec::Synthetic { population, attributes, .. } => (Some(*population), Some(*attributes)),
            DatasetSpec::Bitflip { population, flip } => {
                if !(0.0..=0.5).contains(flip) {
                    return Err(CliError::config("bitflip flip must lie in [0, 0.5]"));
                }
                (Some(*population), Some(*population))
            }
            DatasetSpec::Csv { .. } => (None, None),
        };

        let mut names = HashSet::new();
        let mut trained = HashSet::new();
        for d in &self.defenders {
            if !names.insert(d.name()) {
                return Err(CliError::config(format!("duplicate defender name `{}`", d.name())));
            }
            if discrete && !matches!(d, DefenderSpec::None { .. }) {
                return Err(CliError::config("a bitflip dataset is its own release; only the `none` defender applies"));
            }
            if let (Some(kappa), Some(m)) = (d.kappa(), m) {
                kappa.build(m).validate(m)?;
            }
            match d {
                DefenderSpec::FixedLrt { tau, target_fpr, .. } => check_threshold(*tau, *target_fpr, d.name())?,
                DefenderSpec::AdaptiveLrt { reference_ids, n, .. } => check_reference(reference_ids, *n, k)?,
                DefenderSpec::Dp {
                    epsilon, matched_to, k_dagger, ..
                } => {
                    match (epsilon, matched_to) {
                        (Some(eps), None) if *eps > 0.0 => {}
                        (None, Some(target)) if trained.contains(target.as_str()) => {}
                        (None, Some(target)) => {
                            return Err(CliError::config(format!(
                                "dp defender `{}` is matched to `{target}`, which is not an earlier trained defender",
                                d.name()
                            )))
                        }
                        _ => {
                            return Err(CliError::config(format!(
                                "dp defender `{}` needs exactly one of a positive `epsilon` or `matched_to`",
                                d.name()
                            )))
                        }
                    }
                    if *k_dagger == Some(0) {
                        return Err(CliError::config("k_dagger must be positive"));
                    }
                }
                _ => {}
            }
            if d.trains_generator() {
                trained.insert(d.name());
            }
        }

        let mut names = HashSet::new();
        for a in &self.attackers {
            if !names.insert(a.name()) {
                return Err(CliError::config(format!("duplicate attacker name `{}`", a.name())));
            }
            match a {
                AttackerSpec::OptimalLrt { .. } if !discrete => {
                    return Err(CliError::config(
                        "the optimal LRT needs exact likelihoods; use a bitflip dataset",
                    ))
                }
                AttackerSpec::FixedLrt { .. } | AttackerSpec::AdaptiveLrt { .. } | AttackerSpec::Score { .. } if discrete => {
                    return Err(CliError::config(format!(
                        "attacker `{}` needs genotypes; a bitflip dataset has none",
                        a.name()
                    )))
                }
                AttackerSpec::FixedLrt { tau, target_fpr, .. } => check_threshold(*tau, *target_fpr, a.name())?,
                AttackerSpec::AdaptiveLrt { reference_ids, n, .. } => check_reference(reference_ids, *n, k)?,
                _ => {}
            }
        }
        if discrete {
            if let Some(k) = k {
                if k > bngp::oracle::MAX_POPULATION {
                    return Err(CliError::config(format!(
                        "bitflip population {k} exceeds the enumeration guard {}",
                        bngp::oracle::MAX_POPULATION
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_threshold(tau: Option<f64>, target_fpr: Option<f64>, who: &str) -> CliResult<()> {
    match (tau, target_fpr) {
        (Some(t), None) if t.is_finite() => Ok(()),
        (None, Some(f)) if (0.0..=1.0).contains(&f) => Ok(()),
        _ => Err(CliError::config(format!(
            "`{who}` needs exactly one of a finite `tau` or a `target_fpr` in [0, 1]"
        ))),
    }
}

fn check_reference(ids: &[usize], n: usize, population: Option<usize>) -> CliResult<()> {
    if n == 0 || n > ids.len() {
        return Err(CliError::config(format!("adaptive LRT needs 1 <= n <= {} reference ids", ids.len())));
    }
    if let (Some(k), Some(bad)) = (population, ids.iter().find(|&&i| Some(i) >= population)) {
        return Err(CliError::config(format!("reference id {bad} outside a population of {k}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        name = "tiny"
        seeds = [1]
        [dataset]
        kind = "bitflip"
        population = 3
        flip = 0.25
        [[defenders]]
        kind = "none"
        [[attackers]]
        kind = "optimal-lrt"
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.prior, PriorSpec::Bernoulli { prob: 0.5 });
        assert_eq!(cfg.evaluation.gammas, vec![0.5]);
        assert_eq!(cfg.defenders[0].name(), "none");
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("flip = 0.25", "flip = 0.25\nflp = 0.3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = MINIMAL.replace("seeds = [1]", "seeds = [1]\n[gaem]\nrounds = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn unresolvable_references_fail_validation() {
        let base = r#"
            name = "x"
            seeds = [0]
            [dataset]
            kind = "synthetic"
            population = 10
            attributes = 20
            aaf_low = 0.05
            aaf_high = 0.5
            [[defenders]]
            kind = "dp"
            matched_to = "bngp"
            [[attackers]]
            kind = "bgp"
        "#;
        let cfg = ExperimentConfig::from_toml(base).unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("not an earlier trained defender"));

        let ok = base.replace("[[defenders]]\n            kind = \"dp\"", "[[defenders]]\n            kind = \"bngp\"\n            kappa = 1.0\n            [[defenders]]\n            kind = \"dp\"");
        ExperimentConfig::from_toml(&ok).unwrap().validate().unwrap();

        let cfg = ExperimentConfig::from_toml(&base.replace("kind = \"bgp\"", "kind = \"optimal-lrt\"")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.evaluation.metrics.push("f1".into());
        assert!(cfg.validate().unwrap_err().to_string().contains("unknown metric"));
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.attackers.push(AttackerSpec::OptimalLrt { name: "optimal-lrt".into() });
        assert!(cfg.validate().unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn kappa_grid_only_touches_scalars() {
        let d = DefenderSpec::Bngp {
            name: "b".into(),
            kappa: KappaSpec::Scalar(1.0),
            objective: Objective::Preference,
            norm_order: 1.0,
        };
        assert_eq!(d.with_kappa(Some(3.0)).kappa(), Some(&KappaSpec::Scalar(3.0)));
        let v = DefenderSpec::Bngp {
            name: "b".into(),
            kappa: KappaSpec::MostlyFree {
                zero_fraction: 0.9,
                weight: 50.0,
            },
            objective: Objective::Preference,
            norm_order: 1.0,
        };
        assert_eq!(v.with_kappa(Some(3.0)), v);
        assert_eq!(v.kappa().unwrap().label(), "vector");
    }
}
