//! `run`: train each configured defender, then train or calibrate every
//! attacker against the frozen defense and score it on fresh releases.

use std::collections::HashMap;
use std::path::PathBuf;

use bngp::attacks::{
    adaptive_lrt_attack, bwma, discriminator_scores, fixed_lrt_attack, score_attack_all, train_bgp_response, AttackScores,
    BwmaEstimate, LrtConfig,
};
use bngp::data::{MembershipPrior, MembershipVector, PopulationDataset};
use bngp::defense::{
    calibrate_dp_epsilon, lrt_threshold_for_fpr, train_bngp, train_lrt_best_response_defender, utility_loss,
    weighted_mean_abs_noise, Defense, GameTrace, Kappa,
};
use bngp::mechanisms::{bitflip_mechanism, DiscreteMechanism, DpParams, SummaryStats};
use bngp::metrics::{median, mean_std, roc_auc, RocCurve};
use bngp::neural::checkpoint_to_string;
use bngp::oracle::{posterior_marginals, PriorTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AttackerSpec, DefenderSpec, ExperimentConfig, Instance};
use crate::error::{CliError, CliResult};
use crate::output::{roc_svg, slug, ManifestEntry, RunWriter};

pub const WORKERS_ENV: &str = "BNGP_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub defender: String,
    pub attacker: String,
    pub kappa: String,
    pub gamma: f64,
    pub auc_raw: Option<f64>,
    pub auc_oriented: Option<f64>,
    pub adv: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub utility_loss: Option<f64>,
    pub seed: u64,
}

/// Seed-wise aggregate of [`MetricsRow`]s sharing defender, attacker, kappa and gamma.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub defender: String,
    pub attacker: String,
    pub kappa: String,
    pub gamma: f64,
    pub seeds: usize,
    pub median_auc_raw: Option<f64>,
    pub median_auc_oriented: Option<f64>,
    pub std_auc_oriented: Option<f64>,
    pub median_adv: Option<f64>,
    pub median_utility_loss: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct TraceRow {
    round: usize,
    defender_loss: f64,
    attacker_cel: Option<f64>,
    privacy: f64,
    utility: f64,
    saturated_fraction: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
struct RocRow {
    fpr: f64,
    tpr: f64,
}

/// Measurements of one trained or calibrated defense.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefenseReport {
    pub defender: String,
    pub kappa: String,
    pub seed: u64,
    /// Kappa-weighted mean absolute distortion, the DP matching target.
    pub weighted_noise: f64,
    pub utility_loss: f64,
    /// Set for DP defenses.
    pub epsilon: Option<f64>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
    pub defenses: Vec<DefenseReport>,
    pub manifest: Vec<ManifestEntry>,
}

impl RunSummary {
    pub fn summary_for(&self, defender: &str, attacker: &str, kappa: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.defender == defender && s.attacker == attacker && s.kappa == kappa)
    }
}

#[derive(Default)]
struct TaskOutput {
    rows: Vec<MetricsRow>,
    defenses: Vec<DefenseReport>,
    rocs: Vec<(String, RocCurve)>,
    traces: Vec<(String, Vec<TraceRow>)>,
    checkpoints: Vec<(String, String)>,
}

/// Worker count from the environment, falling back to the available cores.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunSummary> {
    run_experiment_with_workers(cfg, workers_from_env())
}

/// Runs every (kappa, seed) task on a pool of `workers` threads. Each task
/// draws from its own random streams, so results do not depend on scheduling.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> CliResult<RunSummary> {
    cfg.validate()?;
    let kappas = cfg.kappa_values();
    let tasks: Vec<(Option<f64>, u64)> = kappas
        .iter()
        .flat_map(|k| cfg.seeds.iter().map(move |s| (*k, *s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let outputs: Vec<CliResult<TaskOutput>> = pool.install(|| tasks.par_iter().map(|&(k, s)| run_task(cfg, k, s)).collect());

    let dir = cfg.output_dir.join(&cfg.name);
    let mut writer = RunWriter::create(&dir)?;
    writer.write("config.toml", cfg.to_toml()?.as_bytes())?;
    let mut rows = Vec::new();
    let mut defenses = Vec::new();
    for out in outputs {
        let out = out?;
        for (stem, roc) in &out.rocs {
            let points: Vec<RocRow> = roc.points.iter().map(|&(fpr, tpr)| RocRow { fpr, tpr }).collect();
            writer.write_csv(&format!("roc/{stem}.csv"), &points)?;
            if cfg.evaluation.write_plots {
                writer.write(&format!("roc/{stem}.svg"), roc_svg(&format!("{stem} (AUC {:.4})", roc.auc), &roc.points).as_bytes())?;
            }
        }
        for (stem, trace) in &out.traces {
            writer.write_csv(&format!("traces/{stem}.csv"), trace)?;
        }
        for (stem, text) in &out.checkpoints {
            writer.write(&format!("checkpoints/{stem}.json"), text.as_bytes())?;
        }
        rows.extend(out.rows);
        defenses.extend(out.defenses);
    }
    let summary = summarize(&rows);
    writer.write_csv("metrics.csv", &rows)?;
    writer.write_csv("summary.csv", &summary)?;
    writer.write_csv("defenses.csv", &defenses)?;
    let manifest = writer.finish()?;
    Ok(RunSummary {
        dir,
        rows,
        summary,
        defenses,
        manifest,
    })
}

fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, String, String, u64)> = Vec::new();
    let mut groups: HashMap<(String, String, String, u64), Vec<&MetricsRow>> = HashMap::new();
    for r in rows {
        let key = (r.defender.clone(), r.attacker.clone(), r.kappa.clone(), r.gamma.to_bits());
        if !groups.contains_key(&key) {
            keys.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let med = |v: Vec<Option<f64>>| -> Option<f64> {
        let v: Vec<f64> = v.into_iter().flatten().collect();
        (!v.is_empty()).then(|| median(&v))
    };
    keys.into_iter()
        .map(|key| {
            let g = &groups[&key];
            let oriented: Vec<f64> = g.iter().filter_map(|r| r.auc_oriented).collect();
            SummaryRow {
                defender: key.0.clone(),
                attacker: key.1.clone(),
                kappa: key.2.clone(),
                gamma: f64::from_bits(key.3),
                seeds: g.len(),
                median_auc_raw: med(g.iter().map(|r| r.auc_raw).collect()),
                median_auc_oriented: med(g.iter().map(|r| r.auc_oriented).collect()),
                std_auc_oriented: (!oriented.is_empty()).then(|| mean_std(&oriented).1),
                median_adv: med(g.iter().map(|r| r.adv).collect()),
                median_utility_loss: med(g.iter().map(|r| r.utility_loss).collect()),
            }
        })
        .collect()
}

/// Independent stream per (seed, defender, purpose).
fn stream(seed: u64, defender: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((defender as u64) << 32) | slot as u64);
    rng
}

fn net_seed(seed: u64, defender: usize, slot: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add((defender as u64) << 16).wrapping_add(slot as u64)
}

fn trained(context: &str, e: bngp::Error) -> CliError {
    CliError::Training {
        context: context.to_string(),
        message: e.to_string(),
    }
}

fn run_task(cfg: &ExperimentConfig, kappa: Option<f64>, seed: u64) -> CliResult<TaskOutput> {
    let instance = cfg.build_instance(seed)?;
    let prior = cfg.prior.build(instance.population())?;
    match instance {
        Instance::Population(data) => run_population(cfg, &data, &prior, kappa, seed),
        Instance::Bitflip { population, flip } => run_bitflip(cfg, population, flip, &prior, seed),
    }
}

struct Evaluation {
    roc: RocCurve,
    bwma: Vec<(f64, BwmaEstimate)>,
}

/// Pooled ROC over `releases` fresh draws plus one BWMA estimate per gamma.
/// `attack(x, gamma)` must claim with the rule appropriate for `gamma`.
fn evaluate<X>(
    cfg: &ExperimentConfig,
    prior: &MembershipPrior,
    release: &dyn Fn(&MembershipVector, &mut ChaCha8Rng) -> bngp::Result<X>,
    attack: &dyn Fn(&X, f64) -> bngp::Result<AttackScores>,
    targets: Option<&[usize]>,
    rng: &mut ChaCha8Rng,
) -> bngp::Result<Evaluation> {
    let e = &cfg.evaluation;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    let mut drawn = 0;
    while drawn < e.releases {
        let b = prior.sample(rng);
        let x = match release(&b, rng) {
            Ok(x) => x,
            Err(bngp::Error::Domain(_)) if b.member_count() == 0 => continue,
            Err(err) => return Err(err),
        };
        drawn += 1;
        let s = attack(&x, e.gammas[0])?;
        match targets {
            Some(ids) => {
                for &k in ids {
                    scores.push(s.ranking[k]);
                    labels.push(b.is_member(k));
                }
            }
            None => {
                scores.extend_from_slice(&s.ranking);
                labels.extend(b.bits().iter().map(|v| *v == 1));
            }
        }
    }
    let roc = roc_auc(&scores, &labels)?;
    let mut out = Vec::new();
    if e.wants("bwma") {
        for &g in &e.gammas {
            let claim = |x: &X| attack(x, g);
            out.push((g, bwma(&claim, release, prior, g, e.releases, rng)?));
        }
    }
    Ok(Evaluation { roc, bwma: out })
}

fn rows_for(
    cfg: &ExperimentConfig,
    defender: &str,
    attacker: &str,
    kappa: &str,
    seed: u64,
    eval: &Evaluation,
    utility: Option<f64>,
) -> Vec<MetricsRow> {
    let e = &cfg.evaluation;
    let auc = e.wants("auc");
    let utility = if e.wants("utility") { utility } else { None };
    e.gammas
        .iter()
        .map(|&g| {
            let est = eval.bwma.iter().find(|(gg, _)| *gg == g).map(|(_, est)| est);
            MetricsRow {
                run_id: cfg.name.clone(),
                defender: defender.to_string(),
                attacker: attacker.to_string(),
                kappa: kappa.to_string(),
                gamma: g,
                auc_raw: auc.then_some(eval.roc.auc),
                auc_oriented: auc.then(|| eval.roc.oriented_auc()),
                adv: est.map(|e| e.adv),
                tpr: est.map(|e| e.tpr),
                fpr: est.map(|e| e.fpr),
                utility_loss: utility,
                seed,
            }
        })
        .collect()
}

fn with_gamma(s: AttackScores, gamma: f64) -> bngp::Result<AttackScores> {
    AttackScores::new(s.soft, s.ranking, gamma)
}

struct Frozen {
    defense: Defense,
    /// Weights used to report this defense's utility loss.
    kappa: Kappa,
    norm_order: f64,
}

fn run_population(
    cfg: &ExperimentConfig,
    data: &PopulationDataset,
    prior: &MembershipPrior,
    kappa_value: Option<f64>,
    seed: u64,
) -> CliResult<TaskOutput> {
    let (k, m) = (data.population_size(), data.attribute_count());
    let mut out = TaskOutput::default();
    let mut frozen: HashMap<String, (Frozen, f64)> = HashMap::new();

    for (di, spec) in cfg.defenders.iter().enumerate() {
        let spec = spec.with_kappa(kappa_value);
        let name = spec.name().to_string();
        // kappa-free defenders still carry the grid value so sweeps line up
        let kappa_label = match (spec.kappa(), kappa_value) {
            (Some(kp), _) => kp.label(),
            (None, Some(v)) => format!("{v}"),
            (None, None) => "-".to_string(),
        };
        let stem = format!("{}__k{}__s{seed}", slug(&name), slug(&kappa_label));
        let context = format!("defender `{name}`, kappa {kappa_label}, seed {seed}");
        let mut rng = stream(seed, di, 0);
        let mut epsilon = None;

        let current = match &spec {
            DefenderSpec::None { .. } => Frozen {
                defense: Defense::None,
                kappa: Kappa::Scalar(1.0),
                norm_order: 1.0,
            },
            DefenderSpec::Bngp { .. } => {
                let def = cfg.defender_config(k, m, &spec, net_seed(seed, di, 0))?;
                let att = cfg.game_attacker(m, k, net_seed(seed, di, 1));
                let game = train_bngp(data, prior, &def, &att, &mut rng).map_err(|e| trained(&context, e))?;
                out.traces.push((stem.clone(), game_trace_rows(&game.trace)));
                if cfg.evaluation.write_checkpoints {
                    out.checkpoints.push((stem.clone(), checkpoint_to_string(&game.generator)?));
                }
                Frozen {
                    defense: game.defense(),
                    kappa: def.utility.kappa.clone(),
                    norm_order: def.utility.norm_order,
                }
            }
            DefenderSpec::FixedLrt { tau, target_fpr, .. } => {
                let tau = match (tau, target_fpr) {
                    (Some(t), _) => *t,
                    (None, Some(f)) => lrt_threshold_for_fpr(data, prior, *f, cfg.evaluation.releases, &mut rng)?,
                    (None, None) => unreachable!("validated"),
                };
                lrt_defense(cfg, data, prior, &spec, LrtConfig::Fixed { tau }, di, seed, &stem, &context, &mut rng, &mut out)?
            }
            DefenderSpec::AdaptiveLrt { reference_ids, n, .. } => {
                let lrt = LrtConfig::Adaptive {
                    reference_ids: reference_ids.clone(),
                    n: *n,
                };
                lrt_defense(cfg, data, prior, &spec, lrt, di, seed, &stem, &context, &mut rng, &mut out)?
            }
            DefenderSpec::Dp {
                epsilon: eps,
                matched_to,
                k_dagger,
                ..
            } => {
                let k_dagger = k_dagger.unwrap_or_else(|| expected_members(prior));
                let sensitivity = bngp::mechanisms::sensitivity_frequency(m, k_dagger)?;
                let (params, kappa, norm_order) = match (eps, matched_to) {
                    (Some(e), _) => (DpParams::new(*e, 0.0, sensitivity)?, Kappa::Scalar(1.0), 1.0),
                    (None, Some(target)) => {
                        let (other, noise) = &frozen[target];
                        // a defense that adds no noise at all is matched by a vanishing scale
                        let params = calibrate_dp_epsilon(noise.max(1e-12), m, k_dagger)?;
                        (params, other.kappa.clone(), other.norm_order)
                    }
                    (None, None) => unreachable!("validated"),
                };
                epsilon = Some(params.epsilon);
                Frozen {
                    defense: Defense::Laplace(params),
                    kappa,
                    norm_order,
                }
            }
        };

        let mut mrng = stream(seed, di, 1);
        let bs: Vec<MembershipVector> = (0..cfg.evaluation.releases)
            .map(|_| prior.sample_nonempty(&mut mrng).map(|(b, _)| b))
            .collect::<bngp::Result<_>>()?;
        let draws = current.defense.release_batch(data, &bs, &mut mrng)?;
        let noise = weighted_mean_abs_noise(&draws, &current.kappa);
        let mut util = 0.0;
        for d in &draws {
            util += utility_loss(&d.x, &d.xhat, &current.kappa, current.norm_order)?;
        }
        let util = util / draws.len() as f64;
        out.defenses.push(DefenseReport {
            defender: name.clone(),
            kappa: kappa_label.clone(),
            seed,
            weighted_noise: noise,
            utility_loss: util,
            epsilon,
        });

        for (ai, attacker) in cfg.attackers.iter().enumerate() {
            let mut arng = stream(seed, di, 2 + ai);
            let defense = &current.defense;
            let release = |b: &MembershipVector, r: &mut ChaCha8Rng| -> bngp::Result<SummaryStats> { Ok(defense.release(data, b, r)?.x) };
            let actx = format!("{context}, attacker `{}`", attacker.name());
            let eval = match attacker {
                AttackerSpec::Bgp { .. } => {
                    let att = cfg.eval_attacker(m, k, net_seed(seed, di, 2 + ai));
                    let mut features = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(defense.release(data, b, r)?.x.into_inner());
                    let net = train_bgp_response(&mut features, prior, &att, &mut arng)
                        .map_err(|e| trained(&actx, e))?
                        .discriminator;
                    let attack = |x: &SummaryStats, g: f64| with_gamma(discriminator_scores(&net, x.values())?, g);
                    evaluate(cfg, prior, &release, &attack, None, &mut arng)?
                }
                AttackerSpec::FixedLrt { tau, target_fpr, .. } => {
                    let tau = match (tau, target_fpr) {
                        (Some(t), _) => *t,
                        (None, Some(f)) => lrt_threshold_for_fpr(data, prior, *f, cfg.evaluation.releases, &mut arng)?,
                        (None, None) => unreachable!("validated"),
                    };
                    let attack = |x: &SummaryStats, _g: f64| fixed_lrt_attack(data, x, tau);
                    evaluate(cfg, prior, &release, &attack, None, &mut arng)?
                }
                AttackerSpec::AdaptiveLrt { reference_ids, n, .. } => {
                    let targets: Vec<usize> = (0..k).filter(|i| !reference_ids.contains(i)).collect();
                    let attack = |x: &SummaryStats, _g: f64| Ok(adaptive_lrt_attack(data, x, reference_ids, *n)?.scores);
                    evaluate(cfg, prior, &release, &attack, Some(&targets), &mut arng)?
                }
                AttackerSpec::Score { threshold, .. } => {
                    let attack = |x: &SummaryStats, _g: f64| score_attack_all(data, x, *threshold);
                    evaluate(cfg, prior, &release, &attack, None, &mut arng)?
                }
                AttackerSpec::OptimalLrt { .. } => unreachable!("validated"),
            };
            out.rows
                .extend(rows_for(cfg, &name, attacker.name(), &kappa_label, seed, &eval, Some(util)));
            out.rocs.push((format!("{}__{stem}", slug(attacker.name())), eval.roc));
        }
        frozen.insert(name, (current, noise));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn lrt_defense(
    cfg: &ExperimentConfig,
    data: &PopulationDataset,
    prior: &MembershipPrior,
    spec: &DefenderSpec,
    lrt: LrtConfig,
    di: usize,
    seed: u64,
    stem: &str,
    context: &str,
    rng: &mut ChaCha8Rng,
    out: &mut TaskOutput,
) -> CliResult<Frozen> {
    let def = cfg.defender_config(data.population_size(), data.attribute_count(), spec, net_seed(seed, di, 0))?;
    let res = train_lrt_best_response_defender(data, prior, &def, &lrt, rng).map_err(|e| trained(context, e))?;
    let rows = (0..res.trace.len())
        .map(|i| TraceRow {
            round: i,
            defender_loss: res.trace[i],
            attacker_cel: None,
            privacy: res.privacy[i],
            utility: res.utility[i],
            saturated_fraction: None,
        })
        .collect();
    out.traces.push((stem.to_string(), rows));
    if cfg.evaluation.write_checkpoints {
        out.checkpoints.push((stem.to_string(), checkpoint_to_string(&res.generator)?));
    }
    Ok(Frozen {
        defense: res.defense(),
        kappa: def.utility.kappa.clone(),
        norm_order: def.utility.norm_order,
    })
}

fn game_trace_rows(t: &GameTrace) -> Vec<TraceRow> {
    (0..t.len())
        .map(|i| TraceRow {
            round: i,
            defender_loss: t.defender_loss[i],
            attacker_cel: Some(t.attacker_cel[i]),
            privacy: t.privacy[i],
            utility: t.utility[i],
            saturated_fraction: Some(t.saturated_fraction[i]),
        })
        .collect()
}

fn expected_members(prior: &MembershipPrior) -> usize {
    let total: f64 = (0..prior.population_size()).map(|k| prior.marginal(k)).sum();
    (total.round() as usize).max(1)
}

/// Membership-bit randomized response: the mechanism is the release, so
/// attackers see its output symbols directly.
fn run_bitflip(cfg: &ExperimentConfig, population: usize, flip: f64, prior: &MembershipPrior, seed: u64) -> CliResult<TaskOutput> {
    let mech = bitflip_mechanism(population, flip)?;
    let table = PriorTable::from_prior(prior)?;
    let mut out = TaskOutput::default();
    for (di, spec) in cfg.defenders.iter().enumerate() {
        let name = spec.name();
        let stem = format!("{}__k-__s{seed}", slug(name));
        let context = format!("defender `{name}`, seed {seed}");
        let release = |b: &MembershipVector, r: &mut ChaCha8Rng| -> bngp::Result<usize> { Ok(mech.sample(b, r)) };
        for (ai, attacker) in cfg.attackers.iter().enumerate() {
            let mut arng = stream(seed, di, 2 + ai);
            let eval = match attacker {
                AttackerSpec::OptimalLrt { .. } => {
                    let posteriors = posterior_marginals(&mech, &table)?;
                    let attack = |x: &usize, g: f64| AttackScores::new(posteriors[*x].clone(), posteriors[*x].clone(), g);
                    evaluate(cfg, prior, &release, &attack, None, &mut arng)?
                }
                AttackerSpec::Bgp { .. } => {
                    let att = cfg.eval_attacker(population, population, net_seed(seed, di, 2 + ai));
                    let mut features = |b: &MembershipVector, r: &mut ChaCha8Rng| Ok(mech.features(mech.sample(b, r)));
                    let net = train_bgp_response(&mut features, prior, &att, &mut arng)
                        .map_err(|e| trained(&format!("{context}, attacker `{}`", attacker.name()), e))?
                        .discriminator;
                    let attack = |x: &usize, g: f64| with_gamma(discriminator_scores(&net, &mech.features(*x))?, g);
                    evaluate(cfg, prior, &release, &attack, None, &mut arng)?
                }
                _ => unreachable!("validated"),
            };
            out.rows.extend(rows_for(cfg, name, attacker.name(), "-", seed, &eval, None));
            out.rocs.push((format!("{}__{stem}", slug(attacker.name())), eval.roc));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_by_slot_and_defender() {
        use rand::Rng;
        let draw = |d, s| stream(7, d, s).gen::<u64>();
        assert_ne!(draw(0, 0), draw(0, 1));
        assert_ne!(draw(0, 0), draw(1, 0));
        assert_eq!(draw(2, 3), draw(2, 3));
    }

    #[test]
    fn summary_takes_medians_per_group() {
        let row = |seed, auc| MetricsRow {
            run_id: "r".into(),
            defender: "d".into(),
            attacker: "a".into(),
            kappa: "1".into(),
            gamma: 0.5,
            auc_raw: Some(auc),
            auc_oriented: Some(auc),
            adv: None,
            tpr: None,
            fpr: None,
            utility_loss: None,
            seed,
        };
        let s = summarize(&[row(0, 0.6), row(1, 0.9), row(2, 0.7)]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].seeds, 3);
        assert_eq!(s[0].median_auc_raw, Some(0.7));
        assert_eq!(s[0].median_adv, None);
    }

    #[test]
    fn expected_members_rounds_the_marginal_sum() {
        assert_eq!(expected_members(&MembershipPrior::uniform_bernoulli(40, 0.5).unwrap()), 20);
        assert_eq!(expected_members(&MembershipPrior::uniform_bernoulli(3, 0.01).unwrap()), 1);
    }
}
