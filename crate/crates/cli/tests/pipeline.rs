use std::fs;

use bngp_cli::{run_experiment_with_workers, ExperimentConfig};

fn small_config(out: &std::path::Path) -> ExperimentConfig {
    let text = format!(
        r#"
        name = "small"
        seeds = [3, 4]
        output_dir = "{}"
        kappa_grid = [0.5, 20.0]

        [dataset]
        kind = "synthetic"
        population = 12
        attributes = 30
        aaf_low = 0.05
        aaf_high = 0.4

        [architecture]
        generator_widths = [16, 16]
        attacker_width = 16

        [game]
        rounds = 40
        attacker_steps = 2
        batch_size = 16

        [attack_training]
        steps = 60
        batch_size = 16

        [evaluation]
        releases = 40
        gammas = [0.3, 0.5]

        [[defenders]]
        kind = "none"

        [[defenders]]
        kind = "bngp"
        kappa = 1.0

        [[defenders]]
        kind = "fixed-lrt"
        kappa = 1.0
        target_fpr = 0.2

        [[defenders]]
        kind = "dp"
        matched_to = "bngp"

        [[attackers]]
        kind = "bgp"

        [[attackers]]
        kind = "fixed-lrt"
        target_fpr = 0.1

        [[attackers]]
        kind = "adaptive-lrt"
        reference_ids = [0, 1, 2, 3]
        n = 2

        [[attackers]]
        kind = "score"
        "#,
        out.display()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

#[test]
fn run_writes_every_artifact_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("a"));
    let first = run_experiment_with_workers(&cfg, 2).unwrap();

    // 2 kappas x 2 seeds x 4 defenders x 4 attackers x 2 gammas
    assert_eq!(first.rows.len(), 128);
    for r in &first.rows {
        let auc = r.auc_raw.unwrap();
        assert!((0.0..=1.0).contains(&auc));
        assert!(r.auc_oriented.unwrap() >= 0.5);
        assert!(r.adv.unwrap().abs() <= 1.0);
    }
    let dp: Vec<_> = first.defenses.iter().filter(|d| d.defender == "dp").collect();
    assert_eq!(dp.len(), 4);
    assert!(dp.iter().all(|d| d.epsilon.unwrap() > 0.0));

    for name in ["config.toml", "metrics.csv", "summary.csv", "defenses.csv", "manifest.json"] {
        assert!(first.dir.join(name).is_file(), "{name} missing");
    }
    assert!(first.manifest.iter().any(|e| e.path.starts_with("traces/bngp")));
    assert!(first.manifest.iter().any(|e| e.path.starts_with("checkpoints/fixed-lrt")));
    assert!(first.manifest.iter().any(|e| e.path.starts_with("roc/") && e.path.ends_with(".svg")));

    // a different worker count and output directory must give identical bytes
    let cfg_b = small_config(&dir.path().join("b"));
    let second = run_experiment_with_workers(&cfg_b, 1).unwrap();
    assert_eq!(first.rows, second.rows);
    let strip = |s: String| s.replace(&dir.path().join("a").display().to_string(), "").replace(&dir.path().join("b").display().to_string(), "");
    for e in &first.manifest {
        if e.path == "config.toml" {
            continue;
        }
        let a = fs::read(first.dir.join(&e.path)).unwrap();
        let b = fs::read(second.dir.join(&e.path)).unwrap();
        assert!(a == b, "{} differs", e.path);
    }
    let a = strip(fs::read_to_string(first.dir.join("config.toml")).unwrap());
    let b = strip(fs::read_to_string(second.dir.join("config.toml")).unwrap());
    assert_eq!(a, b);
}

#[test]
fn bitflip_run_scores_the_optimal_attacker() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
        name = "flip"
        seeds = [0]
        output_dir = "{}"
        [dataset]
        kind = "bitflip"
        population = 5
        flip = 0.2
        [attack_training]
        steps = 300
        batch_size = 32
        learning_rate = 0.01
        [evaluation]
        releases = 400
        [[defenders]]
        kind = "none"
        [[attackers]]
        kind = "optimal-lrt"
        [[attackers]]
        kind = "bgp"
        "#,
        dir.path().display()
    );
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let run = run_experiment_with_workers(&cfg, 1).unwrap();
    let opt = run.rows.iter().find(|r| r.attacker == "optimal-lrt").unwrap();
    // each bit is flipped with probability 0.2, so the posterior is 0.8 or 0.2
    // and the threshold-0.5 claim reports the observed bit
    assert!((opt.tpr.unwrap() - 0.8).abs() < 0.05, "{opt:?}");
    assert!((opt.fpr.unwrap() - 0.2).abs() < 0.05, "{opt:?}");
    assert!((opt.auc_raw.unwrap() - 0.8).abs() < 0.05);
    let bgp = run.rows.iter().find(|r| r.attacker == "bgp").unwrap();
    assert!(bgp.auc_raw.unwrap() > 0.7, "{bgp:?}");
}
