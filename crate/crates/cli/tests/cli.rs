use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bngp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bngp"))
        .args(args)
        .env("BNGP_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let text = format!(
        r#"
        name = "{name}"
        seeds = [1, 2]
        output_dir = "{}"
        {extra}
        [dataset]
        kind = "bitflip"
        population = 4
        flip = 0.3
        [evaluation]
        releases = 200
        [[defenders]]
        kind = "none"
        [[attackers]]
        kind = "optimal-lrt"
        "#,
        dir.join("out").display()
    );
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn smallest_pipeline_runs_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tiny", "");
    let out = bngp(&["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("out/tiny");
    let first = fs::read(run.join("metrics.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("run_id,defender,attacker,kappa,gamma,auc_raw,auc_oriented,adv,tpr,fpr,utility_loss,seed"));
    assert_eq!(text.lines().count(), 3);
    for f in ["roc/optimal-lrt__none__k-__s1.csv", "roc/optimal-lrt__none__k-__s1.svg", "config.toml", "manifest.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let manifest = fs::read_to_string(run.join("manifest.json")).unwrap();
    assert!(manifest.contains("metrics.csv") && manifest.contains("roc/optimal-lrt__none__k-__s2.svg"));

    // the snapshot alone reproduces the run
    let out = bngp(&["run", run.join("config.toml").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(run.join("metrics.csv")).unwrap(), first);
    assert_eq!(fs::read_to_string(run.join("manifest.json")).unwrap(), manifest);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "typo", "sedes = [3]");
    let out = bngp(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sedes"));
    let out = bngp(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = bngp(&["calibrate-dp", "--utility", "-1", "--m", "10", "--kdagger", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("boom.toml");
    fs::write(
        &path,
        format!(
            r#"
            name = "boom"
            seeds = [0]
            output_dir = "{}"
            [dataset]
            kind = "synthetic"
            population = 8
            attributes = 10
            aaf_low = 0.1
            aaf_high = 0.4
            [game]
            rounds = 20
            attacker_steps = 1
            batch_size = 8
            attacker_lr = 1e300
            [[defenders]]
            kind = "bngp"
            kappa = 1.0
            [[attackers]]
            kind = "score"
            "#,
            dir.path().display()
        ),
    )
    .unwrap();
    let out = bngp(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("defender `bngp`") && err.contains("step 0"), "{err}");
}

#[test]
fn verify_passes_and_inverted_contract_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("v");
    let out = bngp(&["verify", "--skip-trained", "--max-population", "4", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(out_dir.join("verification.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);

    let out = bngp(&["verify", "--skip-trained", "--seed", "9", "--invert", "post-processing", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("post-processing"));
}

#[test]
fn verdicts_do_not_depend_on_the_seed() {
    for seed in ["1", "2", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = bngp(&["verify", "--skip-trained", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert!(out.status.success(), "seed {seed}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn calibrate_dp_matches_hand_computation() {
    let out = bngp(&["calibrate-dp", "--utility", "0.0001", "--m", "5000", "--kdagger", "400"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("epsilon = 125000\n"));
}

#[test]
fn capacity_sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cap.toml");
    fs::write(
        &path,
        format!(
            "name = \"cap\"\nwidths = [2, 32]\nseeds = [0, 1]\noutput_dir = \"{}\"\n[mechanism]\npopulation = 3\nflip = 0.25\n[training]\nsteps = 1500\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = bngp(&["sweep-capacity", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let gaps = fs::read_to_string(dir.path().join("cap/gaps.csv")).unwrap();
    assert_eq!(gaps.lines().count(), 5);
    assert!(dir.path().join("cap/summary.csv").is_file());
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["desk.toml", "bitflip.toml"] {
        let cfg = bngp_cli::ExperimentConfig::load(&root.join(name)).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let cap = bngp_cli::CapacityConfig::load(&root.join("capacity.toml")).unwrap();
    cap.validate().unwrap();
}
