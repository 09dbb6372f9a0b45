use std::path::PathBuf;
use std::process::ExitCode;

use bngp::defense::calibrate_dp_epsilon;
use bngp_cli::{
    capacity_sweep, run_experiment, run_verification_suite, workers_from_env, write_suite_report, CapacityConfig,
    CliError, CliResult, ExperimentConfig, SuiteOptions,
};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bngp", version, about = "Bayes-Nash generative privacy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train defenders and evaluate attackers as described by a TOML config.
    Run { config: PathBuf },
    /// Check every exact oracle contract on randomized small instances.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results/verify")]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_population: usize,
        /// Skip the sampled-training part of the BGP-risk contract.
        #[arg(long)]
        skip_trained: bool,
        #[arg(long, hide = true)]
        invert: Vec<String>,
    },
    /// Gap between trained discriminators of several widths and the exact CEL.
    SweepCapacity { config: PathBuf },
    /// Epsilon whose Laplace scale equals a target mean absolute noise.
    CalibrateDp {
        #[arg(long)]
        utility: f64,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        kdagger: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let run = run_experiment(&cfg)?;
            for s in &run.summary {
                println!(
                    "{:<16} {:<14} kappa={:<8} gamma={:<5} auc={} adv={}",
                    s.defender,
                    s.attacker,
                    s.kappa,
                    s.gamma,
                    fmt(s.median_auc_oriented),
                    fmt(s.median_adv)
                );
            }
            println!("wrote {} files to {}", run.manifest.len() + 1, run.dir.display());
            Ok(())
        }
        Command::Verify {
            seed,
            out,
            max_population,
            skip_trained,
            invert,
        } => {
            let opts = SuiteOptions {
                seed,
                max_population,
                trained_check: !skip_trained,
                inverted: invert,
            };
            let results = run_verification_suite(&opts)?;
            for r in &results {
                let verdict = if r.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {:<26} {:>6} instances  {}", r.contract, r.instances, r.detail);
            }
            write_suite_report(&results, &out)
        }
        Command::SweepCapacity { config } => {
            let cfg = CapacityConfig::load(&config)?;
            let report = capacity_sweep(&cfg, workers_from_env());
            if let Err(CliError::Contract(msg)) = &report {
                eprintln!("{msg}");
            }
            let report = report?;
            for s in &report.summary {
                println!("width {:>4}: median gap {:.3e} (std {:.1e}, {} seeds)", s.width, s.median_gap, s.std_gap, s.seeds);
            }
            println!("wrote {}", report.dir.display());
            Ok(())
        }
        Command::CalibrateDp { utility, m, kdagger } => {
            let p = calibrate_dp_epsilon(utility, m, kdagger)?;
            println!("epsilon = {}", p.epsilon);
            println!("sensitivity = {}", p.sensitivity);
            Ok(())
        }
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}
