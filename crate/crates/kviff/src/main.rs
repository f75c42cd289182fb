//! Command-line entry point: run experiments, validate the numerics, list
//! scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kviff::harness::{self, load_config_with_overrides};
use kviff::models::{scenario_by_name, SCENARIO_NAMES};
use kviff::validate::run_all_checks;
use kviff::Error;

#[derive(Parser)]
#[command(
    name = "kviff",
    about = "Nonlinear filtering lab: kernel flow filter, baselines, scenarios, and self-checks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config.
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path override, e.g. `num_particles=50` or `kviff.epsilon=5e-5`.
        /// Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical self-check suite and report pass/fail per check.
    Validate,
    /// List the built-in scenarios as TSV.
    Scenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, set, seed, out } => cmd_run(&config, &set, seed, out),
        Command::Validate => cmd_validate(),
        Command::Scenarios => cmd_scenarios(),
    };
    ExitCode::from(code)
}

fn parse_overrides(set: &[String]) -> Result<Vec<(String, String)>, Error> {
    set.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("override `{kv}` is not KEY=VALUE")))
        })
        .collect()
}

fn cmd_run(config_path: &Path, set: &[String], seed: Option<u64>, out: Option<PathBuf>) -> u8 {
    let config = (|| {
        let mut overrides = parse_overrides(set)?;
        if let Some(s) = seed {
            overrides.push(("base_seed".to_string(), s.to_string()));
        }
        let mut config = load_config_with_overrides(config_path, &overrides)?;
        if let Some(dir) = out {
            config.output_dir = dir;
        }
        Ok::<_, Error>(config)
    })();
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    let result = harness::with_thread_cap(|| harness::run_experiment(&config))
        .and_then(|r| r)
        .and_then(|output| {
            let written = harness::write_outputs(&output, &config.output_dir, config.plot)?;
            Ok((output, written))
        });
    match result {
        Ok((output, written)) => {
            println!(
                "scenario {}  N={}  repeats={}  base_seed={}",
                output.scenario, config.num_particles, config.repeats, config.base_seed
            );
            println!("method      median_aggregate  mean_of_median_curve  median_wall_s");
            for s in &output.summaries {
                println!(
                    "{:<10}  {:>16.6}  {:>20.6}  {:>13.3}",
                    s.method, s.median_aggregate, s.mean_of_median_curve, s.median_wall_time
                );
            }
            for path in written {
                println!("wrote {}", path.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_validate() -> u8 {
    match run_all_checks() {
        Ok(reports) => {
            let mut all_passed = true;
            for r in &reports {
                println!("{}: {} ({})", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
                all_passed &= r.passed;
            }
            if all_passed {
                0
            } else {
                let failing: Vec<&str> =
                    reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
                eprintln!("failing checks: {}", failing.join(", "));
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_scenarios() -> u8 {
    println!("name\tdim_x\tdim_y\tK\tdt\tmismatch");
    for name in SCENARIO_NAMES {
        let sc = scenario_by_name(name).expect("built-in scenario");
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            sc.name, sc.model.dim_x, sc.model.dim_y, sc.horizon, sc.dt, sc.mismatch
        );
    }
    0
}
