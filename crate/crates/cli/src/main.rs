use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use d2dcrowd::schemes::Scheme;
use d2dcrowd::simkit::{
    resolve_out_dir, run_experiment, run_verify, sweep, write_experiment, write_sweep, ExperimentConfig,
    ExperimentSummary, OutputFormat, SweepParam, VerifyConfig,
};

#[derive(Parser)]
#[command(name = "d2dcrowd", version, about = "Energy-optimal task assignment for D2D device crowds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-round experiment and write summary.csv, rounds.csv and manifest.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one experiment per parameter value and write sweep.csv.
    Sweep {
        /// Base config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// devices or task-freq
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check the matching pipeline against exhaustive search on small random rounds.
    Verify {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        max_devices: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Inflate local-execution weights before solving (negative control).
        #[arg(long, hide = true)]
        perturb_weights: Option<f64>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    /// Comma-separated subset of optimal,greedy,reciprocal,random.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Enable the credit-ledger eligibility filter.
    #[arg(long)]
    incentive: bool,
    /// Output directory (overrides D2DCROWD_OUT_DIR and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall-clock solve times in solve_ms.
    #[arg(long)]
    timing: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.scenario.rng_seed = s;
        }
        if let Some(r) = self.rounds {
            cfg.rounds = r;
        }
        if let Some(s) = &self.schemes {
            cfg.schemes = s.clone();
        }
        if self.incentive {
            cfg.incentive = true;
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if self.timing {
            cfg.timing = true;
        }
    }
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn print_summary(summary: &ExperimentSummary) {
    println!("{:<11} {:>8} {:>10} {:>10} {:>10}", "scheme", "saving", "ci_half", "energy_j", "solve_ms");
    for s in &summary.schemes {
        println!(
            "{:<11} {:>8.4} {:>10.4} {:>10.3} {:>10.3}",
            s.scheme.name(),
            s.mean_saving_ratio,
            s.ci_half_width,
            s.mean_energy_j,
            s.mean_solve_ms
        );
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut cfg = load(Some(&config))?;
            overrides.apply(&mut cfg);
            let dir = resolve_out_dir(overrides.out.as_deref(), &cfg.out_dir);
            let summary = run_experiment(&cfg)?;
            let files = write_experiment(&summary, &dir)?;
            print_summary(&summary);
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { config, param, values, overrides } => {
            let mut cfg = load(config.as_deref())?;
            overrides.apply(&mut cfg);
            let dir = resolve_out_dir(overrides.out.as_deref(), &cfg.out_dir);
            let points = sweep(&cfg, param, &values)?;
            let files = write_sweep(&cfg, param, &points, &dir)?;
            for p in &points {
                println!("{param} = {}", p.value);
                print_summary(&p.summary);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Verify { instances, max_devices, seed, perturb_weights } => {
            let report = run_verify(&VerifyConfig { instances, max_devices, seed, perturb: perturb_weights })
                .context("verify")?;
            println!("oracle agreement:   {}/{}", report.oracle_agreements, report.instances);
            println!("valid certificates: {}/{}", report.certificates_valid, report.instances);
            println!("feasible decodes:   {}/{}", report.feasible, report.instances);
            println!("matching vs enumeration: {}/{}", report.matching_agreements, report.matching_graphs);
            for f in report.failures.iter().take(20) {
                println!("FAIL {f}");
            }
            if !report.passed() {
                println!("verify: FAILED ({} failures)", report.failures.len());
                return Ok(ExitCode::from(2));
            }
            println!("verify: passed");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
