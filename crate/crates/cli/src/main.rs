use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vflgan_cli::commands::{
    cmd_audit, cmd_calibrate, cmd_eval, cmd_generate, cmd_report, cmd_train, CheckpointChoice,
};
use vflgan_cli::config::{RunConfig, Selection};
use vflgan_cli::manifest::RunManifest;
use vflgan_cli::{CliError, Result, THREADS_ENV};
use vflgan_core::dp::AccountantReport;

#[derive(Parser)]
#[command(
    name = "vflgan",
    version,
    about = "Vertically federated GAN training, evaluation and auditing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train generators into a fresh run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a synthetic table from a trained run.
    Generate {
        #[arg(long)]
        run: PathBuf,
        /// Number of records; defaults to the training size.
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = CheckpointChoice::Best)]
        checkpoint: CheckpointChoice,
        /// Output CSV; defaults to `reports/synthetic.csv` in the run.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a synthetic table with the real one.
    Eval {
        /// Config naming the real data and schema.
        #[arg(long, conflicts_with = "run", required_unless_present = "run")]
        config: Option<PathBuf>,
        /// Training run whose resolved config is used instead.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        synth: PathBuf,
        /// Real CSV overriding the configured one.
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory; defaults to the run's `reports/`, else the synthetic file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Membership-inference audit of one record.
    Audit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, conflicts_with = "target")]
        select: Option<Selection>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Privacy accounting for the first-layer mechanism.
    Accountant {
        #[command(subcommand)]
        command: AccountantCommand,
    },
}

#[derive(Subcommand)]
enum AccountantCommand {
    /// Smallest noise multiplier meeting an (ε, δ) budget.
    Calibrate {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
        /// Sampling rate B/N.
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        steps: u64,
    },
    /// Privacy loss of a given noise multiplier, with its RDP curve.
    Report {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        delta: f64,
    },
}

fn print_accountant(r: &AccountantReport) {
    println!("sigma {}", r.sigma);
    println!("epsilon {} (alpha {})", r.epsilon, r.alpha);
    println!(
        "internal_epsilon {} (alpha {})",
        r.internal_epsilon, r.internal_alpha
    );
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {value:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Train { config, seed, out } => {
            let dir = cmd_train(&config, seed, out)?;
            println!("{}", dir.display());
        }
        Command::Generate {
            run,
            n,
            seed,
            checkpoint,
            out,
        } => {
            let path = cmd_generate(&run, n, seed, checkpoint, out)?;
            println!("{}", path.display());
        }
        Command::Eval {
            config,
            run,
            synth,
            real,
            target,
            seed,
            out,
        } => {
            let cfg = match (&config, &run) {
                (Some(c), _) => RunConfig::load(c)?,
                (None, Some(r)) => RunManifest::load(r)?.config,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let out = out
                .or(run.map(|r| r.join("reports")))
                .unwrap_or_else(|| synth.parent().map(PathBuf::from).unwrap_or_default());
            let report = cmd_eval(&cfg, &synth, real.as_deref(), target.as_deref(), seed, &out)?;
            println!("fd {}", report.fd);
            for (name, s) in report.utility.settings() {
                println!("{name} accuracy {} f1 {}", s.accuracy, s.f1);
            }
            println!("total_difference {}", report.utility.total_difference);
        }
        Command::Audit {
            config,
            select,
            target,
            seed,
            out,
        } => {
            let (dir, reports) = cmd_audit(&config, select, target, seed, out)?;
            for r in &reports {
                for k in &r.attack.results {
                    println!(
                        "{:?} target {} {} auc {} ({})",
                        r.method,
                        r.target,
                        k.kind.name(),
                        k.auc_mean,
                        k.auc_std
                    );
                }
                for k in r.null.iter().flat_map(|n| &n.results) {
                    println!("{:?} null {} auc {}", r.method, k.kind.name(), k.auc_mean);
                }
            }
            println!("{}", dir.display());
        }
        Command::Accountant { command } => match command {
            AccountantCommand::Calibrate {
                epsilon,
                delta,
                gamma,
                steps,
            } => print_accountant(&cmd_calibrate(epsilon, delta, gamma, steps)?),
            AccountantCommand::Report {
                sigma,
                gamma,
                steps,
                delta,
            } => {
                let r = cmd_report(sigma, gamma, steps, delta)?;
                print_accountant(&r);
                println!("alpha,rdp_epsilon");
                for (a, e) in r.curve.pairs() {
                    println!("{a},{e}");
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
