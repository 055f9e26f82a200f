use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nphmc::nphmc::Potential;
use nphmc_cli::experiment::run_experiment;
use nphmc_cli::plot::emit_plot_data;
use nphmc_cli::spec::{resolve, Algorithm, ModelId, Overrides};
use nphmc_cli::verify::verify_dir;
use nphmc_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "nphmc", version, about = "Run and check nonparametric HMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run chains and write samples.jsonl and summary.json.
    Run(RunArgs),
    /// Recompute a summary from its samples.
    Verify {
        /// Output directory of a previous run.
        dir: PathBuf,
    },
    /// Write CSV files for plotting from one or more run directories.
    Plotdata {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PotentialArg {
    Weight,
    Joint,
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with experiment settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelId>,
    #[arg(long, value_enum)]
    algorithm: Option<Algorithm>,
    /// Chain length per run, burn-in included.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Transitions per emitted sample (baselines default to the number of steps).
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, overrides_with = "no_trim")]
    trim: bool,
    #[arg(long = "no-trim")]
    no_trim: bool,
    #[arg(long)]
    rmh_sigma: Option<f64>,
    #[arg(long, value_enum)]
    potential: Option<PotentialArg>,
    /// Start each chain from the best of this many prior draws.
    #[arg(long)]
    init_draws: Option<usize>,
    /// Runs executed in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed of the generated mixture data.
    #[arg(long)]
    data_seed: Option<u64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            model: self.model,
            algorithm: self.algorithm,
            samples: self.samples,
            burnin: self.burnin,
            runs: self.runs,
            eps: self.eps,
            steps: self.steps,
            thin: self.thin,
            seed: self.seed,
            out: self.out.clone(),
            trim: if self.no_trim {
                Some(false)
            } else if self.trim {
                Some(true)
            } else {
                None
            },
            rmh_sigma: self.rmh_sigma,
            potential: self.potential.map(|p| match p {
                PotentialArg::Weight => Potential::Weight,
                PotentialArg::Joint => Potential::Joint,
            }),
            init_draws: self.init_draws,
            jobs: self.jobs,
            data_seed: self.data_seed,
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = match &args.config {
                Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Spec(format!("{}: {e}", p.display())))?),
                None => None,
            };
            let spec = resolve(config.as_deref(), &args.overrides())?;
            let (report, dir) = run_experiment(&spec)?;
            for r in &report.runs {
                match &r.error {
                    Some(e) => eprintln!("run {}: failed: {e}", r.run),
                    None => eprintln!("run {}: {} samples, acceptance {:.3}", r.run, r.samples, r.acceptance_rate),
                }
            }
            for (k, a) in &report.aggregate {
                println!("{k}: {:.4} ± {:.4} over {} runs", a.mean, a.sd, a.n);
            }
            println!("wrote {}", dir.display());
            if report.runs.iter().all(|r| r.error.is_some()) {
                return Err(CliError::AllRunsFailed);
            }
            Ok(())
        }
        Command::Verify { dir } => {
            println!("{}", verify_dir(&dir)?);
            Ok(())
        }
        Command::Plotdata { dirs, out } => {
            for p in emit_plot_data(&dirs, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
