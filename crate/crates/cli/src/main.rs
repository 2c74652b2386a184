use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixroute::io::commands::{self, CommandError, LearnSource, RunContext};
use mixroute::io::config::load_config;

#[derive(Parser)]
#[command(name = "mixroute", version, about = "Plan latencies and prices for mixed-autonomy road networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the configuration's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the population's preference model.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Answer the queries on this terminal.
        #[arg(long, conflicts_with = "observations")]
        interactive: bool,
        /// Infer from recorded answers instead of simulated riders.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Optimize latencies and prices.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Model file from `learn`; the configured truth when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Play a plan against the simulated population.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Plan file from `plan`.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run the full pipeline with baselines.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
}

fn context(common: &Common) -> Result<RunContext, CommandError> {
    let loaded = load_config(&common.config)?;
    Ok(RunContext::new(loaded, common.seed, common.out.clone()))
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Learn {
            common,
            interactive,
            observations,
        } => {
            let ctx = context(&common)?;
            let record = if interactive {
                let stdin = io::stdin();
                let mut input = stdin.lock();
                let mut output = io::stderr();
                commands::cmd_learn(
                    &ctx,
                    LearnSource::Interactive {
                        input: &mut input as &mut dyn BufRead,
                        output: &mut output as &mut dyn Write,
                    },
                )?
            } else if let Some(path) = observations.as_deref() {
                commands::cmd_learn(&ctx, LearnSource::Records(path))?
            } else {
                commands::cmd_learn(&ctx, LearnSource::Simulated)?
            };
            println!(
                "learned {:?} from {} answers by {} riders -> {}",
                record.model,
                record.observations,
                record.users,
                ctx.out.join("model.json").display()
            );
        }
        Command::Plan { common, model } => {
            let ctx = context(&common)?;
            let r = commands::cmd_plan(&ctx, model.as_deref())?;
            println!(
                "ell={:?} prices={:?} J={:.4} profit={:.4} proposition_holds={} -> {}",
                r.plan.ell.0,
                r.plan.prices,
                r.evaluation.j,
                r.evaluation.profit,
                r.proposition_holds,
                ctx.out.join("plan.json").display()
            );
        }
        Command::Simulate { common, plan } => {
            let ctx = context(&common)?;
            let r = commands::cmd_simulate(&ctx, &plan)?;
            println!(
                "realized J={:.4} profit={:.4} feasible={} (gap J {:+.4}) -> {}",
                r.result.j,
                r.result.profit,
                r.result.feasible,
                r.result.gaps.j,
                ctx.out.join("simulation.json").display()
            );
        }
        Command::Experiment { common } => {
            let ctx = context(&common)?;
            let stdout = io::stdout();
            commands::cmd_experiment(&ctx, &mut stdout.lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
