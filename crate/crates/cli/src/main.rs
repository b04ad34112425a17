use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hdlink_cli::{commands, Config, Run};

#[derive(Parser)]
#[command(name = "hdlink", version, about = "Qudit entanglement distribution simulator")]
struct Cli {
    /// TOML scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides scenario.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "HDLINK_OUT")]
    out: Option<PathBuf>,
    /// Sessions for stabilise, trials for scaling, Monte-Carlo repetitions for tomography.
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drifting link with and without phase stabilisation.
    Stabilise,
    /// Full tomography pipeline on the distributed state.
    Tomography,
    /// Fidelity against dimension and phase-measurement error.
    Scaling,
    /// Number of measurement settings for each tomography scheme.
    Counts {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        parties: usize,
    },
    /// Reversed Hong-Ou-Mandel fringe and visibility.
    Rhom {
        #[arg(long, default_value_t = 1.0)]
        indistinguishability: f64,
        #[arg(long, default_value_t = 181)]
        points: usize,
    },
    /// Fit a fringe scan given as CSV with columns drive,power.
    FringeFit { input: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let run = Run::new(config, cli.seed, cli.out, cli.trials);
    match cli.command {
        Command::Stabilise => {
            let s = commands::stabilise(&run)?;
            println!(
                "mean fidelity: stabilised {:.4}, unstabilised {:.4}; duty cycle {:.2}%",
                s.mean_fidelity_stabilised,
                s.mean_fidelity_unstabilised,
                100.0 * s.duty_cycle
            );
        }
        Command::Tomography => {
            let t = commands::tomography(&run)?;
            println!("fidelity {:.4}, entropy {:.4}, dimension witness {}", t.fidelity.value, t.entropy.value, t.dimension_witness);
        }
        Command::Scaling => {
            for r in commands::scaling(&run)? {
                println!("d={} eps={} fidelity {:.4} ± {:.4}", r.d, r.epsilon, r.mean_fidelity, r.std_fidelity);
            }
        }
        Command::Counts { d, parties } => print!("{}", commands::counts_table(d, parties)?),
        Command::Rhom { indistinguishability, points } => {
            let (_, v) = commands::rhom(&run, indistinguishability, points)?;
            println!("visibility {v:.4}");
        }
        Command::FringeFit { input } => {
            let r = commands::fringe_fit(&run, &input)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
    }
    Ok(())
}
