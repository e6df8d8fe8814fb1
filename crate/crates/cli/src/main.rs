use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neumann_mc::wos::precompute_circle_table;
use neumann_mc_cli::{run_experiment, write_outputs, CliError, CliResult, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "neumann-mc", version, about = "Monte Carlo experiments for Neumann and mixed problems on the square")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Runs one of the published-table presets (1..8).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=8))]
        number: u8,
        /// Prints the preset config instead of running it.
        #[arg(long)]
        print_config: bool,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Builds the unit-disk exit table used by the WOS walkers.
    PrecomputeWos {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pairs: usize,
        #[arg(long)]
        paths: usize,
        /// Samples per stored path.
        #[arg(long, default_value_t = 100)]
        path_len: usize,
        /// Time step of the fine walks.
        #[arg(long, default_value_t = 1e-4)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn set_workers(workers: Option<usize>) -> CliResult<()> {
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run_config(mut cfg: ExperimentConfig, flags: RunFlags) -> CliResult<()> {
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    set_workers(flags.workers)?;
    let out = run_experiment(&cfg)?;
    for p in write_outputs(&flags.out, &cfg, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, flags } => run_config(ExperimentConfig::load(&config)?, flags),
        Command::Table {
            number,
            print_config,
            flags,
        } => {
            let e = Experiment::for_table(number).expect("range checked by clap");
            let cfg = ExperimentConfig::preset(e);
            if print_config {
                print!("{}", cfg.to_toml());
                Ok(())
            } else {
                run_config(cfg, flags)
            }
        }
        Command::PrecomputeWos {
            out,
            pairs,
            paths,
            path_len,
            delta,
            seed,
            workers,
        } => {
            set_workers(workers)?;
            let t = precompute_circle_table(delta, pairs, paths, path_len, seed)?;
            let (m, se) = t.exit_time_stats();
            t.write_to(&out)?;
            println!("{}: mean exit time {m:.5} ± {se:.1e}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
