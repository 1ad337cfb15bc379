use clap::{Parser, Subcommand};
use pacp::cli::{self, CliError, Scheme, SweepParam};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pacp",
    about = "Priority-aware collaborative perception simulator and optimizer"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme on one seeded scenario and append the record.
    Run {
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// pacp | fts | dmdda | nofusion
        #[arg(long)]
        scheme: String,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for records.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Record wall-clock times (makes output non-reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Sweep one parameter over a value list for several schemes and seeds.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// tx_power | bandwidth | num_cavs | max_range | noise_offset | energy_budget
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 0.005,0.008,0.011
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Number of seeds, starting at the config seed.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Comma-separated schemes; all four when omitted.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        timing: bool,
    },
    /// Compare greedy link selection against the exhaustive optimum.
    Oracle {
        #[arg(long = "max-n", default_value_t = 5)]
        max_n: usize,
        #[arg(long = "max-k", default_value_t = 3)]
        max_k: usize,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Print every instance instead of only violations.
        #[arg(long)]
        verbose: bool,
    },
    /// Write one vehicle's BEV raster as a portable graymap.
    DumpBev {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        vehicle: usize,
        #[arg(long, default_value = "bev.pgm")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match dispatch(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::UnknownScheme(_)
                | CliError::UnknownParameter(_)
                | CliError::EmptySweep
                | CliError::ConfigRead { .. }
                | CliError::ConfigParse { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(args: Args) -> Result<ExitCode, CliError> {
    match args.command {
        Command::Run {
            config,
            scheme,
            seed,
            out,
            timing,
        } => {
            let scheme = Scheme::parse(&scheme)?;
            let rec = cli::run(config.as_deref(), scheme, seed, &out, timing)?;
            println!(
                "seed {} scheme {}: utility {:.4}, throughput {:.3e} bps, {} links, {} iters",
                rec.seed, rec.scheme, rec.utility, rec.throughput_bps, rec.links, rec.iters
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
            schemes,
            out,
            timing,
        } => {
            let param = SweepParam::parse(&param)?;
            let schemes = match schemes {
                None => Scheme::ALL.to_vec(),
                Some(list) => list
                    .iter()
                    .map(|s| Scheme::parse(s))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let records = cli::sweep(
                config.as_deref(),
                &schemes,
                param,
                &values,
                seeds,
                &out,
                timing,
            )?;
            println!(
                "{} runs written to {}/records.csv (+ plot_*.csv)",
                records.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle {
            max_n,
            max_k,
            instances,
            verbose,
        } => {
            let (checked, violations) = cli::oracle(instances, max_n, max_k, verbose)?;
            println!(
                "{checked} instances checked, {violations} approximation-bound violations"
            );
            Ok(if violations == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::DumpBev {
            config,
            seed,
            vehicle,
            out,
        } => {
            cli::dump_bev(config.as_deref(), seed, vehicle, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
