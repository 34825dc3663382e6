use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aircomp::experiment::{self, ExperimentConfig};
use aircomp::verify::{self, VerifyOptions};
use aircomp::{Error, FadingEnsemble};

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Power control for over-the-air computation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config and write CSV (and SVG) artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config's out_dir (default `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        plots: bool,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        /// Optional JSON file with `quick` and `seed`.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// N = 100 ensembles and a relaxed duality-gap limit.
        #[arg(long)]
        quick: bool,
    },
    /// Write a Rayleigh ensemble as CSV (`state_index, weight, re_h_1, im_h_1, ...`).
    ExportEnsemble {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_h_sq: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, seed, out, plots } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.plots |= plots;
            let out = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("results"));
            match experiment::run(&cfg, &out) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { config, seed, quick } => {
            let mut opts = match config {
                Some(path) => match std::fs::read_to_string(&path) {
                    Ok(text) => match VerifyOptions::from_json(&text) {
                        Ok(o) => o,
                        Err(e) => return fail(e),
                    },
                    Err(e) => return fail(Error::Config(format!("{}: {e}", path.display()))),
                },
                None => VerifyOptions::default(),
            };
            opts.quick |= quick;
            if let Some(s) = seed {
                opts.seed = s;
            }
            let results = verify::run_all(&opts);
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} of {} criteria passed", results.len() - failed, results.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Command::ExportEnsemble { k, n, sigma_h_sq, seed, out } => {
            let result = FadingEnsemble::rayleigh(k, n, sigma_h_sq, seed).and_then(|ens| {
                let file = std::fs::File::create(&out)?;
                ens.write_csv(std::io::BufWriter::new(file))
            });
            match result {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    }
}
