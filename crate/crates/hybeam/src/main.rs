//! Command-line front end for the hybrid precoding simulator.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use hybeam::channel::read_channel_dump;
use hybeam::cli::{execute, scenario_from_file};
use hybeam::partitioner::{
    approx_lambda1, equal_size_count, exhaustive_partition, exp_corr, exp_corr_lb,
    greedy_partition, lambda1_bounds, random_unit_diagonal_psd, stirling2, PartitionScore,
    DEFAULT_EXHAUSTIVE_LIMIT,
};
use hybeam::spectral::{hermitian_eig, sample_covariance};

#[derive(Parser)]
#[command(
    name = "hybeam",
    version,
    about = "Hybrid analog/digital precoding simulator for wideband mmWave MIMO-OFDM"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario from a config file and write result CSVs.
    Simulate {
        /// Scenario config file (TOML sections, see the README schema).
        #[arg(long)]
        config: PathBuf,
        /// Override the output CSV path from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of concurrent trial workers.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the exhaustive-search partition-count guard.
        #[arg(long)]
        exhaustive_limit: Option<u64>,
        /// Write a mean/std summary CSV next to the raw rows.
        #[arg(long)]
        summary_out: Option<PathBuf>,
        /// Dump each trial's channel as CSV files into this directory.
        #[arg(long)]
        dump_channels: Option<PathBuf>,
    },
    /// Print antenna partitions for a dumped channel (k,rx,tx,re,im CSV).
    Partition {
        /// Channel dump file produced by `simulate --dump-channels`.
        #[arg(long)]
        channel_dump: PathBuf,
        /// Number of RF chains (subsets).
        #[arg(long)]
        n_rf: usize,
        /// greedy | exhaustive-approx | exhaustive-exact
        #[arg(long, default_value = "greedy")]
        method: String,
        /// Restrict the exhaustive search to equal-size subsets.
        #[arg(long)]
        equal_size: bool,
        #[arg(long)]
        exhaustive_limit: Option<u64>,
    },
    /// Sweep the eigenvalue-bound sandwich and the exponential-correlation
    /// identity; exits nonzero on any violation.
    BoundsCheck {
        /// Number of random matrices for the sandwich sweep.
        #[arg(long, default_value_t = 1000)]
        matrices: u64,
        #[arg(long, default_value_t = 2)]
        min_dim: usize,
        #[arg(long, default_value_t = 16)]
        max_dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the number of antenna partitions.
    Count {
        #[arg(long)]
        n_tx: usize,
        #[arg(long)]
        n_rf: usize,
        /// Count only equal-size partitions.
        #[arg(long)]
        equal_size: bool,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            workers,
            seed,
            exhaustive_limit,
            summary_out,
            dump_channels,
        } => {
            let mut scenario = scenario_from_file(&config)?;
            if let Some(out) = out {
                scenario.output = out;
            }
            if let Some(w) = workers {
                scenario.workers = w;
            }
            if let Some(s) = seed {
                scenario.seed = s;
            }
            if let Some(limit) = exhaustive_limit {
                scenario.exhaustive_limit = limit;
            }
            if let Some(path) = summary_out {
                scenario.summary_output = Some(path);
            }
            if let Some(dir) = dump_channels {
                scenario.dump_channels = Some(dir);
            }
            let run = execute(&scenario)?;
            println!(
                "wrote {} rows to {}",
                run.rows.len(),
                scenario.output.display()
            );
            if let Some(summary) = &scenario.summary_output {
                println!("wrote summary to {}", summary.display());
            }
            if !run.scheme_errors.is_empty() {
                for e in &run.scheme_errors {
                    eprintln!("scheme error: {e}");
                }
                bail!("{} scheme evaluations failed", run.scheme_errors.len());
            }
            Ok(())
        }
        Command::Partition {
            channel_dump,
            n_rf,
            method,
            equal_size,
            exhaustive_limit,
        } => {
            let file = fs::File::open(&channel_dump)
                .with_context(|| format!("cannot open {}", channel_dump.display()))?;
            let ch = read_channel_dump(&mut BufReader::new(file))?;
            let cov = sample_covariance(&ch);
            let limit = exhaustive_limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT);
            let partition = match method.as_str() {
                "greedy" => greedy_partition(&cov, n_rf)?,
                "exhaustive-approx" => {
                    exhaustive_partition(
                        &cov,
                        n_rf,
                        PartitionScore::ApproxLambda1,
                        equal_size,
                        limit,
                    )?
                    .0
                }
                "exhaustive-exact" => {
                    exhaustive_partition(
                        &cov,
                        n_rf,
                        PartitionScore::ExactLambda1,
                        equal_size,
                        limit,
                    )?
                    .0
                }
                other => bail!(
                    "unknown method {other:?}; use greedy, exhaustive-approx, or exhaustive-exact"
                ),
            };
            print!("{}", partition.to_text());
            Ok(())
        }
        Command::BoundsCheck {
            matrices,
            min_dim,
            max_dim,
            seed,
        } => {
            if min_dim < 2 || max_dim < min_dim {
                bail!("need 2 <= min_dim <= max_dim");
            }
            let span = (max_dim - min_dim + 1) as u64;
            let mut sandwich_violations = 0u64;
            for i in 0..matrices {
                let n = min_dim + (i % span) as usize;
                let cov = random_unit_diagonal_psd(n, seed.wrapping_add(i));
                let (lb, ub) = lambda1_bounds(&cov);
                let all: Vec<usize> = (0..n).collect();
                let surrogate = approx_lambda1(&cov, &all)?;
                let exact = hermitian_eig(&cov).values[0];
                let eps = 1e-12 * (1.0 + ub.abs());
                if surrogate < lb - eps || surrogate > ub + eps {
                    sandwich_violations += 1;
                }
                if exact < lb - eps || exact > ub + eps {
                    sandwich_violations += 1;
                }
            }
            println!(
                "sandwich sweep: {matrices} matrices, dims {min_dim}..={max_dim}, {sandwich_violations} violations"
            );

            let mut max_dev = 0.0f64;
            let mut mags: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
            mags.push(0.99);
            for &mag in &mags {
                for n in 2..=64usize {
                    let cov = exp_corr(Complex64::from_polar(mag, 0.4), n);
                    let all: Vec<usize> = (0..n).collect();
                    let surrogate = approx_lambda1(&cov, &all)?;
                    let closed = exp_corr_lb(mag, n)?;
                    max_dev = max_dev.max((surrogate - closed).abs());
                }
            }
            println!(
                "exponential-correlation identity: max |surrogate - closed form| = {max_dev:.3e}"
            );
            if sandwich_violations > 0 || max_dev > 1e-12 {
                bail!("bound checks failed");
            }
            Ok(())
        }
        Command::Count {
            n_tx,
            n_rf,
            equal_size,
        } => {
            if equal_size {
                println!("{}", equal_size_count(n_tx, n_rf)?);
            } else {
                println!("{}", stirling2(n_tx, n_rf));
            }
            Ok(())
        }
    }
}
