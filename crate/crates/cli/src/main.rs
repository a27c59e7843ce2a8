use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Ball-Larus path tracing and k-iteration path profiling.
#[derive(Parser, Debug)]
#[command(name = "kpathprof", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Number the acyclic paths of a CFG and print the probe plan.
    Number {
        cfg: PathBuf,
        /// Edge-frequency file (`src dst count` per line) for smart numbering.
        #[arg(long, value_name = "FREQ")]
        smart: Option<PathBuf>,
        /// Also list every path with its ID.
        #[arg(long)]
        paths: bool,
    },
    /// Replay a block trace into a path-ID stream.
    Trace {
        cfg: PathBuf,
        /// Trace file, one invocation per line (`-` for stdin).
        trace: PathBuf,
        #[arg(long)]
        allow_partial: bool,
        #[arg(long, value_name = "FREQ")]
        smart: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate seeded random block traces by weighted walks.
    Gen {
        cfg: PathBuf,
        /// Edge-weight file (`src dst weight` per line); unlisted edges weigh 0.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        invocations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steps after which each walk heads straight for the exit.
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the k-slab forest of a stream.
    Ksf {
        #[command(flatten)]
        input: StreamArgs,
        #[arg(short, value_parser = parse_k::<2>)]
        k: usize,
        /// Print the forest (default when no other output is chosen).
        #[arg(long)]
        dump: bool,
        /// Print hash-operation and degree statistics.
        #[arg(long)]
        stats: bool,
        #[arg(long)]
        move_to_front: bool,
    },
    /// Build the k-iterations path forest of a stream.
    Profile {
        #[command(flatten)]
        input: StreamArgs,
        #[arg(short, value_parser = parse_k::<1>)]
        k: usize,
        /// Drop nodes below this fraction of their tree's root counter.
        #[arg(long, value_parser = parse_fraction)]
        prune: Option<f64>,
        /// Report the N most frequent label paths instead of the forest.
        #[arg(long, value_name = "N")]
        top: Option<usize>,
        /// Minimum number of labels for `--top`.
        #[arg(long, default_value_t = 1, requires = "top")]
        min_depth: usize,
        /// Show the block sequence of each path ID.
        #[arg(long, value_name = "CFG")]
        decode: Option<PathBuf>,
        /// Edge-frequency file the stream was numbered with, for `--decode`.
        #[arg(long, value_name = "FREQ", requires = "decode")]
        smart: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Brute-force n-gram counts, n <= k.
    Oracle {
        #[command(flatten)]
        input: StreamArgs,
        #[arg(short, value_parser = parse_k::<1>)]
        k: usize,
    },
    /// Check the forest pipeline against the brute-force counts.
    Verify {
        #[command(flatten)]
        input: StreamArgs,
        #[arg(short, value_parser = parse_k::<1>)]
        k: usize,
    },
    /// Space and hash-operation statistics for several k.
    Stats {
        #[command(flatten)]
        input: StreamArgs,
        /// Comma-separated values of k, each at least 2.
        #[arg(short, value_delimiter = ',', required = true, value_parser = parse_k::<2>)]
        k: Vec<usize>,
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// Stream file (`-` for stdin).
    stream: PathBuf,
}

fn parse_k<const MIN: usize>(s: &str) -> Result<usize, String> {
    let k: usize = s
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))?;
    if k >= MIN {
        Ok(k)
    } else {
        Err(format!("k must be at least {MIN}"))
    }
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&f) {
        Ok(f)
    } else {
        Err(format!("{f} is outside [0, 1]"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Mismatch(msg)) => {
            println!("{msg}");
            ExitCode::from(3)
        }
    }
}
