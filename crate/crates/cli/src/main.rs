//! `plstm`: verification suites, benchmarks, arrow datasets, decay tables and the toy trainer.

mod bench;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use plstm_core::arrow::{generate_dataset, DatasetSpec};
use plstm_core::stability::{decay_profile, write_decay_csv};
use plstm_core::verify::{run_suite, Suite};
use plstm_core::vision::{save_checkpoint, train_toy, write_loss_csv, Mode, TrainConfig};
use serde::Serialize;

use bench::{Form, Mismatch};

#[derive(Parser)]
#[command(name = "plstm", version, about = "pLSTM reference implementation tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an oracle-equivalence or invariant suite.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        /// Comma-separated sizes; each suite has its own defaults.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-case CSV; written to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time recurrent, parallel and chunkwise evaluation of a 1D chain.
    Bench {
        /// Forms to time; all three when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        form: Vec<Form>,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 256, 1024])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Merge levels inside each chunk; half of the levels by default.
        #[arg(long)]
        chunk_level: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an arrow-pointing dataset.
    GenArrows {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 192)]
        resolution: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the critical P-mode decay along the leading direction.
    Decay {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        delta_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the two-block classifier on an arrow dataset.
    TrainToy {
        /// Dataset directory written by `gen-arrows`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = CliMode::Alternating)]
        mode: CliMode,
        /// Number of images used; the whole dataset when 0.
        #[arg(long, default_value_t = 512)]
        limit: usize,
        /// Directory for loss.csv, report.json and the checkpoint; loss CSV goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    P,
    D,
    Alternating,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Mode {
        match m {
            CliMode::P => Mode::P,
            CliMode::D => Mode::D,
            CliMode::Alternating => Mode::Alternating,
        }
    }
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|_| {
        let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// Exit status of a command that ran to completion.
enum Outcome {
    Pass,
    ToleranceFailure,
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    seed: u64,
    initial_loss: f64,
    final_loss: f64,
    relative_decrease: f64,
    final_accuracy: f64,
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Verify { suite, sizes, seed, out } => {
            let sizes = if sizes.is_empty() { suite.default_sizes() } else { sizes };
            let report = run_suite(suite, &sizes, seed)?;
            let mut w = sink(out.as_deref())?;
            report.write_csv(&mut w)?;
            w.flush()?;
            eprintln!("{}", report.summary());
            Ok(if report.passed { Outcome::Pass } else { Outcome::ToleranceFailure })
        }
        Command::Bench { form, sizes, reps, chunk_level, seed, out } => {
            let forms = if form.is_empty() { vec![Form::Recurrent, Form::Parallel, Form::Chunkwise] } else { form };
            let rows = bench::bench(&forms, &sizes, reps, chunk_level, seed)?;
            let mut w = sink(out.as_deref())?;
            bench::write_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(Outcome::Pass)
        }
        Command::GenArrows { count, resolution, seed, out } => {
            let m = generate_dataset(&DatasetSpec { count, resolution, seed, out_dir: out.clone() })?;
            eprintln!("wrote {} images at {}px to {}", m.count, m.resolution, out.display());
            Ok(Outcome::Pass)
        }
        Command::Decay { alpha, delta_max, out } => {
            let rows = decay_profile(alpha, delta_max)?;
            let mut w = sink(out.as_deref())?;
            write_decay_csv(&rows, &mut w)?;
            w.flush()?;
            Ok(Outcome::Pass)
        }
        Command::TrainToy { data, steps, seed, mode, limit, out } => {
            let mut cfg = TrainConfig::toy(steps, seed);
            cfg.model.layer.mode = mode.into();
            cfg.limit = (limit > 0).then_some(limit);
            let report = train_toy(&data, &cfg)?;
            let (first, last) = (report.losses[0].1, report.losses[report.losses.len() - 1].1);
            let summary = TrainSummary {
                steps,
                seed,
                initial_loss: first,
                final_loss: last,
                relative_decrease: (first - last) / first,
                final_accuracy: report.final_accuracy,
            };
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    write_loss_csv(&report.losses, BufWriter::new(File::create(dir.join("loss.csv"))?))?;
                    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
                    save_checkpoint(&report.model, &dir.join("checkpoint"))?;
                }
                None => {
                    let mut w = sink(None)?;
                    write_loss_csv(&report.losses, &mut w)?;
                    w.flush()?;
                }
            }
            eprintln!(
                "loss {:.4} -> {:.4} ({:.1}% lower), accuracy {:.3}",
                first,
                last,
                100.0 * summary.relative_decrease,
                report.final_accuracy
            );
            Ok(Outcome::Pass)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PLSTM_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PLSTM_THREADS={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::ToleranceFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Mismatch>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
