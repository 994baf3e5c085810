//! `parnet` command-line runner.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 runtime error.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parnet::experiments;
use parnet::mnist::{self, OFFICIAL_MD5};
use parnet::{load_config, Dataset, Error, RunConfig};

const DATA_ENV: &str = "PARNET_DATA_DIR";
const DEFAULT_DATA_DIR: &str = "data";

#[derive(Parser, Debug)]
#[command(name = "parnet", version, about = "Train sequential and data-parallel networks on MNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one network (children = 1) or one parallel network.
    Train(Overrides),
    /// Compare hidden activations for an SNN and a 10-child PNN.
    SweepActivations(Overrides),
    /// Train PNNs with each child count in the sweep list (learning rate 0.1).
    SweepChildren(Overrides),
    /// Time a short PNN job for a range of worker counts.
    BenchWorkers(Overrides),
}

/// Flags override values from the config file.
#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    /// Config file; defaults to config.yaml beside the executable.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory holding the four MNIST IDX files (falls back to $PARNET_DATA_DIR).
    #[arg(long, value_name = "PATH")]
    data_dir: Option<PathBuf>,
    /// CSV output path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    children: Option<usize>,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
}

impl Command {
    fn overrides(&self) -> &Overrides {
        match self {
            Command::Train(o)
            | Command::SweepActivations(o)
            | Command::SweepChildren(o)
            | Command::BenchWorkers(o) => o,
        }
    }
}

fn resolve_config(o: &Overrides) -> parnet::Result<RunConfig> {
    let mut cfg = load_config(o.config.as_deref())?;
    if let Some(dir) = &o.data_dir {
        cfg.data_dir = Some(dir.clone());
    }
    if let Some(out) = &o.out {
        cfg.run.output_csv = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.network.seed = seed;
    }
    if let Some(children) = o.children {
        cfg.parallel.children = children;
    }
    if let Some(workers) = o.workers {
        cfg.parallel.workers = workers;
    }
    if let Some(epochs) = o.epochs {
        cfg.network.epochs = epochs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn data_dir(cfg: &RunConfig) -> PathBuf {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

fn load_data(dir: &Path) -> parnet::Result<(Dataset, Dataset)> {
    let (train, test) = mnist::load_mnist_dir(dir)?;
    eprintln!(
        "loaded {} training and {} test instances from {}",
        train.len(),
        test.len(),
        dir.display()
    );
    Ok((train, test))
}

fn report_data_error(err: &Error) {
    eprintln!("error: {err}");
    if let Error::MissingData { dir, .. } = err {
        eprintln!("place the MNIST files (optionally gzipped) in {} or point --data-dir / {DATA_ENV} at them:", dir.display());
        for (name, md5) in OFFICIAL_MD5 {
            eprintln!("  {name:<26} md5 {md5}");
        }
    }
}

fn execute(command: &Command, cfg: &RunConfig, train: &Dataset, test: &Dataset) -> parnet::Result<()> {
    let mut log = io::stdout().lock();
    match command {
        Command::Train(_) => {
            experiments::cmd_train(cfg, train, test, &mut log)?;
        }
        Command::SweepActivations(_) => {
            experiments::sweep_activations(cfg, train, test, &mut log)?;
        }
        Command::SweepChildren(_) => {
            experiments::sweep_children(cfg, train, test, &mut log)?;
        }
        Command::BenchWorkers(_) => {
            let (rows, _) = experiments::bench_workers(cfg, train, test, &mut log)?;
            let _ = writeln!(log, "\n{:>8} {:>12} {:>8}", "workers", "seconds", "percent");
            for r in rows {
                let _ = writeln!(log, "{:>8} {:>12.3} {:>7.1}%", r.workers, r.mean_seconds, r.percent);
            }
        }
    }
    if !matches!(command, Command::Train(_)) {
        let _ = writeln!(log, "wrote {}", cfg.run.output_csv.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match resolve_config(cli.command.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let (train, test) = match load_data(&data_dir(&cfg)) {
        Ok(data) => data,
        Err(e) => {
            report_data_error(&e);
            return ExitCode::from(2);
        }
    };
    match execute(&cli.command, &cfg, &train, &test) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
