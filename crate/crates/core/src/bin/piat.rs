use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use piat::harness::{self, ExperimentConfig, GridSpec, ReproduceOptions};
use piat::training::Regime;
use piat::{Error, Mlp};

#[derive(Parser)]
#[command(name = "piat", version, about = "Train PINNs with standard, weight-decay, Gaussian or adversarial training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds to run (repeatable); replaces the config's list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Output directory for runs and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config field, e.g. `--set train.epsilon=0.1`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one regime for every seed and persist each run.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        regime: Option<Regime>,
    },
    /// Train several regimes on the same seeds and report medians.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated regimes; replaces the config's list.
        #[arg(long, value_delimiter = ',')]
        regimes: Vec<Regime>,
    },
    /// Re-run one of the published tables.
    Reproduce {
        /// T1, T2, T3, T4, T5, T6, T8+T9, T10, T11, T12 or T13.
        table: String,
        /// Halve every epoch count.
        #[arg(long)]
        desk: bool,
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Write a CSV grid of exact solution, prediction and absolute error.
    ExportGrid {
        checkpoint: PathBuf,
        /// Config naming the problem; defaults to `config.json` beside the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long, default_value_t = 100)]
        n1: usize,
        #[arg(long, default_value_t = 100)]
        n2: usize,
        /// Time slice when d >= 2 (default t_max / 2).
        #[arg(long)]
        t: Option<f64>,
        /// Value of the spatial coordinates beyond the first two.
        #[arg(long, default_value_t = 0.0)]
        others: f64,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a checkpoint's architecture and parameter statistics.
    InspectCheckpoint { checkpoint: PathBuf },
}

enum Failure {
    Error(Error),
    Diverged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_config(path: Option<&Path>, sets: &[String]) -> Result<ExperimentConfig, Error> {
    let base = match path {
        Some(p) => ExperimentConfig::from_json(&read(p)?)?,
        None => ExperimentConfig::default(),
    };
    base.apply_overrides(sets)
}

fn resolve(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = load_config(common.config.as_deref(), &common.sets)?;
    if !common.seeds.is_empty() {
        cfg.seeds = common.seeds.clone();
    }
    if let Some(e) = common.epochs {
        cfg.train.epochs = e;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn finish_report(report: &harness::Report, out: &Path) -> Result<(), Failure> {
    print!("{}", report.to_text());
    let dir = report.save(out)?;
    println!("report written to {}", dir.display());
    if report.any_diverged() {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { common, regime } => {
            let mut cfg = resolve(&common)?;
            if let Some(r) = regime {
                cfg.train.regime = r;
            }
            let runs = harness::run(&cfg)?;
            for s in &runs {
                println!(
                    "{} seed {}: train {:.4e} test {:.4e} epochs {}{} -> {}",
                    s.regime,
                    s.seed,
                    s.final_train.total,
                    s.final_test,
                    s.epochs_completed,
                    if s.diverged { " DIVERGED" } else { "" },
                    s.run_dir.display()
                );
            }
            let tests: Vec<f64> = runs.iter().map(|s| s.final_test).collect();
            println!("median test {:.4e}", harness::median(&tests));
            if runs.iter().any(|s| s.diverged) {
                return Err(Failure::Diverged);
            }
            Ok(())
        }
        Command::Compare { common, regimes } => {
            let mut cfg = resolve(&common)?;
            if !regimes.is_empty() {
                cfg.regimes = regimes;
            }
            let report = harness::compare(&cfg)?;
            finish_report(&report, &cfg.out_dir)
        }
        Command::Reproduce {
            table,
            desk,
            seeds,
            epochs,
            out,
            sets,
        } => {
            let out = out.unwrap_or_else(|| ExperimentConfig::default().out_dir);
            let opts = ReproduceOptions {
                desk,
                seeds: (!seeds.is_empty()).then_some(seeds),
                epochs,
                out_dir: Some(out.clone()),
                sets,
            };
            let report = harness::reproduce(&table, &opts)?;
            finish_report(&report, &out)
        }
        Command::ExportGrid {
            checkpoint,
            config,
            sets,
            n1,
            n2,
            t,
            others,
            output,
        } => {
            let config = config.or_else(|| {
                let sibling = checkpoint.with_file_name("config.json");
                sibling.is_file().then_some(sibling)
            });
            let cfg = load_config(config.as_deref(), &sets)?;
            let problem = cfg.problem.build()?;
            let bytes = std::fs::read(&checkpoint).map_err(|e| Error::io(&checkpoint, e))?;
            let net = Mlp::from_bytes_for(&bytes, problem.d)?;
            let spec = GridSpec { n1, n2, t, others };
            let csv = harness::grid_csv(&harness::export_error_grid(&net, &problem, &spec)?);
            match output {
                Some(p) => std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::InspectCheckpoint { checkpoint } => {
            let bytes = std::fs::read(&checkpoint).map_err(|e| Error::io(&checkpoint, e))?;
            let net = Mlp::from_bytes(&bytes)?;
            let p = net.params();
            let max = p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            println!("layer sizes  {:?}", net.layer_sizes());
            println!("activation   {:?}", net.activation());
            println!("init seed    {}", net.seed());
            println!("parameters   {}", net.param_count());
            println!("||theta||^2  {:.6e}", net.squared_norm());
            println!("max |theta|  {max:.6e}");
            let summary = checkpoint.with_file_name("summary.json");
            if let Ok(text) = std::fs::read_to_string(&summary) {
                if let Ok(s) = serde_json::from_str::<harness::RunSummary>(&text) {
                    println!(
                        "run          {} {} seed {} on {} (test {:.4e})",
                        s.config.problem.name, s.regime, s.seed, s.run_dir.display(), s.final_test
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged) => {
            eprintln!("at least one run diverged");
            ExitCode::from(2)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
