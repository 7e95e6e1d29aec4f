use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::sampling::{sample_problem, SampleSet};
use crate::training::{self, LossBreakdown, Regime, RunMetrics};

use super::config::{sampling_seeds, ExperimentConfig};

/// Everything a finished run produced, before persistence.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// The resolved single-run configuration.
    pub config: ExperimentConfig,
    pub net: Mlp,
    pub metrics: RunMetrics,
    pub train: SampleSet,
    pub test: SampleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub seed: u64,
    pub final_train: LossBreakdown,
    pub final_test: f64,
    pub epochs_completed: usize,
    pub diverged: bool,
    pub divergence_reason: Option<String>,
    pub wall_time_secs: f64,
    pub checkpoint_sha256: String,
    pub run_dir: PathBuf,
}

/// Samples, initializes and trains one `(regime, seed)` run in memory.
///
/// The network init seed is `seed` and the train and test point sets come
/// from [`sampling_seeds`], so runs of different regimes under one seed
/// start from the same network and see the same points.
pub fn execute(cfg: &ExperimentConfig, regime: Regime, seed: u64) -> Result<RunOutcome> {
    let problem = cfg.validate()?;
    let single = cfg.single(regime, seed);
    let (train_seed, test_seed) = sampling_seeds(seed);
    let (train, test) = sample_problem(&problem, cfg.n_f, cfg.n_u, cfg.n_test, train_seed, test_seed);
    let net = Mlp::init(&cfg.network.sizes(problem.d), seed)?;
    let (net, metrics) = training::train(&problem, net, &train, &test, &single.train)?;
    Ok(RunOutcome {
        config: single,
        net,
        metrics,
        train,
        test,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a single-run config. The output directory is excluded.
pub fn config_hash(single: &ExperimentConfig) -> String {
    let mut c = single.clone();
    c.out_dir = PathBuf::new();
    hex_digest(serde_json::to_string(&c).expect("config serializes").as_bytes())
}

fn run_dir_name(single: &ExperimentConfig) -> String {
    format!(
        "{}-{}-s{}-{}",
        single.problem.name,
        single.train.regime.name().replace('+', "_"),
        single.train.seed,
        &config_hash(single)[..12]
    )
}

pub(crate) fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Creates a directory that did not exist before, walking `-2`, `-3`, ...
/// suffixes when the name is taken.
pub(crate) fn fresh_dir(parent: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    for n in 1.. {
        let dir = if n == 1 {
            parent.join(name)
        } else {
            parent.join(format!("{name}-{n}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(&dir, e)),
        }
    }
    unreachable!()
}

/// Writes a run's artifacts into a new directory under `<out_dir>/runs`.
pub fn persist(outcome: &RunOutcome) -> Result<RunSummary> {
    let cfg = &outcome.config;
    let dir = fresh_dir(&cfg.out_dir.join("runs"), &run_dir_name(cfg))?;
    let config_json = serde_json::to_string_pretty(cfg)?;
    let checkpoint = outcome.net.to_bytes();
    write(&dir.join("config.json"), &config_json)?;
    write(&dir.join("checkpoint.bin"), &checkpoint)?;
    let compact = serde_json::to_string(cfg)?;
    write(
        &dir.join("metrics.csv"),
        format!("# config: {compact}\n{}", outcome.metrics.to_csv()),
    )?;
    write(&dir.join("train_points.csv"), outcome.train.to_csv())?;
    write(&dir.join("test_points.csv"), outcome.test.to_csv())?;
    let m = &outcome.metrics;
    let summary = RunSummary {
        config: cfg.clone(),
        regime: cfg.train.regime,
        seed: cfg.train.seed,
        final_train: m.final_train,
        final_test: m.final_test,
        epochs_completed: m.epochs_completed,
        diverged: m.diverged,
        divergence_reason: m.divergence_reason.clone(),
        wall_time_secs: m.wall_time_secs,
        checkpoint_sha256: hex_digest(&checkpoint),
        run_dir: dir.clone(),
    };
    write(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// A completed earlier run with the same content hash, if any.
fn find_previous(single: &ExperimentConfig) -> Option<RunSummary> {
    let path = single.out_dir.join("runs").join(run_dir_name(single)).join("summary.json");
    let text = fs::read_to_string(path).ok()?;
    let s: RunSummary = serde_json::from_str(&text).ok()?;
    (config_hash(&s.config) == config_hash(single)).then_some(s)
}

/// Executes and persists one run, or returns the summary of an identical
/// earlier run found under the same output directory. Runs are
/// deterministic per configuration, so the earlier result is the same.
pub fn run_one(cfg: &ExperimentConfig, regime: Regime, seed: u64) -> Result<RunSummary> {
    let single = cfg.single(regime, seed);
    if let Some(prev) = find_previous(&single) {
        log::info!("reusing {}", prev.run_dir.display());
        return Ok(prev);
    }
    let outcome = execute(cfg, regime, seed)?;
    let s = persist(&outcome)?;
    log::info!(
        "{regime} seed {seed}: train {:.3e} test {:.3e} ({:.1}s) -> {}",
        s.final_train.total,
        s.final_test,
        s.wall_time_secs,
        s.run_dir.display()
    );
    Ok(s)
}

/// `train.regime` for every configured seed.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<RunSummary>> {
    cfg.validate()?;
    cfg.seeds
        .iter()
        .map(|&s| run_one(cfg, cfg.train.regime, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{NetworkConfig, ProblemConfig};

    fn tiny(out: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: ProblemConfig::ks(),
            network: NetworkConfig::new(1, 4),
            n_f: 8,
            n_u: 4,
            n_test: 10,
            seeds: vec![0, 1],
            out_dir: out.to_path_buf(),
            ..Default::default()
        };
        cfg.train.epochs = 3;
        cfg.train.eval_interval = 1;
        cfg.train.pgd_steps = 2;
        cfg
    }

    #[test]
    fn run_persists_artifacts_per_seed() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = tiny(tmp.path());
        cfg.train.regime = Regime::Piat;
        let runs = run(&cfg).unwrap();
        assert_eq!(runs.len(), 2);
        assert_ne!(runs[0].run_dir, runs[1].run_dir);
        for s in &runs {
            for f in ["config.json", "checkpoint.bin", "metrics.csv", "summary.json", "train_points.csv"] {
                assert!(s.run_dir.join(f).is_file(), "{f}");
            }
            let summary: RunSummary =
                serde_json::from_str(&fs::read_to_string(s.run_dir.join("summary.json")).unwrap()).unwrap();
            assert_eq!(summary.config.train.epsilon, 0.05);
            assert_eq!(summary.config.train.regime, Regime::Piat);
            assert!(summary.final_test.is_finite());
            let csv = fs::read_to_string(s.run_dir.join("metrics.csv")).unwrap();
            assert!(csv.starts_with("# config: {"));
            let bytes = fs::read(s.run_dir.join("checkpoint.bin")).unwrap();
            assert_eq!(hex_digest(&bytes), summary.checkpoint_sha256);
            let net = Mlp::from_bytes_for(&bytes, 1).unwrap();
            assert_eq!(net.seed(), s.seed);
        }
    }

    #[test]
    fn identical_runs_are_reused_and_dirs_never_clobbered() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let a = run_one(&cfg, Regime::Pinn, 0).unwrap();
        let b = run_one(&cfg, Regime::Pinn, 0).unwrap();
        assert_eq!(a, b);
        // A leftover directory without a summary is not reused or overwritten.
        fs::remove_file(a.run_dir.join("summary.json")).unwrap();
        let c = run_one(&cfg, Regime::Pinn, 0).unwrap();
        assert_ne!(c.run_dir, a.run_dir);
        assert_eq!(c.final_test.to_bits(), a.final_test.to_bits());
        assert!(a.run_dir.join("checkpoint.bin").is_file());
    }

    #[test]
    fn execution_is_deterministic_and_paired_across_regimes() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let a = execute(&cfg, Regime::Gaussian, 3).unwrap();
        let b = execute(&cfg, Regime::Gaussian, 3).unwrap();
        assert_eq!(a.net, b.net);
        let c = execute(&cfg, Regime::Piat, 3).unwrap();
        assert_eq!(a.train, c.train);
        assert_eq!(a.test, c.test);
    }
}
