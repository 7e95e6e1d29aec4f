use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::Regime;

use super::config::ExperimentConfig;
use super::run::{config_hash, fresh_dir, run_one, write, RunSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub train: f64,
    pub test: f64,
    pub diverged: bool,
    pub run_dir: PathBuf,
}

/// Published train and test values for one regime, where the source has them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Published {
    pub train: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRow {
    pub regime: Regime,
    pub runs: Vec<SeedResult>,
    pub median_train: f64,
    pub median_test: f64,
    pub published: Option<Published>,
    /// Lowest median test MSE in its group.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportGroup {
    pub label: String,
    pub config: ExperimentConfig,
    pub rows: Vec<RegimeRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub notes: Vec<String>,
    pub groups: Vec<ReportGroup>,
}

/// Median with NaN sorted last; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn row_from(regime: Regime, runs: &[RunSummary], published: Option<Published>) -> RegimeRow {
    let runs: Vec<SeedResult> = runs
        .iter()
        .map(|s| SeedResult {
            seed: s.seed,
            train: s.final_train.total,
            test: s.final_test,
            diverged: s.diverged,
            run_dir: s.run_dir.clone(),
        })
        .collect();
    let trains: Vec<f64> = runs.iter().map(|r| r.train).collect();
    let tests: Vec<f64> = runs.iter().map(|r| r.test).collect();
    RegimeRow {
        regime,
        median_train: median(&trains),
        median_test: median(&tests),
        runs,
        published,
        best: false,
    }
}

fn flag_best(rows: &mut [RegimeRow]) {
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.median_test.is_finite())
        .min_by(|a, b| a.1.median_test.total_cmp(&b.1.median_test))
        .map(|(i, _)| i);
    if let Some(i) = best {
        let m = rows[i].median_test;
        for r in rows.iter_mut() {
            r.best = r.median_test == m;
        }
    }
}

/// Runs every `(regime, seed)` of one group and assembles its rows.
pub(crate) fn run_group(
    label: &str,
    cfg: &ExperimentConfig,
    regimes: &[(Regime, Option<Published>)],
) -> Result<ReportGroup> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(regimes.len());
    for &(regime, published) in regimes {
        let runs = cfg
            .seeds
            .iter()
            .map(|&s| run_one(cfg, regime, s))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row_from(regime, &runs, published));
    }
    flag_best(&mut rows);
    Ok(ReportGroup {
        label: label.to_string(),
        config: cfg.clone(),
        rows,
    })
}

/// Trains every regime in `cfg.regimes` on every seed and tabulates them.
pub fn compare(cfg: &ExperimentConfig) -> Result<Report> {
    if cfg.regimes.len() < 2 {
        return Err(Error::Config("compare needs at least two regimes".into()));
    }
    let regimes: Vec<_> = cfg.regimes.iter().map(|&r| (r, None)).collect();
    let group = run_group("", cfg, &regimes)?;
    Ok(Report {
        title: format!("compare on {}", cfg.problem.name),
        notes: Vec::new(),
        groups: vec![group],
    })
}

impl Report {
    pub fn any_diverged(&self) -> bool {
        self.groups
            .iter()
            .flat_map(|g| &g.rows)
            .flat_map(|r| &r.runs)
            .any(|r| r.diverged)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# {}", self.title).unwrap();
        for n in &self.notes {
            writeln!(out, "note: {n}").unwrap();
        }
        for g in &self.groups {
            let c = &g.config;
            writeln!(out).unwrap();
            if !g.label.is_empty() {
                writeln!(out, "## {}", g.label).unwrap();
            }
            writeln!(
                out,
                "problem {} d={} net {:?} n_f={} n_u={} n_test={} epochs={} eps={} seeds {:?}",
                c.problem.name,
                c.problem.d,
                c.network.sizes(c.problem.d),
                c.n_f,
                c.n_u,
                c.n_test,
                c.train.epochs,
                c.train.epsilon,
                c.seeds
            )
            .unwrap();
            writeln!(
                out,
                "{:<10} {:>11} {:>11} {:>11} {:>11}  per-seed test",
                "regime", "med train", "med test", "pub train", "pub test"
            )
            .unwrap();
            for r in &g.rows {
                let (pt, pe) = match r.published {
                    Some(p) => (format!("{:.2e}", p.train), format!("{:.2e}", p.test)),
                    None => ("-".into(), "-".into()),
                };
                let seeds: Vec<String> = r
                    .runs
                    .iter()
                    .map(|s| {
                        let mark = if s.diverged { "!" } else { "" };
                        format!("{}:{:.2e}{mark}", s.seed, s.test)
                    })
                    .collect();
                writeln!(
                    out,
                    "{:<10} {:>11.3e} {:>11.3e} {:>11} {:>11}  {}{}",
                    r.regime.name(),
                    r.median_train,
                    r.median_test,
                    pt,
                    pe,
                    seeds.join(" "),
                    if r.best { "  <- best" } else { "" }
                )
                .unwrap();
            }
        }
        if self.any_diverged() {
            writeln!(out, "\n! marks a diverged run").unwrap();
        }
        out
    }

    /// Writes `report.txt` and `report.json` into a new directory under
    /// `<out_dir>/reports` and returns it.
    pub fn save(&self, out_dir: &std::path::Path) -> Result<PathBuf> {
        let json = serde_json::to_string_pretty(self)?;
        let slug: String = self
            .title
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let hash = config_hash_of_report(self);
        let dir = fresh_dir(&out_dir.join("reports"), &format!("{slug}-{}", &hash[..12]))?;
        write(&dir.join("report.json"), json)?;
        write(&dir.join("report.txt"), self.to_text())?;
        Ok(dir)
    }
}

fn config_hash_of_report(r: &Report) -> String {
    let joined: Vec<String> = r.groups.iter().map(|g| config_hash(&g.config)).collect();
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(joined.join(",").as_bytes()))
}
