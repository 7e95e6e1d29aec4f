use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problems::KsSolution;
use crate::training::Regime;

use super::config::{ExperimentConfig, NetworkConfig, ProblemConfig};
use super::report::{run_group, Published, Report};

pub const TABLE_IDS: [&str; 11] = ["T1", "T2", "T3", "T4", "T5", "T6", "T8+T9", "T10", "T11", "T12", "T13"];

/// One config of a table with the regimes it reports.
#[derive(Debug, Clone)]
pub struct Cell {
    pub label: String,
    pub config: ExperimentConfig,
    pub regimes: Vec<(Regime, Option<Published>)>,
}

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub id: &'static str,
    pub title: &'static str,
    pub cells: Vec<Cell>,
}

fn p(train: f64, test: f64) -> Option<Published> {
    Some(Published { train, test })
}

fn base(problem: ProblemConfig, layers: usize, neurons: usize, n_f: usize, n_u: usize, n_test: usize, epochs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        problem,
        network: NetworkConfig::new(layers, neurons),
        n_f,
        n_u,
        n_test,
        ..Default::default()
    };
    c.train.epochs = epochs;
    c
}

fn ranged(mut c: ExperimentConfig, x: (f64, f64), t_max: f64) -> ExperimentConfig {
    c.problem.x_range = Some(x);
    c.problem.t_max = Some(t_max);
    c
}

fn pinn_piat(pinn: Option<Published>, piat: Option<Published>) -> Vec<(Regime, Option<Published>)> {
    vec![(Regime::Pinn, pinn), (Regime::Piat, piat)]
}

fn cell(label: impl Into<String>, config: ExperimentConfig, regimes: Vec<(Regime, Option<Published>)>) -> Cell {
    Cell {
        label: label.into(),
        config,
        regimes,
    }
}

/// Architecture and epoch count used for the Allen-Cahn dimension sweep,
/// which the source leaves unstated; taken from its wider-range AC table.
pub const AC_SWEEP_NET: (usize, usize) = (5, 80);
pub const AC_SWEEP_EPOCHS: usize = 10_000;

/// The config grid and published values of a table. Accepts `T7`, `T8` and
/// `T9` as aliases of `T8+T9`.
pub fn table(id: &str) -> Result<TableSpec> {
    let norm = id.trim().to_ascii_uppercase().replace(' ', "");
    let ks = ProblemConfig::ks;
    let sk = ProblemConfig::sk;
    let spec = match norm.as_str() {
        "T1" => TableSpec {
            id: "T1",
            title: "KS regimes, 5x100, N_u=20, N_f=200",
            cells: vec![cell(
                "",
                base(ks(), 5, 100, 200, 20, 100, 10_000),
                vec![
                    (Regime::Pinn, p(1.04e-3, 1.08e-3)),
                    (Regime::PinnWd, p(3.07e-5, 2.39e-5)),
                    (Regime::Piat, p(2.23e-6, 2.59e-6)),
                    (Regime::PiatWd, p(1.46e-6, 1.29e-6)),
                    (Regime::Gaussian, p(1.11e-2, 1.07e-2)),
                ],
            )],
        },
        "T2" => TableSpec {
            id: "T2",
            title: "KS boundary point count, 5x100, N_f=200",
            cells: [
                (20, p(1.04e-3, 1.08e-3), p(2.23e-6, 2.59e-6)),
                (40, p(5.65e-6, 4.87e-6), p(4.50e-6, 3.98e-6)),
                (70, p(3.88e-5, 3.21e-5), p(9.25e-6, 8.90e-6)),
                (100, p(5.90e-6, 8.72e-6), p(1.11e-6, 9.90e-7)),
            ]
            .into_iter()
            .map(|(n_u, a, b)| cell(format!("N_u={n_u}"), base(ks(), 5, 100, 200, n_u, 100, 20_000), pinn_piat(a, b)))
            .collect(),
        },
        "T3" => TableSpec {
            id: "T3",
            title: "KS neurons per layer, 5 layers",
            cells: [
                (10, p(1.46e-1, 1.44e-1), p(1.36e-1, 1.33e-1)),
                (50, p(4.40e-5, 2.81e-5), p(1.06e-4, 9.91e-5)),
                (100, p(6.44e-5, 5.86e-5), p(2.23e-6, 2.59e-6)),
            ]
            .into_iter()
            .map(|(n, a, b)| cell(format!("neurons={n}"), base(ks(), 5, n, 200, 20, 100, 20_000), pinn_piat(a, b)))
            .collect(),
        },
        "T4" => TableSpec {
            id: "T4",
            title: "KS layer count, 50 neurons",
            cells: [
                (5, p(4.40e-5, 2.81e-5), p(1.06e-4, 9.91e-5)),
                (10, p(1.50e-3, 1.40e-3), p(3.16e-5, 2.50e-5)),
                (20, p(1.43e-4, 8.88e-5), p(6.51e-6, 2.98e-6)),
            ]
            .into_iter()
            .map(|(l, a, b)| cell(format!("layers={l}"), base(ks(), l, 50, 200, 20, 100, 20_000), pinn_piat(a, b)))
            .collect(),
        },
        "T5" => TableSpec {
            id: "T5",
            title: "KS wider x and t ranges, 5x100, N_u=50, N_f=2000",
            cells: [
                (20.0, 1.0, p(4.01e-8, 6.33e-8), p(2.25e-8, 2.36e-8)),
                (20.0, 10.0, p(7.13e-7, 7.91e-7), p(1.16e-7, 1.32e-7)),
                (50.0, 1.0, p(9.88e-6, 2.41e-5), p(5.98e-6, 6.29e-6)),
                (50.0, 10.0, p(1.13e-4, 3.20e-4), p(7.16e-5, 7.52e-5)),
            ]
            .into_iter()
            .map(|(x, t, a, b)| {
                let c = ranged(base(ks(), 5, 100, 2000, 50, 1000, 20_000), (0.0, x), t);
                cell(format!("x in [0,{x}], t in [0,{t}]"), c, pinn_piat(a, b))
            })
            .collect(),
        },
        "T6" => {
            let mut prob = ks();
            prob.ks_solution = KsSolution::ExpCosSin;
            let c = ranged(base(prob, 5, 100, 2000, 50, 1000, 20_000), (0.0, 20.0), 1.0);
            TableSpec {
                id: "T6",
                title: "KS with u = e^t cos(x) sin(1+x)",
                cells: vec![cell("x in [0,20], t in [0,1]", c, pinn_piat(p(5.07e-5, 8.30e-5), p(4.61e-6, 6.91e-6)))],
            }
        }
        "T8+T9" | "T7" | "T8" | "T9" => {
            // Rows: (layers, neurons, PINN, PIAT).
            let grid = [
                (2, 10, p(2.73e-6, 2.78e-6), p(1.21e-6, 1.28e-6)),
                (2, 20, p(7.55e-7, 6.99e-7), p(2.35e-7, 2.36e-7)),
                (2, 40, p(7.44e-7, 7.86e-7), p(3.10e-7, 2.74e-7)),
                (4, 10, p(4.06e-8, 3.78e-8), p(3.21e-8, 2.93e-8)),
                (4, 20, p(3.55e-8, 3.67e-8), p(2.13e-8, 2.15e-8)),
                (4, 40, p(1.63e-8, 1.62e-8), p(1.45e-8, 1.45e-8)),
                (8, 10, p(1.46e-8, 1.46e-8), p(1.24e-8, 1.27e-8)),
                (8, 20, p(3.56e-8, 3.46e-8), p(1.53e-8, 1.50e-8)),
                (8, 40, p(2.11e-8, 1.99e-8), p(1.58e-8, 1.57e-8)),
            ];
            let mut cells: Vec<Cell> = grid
                .into_iter()
                .map(|(l, n, a, b)| cell(format!("{l}x{n}"), base(sk(), l, n, 100, 10, 100, 10_000), pinn_piat(a, b)))
                .collect();
            cells.push(cell(
                "2x10 with weight decay",
                base(sk(), 2, 10, 100, 10, 100, 10_000),
                vec![
                    (Regime::Pinn, p(2.73e-6, 2.78e-6)),
                    (Regime::PinnWd, p(7.64e-8, 6.98e-8)),
                    (Regime::Piat, p(1.21e-6, 1.28e-6)),
                    (Regime::PiatWd, p(4.20e-8, 4.06e-8)),
                ],
            ));
            TableSpec {
                id: "T8+T9",
                title: "SK layers x neurons grid and weight decay",
                cells,
            }
        }
        "T10" => TableSpec {
            id: "T10",
            title: "SK weight decay, 2x20",
            cells: vec![cell(
                "",
                base(sk(), 2, 20, 100, 10, 100, 10_000),
                vec![
                    (Regime::Pinn, p(7.55e-7, 6.99e-7)),
                    (Regime::PinnWd, p(1.55e-7, 1.57e-7)),
                    (Regime::Piat, p(2.35e-7, 2.36e-7)),
                    (Regime::PiatWd, p(6.78e-9, 6.44e-9)),
                ],
            )],
        },
        "T11" => TableSpec {
            id: "T11",
            title: "SK wider x and t ranges, 2x10",
            cells: [
                (5.0, p(6.01e-7, 6.96e-7), p(2.32e-7, 3.04e-7)),
                (10.0, p(4.10e-6, 4.13e-6), p(2.83e-7, 3.83e-7)),
            ]
            .into_iter()
            .map(|(r, a, b)| {
                let c = ranged(base(sk(), 2, 10, 100, 10, 100, 10_000), (0.0, r), r);
                cell(format!("x in [0,{r}], t in [0,{r}]"), c, pinn_piat(a, b))
            })
            .collect(),
        },
        "T12" => {
            let (l, n) = AC_SWEEP_NET;
            TableSpec {
                id: "T12",
                title: "Allen-Cahn dimension sweep, N_f=1000, N_u=100",
                cells: [
                    (1, p(0.01243, 0.01252), p(0.0060, 0.0059)),
                    (3, p(0.00651, 0.00641), p(0.00300, 0.00297)),
                    (10, p(0.00269, 0.00284), p(0.00116, 0.00118)),
                ]
                .into_iter()
                .map(|(d, a, b)| {
                    cell(format!("d={d}"), base(ProblemConfig::ac(d), l, n, 1000, 100, 500, AC_SWEEP_EPOCHS), pinn_piat(a, b))
                })
                .collect(),
            }
        }
        "T13" => TableSpec {
            id: "T13",
            title: "Allen-Cahn wider ranges, d=2, 5x80",
            cells: [
                (PI, 3.0, "pi", p(0.01206, 0.01164), p(0.10180, 0.01001)),
                (2.0 * PI, 7.0, "2pi", p(0.04487, 0.04654), p(0.00606, 0.00595)),
            ]
            .into_iter()
            .map(|(x, t, xl, a, b)| {
                let c = ranged(base(ProblemConfig::ac(2), 5, 80, 1000, 100, 500, 10_000), (0.0, x), t);
                cell(format!("x in [0,{xl}], t in [0,{t}]"), c, pinn_piat(a, b))
            })
            .collect(),
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown table {id:?}; supported: {}",
                TABLE_IDS.join(", ")
            )))
        }
    };
    Ok(spec)
}

/// Options applied to every cell of a reproduced table.
#[derive(Debug, Clone, Default)]
pub struct ReproduceOptions {
    /// Halve every cell's epoch count.
    pub desk: bool,
    pub seeds: Option<Vec<u64>>,
    /// Replaces the table's epochs (before halving).
    pub epochs: Option<usize>,
    pub out_dir: Option<std::path::PathBuf>,
    /// `key=value` overrides as for `run`.
    pub sets: Vec<String>,
}

/// The resolved cells of a table under `opts`, without running anything.
pub fn plan(id: &str, opts: &ReproduceOptions) -> Result<TableSpec> {
    let mut spec = table(id)?;
    for c in &mut spec.cells {
        let mut cfg = c.config.apply_overrides(&opts.sets)?;
        if let Some(e) = opts.epochs {
            cfg.train.epochs = e;
        }
        if opts.desk {
            cfg.train.epochs = (cfg.train.epochs / 2).max(1);
        }
        if let Some(s) = &opts.seeds {
            cfg.seeds = s.clone();
        }
        if let Some(o) = &opts.out_dir {
            cfg.out_dir = o.clone();
        }
        cfg.validate()?;
        c.config = cfg;
    }
    Ok(spec)
}

/// Runs every cell of a table and reports measured medians next to the
/// published values.
pub fn reproduce(id: &str, opts: &ReproduceOptions) -> Result<Report> {
    let spec = plan(id, opts)?;
    let mut notes = vec!["published values are single runs; measured values are medians over seeds".to_string()];
    if opts.desk {
        notes.push("desk scale: epochs halved relative to the table".into());
    }
    let groups = spec
        .cells
        .iter()
        .map(|c| run_group(&c.label, &c.config, &c.regimes))
        .collect::<Result<Vec<_>>>()?;
    Ok(Report {
        title: format!("{}: {}", spec.id, spec.title),
        notes,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_table_resolves_and_validates() {
        for id in TABLE_IDS {
            let spec = plan(id, &ReproduceOptions::default()).unwrap();
            assert_eq!(spec.id, id);
            assert!(!spec.cells.is_empty());
        }
        assert!(table("T7").is_ok());
        assert!(matches!(table("T14"), Err(Error::Config(_))));
    }

    #[test]
    fn t1_covers_all_regimes() {
        let spec = table("T1").unwrap();
        let mut got: Vec<Regime> = spec.cells[0].regimes.iter().map(|r| r.0).collect();
        got.sort_by_key(|r| r.name());
        let mut want = Regime::ALL.to_vec();
        want.sort_by_key(|r| r.name());
        assert_eq!(got, want);
        assert_eq!(spec.cells[0].config.train.epochs, 10_000);
    }

    #[test]
    fn t12_dimensions_and_t2_epochs() {
        let spec = table("T12").unwrap();
        let ds: Vec<usize> = spec.cells.iter().map(|c| c.config.problem.d).collect();
        assert_eq!(ds, vec![1, 3, 10]);
        assert!(table("T2").unwrap().cells.iter().all(|c| c.config.train.epochs == 20_000));
    }

    #[test]
    fn desk_halves_epochs() {
        let opts = ReproduceOptions {
            desk: true,
            epochs: Some(30),
            seeds: Some(vec![7]),
            ..Default::default()
        };
        let spec = plan("T10", &opts).unwrap();
        assert_eq!(spec.cells[0].config.train.epochs, 15);
        assert_eq!(spec.cells[0].config.seeds, vec![7]);
    }

    #[test]
    fn tiny_reproduce_annotates_desk() {
        let tmp = tempfile::tempdir().unwrap();
        let opts = ReproduceOptions {
            desk: true,
            epochs: Some(2),
            seeds: Some(vec![0]),
            out_dir: Some(tmp.path().to_path_buf()),
            sets: vec!["network.hidden_layers=1".into(), "network.neurons=3".into(), "train.pgd_steps=1".into()],
        };
        let rep = reproduce("T11", &opts).unwrap();
        assert_eq!(rep.groups.len(), 2);
        assert!(rep.notes.iter().any(|n| n.contains("desk")));
        assert!(rep.to_text().contains("pub test"));
        assert_eq!(rep.groups[1].rows[0].published.unwrap().test, 4.13e-6);
    }
}
