use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::network::{layer_sizes_for, Mlp};
use crate::problems::{Domain, KsSolution, ProblemParams, ProblemSpec};
use crate::training::{Regime, TrainConfig};

/// Problem selection. `name` picks the equation; the remaining fields that
/// do not apply to it are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    /// Spatial dimension; only Allen-Cahn accepts values other than 1.
    pub d: usize,
    pub nu: f64,
    pub ks_solution: KsSolution,
    pub k: f64,
    pub alpha: f64,
    /// Replaces the problem's default domain with `[x.0, x.1]^d x [0, t_max]`.
    pub x_range: Option<(f64, f64)>,
    pub t_max: Option<f64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            name: "ks".into(),
            d: 1,
            nu: 0.5,
            ks_solution: KsSolution::SinXPlusT,
            k: 0.5,
            alpha: 1.0,
            x_range: None,
            t_max: None,
        }
    }
}

impl ProblemConfig {
    pub fn ks() -> Self {
        ProblemConfig::default()
    }

    pub fn sk() -> Self {
        ProblemConfig {
            name: "sk".into(),
            ..Default::default()
        }
    }

    pub fn ac(d: usize) -> Self {
        ProblemConfig {
            name: "ac".into(),
            d,
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let base = match self.name.to_ascii_lowercase().as_str() {
            "ks" | "kuramoto-sivashinsky" => {
                ProblemSpec::kuramoto_sivashinsky(self.nu).with_ks_solution(self.ks_solution)
            }
            "sk" | "sawada-kotera" => ProblemSpec::sawada_kotera(self.k),
            "ac" | "allen-cahn" => ProblemSpec::allen_cahn(self.d, self.alpha),
            other => return Err(Error::Config(format!("unknown problem {other:?}"))),
        };
        if !matches!(base.params, ProblemParams::Ac { .. }) && self.d != 1 {
            return Err(Error::Config(format!("{} is one-dimensional, got d={}", base.name(), self.d)));
        }
        let domain = &base.domain;
        let x = self.x_range.unwrap_or(domain.x[0]);
        let t_max = self.t_max.unwrap_or(domain.t_max);
        let spec = ProblemSpec {
            domain: Domain::cube(base.d, x.0, x.1, t_max),
            ..base
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub neurons: usize,
    /// Full layer widths including input and output; overrides the two
    /// fields above when present.
    pub layer_sizes: Option<Vec<usize>>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: 2,
            neurons: 50,
            layer_sizes: None,
        }
    }
}

impl NetworkConfig {
    pub fn new(hidden_layers: usize, neurons: usize) -> Self {
        NetworkConfig {
            hidden_layers,
            neurons,
            layer_sizes: None,
        }
    }

    pub fn sizes(&self, d: usize) -> Vec<usize> {
        match &self.layer_sizes {
            Some(s) => s.clone(),
            None => layer_sizes_for(d, self.hidden_layers, self.neurons),
        }
    }
}

/// One experiment: a problem, a network shape, a training configuration,
/// point counts and the seeds to run. `regimes` is only read by `compare`;
/// `run` uses `train.regime`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub n_f: usize,
    pub n_u: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub regimes: Vec<Regime>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: ProblemConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            n_f: 200,
            n_u: 20,
            n_test: 100,
            seeds: vec![0, 1, 2],
            regimes: Vec::new(),
            out_dir: PathBuf::from("runs"),
        }
    }
}

/// Per-seed sampling seeds. Train and test streams never coincide.
pub fn sampling_seeds(seed: u64) -> (u64, u64) {
    let base = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (base ^ 0x5EED_0001, base ^ 0x5EED_0002)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> Result<ProblemSpec> {
        let problem = self.problem.build()?;
        self.train.validate()?;
        let sizes = self.network.sizes(problem.d);
        Mlp::init(&sizes, 0).map_err(|e| Error::Config(e.to_string()))?;
        if sizes[0] != problem.d + 1 {
            return Err(Error::Config(format!(
                "network input width {} does not match d+1={}",
                sizes[0],
                problem.d + 1
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.n_test == 0 {
            return Err(Error::Config("n_test must be >= 1".into()));
        }
        let w = self.train.weights;
        if w.residual > 0.0 && self.n_f == 0 {
            return Err(Error::Config("n_f must be >= 1".into()));
        }
        if (w.boundary > 0.0 || w.initial > 0.0) && self.n_u < 2 {
            return Err(Error::Config("n_u must be >= 2 to cover boundary and initial points".into()));
        }
        if self.train.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        Ok(problem)
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the JSON
    /// form (`train.epsilon`, `problem.d`); values are parsed as JSON and
    /// fall back to plain strings.
    pub fn apply_overrides(&self, sets: &[String]) -> Result<ExperimentConfig> {
        if sets.is_empty() {
            return Ok(self.clone());
        }
        let mut root = serde_json::to_value(self)?;
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            let mut slot = &mut root;
            for part in key.split('.') {
                let obj = slot
                    .as_object_mut()
                    .ok_or_else(|| Error::Config(format!("{key}: {part} is not inside an object")))?;
                slot = obj.entry(part.to_string()).or_insert(Value::Null);
            }
            *slot = value;
        }
        serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
    }

    /// The fully resolved single-run configuration for one regime and seed.
    pub fn single(&self, regime: Regime, seed: u64) -> ExperimentConfig {
        let mut c = self.clone();
        c.train.regime = regime;
        c.train.seed = seed;
        c.seeds = vec![seed];
        c.regimes = vec![regime];
        c
    }
}
