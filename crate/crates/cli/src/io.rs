//! Instance files: JSON parsing, canonical digests and random generation.

use std::fmt;
use std::path::Path;

use nswcp::model::Agent;
use nswcp::{NswInstance, SchedInstance, SchedObjective};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NswFile {
    pub agents: Vec<AgentSpec>,
    pub items: Vec<String>,
    /// `(agent, item, value)`; a missing pair means the item is worthless to the agent.
    pub values: Vec<(String, String, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Lk { k: f64 },
    Completion,
}

impl ObjectiveSpec {
    pub fn to_model(self) -> SchedObjective {
        match self {
            ObjectiveSpec::Lk { k } => SchedObjective::PowerLoad { k },
            ObjectiveSpec::Completion => SchedObjective::CompletionUniformSmith,
        }
    }

    /// Parses `l2`, `lk:K` or `completion`.
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "l2" => Ok(ObjectiveSpec::Lk { k: 2.0 }),
            "completion" => Ok(ObjectiveSpec::Completion),
            _ => {
                let k = s
                    .strip_prefix("lk:")
                    .ok_or_else(|| format!("unknown objective `{s}`; expected l2, lk:K or completion"))?;
                let k: f64 = k.parse().map_err(|_| format!("exponent `{k}` is not a number"))?;
                if !(k >= 1.0 && k.is_finite()) {
                    return Err(format!("exponent {k} must be at least 1"));
                }
                Ok(ObjectiveSpec::Lk { k })
            }
        }
    }
}

impl fmt::Display for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveSpec::Lk { k } if *k == 2.0 => write!(f, "l2"),
            ObjectiveSpec::Lk { k } => write!(f, "lk:{k}"),
            ObjectiveSpec::Completion => write!(f, "completion"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedFile {
    pub machines: Vec<String>,
    pub jobs: Vec<String>,
    /// `p[machine][job]`.
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
}

/// Why an input could not be used.
#[derive(Debug)]
pub enum InputError {
    Io { path: String, source: std::io::Error },
    Parse { path: String, line: usize, column: usize, message: String },
    Invalid(String),
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Io { path, source } => write!(f, "cannot read {path}: {source}"),
            InputError::Parse { path, line, column, message } => {
                write!(f, "{path}:{line}:{column}: {message}")
            }
            InputError::Invalid(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for InputError {}

/// A parsed file together with the digest of its canonical form.
pub struct Loaded<T> {
    pub file: T,
    pub digest: String,
}

fn load<T: Serialize + for<'de> Deserialize<'de>>(path: &Path) -> Result<Loaded<T>, InputError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io { path: name.clone(), source })?;
    let file: T = serde_json::from_str(&text).map_err(|e| {
        let full = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        let message = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
        InputError::Parse { path: name, line: e.line(), column: e.column(), message }
    })?;
    let canonical = serde_json::to_vec(&file).expect("parsed files serialize");
    Ok(Loaded { file, digest: hex::encode(Sha256::digest(&canonical)) })
}

pub fn load_nsw(path: &Path) -> Result<Loaded<NswFile>, InputError> {
    load(path)
}

pub fn load_sched(path: &Path) -> Result<Loaded<SchedFile>, InputError> {
    load(path)
}

impl NswFile {
    pub fn to_instance(&self) -> Result<NswInstance, InputError> {
        let agents = self.agents.iter().map(|a| Agent { id: a.id.clone(), weight: a.weight }).collect();
        let inst = NswInstance::new(agents, self.items.clone(), self.values.clone())
            .map_err(|e| InputError::Invalid(e.to_string()))?;
        inst.ensure_valid().map_err(|e| InputError::Invalid(e.to_string()))?;
        Ok(inst)
    }
}

impl SchedFile {
    pub fn to_instance(&self, objective: SchedObjective) -> Result<SchedInstance, InputError> {
        let inst = SchedInstance::new(self.machines.clone(), self.jobs.clone(), self.p.clone(), objective)
            .map_err(|e| InputError::Invalid(e.to_string()))?;
        inst.ensure_valid().map_err(|e| InputError::Invalid(e.to_string()))?;
        Ok(inst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    Uniform,
    Dirichlet,
}

/// Complete instance with `n` agents, `m` items and values uniform on `{1..10}`.
pub fn generate_nsw(n: usize, m: usize, seed: u64, weights: Weights) -> NswFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = match weights {
        Weights::Uniform => vec![1.0 / n as f64; n],
        Weights::Dirichlet => {
            // Dirichlet(1, ..., 1) as normalised unit exponentials
            let raw: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|x| x / total).collect()
        }
    };
    let agents = (0..n).map(|i| AgentSpec { id: format!("a{}", i + 1), weight: w[i] }).collect();
    let items = (0..m).map(|j| format!("j{}", j + 1)).collect();
    let mut values = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            values.push((format!("a{}", i + 1), format!("j{}", j + 1), f64::from(rng.random_range(1..=10u32))));
        }
    }
    NswFile { agents, items, values }
}

/// `m` machines, `n` jobs and sizes uniform on `{1..10}`, with the L2 objective.
pub fn generate_sched(n: usize, m: usize, seed: u64) -> SchedFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..m).map(|_| (0..n).map(|_| f64::from(rng.random_range(1..=10u32))).collect()).collect();
    SchedFile {
        machines: (0..m).map(|i| format!("m{}", i + 1)).collect(),
        jobs: (0..n).map(|j| format!("j{}", j + 1)).collect(),
        p,
        objective: Some(ObjectiveSpec::Lk { k: 2.0 }),
    }
}
