//! Run configuration: a TOML file with `[data]`, `[model]`, `[train]`,
//! `[sampler]` and `[output]` sections. Command-line overrides are applied
//! as `section.key=value` pairs before deserialization. Missing values
//! take the per-model defaults (TransE d=100, margin 10; RESCAL d=200,
//! margin 5).
//!
//! ```toml
//! [data]
//! train = "train.txt"          # relative to $KBC_DATA_ROOT, else to this file
//! valid = "valid.txt"
//! test = "test.txt"
//! # entity_dict = "entities.dict"
//! # relation_dict = "relations.dict"
//! unseen = "error"             # or "skip"
//!
//! [model]
//! kind = "rescal"              # or "transe"
//! norm = "l1"                  # TransE only
//!
//! [train]
//! seed = 7
//!
//! [sampler]
//! kind = "dns"                 # or "rns" (uses `negatives`)
//! mode = "exact"               # or "approximate" (uses `candidates`, `lsh_*`)
//!
//! [output]
//! dir = "runs/rescal-dns"
//! ```

use std::path::{Path, PathBuf};

use kbc_core::kg::UnseenPolicy;
use kbc_core::model::{ModelKind, Norm};
use kbc_core::sampler::{DnsMode, LshParams, SamplerKind};
use kbc_core::trainer::{AdamHyper, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the directory relative dataset paths are resolved against.
pub const DATA_ROOT_ENV: &str = "KBC_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_dict: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_dict: Option<PathBuf>,
    #[serde(default)]
    pub unseen: Unseen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unseen {
    #[default]
    Error,
    Skip,
}

impl From<Unseen> for UnseenPolicy {
    fn from(u: Unseen) -> Self {
        match u {
            Unseen::Error => UnseenPolicy::Error,
            Unseen::Skip => UnseenPolicy::Skip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default)]
    pub norm: Norm,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Rescal,
            dim: None,
            norm: Norm::L1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide.
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerName {
    Rns,
    #[default]
    Dns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DnsModeName {
    #[default]
    Exact,
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default)]
    pub kind: SamplerName,
    /// RNS negatives per positive.
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default)]
    pub mode: DnsModeName,
    /// LSH candidates per query in approximate mode.
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default = "default_tables")]
    pub lsh_tables: usize,
    #[serde(default = "default_hyperplanes")]
    pub lsh_hyperplanes: usize,
    #[serde(default = "default_probes")]
    pub lsh_probes: usize,
    #[serde(default)]
    pub lsh_seed: u64,
}

fn default_negatives() -> usize {
    1
}
fn default_candidates() -> usize {
    50
}
fn default_tables() -> usize {
    LshParams::default().tables
}
fn default_hyperplanes() -> usize {
    LshParams::default().hyperplanes
}
fn default_probes() -> usize {
    LshParams::default().probes
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            kind: SamplerName::default(),
            negatives: default_negatives(),
            mode: DnsModeName::default(),
            candidates: default_candidates(),
            cap: None,
            lsh_tables: default_tables(),
            lsh_hyperplanes: default_hyperplanes(),
            lsh_probes: default_probes(),
            lsh_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/latest"),
        }
    }
}

impl RunConfig {
    /// Reads `path`, applies `section.key=value` overrides, and resolves
    /// relative dataset paths.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = match std::env::var_os(DATA_ROOT_ENV) {
            Some(root) => PathBuf::from(root),
            None => path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        cfg.data.resolve(&base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn train_config(&self) -> Result<TrainConfig<f64>, CliError> {
        let mut tc = TrainConfig::<f64>::for_model(self.model.kind);
        tc.norm = self.model.norm;
        if let Some(d) = self.model.dim {
            tc.dim = d;
        }
        let t = &self.train;
        tc.margin = t.margin.unwrap_or(tc.margin);
        tc.batch_size = t.batch_size.unwrap_or(tc.batch_size);
        tc.learning_rate = t.learning_rate.unwrap_or(tc.learning_rate);
        tc.max_epochs = t.max_epochs.unwrap_or(tc.max_epochs);
        tc.patience = t.patience.unwrap_or(tc.patience);
        tc.eval_every = t.eval_every.unwrap_or(tc.eval_every);
        let d = AdamHyper::<f64>::default();
        tc.adam = AdamHyper {
            beta1: t.beta1.unwrap_or(d.beta1),
            beta2: t.beta2.unwrap_or(d.beta2),
            eps: t.epsilon.unwrap_or(d.eps),
        };
        tc.seed = t.seed;
        let s = &self.sampler;
        tc.sampler = match s.kind {
            SamplerName::Rns => SamplerKind::Rns {
                negatives: s.negatives,
            },
            SamplerName::Dns => SamplerKind::Dns {
                mode: match s.mode {
                    DnsModeName::Exact => DnsMode::Exact,
                    DnsModeName::Approximate => DnsMode::Approximate {
                        candidates: s.candidates,
                        lsh: LshParams {
                            tables: s.lsh_tables,
                            hyperplanes: s.lsh_hyperplanes,
                            probes: s.lsh_probes,
                            seed: s.lsh_seed,
                        },
                    },
                },
                cap: s.cap,
            },
        };
        tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(tc)
    }

    /// Copy with every optional training value filled in, so the written
    /// config reproduces the run even if defaults change.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let tc = self.train_config()?;
        let mut out = self.clone();
        out.model.dim = Some(tc.dim);
        out.train.margin = Some(tc.margin);
        out.train.batch_size = Some(tc.batch_size);
        out.train.learning_rate = Some(tc.learning_rate);
        out.train.max_epochs = Some(tc.max_epochs);
        out.train.patience = Some(tc.patience);
        out.train.eval_every = Some(tc.eval_every);
        out.train.beta1 = Some(tc.adam.beta1);
        out.train.beta2 = Some(tc.adam.beta2);
        out.train.epsilon = Some(tc.adam.eps);
        Ok(out)
    }
}

impl DataConfig {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train);
        for p in [
            &mut self.valid,
            &mut self.test,
            &mut self.entity_dict,
            &mut self.relation_dict,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Every referenced file must exist.
    pub fn check_paths(&self) -> Result<(), CliError> {
        let all = std::iter::once(&self.train).chain(
            [&self.valid, &self.test, &self.entity_dict, &self.relation_dict]
                .into_iter()
                .flatten(),
        );
        for p in all {
            if !p.is_file() {
                return Err(CliError::Data(format!("data file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{spec}` is not section.key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Usage(format!("override key `{key}` needs a section")))?;
    let raw = raw.trim();
    // Parse as a TOML value; bare words fall back to strings.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let entry = table
        .entry(section.to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_owned(), value);
            Ok(())
        }
        _ => Err(CliError::Usage(format!("`{section}` is not a section"))),
    }
}
