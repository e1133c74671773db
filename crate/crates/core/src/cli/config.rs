//! Run configuration: a JSON object holding the pipeline settings plus the
//! run-only keys `targets`, `out` and `proposer`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::proposer::retrieval::DEFAULT_BANK_CAPACITY;
use crate::proposer::{MutationConfig, PcfgProposer, Proposer, RemoteProposer, RetrievalProposer};
use crate::selftrain::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposerKind {
    Retrieval,
    Pcfg,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProposerConfig {
    pub kind: ProposerKind,
    /// Base URL of the remote generator.
    pub endpoint: Option<String>,
    pub max_in_flight: usize,
    pub bank_capacity: usize,
    pub mutation: MutationConfig,
}

impl Default for ProposerConfig {
    fn default() -> Self {
        ProposerConfig {
            kind: ProposerKind::Retrieval,
            endpoint: None,
            max_in_flight: 4,
            bank_capacity: DEFAULT_BANK_CAPACITY,
            mutation: MutationConfig::default(),
        }
    }
}

impl ProposerConfig {
    pub fn build(&self, pipeline: &PipelineConfig) -> Result<Box<dyn Proposer>, CliError> {
        Ok(match self.kind {
            ProposerKind::Pcfg => Box::new(PcfgProposer::default()),
            ProposerKind::Retrieval => {
                if self.bank_capacity == 0 {
                    return Err(CliError::Config("proposer.bank_capacity must be positive".into()));
                }
                let mut p = RetrievalProposer::default();
                p.bank = crate::proposer::MemoryBank::new(self.bank_capacity);
                p.mutation = self.mutation;
                p.augment = pipeline.augment.clone();
                Box::new(p)
            }
            ProposerKind::Remote => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| CliError::Config("proposer.endpoint is required for kind \"remote\"".into()))?;
                Box::new(RemoteProposer::new(endpoint, self.max_in_flight))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    pub targets: PathBuf,
    pub out: PathBuf,
    pub proposer: ProposerConfig,
}

impl RunConfig {
    pub fn new(pipeline: PipelineConfig, targets: PathBuf, out: PathBuf) -> Self {
        RunConfig {
            pipeline,
            targets,
            out,
            proposer: ProposerConfig::default(),
        }
    }

    /// Full snapshot with every default filled in.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Parses a config object. Relative paths resolve against `base`.
    pub fn from_json(mut value: Value, base: &Path) -> Result<Self, CliError> {
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
        let mut take_path = |key: &str| -> Result<PathBuf, CliError> {
            match obj.remove(key) {
                Some(Value::String(s)) => Ok(base.join(s)),
                Some(_) => Err(CliError::Config(format!("`{key}` must be a string path"))),
                None => Err(CliError::Config(format!("missing key `{key}`"))),
            }
        };
        let targets = take_path("targets")?;
        let out = take_path("out")?;
        let proposer = match obj.remove("proposer") {
            Some(v) => serde_json::from_value(v).map_err(|e| CliError::Config(format!("proposer: {e}")))?,
            None => ProposerConfig::default(),
        };
        let pipeline: PipelineConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        pipeline.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(RunConfig {
            pipeline,
            targets,
            out,
            proposer,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_json(value, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn unknown_keys_rejected() {
        let v = json!({"targets": "t", "out": "o", "k": 3, "bogus": 1});
        assert!(matches!(RunConfig::from_json(v, Path::new("/x")), Err(CliError::Config(_))));
        let v = json!({"targets": "t", "out": "o", "decoding": {"temp": 1.0}});
        assert!(matches!(RunConfig::from_json(v, Path::new("/x")), Err(CliError::Config(_))));
    }

    #[test]
    fn paths_resolve_and_snapshot_round_trips() {
        let v = json!({"targets": "t", "out": "o", "k": 3, "policy": "b2", "proposer": {"kind": "pcfg"}});
        let cfg = RunConfig::from_json(v, Path::new("/base")).unwrap();
        assert_eq!(cfg.targets, PathBuf::from("/base/t"));
        assert_eq!(cfg.pipeline.k, 3);
        assert_eq!(cfg.proposer.kind, ProposerKind::Pcfg);
        let again = RunConfig::from_json(cfg.to_json(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, cfg);
    }
}
