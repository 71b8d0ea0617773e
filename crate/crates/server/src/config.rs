use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tabgenie_core::pipeline::{Params, Pipeline, PipelineError, PipelineRegistry};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("port must be in 1..=65535, got {0}")]
    Port(u32),
    #[error("pipeline `{id}`: {source}")]
    Pipeline { id: String, source: PipelineError },
    #[error("param `{key}` of pipeline `{id}` must be a scalar")]
    Param { id: String, key: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub id: String,
    pub processors: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_yaml::Value>,
}

impl PipelineConfig {
    fn string_params(&self) -> Result<Params, ConfigError> {
        use serde_yaml::Value;
        self.params
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    Value::Bool(b) => b.to_string(),
                    _ => {
                        return Err(ConfigError::Param {
                            id: self.id.clone(),
                            key: k.clone(),
                        })
                    }
                };
                Ok((k.clone(), s))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u32,
    #[serde(default = "default_dataset_dir")]
    pub dataset_dir: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_session_file")]
    pub session_file: PathBuf,
    #[serde(default)]
    pub pipelines: Vec<PipelineConfig>,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_port() -> u32 {
    8890
}
fn default_dataset_dir() -> PathBuf {
    "datasets".into()
}
fn default_output_dir() -> PathBuf {
    "outputs".into()
}
fn default_session_file() -> PathBuf {
    "session.json".into()
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: default_host(),
            port: default_port(),
            dataset_dir: default_dataset_dir(),
            output_dir: default_output_dir(),
            session_file: default_session_file(),
            pipelines: Vec::new(),
            static_dir: None,
        }
    }
}

impl ServiceConfig {
    /// Parses YAML. Relative paths stay relative; see [`ServiceConfig::resolve_paths`].
    pub fn from_yaml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_yaml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_yaml(&text, path)?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset_dir);
        fix(&mut self.output_dir);
        fix(&mut self.session_file);
        if let Some(s) = self.static_dir.as_mut() {
            fix(s);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=65535).contains(&self.port) {
            return Err(ConfigError::Port(self.port));
        }
        self.pipeline_registry().map(|_| ())
    }

    /// Built-in pipelines, then configured ones (which replace built-ins of the same id).
    pub fn pipeline_registry(&self) -> Result<PipelineRegistry, ConfigError> {
        let mut reg = PipelineRegistry::with_builtins();
        for pc in &self.pipelines {
            let p = Pipeline::from_names(&pc.id, &pc.processors, pc.string_params()?).map_err(
                |source| ConfigError::Pipeline {
                    id: pc.id.clone(),
                    source,
                },
            )?;
            reg.upsert(p);
        }
        Ok(reg)
    }
}
