use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use newsseg::label::{LabelSchema, Task};
use serde::Deserialize;

use crate::CliError;

/// Optional `--config` file. Command-line flags take precedence.
///
/// ```toml
/// seed = 7
/// out_dir = "out"
///
/// [schemas]
/// sep = "schemas/sep.toml"
///
/// [weights]
/// H = 6.0
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub schemas: BTreeMap<Task, PathBuf>,
    /// Class weight overrides, applied to every task that has the class.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: CliConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in cfg.schemas.values_mut() {
            *p = base.join(&*p);
        }
        if let Some(out) = cfg.out_dir.as_mut() {
            *out = base.join(&*out);
        }
        for p in cfg.schemas.values() {
            if !p.exists() {
                return Err(CliError::Usage(format!("schema file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}

/// Global settings after merging the config file with flags.
#[derive(Debug)]
pub struct Settings {
    pub config: CliConfig,
    pub schema_flag: Option<PathBuf>,
    pub weight_flags: Vec<(String, f64)>,
    pub seed_flag: Option<u64>,
    pub out_dir_flag: Option<PathBuf>,
}

pub fn parse_weight(s: &str) -> Result<(String, f64), String> {
    let (name, w) = s.split_once('=').ok_or("expected CLASS=WEIGHT")?;
    let w: f64 = w.parse().map_err(|_| format!("bad weight {w:?}"))?;
    Ok((name.to_string(), w))
}

impl Settings {
    pub fn schema(&self, task: Task) -> Result<Arc<LabelSchema>, CliError> {
        let mut schema = match self.schema_flag.as_ref().or(self.config.schemas.get(&task)) {
            Some(path) => LabelSchema::load_config(path)?,
            None => LabelSchema::builtin(task),
        };
        if schema.task() != task {
            return Err(CliError::Usage(format!(
                "schema file is for task {}, not {task}",
                schema.task()
            )));
        }
        for (name, w) in &self.config.weights {
            if schema.index_of(name).is_some() {
                schema = schema.with_weight(name, *w)?;
            }
        }
        for (name, w) in &self.weight_flags {
            if schema.index_of(name).is_none() {
                return Err(CliError::Usage(format!("task {task} has no class {name}")));
            }
            schema = schema.with_weight(name, *w)?;
        }
        Ok(Arc::new(schema))
    }

    /// Randomized commands refuse to run without an explicit seed.
    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed_flag
            .or(self.config.seed)
            .ok_or_else(|| CliError::Usage("this command is randomized: pass --seed".into()))
    }

    /// Relative output paths land in the output directory, if one is set.
    pub fn output(&self, path: &Path) -> PathBuf {
        match self.out_dir_flag.as_ref().or(self.config.out_dir.as_ref()) {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }
}
