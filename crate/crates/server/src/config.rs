use std::path::{Path, PathBuf};

use qrec_core::embedding::EmbedderConfig;
use qrec_core::recommender::RecommenderConfig;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// A database the service can open sessions on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatabaseConfig {
    pub id: String,
    /// SQLite file.
    pub path: PathBuf,
    /// Overrides the label derived from the file name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub databases: Vec<DatabaseConfig>,
    /// Spider query log or repository snapshot.
    pub reference_log: Option<PathBuf>,
    /// Spider `tables.json`; defaults to the file next to the log.
    pub reference_schemas: Option<PathBuf>,
    /// JSON-lines event log.
    pub storage: PathBuf,
    pub recommender: RecommenderConfig,
    pub embedder: EmbedderConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            databases: Vec::new(),
            reference_log: None,
            reference_schemas: None,
            storage: PathBuf::from("qrec-events.jsonl"),
            recommender: RecommenderConfig::default(),
            embedder: EmbedderConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let mut config: ServiceConfig = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.databases {
            fix(&mut d.path);
        }
        if let Some(p) = &mut self.reference_log {
            fix(p);
        }
        if let Some(p) = &mut self.reference_schemas {
            fix(p);
        }
        fix(&mut self.storage);
    }
}
