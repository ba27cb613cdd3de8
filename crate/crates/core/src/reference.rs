//! Reference query log grouped by analysis domain.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, SemanticSpace};
use crate::schema::{load_spider_schemas, SchemaCatalog, SchemaError};
use crate::sql::{parse_sql, synthesize_sql, BoundQuery, QueryIR};

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("no usable reference queries")]
    NoUsableQueries,
    #[error("duplicate domain label `{0}`")]
    DuplicateLabel(String),
}

/// One record of a Spider-style query file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub db_id: String,
    #[serde(default)]
    pub question: String,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainGroup {
    pub domain_label: String,
    pub db_id: String,
    pub schema: SchemaCatalog,
    pub queries: Vec<QueryIR>,
}

/// Counts gathered while loading a query log.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub records: usize,
    pub loaded: usize,
    pub lossy: usize,
    pub duplicates: usize,
    pub unknown_db: usize,
    pub unparseable: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceRepository {
    groups: Vec<DomainGroup>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    groups: Vec<DomainGroup>,
}

fn read(path: &Path) -> Result<String, RepositoryError> {
    std::fs::read_to_string(path).map_err(|source| RepositoryError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl ReferenceRepository {
    /// Builds a repository from validated groups.
    pub fn from_groups(groups: Vec<DomainGroup>) -> Result<Self, RepositoryError> {
        let mut labels = HashSet::new();
        for g in &groups {
            if !labels.insert(g.domain_label.clone()) {
                return Err(RepositoryError::DuplicateLabel(g.domain_label.clone()));
            }
        }
        Ok(ReferenceRepository {
            groups: groups
                .into_iter()
                .filter(|g| !g.queries.is_empty())
                .collect(),
        })
    }

    /// Parses query records against their schemas. Records for unknown
    /// databases or outside the supported SQL subset are counted and skipped;
    /// duplicate `(db_id, canonical SQL)` pairs are kept once.
    pub fn from_records(
        schemas: &BTreeMap<String, SchemaCatalog>,
        records: &[QueryRecord],
    ) -> Result<(Self, LoadReport), RepositoryError> {
        let mut report = LoadReport {
            records: records.len(),
            ..LoadReport::default()
        };
        let mut by_db: BTreeMap<&str, Vec<QueryIR>> = BTreeMap::new();
        let mut seen: HashSet<(String, String)> = HashSet::new();
        for rec in records {
            let Some(schema) = schemas.get(&rec.db_id) else {
                report.unknown_db += 1;
                continue;
            };
            let ir = match parse_sql(&rec.query, schema) {
                Ok(ir) => ir,
                Err(_) => {
                    report.unparseable += 1;
                    continue;
                }
            };
            if !seen.insert((rec.db_id.clone(), synthesize_sql(&ir))) {
                report.duplicates += 1;
                continue;
            }
            report.loaded += 1;
            if ir.lossy {
                report.lossy += 1;
            }
            by_db.entry(rec.db_id.as_str()).or_default().push(ir);
        }
        if report.loaded == 0 {
            return Err(RepositoryError::NoUsableQueries);
        }
        let groups = by_db
            .into_iter()
            .map(|(db_id, queries)| {
                let schema = schemas[db_id].clone();
                DomainGroup {
                    domain_label: schema.domain_label.clone(),
                    db_id: db_id.to_string(),
                    schema,
                    queries,
                }
            })
            .collect();
        Ok((ReferenceRepository::from_groups(groups)?, report))
    }

    /// Loads a Spider `tables.json` and a query file (`[{db_id, question, query}]`).
    pub fn load_log(
        schemas_path: impl AsRef<Path>,
        queries_path: impl AsRef<Path>,
    ) -> Result<(Self, LoadReport), RepositoryError> {
        let schemas = load_spider_schemas(schemas_path)?;
        let text = read(queries_path.as_ref())?;
        let records: Vec<QueryRecord> = serde_json::from_str(&text)
            .map_err(|e| RepositoryError::MalformedFile(e.to_string()))?;
        ReferenceRepository::from_records(&schemas, &records)
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), RepositoryError> {
        let path = path.as_ref();
        let json = serde_json::to_string(&Snapshot {
            version: SNAPSHOT_VERSION,
            groups: self.groups.clone(),
        })
        .map_err(|e| RepositoryError::MalformedFile(e.to_string()))?;
        std::fs::write(path, json).map_err(|source| RepositoryError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Self, RepositoryError> {
        let snapshot: Snapshot = serde_json::from_str(&read(path.as_ref())?)
            .map_err(|e| RepositoryError::MalformedFile(e.to_string()))?;
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(RepositoryError::MalformedFile(format!(
                "unsupported snapshot version {}",
                snapshot.version
            )));
        }
        let mut groups = Vec::with_capacity(snapshot.groups.len());
        for g in snapshot.groups {
            for q in &g.queries {
                q.validate(&g.schema)
                    .map_err(|e| RepositoryError::MalformedFile(format!("{}: {e}", g.db_id)))?;
            }
            groups.push(g);
        }
        ReferenceRepository::from_groups(groups)
    }

    /// Reads either a snapshot or, when `schemas_path` is given, a Spider
    /// query file. A file whose top level is an object is taken as a snapshot.
    pub fn load_any(
        log_path: impl AsRef<Path>,
        schemas_path: Option<&Path>,
    ) -> Result<Self, RepositoryError> {
        let log_path = log_path.as_ref();
        let text = read(log_path)?;
        if text.trim_start().starts_with('{') {
            return ReferenceRepository::load_snapshot(log_path);
        }
        let default_schemas = log_path.with_file_name("tables.json");
        let schemas_path = schemas_path.unwrap_or(&default_schemas);
        Ok(ReferenceRepository::load_log(schemas_path, log_path)?.0)
    }

    pub fn groups(&self) -> &[DomainGroup] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups ranked by similarity of their label to `target_domain`,
    /// descending, ties broken by label; at most `k`.
    pub fn retrieve_relevant_domains(
        &self,
        space: &SemanticSpace,
        target_domain: &str,
        k: usize,
    ) -> Result<Vec<(&DomainGroup, f64)>, EmbedError> {
        if target_domain.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut ranked = self
            .groups
            .iter()
            .map(|g| Ok((g, space.text_similarity(target_domain, &g.domain_label)?)))
            .collect::<Result<Vec<_>, EmbedError>>()?;
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| a.0.domain_label.cmp(&b.0.domain_label))
        });
        ranked.truncate(k);
        Ok(ranked)
    }
}

/// Queries of `groups` concatenated in order.
pub fn reference_queries<'a, I>(groups: I) -> Vec<BoundQuery<'a>>
where
    I: IntoIterator<Item = &'a DomainGroup>,
{
    groups
        .into_iter()
        .flat_map(|g| {
            g.queries.iter().map(move |ir| BoundQuery {
                ir,
                catalog: &g.schema,
            })
        })
        .collect()
}
