//! Relational schema catalog: tables, columns and primary/foreign key links.
//!
//! Identifiers are normalized to lowercase at construction; SQL identifiers
//! are case-insensitive and reference logs spell them inconsistently.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::is_iso8601;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema file: {0}")]
    MalformedFile(String),
    #[error("schema has no tables")]
    EmptyCatalog,
    #[error("dangling foreign key: {0}")]
    DanglingForeignKey(String),
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("no join path between `{from}` and `{to}`")]
    NoJoinPath { from: String, to: String },
}

impl From<rusqlite::Error> for SchemaError {
    fn from(e: rusqlite::Error) -> Self {
        SchemaError::MalformedFile(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Numeric,
    Text,
    Datetime,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub display_text: String,
    pub value_kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub display_text: String,
    pub columns: Vec<ColumnDef>,
    #[serde(default)]
    pub primary_key: Option<String>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

/// A `table.column` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: table.into(),
            column: column.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

/// A primary-key/foreign-key link, `from` being the referencing column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FkEdge {
    pub from: ColumnRef,
    pub to: ColumnRef,
}

impl FkEdge {
    /// The table on the other side of the edge, if `table` is one endpoint.
    fn other(&self, table: &str) -> Option<&str> {
        if self.from.table == table {
            Some(&self.to.table)
        } else if self.to.table == table {
            Some(&self.from.table)
        } else {
            None
        }
    }
}

/// Default human-readable text for an identifier.
pub fn humanize(identifier: &str) -> String {
    identifier.replace('_', " ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub domain_label: String,
    tables: Vec<TableDef>,
    fk_edges: Vec<FkEdge>,
}

impl SchemaCatalog {
    /// Validates and normalizes a catalog.
    pub fn new(
        domain_label: impl Into<String>,
        mut tables: Vec<TableDef>,
        mut fk_edges: Vec<FkEdge>,
    ) -> Result<Self, SchemaError> {
        if tables.is_empty() {
            return Err(SchemaError::EmptyCatalog);
        }
        let mut seen = HashMap::new();
        for table in &mut tables {
            table.name = table.name.to_lowercase();
            if table.display_text.trim().is_empty() {
                table.display_text = humanize(&table.name);
            }
            if seen.insert(table.name.clone(), ()).is_some() {
                return Err(SchemaError::InvalidCatalog(format!(
                    "duplicate table `{}`",
                    table.name
                )));
            }
            if table.columns.is_empty() {
                return Err(SchemaError::InvalidCatalog(format!(
                    "table `{}` has no columns",
                    table.name
                )));
            }
            let mut cols = HashMap::new();
            for col in &mut table.columns {
                col.name = col.name.to_lowercase();
                if col.display_text.trim().is_empty() {
                    col.display_text = humanize(&col.name);
                }
                if cols.insert(col.name.clone(), ()).is_some() {
                    return Err(SchemaError::InvalidCatalog(format!(
                        "duplicate column `{}.{}`",
                        table.name, col.name
                    )));
                }
            }
            table.primary_key = table.primary_key.take().map(|pk| pk.to_lowercase());
            if let Some(pk) = &table.primary_key {
                if table.column(pk).is_none() {
                    return Err(SchemaError::InvalidCatalog(format!(
                        "primary key `{}.{pk}` is not a column",
                        table.name
                    )));
                }
            }
        }
        let mut catalog = SchemaCatalog {
            domain_label: domain_label.into(),
            tables,
            fk_edges: Vec::new(),
        };
        for edge in &mut fk_edges {
            for side in [&mut edge.from, &mut edge.to] {
                side.table = side.table.to_lowercase();
                side.column = side.column.to_lowercase();
            }
            for side in [&edge.from, &edge.to] {
                if catalog.column(side).is_none() {
                    return Err(SchemaError::DanglingForeignKey(format!(
                        "{} -> {}",
                        edge.from, edge.to
                    )));
                }
            }
        }
        catalog.fk_edges = fk_edges;
        Ok(catalog)
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn fk_edges(&self) -> &[FkEdge] {
        &self.fk_edges
    }

    pub fn with_domain_label(mut self, label: impl Into<String>) -> Self {
        self.domain_label = label.into();
        self
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, col: &ColumnRef) -> Option<&ColumnDef> {
        self.table(&col.table)?.column(&col.column)
    }

    pub fn display_text(&self, col: &ColumnRef) -> Option<&str> {
        self.column(col).map(|c| c.display_text.as_str())
    }

    pub fn value_kind(&self, col: &ColumnRef) -> Option<ValueKind> {
        self.column(col).map(|c| c.value_kind)
    }

    /// All columns in catalog order.
    pub fn columns(&self) -> impl Iterator<Item = ColumnRef> + '_ {
        self.tables.iter().flat_map(|t| {
            t.columns
                .iter()
                .map(move |c| ColumnRef::new(t.name.clone(), c.name.clone()))
        })
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    /// Position of a column in catalog order.
    pub fn column_position(&self, col: &ColumnRef) -> Option<usize> {
        let mut offset = 0;
        for t in &self.tables {
            if t.name == col.table {
                return t
                    .columns
                    .iter()
                    .position(|c| c.name == col.column)
                    .map(|p| offset + p);
            }
            offset += t.columns.len();
        }
        None
    }

    /// Primary key or participant in a foreign key.
    pub fn is_key_column(&self, col: &ColumnRef) -> bool {
        let pk = self
            .table(&col.table)
            .and_then(|t| t.primary_key.as_deref())
            .is_some_and(|pk| pk == col.column);
        pk || self.fk_edges.iter().any(|e| &e.from == col || &e.to == col)
    }

    /// Shortest undirected chain of FK edges connecting two tables.
    ///
    /// Among equally short paths the one whose edge sequence is
    /// lexicographically smallest by `(table, column)` names wins.
    pub fn join_path(&self, from_table: &str, to_table: &str) -> Result<Vec<FkEdge>, SchemaError> {
        let from = self
            .table(from_table)
            .ok_or_else(|| SchemaError::UnknownTable(from_table.to_string()))?
            .name
            .as_str();
        let to = self
            .table(to_table)
            .ok_or_else(|| SchemaError::UnknownTable(to_table.to_string()))?
            .name
            .as_str();
        if from == to {
            return Ok(Vec::new());
        }
        // distances to the target
        let mut dist: HashMap<&str, usize> = HashMap::new();
        dist.insert(to, 0);
        let mut queue = VecDeque::from([to]);
        while let Some(t) = queue.pop_front() {
            let d = dist[t];
            for e in &self.fk_edges {
                if let Some(n) = e.other(t) {
                    if !dist.contains_key(n) {
                        dist.insert(n, d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        let Some(&total) = dist.get(from) else {
            return Err(SchemaError::NoJoinPath {
                from: from.to_string(),
                to: to.to_string(),
            });
        };
        let mut path = Vec::with_capacity(total);
        let mut current = from;
        while current != to {
            let d = dist[current];
            let step = self
                .fk_edges
                .iter()
                .filter_map(|e| {
                    let n = e.other(current)?;
                    (n != current && dist.get(n) == Some(&(d - 1))).then_some((e, n))
                })
                .min_by(|a, b| a.0.cmp(b.0))
                .expect("bfs distances guarantee a descending neighbour");
            path.push(step.0.clone());
            current = step.1;
        }
        Ok(path)
    }

    pub fn to_spider_entry(&self, db_id: &str) -> SpiderEntry {
        let mut column_names_original = vec![(-1, "*".to_string())];
        let mut column_names = vec![(-1, "*".to_string())];
        let mut column_types = vec!["text".to_string()];
        let mut index: HashMap<ColumnRef, usize> = HashMap::new();
        let mut primary_keys = Vec::new();
        for (ti, t) in self.tables.iter().enumerate() {
            for c in &t.columns {
                index.insert(
                    ColumnRef::new(t.name.clone(), c.name.clone()),
                    column_names_original.len(),
                );
                if t.primary_key.as_deref() == Some(c.name.as_str()) {
                    primary_keys.push(serde_json::Value::from(column_names_original.len()));
                }
                column_names_original.push((ti as i64, c.name.clone()));
                column_names.push((ti as i64, c.display_text.clone()));
                column_types.push(
                    match c.value_kind {
                        ValueKind::Numeric => "number",
                        ValueKind::Text => "text",
                        ValueKind::Datetime => "time",
                        ValueKind::Boolean => "boolean",
                    }
                    .to_string(),
                );
            }
        }
        SpiderEntry {
            db_id: db_id.to_string(),
            table_names_original: self.tables.iter().map(|t| t.name.clone()).collect(),
            table_names: Some(self.tables.iter().map(|t| t.display_text.clone()).collect()),
            column_names_original,
            column_names: Some(column_names),
            column_types,
            primary_keys,
            foreign_keys: self
                .fk_edges
                .iter()
                .map(|e| (index[&e.from] as i64, index[&e.to] as i64))
                .collect(),
        }
    }

    pub fn from_spider_entry(entry: &SpiderEntry) -> Result<Self, SchemaError> {
        if entry.table_names_original.is_empty() {
            return Err(SchemaError::EmptyCatalog);
        }
        if entry.column_types.len() != entry.column_names_original.len() {
            return Err(SchemaError::MalformedFile(format!(
                "{}: column_types and column_names_original differ in length",
                entry.db_id
            )));
        }
        if let Some(names) = &entry.column_names {
            if names.len() != entry.column_names_original.len() {
                return Err(SchemaError::MalformedFile(format!(
                    "{}: column_names and column_names_original differ in length",
                    entry.db_id
                )));
            }
        }
        let mut tables: Vec<TableDef> = entry
            .table_names_original
            .iter()
            .enumerate()
            .map(|(i, name)| TableDef {
                name: name.clone(),
                display_text: entry
                    .table_names
                    .as_ref()
                    .and_then(|n| n.get(i).cloned())
                    .unwrap_or_default(),
                columns: Vec::new(),
                primary_key: None,
            })
            .collect();
        // global column index -> (table index, column name)
        let mut refs: Vec<Option<(usize, String)>> = Vec::new();
        for (i, (table_idx, name)) in entry.column_names_original.iter().enumerate() {
            if *table_idx < 0 {
                refs.push(None);
                continue;
            }
            let ti = *table_idx as usize;
            let table = tables.get_mut(ti).ok_or_else(|| {
                SchemaError::MalformedFile(format!(
                    "{}: column `{name}` references table index {ti}",
                    entry.db_id
                ))
            })?;
            let display_text = entry
                .column_names
                .as_ref()
                .map(|n| n[i].1.clone())
                .unwrap_or_default();
            let value_kind = match entry.column_types[i].as_str() {
                "number" => ValueKind::Numeric,
                "time" => ValueKind::Datetime,
                "boolean" => ValueKind::Boolean,
                _ => ValueKind::Text,
            };
            table.columns.push(ColumnDef {
                name: name.clone(),
                display_text,
                value_kind,
            });
            refs.push(Some((ti, name.clone())));
        }
        let resolve = |idx: i64| -> Option<ColumnRef> {
            let (ti, name) = refs.get(usize::try_from(idx).ok()?)?.as_ref()?;
            Some(ColumnRef::new(
                entry.table_names_original[*ti].clone(),
                name.clone(),
            ))
        };
        for pk in &entry.primary_keys {
            // newer releases list composite keys as nested arrays
            let idx = match pk {
                serde_json::Value::Array(items) => items.first().and_then(|v| v.as_i64()),
                other => other.as_i64(),
            };
            let col = idx.and_then(resolve).ok_or_else(|| {
                SchemaError::MalformedFile(format!("{}: bad primary key {pk}", entry.db_id))
            })?;
            if let Some(t) = tables
                .iter_mut()
                .find(|t| t.name.eq_ignore_ascii_case(&col.table))
            {
                if t.primary_key.is_none() {
                    t.primary_key = Some(col.column);
                }
            }
        }
        let mut edges = Vec::new();
        for &(from, to) in &entry.foreign_keys {
            match (resolve(from), resolve(to)) {
                (Some(from), Some(to)) => edges.push(FkEdge { from, to }),
                _ => {
                    return Err(SchemaError::DanglingForeignKey(format!(
                        "{}: column pair [{from}, {to}]",
                        entry.db_id
                    )))
                }
            }
        }
        SchemaCatalog::new(humanize(&entry.db_id), tables, edges)
    }
}

/// One database entry of a Spider `tables.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpiderEntry {
    pub db_id: String,
    pub table_names_original: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_names: Option<Vec<String>>,
    pub column_names_original: Vec<(i64, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_names: Option<Vec<(i64, String)>>,
    pub column_types: Vec<String>,
    #[serde(default)]
    pub primary_keys: Vec<serde_json::Value>,
    #[serde(default)]
    pub foreign_keys: Vec<(i64, i64)>,
}

fn read_file(path: &Path) -> Result<String, SchemaError> {
    std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_spider_entries(text: &str) -> Result<Vec<SpiderEntry>, SchemaError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| SchemaError::MalformedFile(e.to_string()))?;
    let entries = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value),
        other => serde_json::from_value(other).map(|e| vec![e]),
    };
    entries.map_err(|e| SchemaError::MalformedFile(e.to_string()))
}

/// Loads a Spider `tables.json` holding exactly one database entry (either
/// as a bare object or a one-element array).
pub fn load_spider_schema(path: impl AsRef<Path>) -> Result<SchemaCatalog, SchemaError> {
    let entries = parse_spider_entries(&read_file(path.as_ref())?)?;
    match entries.as_slice() {
        [entry] => SchemaCatalog::from_spider_entry(entry),
        [] => Err(SchemaError::EmptyCatalog),
        _ => Err(SchemaError::MalformedFile(format!(
            "expected one database entry, found {}",
            entries.len()
        ))),
    }
}

/// Loads every entry of a Spider `tables.json`, keyed by `db_id`.
pub fn load_spider_schemas(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, SchemaCatalog>, SchemaError> {
    let entries = parse_spider_entries(&read_file(path.as_ref())?)?;
    entries
        .iter()
        .map(|e| Ok((e.db_id.clone(), SchemaCatalog::from_spider_entry(e)?)))
        .collect()
}

/// Reads the schema of a SQLite database file.
pub fn load_sqlite_schema(path: impl AsRef<Path>) -> Result<SchemaCatalog, SchemaError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(SchemaError::Io {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY)?;
    let label = path
        .file_stem()
        .map(|s| humanize(&s.to_string_lossy()))
        .unwrap_or_default();
    schema_from_connection(&conn, &label)
}

#[derive(Clone, Copy, PartialEq)]
enum Affinity {
    Integer,
    Real,
    Numeric,
    Text,
    Blob,
}

fn affinity(declared: &str) -> Affinity {
    let d = declared.to_uppercase();
    if d.contains("INT") {
        Affinity::Integer
    } else if d.contains("CHAR") || d.contains("CLOB") || d.contains("TEXT") {
        Affinity::Text
    } else if d.contains("BLOB") || d.is_empty() {
        Affinity::Blob
    } else if d.contains("REAL") || d.contains("FLOA") || d.contains("DOUB") {
        Affinity::Real
    } else {
        Affinity::Numeric
    }
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn infer_kind(
    conn: &Connection,
    table: &str,
    column: &str,
    declared: &str,
) -> Result<ValueKind, SchemaError> {
    let aff = affinity(declared);
    if matches!(aff, Affinity::Integer | Affinity::Real) {
        return Ok(ValueKind::Numeric);
    }
    let upper = declared.to_uppercase();
    let mut stmt = conn.prepare(&format!(
        "SELECT {c} FROM {t} WHERE {c} IS NOT NULL",
        c = quote_ident(column),
        t = quote_ident(table)
    ))?;
    let mut rows = stmt.query([])?;
    let (mut any, mut all_dates, mut all_numbers) = (false, true, true);
    while let Some(row) = rows.next()? {
        any = true;
        match row.get_ref(0)? {
            rusqlite::types::ValueRef::Text(bytes) => {
                all_numbers = false;
                if !is_iso8601(&String::from_utf8_lossy(bytes)) {
                    all_dates = false;
                }
            }
            rusqlite::types::ValueRef::Integer(_) | rusqlite::types::ValueRef::Real(_) => {
                all_dates = false;
            }
            _ => {
                all_dates = false;
                all_numbers = false;
            }
        }
    }
    Ok(if any && all_dates {
        ValueKind::Datetime
    } else if upper.contains("BOOL") {
        ValueKind::Boolean
    } else if !any && (upper.contains("DATE") || upper.contains("TIME")) {
        ValueKind::Datetime
    } else if aff == Affinity::Numeric && all_numbers {
        ValueKind::Numeric
    } else {
        ValueKind::Text
    })
}

/// Reads the schema of an open SQLite connection.
pub fn schema_from_connection(
    conn: &Connection,
    label: &str,
) -> Result<SchemaCatalog, SchemaError> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
    )?;
    let names: Vec<String> = stmt
        .query_map([], |r| r.get(0))?
        .collect::<Result<_, _>>()?;
    if names.is_empty() {
        return Err(SchemaError::EmptyCatalog);
    }
    let mut tables = Vec::new();
    let mut raw_fks = Vec::new();
    for name in &names {
        let mut info = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(name)))?;
        let cols: Vec<(String, String, i64)> = info
            .query_map([], |r| {
                Ok((
                    r.get(1)?,
                    r.get::<_, Option<String>>(2)?.unwrap_or_default(),
                    r.get(5)?,
                ))
            })?
            .collect::<Result<_, _>>()?;
        let mut columns = Vec::new();
        let mut primary_key = None;
        for (col, declared, pk) in cols {
            if pk == 1 {
                primary_key = Some(col.clone());
            }
            columns.push(ColumnDef {
                value_kind: infer_kind(conn, name, &col, &declared)?,
                display_text: humanize(&col),
                name: col,
            });
        }
        tables.push(TableDef {
            name: name.clone(),
            display_text: humanize(name),
            columns,
            primary_key,
        });
        let mut fks = conn.prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(name)))?;
        let rows: Vec<(String, String, Option<String>)> = fks
            .query_map([], |r| Ok((r.get(2)?, r.get(3)?, r.get(4)?)))?
            .collect::<Result<_, _>>()?;
        for (parent, from, to) in rows {
            raw_fks.push((name.clone(), from, parent, to));
        }
    }
    let mut edges = Vec::new();
    for (table, from, parent, to) in raw_fks {
        let parent_def = tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(&parent))
            .ok_or_else(|| {
                SchemaError::DanglingForeignKey(format!("{table}.{from} -> {parent}"))
            })?;
        let to = match to.or_else(|| parent_def.primary_key.clone()) {
            Some(to) => to,
            None => {
                return Err(SchemaError::DanglingForeignKey(format!(
                    "{table}.{from} -> {parent} (no primary key)"
                )))
            }
        };
        edges.push(FkEdge {
            from: ColumnRef::new(table, from),
            to: ColumnRef::new(parent, to),
        });
    }
    SchemaCatalog::new(label, tables, edges)
}
