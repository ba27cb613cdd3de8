//! Query execution against SQLite and chart selection for the results.

mod chart;

use std::collections::BTreeSet;

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dates::is_iso8601;
use crate::sql::{synthesize_sql, QueryIR, SelectItem};

pub use chart::{recommend_chart, Channel, ChartSpec, Encoding, Mark};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error("schema drift: {0}")]
    SchemaDrift(String),
}

impl From<rusqlite::Error> for ExecError {
    fn from(e: rusqlite::Error) -> Self {
        ExecError::Backend(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Integer(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Text(t) => f.write_str(t),
        }
    }
}

/// Quantitative, nominal or temporal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldType {
    Q,
    N,
    T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultColumn {
    pub name: String,
    pub field_type: FieldType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<ResultColumn>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn field_types(&self) -> Vec<FieldType> {
        self.columns.iter().map(|c| c.field_type).collect()
    }
}

fn field_type<'v>(values: impl Iterator<Item = &'v Value>) -> FieldType {
    let present: Vec<&Value> = values.filter(|v| !v.is_null()).collect();
    if present.is_empty() {
        return FieldType::N;
    }
    if present.iter().all(|v| v.as_f64().is_some()) {
        return FieldType::Q;
    }
    if present
        .iter()
        .all(|v| matches!(v, Value::Text(t) if is_iso8601(t)))
    {
        return FieldType::T;
    }
    FieldType::N
}

/// Assigns each column a field type from its non-null values.
pub fn classify_fields(names: Vec<String>, rows: Vec<Vec<Value>>) -> ResultTable {
    let columns = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| ResultColumn {
            field_type: field_type(rows.iter().filter_map(|r| r.get(i))),
            name,
        })
        .collect();
    ResultTable { columns, rows }
}

/// The query actually run: selections followed by any grouping column that
/// is not selected.
pub fn execution_query(ir: &QueryIR) -> QueryIR {
    let mut q = ir.clone();
    for g in &ir.grouping {
        if !ir
            .selections
            .iter()
            .any(|s| s.aggregate.is_none() && &s.column == g)
        {
            q.selections.push(SelectItem::plain(g.clone()));
        }
    }
    q
}

fn output_names(ir: &QueryIR) -> Vec<String> {
    let short = |s: &SelectItem| match s.aggregate {
        Some(a) => format!("{}_{}", a.keyword().to_lowercase(), s.column.column),
        None => s.column.column.clone(),
    };
    let names: Vec<String> = ir.selections.iter().map(short).collect();
    ir.selections
        .iter()
        .zip(&names)
        .map(|(s, n)| {
            if names.iter().filter(|m| *m == n).count() > 1 {
                format!("{}.{n}", s.column.table)
            } else {
                n.clone()
            }
        })
        .collect()
}

fn check_drift(ir: &QueryIR, conn: &Connection) -> Result<(), ExecError> {
    let mut columns: BTreeSet<(&str, &str)> = BTreeSet::new();
    for c in ir
        .selections
        .iter()
        .map(|s| &s.column)
        .chain(&ir.grouping)
        .chain(ir.join_edges.iter().flat_map(|e| [&e.left, &e.right]))
    {
        columns.insert((c.table.as_str(), c.column.as_str()));
    }
    for table in &ir.source_tables {
        let mut stmt = conn.prepare("SELECT name FROM pragma_table_info(?1)")?;
        let present: BTreeSet<String> = stmt
            .query_map([table], |r| r.get::<_, String>(0))?
            .collect::<Result<_, _>>()?;
        let present: BTreeSet<String> = present.into_iter().map(|n| n.to_lowercase()).collect();
        if present.is_empty() {
            return Err(ExecError::SchemaDrift(format!(
                "table `{table}` is missing"
            )));
        }
        for (t, c) in columns.iter().filter(|(t, _)| t == table) {
            if !present.contains(*c) {
                return Err(ExecError::SchemaDrift(format!(
                    "column `{t}.{c}` is missing"
                )));
            }
        }
    }
    Ok(())
}

/// Runs `ir` and returns its classified result.
pub fn execute(ir: &QueryIR, conn: &Connection) -> Result<ResultTable, ExecError> {
    check_drift(ir, conn)?;
    let q = execution_query(ir);
    let sql = synthesize_sql(&q);
    let mut stmt = conn.prepare(&sql)?;
    let width = stmt.column_count();
    let rows = stmt
        .query_map([], |row| {
            (0..width)
                .map(|i| {
                    Ok(match row.get_ref(i)? {
                        ValueRef::Null => Value::Null,
                        ValueRef::Integer(v) => Value::Integer(v),
                        ValueRef::Real(v) => Value::Real(v),
                        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
                        ValueRef::Blob(b) => Value::Text(format!("<{} bytes>", b.len())),
                    })
                })
                .collect::<Result<Vec<Value>, rusqlite::Error>>()
        })?
        .collect::<Result<Vec<_>, _>>()?;
    Ok(classify_fields(output_names(&q), rows))
}
