//! Structured representation of `SELECT ... FROM ... GROUP BY` queries.
//!
//! [`parse_sql`] reads a restricted SQL subset into a [`QueryIR`],
//! [`synthesize_sql`] writes the canonical text back and [`render_nl`] turns
//! it into an English question.

mod lexer;
mod nl;
mod parser;
mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{ColumnRef, SchemaCatalog};

pub use nl::render_nl;
pub use parser::parse_sql;
pub use synth::synthesize_sql;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unsupported construct at {position}: {message}")]
    Unsupported { position: usize, message: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),
    #[error("invalid query: {0}")]
    Invalid(String),
}

impl SqlError {
    /// Byte offset into the source text, for errors raised while scanning.
    pub fn position(&self) -> Option<usize> {
        match self {
            SqlError::Syntax { position, .. } | SqlError::Unsupported { position, .. } => {
                Some(*position)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AggregateFn {
    Min,
    Max,
    Count,
    Sum,
    Avg,
}

impl AggregateFn {
    pub const ALL: [AggregateFn; 5] = [
        AggregateFn::Min,
        AggregateFn::Max,
        AggregateFn::Count,
        AggregateFn::Sum,
        AggregateFn::Avg,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            AggregateFn::Min => "MIN",
            AggregateFn::Max => "MAX",
            AggregateFn::Count => "COUNT",
            AggregateFn::Sum => "SUM",
            AggregateFn::Avg => "AVG",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        AggregateFn::ALL
            .into_iter()
            .find(|a| a.keyword().eq_ignore_ascii_case(word))
    }

    /// Phrase used when rendering the aggregate in English.
    pub fn phrase(self) -> &'static str {
        match self {
            AggregateFn::Min => "minimum",
            AggregateFn::Max => "maximum",
            AggregateFn::Count => "number of",
            AggregateFn::Sum => "total",
            AggregateFn::Avg => "average",
        }
    }
}

impl fmt::Display for AggregateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectItem {
    pub column: ColumnRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<AggregateFn>,
}

impl SelectItem {
    pub fn plain(column: ColumnRef) -> Self {
        SelectItem {
            column,
            aggregate: None,
        }
    }

    pub fn aggregated(column: ColumnRef, aggregate: AggregateFn) -> Self {
        SelectItem {
            column,
            aggregate: Some(aggregate),
        }
    }
}

/// An equality join condition `left = right`; `left` is on the side already
/// present in the FROM clause.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JoinEdge {
    pub left: ColumnRef,
    pub right: ColumnRef,
}

/// The exploration action a query component belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Selection,
    Grouping,
    Aggregation,
}

impl ActionKind {
    pub const ALL: [ActionKind; 3] = [
        ActionKind::Selection,
        ActionKind::Grouping,
        ActionKind::Aggregation,
    ];
}

/// A `SELECT ... FROM ... [GROUP BY ...]` query.
///
/// Equality and hashing ignore `lossy`, which only records that clauses were
/// dropped while parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryIR {
    pub selections: Vec<SelectItem>,
    #[serde(default)]
    pub grouping: Vec<ColumnRef>,
    pub source_tables: BTreeSet<String>,
    #[serde(default)]
    pub join_edges: Vec<JoinEdge>,
    #[serde(default)]
    pub lossy: bool,
}

impl PartialEq for QueryIR {
    fn eq(&self, other: &Self) -> bool {
        self.selections == other.selections
            && self.grouping == other.grouping
            && self.source_tables == other.source_tables
            && self.join_edges == other.join_edges
    }
}

impl Eq for QueryIR {}

impl Hash for QueryIR {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.selections.hash(state);
        self.grouping.hash(state);
        self.source_tables.hash(state);
        self.join_edges.hash(state);
    }
}

impl QueryIR {
    /// Builds a query and puts its join edges into canonical order.
    ///
    /// `extra_tables` lists tables that appear in FROM without contributing a
    /// column (e.g. a single-table query or a bridge table).
    pub fn new(
        selections: Vec<SelectItem>,
        grouping: Vec<ColumnRef>,
        joins: Vec<JoinEdge>,
        extra_tables: impl IntoIterator<Item = String>,
    ) -> Result<Self, SqlError> {
        let mut source_tables: BTreeSet<String> = extra_tables.into_iter().collect();
        source_tables.extend(selections.iter().map(|s| s.column.table.clone()));
        source_tables.extend(grouping.iter().map(|g| g.table.clone()));
        for j in &joins {
            source_tables.insert(j.left.table.clone());
            source_tables.insert(j.right.table.clone());
        }
        let (join_edges, redundant) = canonical_joins(&source_tables, joins)?;
        let ir = QueryIR {
            selections,
            grouping,
            source_tables,
            join_edges,
            lossy: redundant,
        };
        ir.check_shape()?;
        Ok(ir)
    }

    /// Table the FROM clause starts with.
    pub fn base_table(&self) -> &str {
        self.join_edges
            .first()
            .map(|e| e.left.table.as_str())
            .or_else(|| self.source_tables.iter().next().map(String::as_str))
            .unwrap_or("")
    }

    pub fn has_aggregate(&self) -> bool {
        self.selections.iter().any(|s| s.aggregate.is_some())
    }

    /// Every column mentioned in SELECT or GROUP BY.
    pub fn all_columns(&self) -> BTreeSet<ColumnRef> {
        self.selections
            .iter()
            .map(|s| s.column.clone())
            .chain(self.grouping.iter().cloned())
            .collect()
    }

    fn check_shape(&self) -> Result<(), SqlError> {
        if self.selections.is_empty() {
            return Err(SqlError::Invalid("no selected columns".into()));
        }
        for c in self
            .selections
            .iter()
            .map(|s| &s.column)
            .chain(&self.grouping)
        {
            if !self.source_tables.contains(&c.table) {
                return Err(SqlError::Invalid(format!("{c} is outside the FROM clause")));
            }
        }
        if !self.grouping.is_empty() {
            for s in &self.selections {
                if s.aggregate.is_none() && !self.grouping.contains(&s.column) {
                    return Err(SqlError::Invalid(format!(
                        "{} is neither aggregated nor grouped",
                        s.column
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks every invariant, including that columns exist in `catalog`.
    pub fn validate(&self, catalog: &SchemaCatalog) -> Result<(), SqlError> {
        self.check_shape()?;
        for t in &self.source_tables {
            if catalog.table(t).is_none() {
                return Err(SqlError::UnknownTable(t.clone()));
            }
        }
        let join_cols = self.join_edges.iter().flat_map(|e| [&e.left, &e.right]);
        for c in self
            .selections
            .iter()
            .map(|s| &s.column)
            .chain(&self.grouping)
            .chain(join_cols)
        {
            if catalog.column(c).is_none() {
                return Err(SqlError::UnknownColumn(c.to_string()));
            }
        }
        let (edges, _) = canonical_joins(&self.source_tables, self.join_edges.clone())?;
        if edges != self.join_edges {
            return Err(SqlError::Invalid(
                "join edges are not in canonical order".into(),
            ));
        }
        Ok(())
    }
}

/// Orders join edges so each one introduces exactly one new table, starting
/// from the lexicographically smallest table and always taking the smallest
/// available edge. Returns whether redundant edges were dropped.
fn canonical_joins(
    tables: &BTreeSet<String>,
    joins: Vec<JoinEdge>,
) -> Result<(Vec<JoinEdge>, bool), SqlError> {
    let Some(first) = tables.iter().next() else {
        return Ok((Vec::new(), false));
    };
    let mut connected = BTreeSet::from([first.clone()]);
    let mut remaining = joins;
    let mut ordered = Vec::new();
    loop {
        let best = remaining
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                let l = connected.contains(&e.left.table);
                let r = connected.contains(&e.right.table);
                match (l, r) {
                    (true, false) => Some((i, e.clone())),
                    (false, true) => Some((
                        i,
                        JoinEdge {
                            left: e.right.clone(),
                            right: e.left.clone(),
                        },
                    )),
                    _ => None,
                }
            })
            .min_by(|a, b| a.1.cmp(&b.1));
        let Some((i, edge)) = best else { break };
        remaining.swap_remove(i);
        connected.insert(edge.right.table.clone());
        ordered.push(edge);
    }
    if &connected != tables {
        let missing: Vec<_> = tables.difference(&connected).cloned().collect();
        return Err(SqlError::Invalid(format!(
            "tables not connected by joins: {}",
            missing.join(", ")
        )));
    }
    Ok((ordered, !remaining.is_empty()))
}

/// A query together with the schema it was written against.
#[derive(Debug, Clone, Copy)]
pub struct BoundQuery<'a> {
    pub ir: &'a QueryIR,
    pub catalog: &'a SchemaCatalog,
}

impl<'a> BoundQuery<'a> {
    pub fn new(ir: &'a QueryIR, catalog: &'a SchemaCatalog) -> Self {
        BoundQuery { ir, catalog }
    }

    pub fn texts(&self, action: ActionKind) -> Vec<String> {
        action_texts(self.ir, self.catalog, action)
    }
}

/// Columns touched by one exploration action.
pub fn action_columns(ir: &QueryIR, action: ActionKind) -> BTreeSet<ColumnRef> {
    match action {
        ActionKind::Selection => ir.selections.iter().map(|s| s.column.clone()).collect(),
        ActionKind::Grouping => ir.grouping.iter().cloned().collect(),
        ActionKind::Aggregation => ir
            .selections
            .iter()
            .filter(|s| s.aggregate.is_some())
            .map(|s| s.column.clone())
            .collect(),
    }
}

/// Display texts of [`action_columns`], in column order.
pub fn action_texts(ir: &QueryIR, catalog: &SchemaCatalog, action: ActionKind) -> Vec<String> {
    action_columns(ir, action)
        .iter()
        .map(|c| {
            catalog
                .display_text(c)
                .map(str::to_owned)
                .unwrap_or_else(|| crate::schema::humanize(&c.column))
        })
        .collect()
}
