//! Context-aware next-step query recommendation for exploratory analysis of
//! relational databases.

pub mod dates;
pub mod embedding;
pub mod exec;
pub mod recommender;
pub mod reference;
pub mod scalar;
pub mod schema;
pub mod sql;

pub use embedding::{EmbeddingVector, SemanticSpace};
pub use schema::{ColumnRef, FkEdge, SchemaCatalog, TableDef, ValueKind};
pub use sql::{parse_sql, render_nl, synthesize_sql, ActionKind, AggregateFn, QueryIR, SelectItem};

/// Scalar used for similarity and ranking scores.
pub type Score = f64;
