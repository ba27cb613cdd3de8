use std::collections::BTreeSet;

use crate::schema::{ColumnRef, FkEdge, SchemaCatalog, SchemaError};
use crate::sql::{AggregateFn, JoinEdge, QueryIR, SelectItem};

use super::RecommendError;

/// Builds a query over the given columns, joining their tables through
/// foreign keys.
///
/// Tables are connected in lexicographic order, each one through the
/// shortest path from the tables already connected.
pub fn assemble_query(
    selections: &[(ColumnRef, Option<AggregateFn>)],
    grouping: &[ColumnRef],
    catalog: &SchemaCatalog,
) -> Result<QueryIR, RecommendError> {
    for c in selections.iter().map(|s| &s.0).chain(grouping) {
        if catalog.column(c).is_none() {
            return Err(RecommendError::UnknownColumn(c.to_string()));
        }
    }
    let tables: BTreeSet<&str> = selections
        .iter()
        .map(|s| s.0.table.as_str())
        .chain(grouping.iter().map(|g| g.table.as_str()))
        .collect();
    let mut connected: BTreeSet<String> = BTreeSet::new();
    let mut edges: Vec<FkEdge> = Vec::new();
    for t in &tables {
        if connected.is_empty() {
            connected.insert(t.to_string());
            continue;
        }
        if connected.contains(*t) {
            continue;
        }
        let mut best: Option<Vec<FkEdge>> = None;
        for c in &connected {
            match catalog.join_path(c, t) {
                Ok(p) => {
                    if best.as_ref().is_none_or(|b| p.len() < b.len()) {
                        best = Some(p);
                    }
                }
                Err(SchemaError::NoJoinPath { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let Some(path) = best else {
            return Err(SchemaError::NoJoinPath {
                from: connected.iter().next().cloned().unwrap_or_default(),
                to: t.to_string(),
            }
            .into());
        };
        for e in path {
            connected.insert(e.from.table.clone());
            connected.insert(e.to.table.clone());
            edges.push(e);
        }
    }
    let joins = edges
        .into_iter()
        .map(|e| JoinEdge {
            left: e.from,
            right: e.to,
        })
        .collect();
    let items = selections
        .iter()
        .map(|(c, a)| SelectItem {
            column: c.clone(),
            aggregate: *a,
        })
        .collect();
    let mut ir = QueryIR::new(items, grouping.to_vec(), joins, connected)?;
    ir.lossy = false;
    Ok(ir)
}
