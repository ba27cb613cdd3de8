use crate::embedding::{EmbedError, SemanticSpace};
use crate::schema::{ColumnRef, SchemaCatalog, ValueKind};
use crate::sql::{ActionKind, AggregateFn, BoundQuery};

use super::relevance::{column_text, occurrences, Occurrence};

/// Aggregates seen on similar reference columns, most frequent first.
///
/// Returns the kind-based default when no similar aggregated occurrence
/// exists.
pub fn suggest_aggregations(
    space: &SemanticSpace,
    column: &ColumnRef,
    catalog: &SchemaCatalog,
    refs: &[BoundQuery<'_>],
    threshold: f64,
) -> Result<Vec<AggregateFn>, EmbedError> {
    suggest_from(
        space,
        column,
        catalog,
        &occurrences(refs, ActionKind::Aggregation),
        threshold,
    )
}

pub(crate) fn suggest_from(
    space: &SemanticSpace,
    column: &ColumnRef,
    catalog: &SchemaCatalog,
    occurrences: &[Occurrence],
    threshold: f64,
) -> Result<Vec<AggregateFn>, EmbedError> {
    let text = column_text(catalog, column);
    let mut counts = [0usize; 5];
    for o in occurrences {
        let Some(agg) = o.aggregate else { continue };
        if space.text_similarity(&text, &o.text)? >= threshold {
            counts[agg as usize] += 1;
        }
    }
    let mut ranked: Vec<AggregateFn> = AggregateFn::ALL
        .into_iter()
        .filter(|a| counts[*a as usize] > 0)
        .collect();
    // stable sort keeps the fixed MIN < MAX < COUNT < SUM < AVG order on ties
    ranked.sort_by(|a, b| counts[*b as usize].cmp(&counts[*a as usize]));
    if ranked.is_empty() {
        ranked = fallback(catalog.value_kind(column));
    }
    Ok(ranked)
}

fn fallback(kind: Option<ValueKind>) -> Vec<AggregateFn> {
    match kind {
        Some(ValueKind::Numeric) => vec![AggregateFn::Sum, AggregateFn::Avg, AggregateFn::Count],
        _ => vec![AggregateFn::Count],
    }
}
