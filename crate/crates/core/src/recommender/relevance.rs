use serde::{Deserialize, Serialize};

use crate::embedding::{EmbedError, SemanticSpace};
use crate::schema::{ColumnRef, SchemaCatalog};
use crate::sql::{ActionKind, AggregateFn, BoundQuery};

/// One column occurrence in a reference query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occurrence {
    pub text: String,
    pub aggregate: Option<AggregateFn>,
}

/// Column occurrences of the clause an action draws from: SELECT items for
/// selection and aggregation, GROUP BY columns for grouping.
pub fn occurrences(refs: &[BoundQuery<'_>], action: ActionKind) -> Vec<Occurrence> {
    let text = |q: &BoundQuery<'_>, c: &ColumnRef| {
        q.catalog
            .display_text(c)
            .map(str::to_owned)
            .unwrap_or_else(|| crate::schema::humanize(&c.column))
    };
    let mut out = Vec::new();
    for q in refs {
        match action {
            ActionKind::Selection | ActionKind::Aggregation => {
                out.extend(q.ir.selections.iter().map(|s| Occurrence {
                    text: text(q, &s.column),
                    aggregate: s.aggregate,
                }));
            }
            ActionKind::Grouping => {
                out.extend(q.ir.grouping.iter().map(|g| Occurrence {
                    text: text(q, g),
                    aggregate: None,
                }));
            }
        }
    }
    out
}

/// Binary relevance of one target column to every reference occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceVector {
    pub column: ColumnRef,
    pub bits: Vec<u8>,
    pub frequency: usize,
}

impl RelevanceVector {
    pub fn from_bits(column: ColumnRef, bits: Vec<u8>) -> Self {
        let frequency = bits.iter().filter(|b| **b == 1).count();
        RelevanceVector {
            column,
            bits,
            frequency,
        }
    }

    /// Share of occurrences marked relevant; 0 when there are none.
    pub fn relative_frequency(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.frequency as f64 / self.bits.len() as f64
        }
    }
}

/// Relevance vector of `column` against pre-extracted occurrences.
pub fn relevance_against(
    space: &SemanticSpace,
    column: &ColumnRef,
    catalog: &SchemaCatalog,
    occurrences: &[Occurrence],
    threshold: f64,
) -> Result<RelevanceVector, EmbedError> {
    let text = column_text(catalog, column);
    let bits = occurrences
        .iter()
        .map(|o| {
            Ok(u8::from(
                space.text_similarity(&text, &o.text)? >= threshold,
            ))
        })
        .collect::<Result<Vec<u8>, EmbedError>>()?;
    Ok(RelevanceVector::from_bits(column.clone(), bits))
}

pub fn column_relevance_vector(
    space: &SemanticSpace,
    column: &ColumnRef,
    catalog: &SchemaCatalog,
    refs: &[BoundQuery<'_>],
    action: ActionKind,
    threshold: f64,
) -> Result<RelevanceVector, EmbedError> {
    relevance_against(
        space,
        column,
        catalog,
        &occurrences(refs, action),
        threshold,
    )
}

pub(crate) fn column_text(catalog: &SchemaCatalog, column: &ColumnRef) -> String {
    catalog
        .display_text(column)
        .map(str::to_owned)
        .unwrap_or_else(|| crate::schema::humanize(&column.column))
}
