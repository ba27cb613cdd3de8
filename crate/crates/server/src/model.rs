use qrec_core::exec::{ChartSpec, ResultTable};
use qrec_core::schema::{humanize, SchemaCatalog};
use qrec_core::QueryIR;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Width of the dashboard grid in columns.
pub const GRID_COLUMNS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Plain,
    TableMention,
    ColumnMention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub text: String,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NlExplanation {
    pub segments: Vec<Segment>,
}

impl NlExplanation {
    fn push(&mut self, kind: SegmentKind, text: impl Into<String>) {
        self.segments.push(Segment {
            text: text.into(),
            kind,
        });
    }

    pub fn text(&self) -> String {
        self.segments.iter().map(|s| s.text.as_str()).collect()
    }

    pub fn mentions(&self, kind: SegmentKind) -> impl Iterator<Item = &str> + '_ {
        self.segments
            .iter()
            .filter(move |s| s.kind == kind)
            .map(|s| s.text.as_str())
    }
}

/// Describes where each selected value comes from and how it is grouped.
pub fn explain(query: &QueryIR, catalog: &SchemaCatalog) -> NlExplanation {
    let column_text = |c: &qrec_core::ColumnRef| {
        catalog
            .display_text(c)
            .map(str::to_owned)
            .unwrap_or_else(|| humanize(&c.column))
    };
    let table_text = |t: &str| {
        catalog
            .table(t)
            .map(|t| t.display_text.clone())
            .unwrap_or_else(|| humanize(t))
    };
    let mut e = NlExplanation::default();
    e.push(SegmentKind::Plain, "The system ");
    for (i, s) in query.selections.iter().enumerate() {
        if i > 0 {
            e.push(SegmentKind::Plain, "; it ");
        }
        match s.aggregate {
            Some(a) => e.push(
                SegmentKind::Plain,
                format!("retrieves the {} of ", a.phrase()),
            ),
            None => e.push(SegmentKind::Plain, "retrieves the values of "),
        }
        e.push(SegmentKind::ColumnMention, column_text(&s.column));
        e.push(SegmentKind::Plain, " from ");
        e.push(SegmentKind::TableMention, table_text(&s.column.table));
    }
    for (i, g) in query.grouping.iter().enumerate() {
        e.push(
            SegmentKind::Plain,
            if i == 0 { ", grouped by " } else { " and " },
        );
        e.push(SegmentKind::ColumnMention, column_text(g));
    }
    e.push(SegmentKind::Plain, ".");
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub index: usize,
    pub query: QueryIR,
    pub sql: String,
    pub nl_text: String,
    pub result: ResultTable,
    pub chart: ChartSpec,
    pub vega_lite: serde_json::Value,
    pub explanation: NlExplanation,
    pub submitted_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub database_id: String,
    pub created_at: String,
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DashboardCell {
    pub history_index: usize,
    pub row: u32,
    pub col: u32,
    pub width: u32,
    pub height: u32,
}

impl DashboardCell {
    fn overlaps(&self, other: &DashboardCell) -> bool {
        self.col < other.col + other.width
            && other.col < self.col + self.width
            && self.row < other.row + other.height
            && other.row < self.row + self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dashboard {
    pub id: String,
    pub session_id: String,
    pub cells: Vec<DashboardCell>,
}

/// Checks cell bounds against a session with `history_len` entries and the
/// grid, then pairwise overlap.
pub fn validate_cells(cells: &[DashboardCell], history_len: usize) -> Result<(), ServiceError> {
    for (i, c) in cells.iter().enumerate() {
        if c.history_index >= history_len {
            return Err(ServiceError::InvalidCell(format!(
                "cell {i} refers to history index {} of {history_len}",
                c.history_index
            )));
        }
        if c.width == 0 || c.height == 0 || c.col + c.width > GRID_COLUMNS {
            return Err(ServiceError::InvalidCell(format!(
                "cell {i} does not fit the {GRID_COLUMNS}-column grid"
            )));
        }
    }
    for (i, a) in cells.iter().enumerate() {
        for (j, b) in cells.iter().enumerate().skip(i + 1) {
            if a.overlaps(b) {
                return Err(ServiceError::OverlappingCells(format!(
                    "cells {i} and {j} overlap"
                )));
            }
        }
    }
    Ok(())
}
