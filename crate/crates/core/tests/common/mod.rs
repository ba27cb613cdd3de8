#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use qrec_core::embedding::{
    lexical_embedding, EmbedError, Embedder, Embedding, EmbeddingVector, DEFAULT_DIMENSION,
};
use qrec_core::exec::{classify_fields, Mark, ResultTable, Value};
use qrec_core::recommender::assemble_query;
use qrec_core::recommender::fpmax::Itemset;
use qrec_core::reference::ReferenceRepository;
use qrec_core::schema::{load_sqlite_schema, ColumnDef};
use qrec_core::{
    ActionKind, AggregateFn, ColumnRef, QueryIR, SchemaCatalog, SelectItem, TableDef, ValueKind,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn toy() -> SchemaCatalog {
    load_sqlite_schema(fixture("toy.sqlite")).unwrap()
}

pub fn repository() -> ReferenceRepository {
    ReferenceRepository::load_log(fixture("tables.json"), fixture("refs.json"))
        .unwrap()
        .0
}

pub fn col(s: &str) -> ColumnRef {
    let (t, c) = s.split_once('.').unwrap();
    ColumnRef::new(t, c)
}

pub const AGGREGATES: [AggregateFn; 5] = [
    AggregateFn::Min,
    AggregateFn::Max,
    AggregateFn::Count,
    AggregateFn::Sum,
    AggregateFn::Avg,
];

/// Random joinable query over `catalog`.
pub fn query(catalog: &SchemaCatalog) -> impl Strategy<Value = QueryIR> + '_ {
    let columns: Vec<ColumnRef> = catalog.columns().collect();
    let n = columns.len();
    (
        prop::collection::btree_set(0..n, 1..=3),
        prop::collection::vec(prop::option::weighted(0.4, 0usize..5), 3),
    )
        .prop_filter_map("connected", move |(picked, aggs)| {
            let selections: Vec<(ColumnRef, Option<AggregateFn>)> = picked
                .iter()
                .zip(&aggs)
                .map(|(&i, a)| (columns[i].clone(), a.map(|a| AGGREGATES[a])))
                .collect();
            let grouping: Vec<ColumnRef> = if selections.iter().any(|s| s.1.is_some()) {
                selections
                    .iter()
                    .filter(|s| s.1.is_none())
                    .map(|s| s.0.clone())
                    .collect()
            } else {
                Vec::new()
            };
            assemble_query(&selections, &grouping, catalog).ok()
        })
}

// Direct-summation scoring oracle. It recomputes every term from raw
// embeddings and never touches the similarity cache or the scoring module.

pub fn texts(ir: &QueryIR, catalog: &SchemaCatalog, action: ActionKind) -> Vec<String> {
    let cols: BTreeSet<&ColumnRef> = match action {
        ActionKind::Selection => ir.selections.iter().map(|s| &s.column).collect(),
        ActionKind::Grouping => ir.grouping.iter().collect(),
        ActionKind::Aggregation => ir
            .selections
            .iter()
            .filter(|s| s.aggregate.is_some())
            .map(|s| &s.column)
            .collect(),
    };
    cols.into_iter()
        .map(|c| catalog.display_text(c).unwrap().to_string())
        .collect()
}

pub fn dot(a: &str, b: &str) -> f64 {
    let x = lexical_embedding::<f64>(a, DEFAULT_DIMENSION).unwrap();
    let y = lexical_embedding::<f64>(b, DEFAULT_DIMENSION).unwrap();
    x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum()
}

pub fn oracle_similarity(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for x in a {
        let mut best = f64::NEG_INFINITY;
        for y in b {
            best = best.max(dot(x, y));
        }
        total += best;
    }
    (total / a.len() as f64).clamp(0.0, 1.0)
}

pub struct Side<'a> {
    pub ir: &'a QueryIR,
    pub catalog: &'a SchemaCatalog,
}

pub fn oracle_action_similarity(a: &Side, b: &Side, action: ActionKind) -> f64 {
    oracle_similarity(
        &texts(a.ir, a.catalog, action),
        &texts(b.ir, b.catalog, action),
    )
}

/// Sum over history rank r of alpha^r (sim(q_r, cand) + beta max_ref sim(q_r, ref)).
pub fn oracle_contextual(
    history: &[Side],
    refs: &[Side],
    candidate: &Side,
    action: ActionKind,
    alpha: f64,
    beta: f64,
) -> f64 {
    let mut total = 0.0;
    for (r, q) in history.iter().enumerate() {
        let to_candidate = oracle_action_similarity(q, candidate, action);
        let mut best_ref: f64 = 0.0;
        for s in refs {
            best_ref = best_ref.max(oracle_action_similarity(q, s, action));
        }
        total += alpha.powi(r as i32) * (to_candidate + beta * best_ref);
    }
    total
}

/// Relative reference frequency of one column for an action, recounted from
/// raw embeddings.
pub fn oracle_relative_frequency(
    text: &str,
    refs: &[Side],
    action: ActionKind,
    threshold: f64,
) -> f64 {
    let mut total = 0usize;
    let mut hits = 0usize;
    for r in refs {
        let cols: Vec<&ColumnRef> = match action {
            ActionKind::Grouping => r.ir.grouping.iter().collect(),
            _ => r.ir.selections.iter().map(|s| &s.column).collect(),
        };
        for c in cols {
            total += 1;
            if dot(text, r.catalog.display_text(c).unwrap()) >= threshold {
                hits += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// First-step score: per action, the mean relative frequency of its columns.
pub fn oracle_initial_score(candidate: &Side, refs: &[Side], threshold: f64) -> f64 {
    ActionKind::ALL
        .into_iter()
        .map(|action| {
            let t = texts(candidate.ir, candidate.catalog, action);
            if t.is_empty() {
                return 0.0;
            }
            let source = if action == ActionKind::Grouping {
                ActionKind::Grouping
            } else {
                ActionKind::Selection
            };
            t.iter()
                .map(|x| oracle_relative_frequency(x, refs, source, threshold))
                .sum::<f64>()
                / t.len() as f64
        })
        .sum()
}

/// Every maximal frequent itemset by exhaustive subset enumeration.
pub fn brute_force(transactions: &[Vec<usize>], items: usize, min_count: usize) -> Vec<Itemset> {
    let sets: Vec<u32> = transactions
        .iter()
        .map(|t| t.iter().fold(0u32, |m, &i| m | 1 << i))
        .collect();
    let frequent: Vec<(u32, usize)> = (1u32..1 << items)
        .map(|mask| (mask, sets.iter().filter(|t| *t & mask == mask).count()))
        .filter(|&(_, s)| s >= min_count.max(1))
        .collect();
    let mut out: Vec<Itemset> = frequent
        .iter()
        .filter(|(m, _)| !frequent.iter().any(|(o, _)| o != m && o & m == *m))
        .map(|&(m, support)| Itemset {
            items: (0..items).filter(|i| m & (1 << i) != 0).collect(),
            support,
        })
        .collect();
    out.sort();
    out
}

/// Maps each of a few fixed texts to a chosen unit vector.
pub struct TableEmbedder;

impl Embedder for TableEmbedder {
    fn dimension(&self) -> usize {
        2
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let cos: f64 = match text {
            "c" | "a" => 1.0,
            "b" => 0.5,
            "d" => 0.25,
            _ => 0.0,
        };
        Embedding::normalized(vec![cos, (1.0 - cos * cos).sqrt()])
    }
}

pub fn letters() -> SchemaCatalog {
    let columns = ["a", "b", "c", "d", "e"]
        .iter()
        .map(|n| ColumnDef {
            name: (*n).into(),
            display_text: (*n).into(),
            value_kind: ValueKind::Numeric,
        })
        .collect();
    SchemaCatalog::new(
        "letters",
        vec![TableDef {
            name: "t".into(),
            display_text: String::new(),
            columns,
            primary_key: None,
        }],
        vec![],
    )
    .unwrap()
}

pub fn select(names: &[&str]) -> QueryIR {
    let items = names
        .iter()
        .map(|n| SelectItem::plain(col(&format!("t.{n}"))))
        .collect();
    QueryIR::new(items, vec![], vec![], []).unwrap()
}

pub fn text(s: &str) -> Value {
    Value::Text(s.into())
}

pub fn table(columns: &[&str], rows: Vec<Vec<Value>>) -> ResultTable {
    classify_fields(columns.iter().map(|c| c.to_string()).collect(), rows)
}

/// One synthetic table per rule with the mark it must produce.
pub fn rule_cases() -> Vec<(&'static str, ResultTable, Mark)> {
    let i = Value::Integer;
    vec![
        (
            "single value",
            table(&["total"], vec![vec![i(57)]]),
            Mark::ValueCard,
        ),
        (
            "Q x N",
            table(
                &["product_details", "total_quantity"],
                vec![vec![text("Latte"), i(3)], vec![text("Espresso"), i(7)]],
            ),
            Mark::Bar,
        ),
        (
            "Q x T",
            table(
                &["day", "qty"],
                vec![
                    vec![text("2018-03-17"), i(3)],
                    vec![text("2018-03-18 10:00:00"), i(5)],
                ],
            ),
            Mark::Line,
        ),
        (
            "Q x Q",
            table(
                &["a", "b"],
                vec![vec![i(1), Value::Real(2.5)], vec![i(2), i(4)]],
            ),
            Mark::Scatter,
        ),
        (
            "N x N",
            table(
                &["status", "product"],
                vec![
                    vec![text("Cancelled"), text("Latte")],
                    vec![text("Delivered"), text("Latte")],
                ],
            ),
            Mark::Heatmap,
        ),
        (
            "single Q",
            table(&["qty"], vec![vec![i(1)], vec![i(5)], vec![i(5)]]),
            Mark::Histogram,
        ),
        (
            "single N",
            table(
                &["status"],
                vec![vec![text("Cancelled")], vec![text("Delivered")]],
            ),
            Mark::Bar,
        ),
        (
            "Q x N x N",
            table(
                &["status", "product", "qty"],
                vec![
                    vec![text("Cancelled"), text("Latte"), i(1)],
                    vec![text("Delivered"), text("Espresso"), i(2)],
                ],
            ),
            Mark::Bar,
        ),
        (
            "five mixed",
            table(
                &["a", "b", "c", "d", "e"],
                vec![
                    vec![
                        i(1),
                        text("x"),
                        text("2018-03-17"),
                        Value::Real(0.5),
                        text("y"),
                    ],
                    vec![
                        i(2),
                        text("z"),
                        text("2018-03-18"),
                        Value::Real(1.5),
                        text("w"),
                    ],
                ],
            ),
            Mark::Table,
        ),
    ]
}
