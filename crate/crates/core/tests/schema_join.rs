use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use qrec_core::schema::{
    load_spider_schema, load_spider_schemas, load_sqlite_schema, ColumnDef, SchemaError,
};
use qrec_core::{ColumnRef, FkEdge, SchemaCatalog, TableDef, ValueKind};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn column(name: &str, kind: ValueKind) -> ColumnDef {
    ColumnDef {
        name: name.into(),
        display_text: String::new(),
        value_kind: kind,
    }
}

/// Tables `t0..tn`, each with an `id` key and `ref0..ref5` link columns.
fn graph_catalog(n: usize, links: &[(usize, usize)]) -> SchemaCatalog {
    let tables = (0..n)
        .map(|i| TableDef {
            name: format!("t{i}"),
            display_text: String::new(),
            columns: std::iter::once(column("id", ValueKind::Numeric))
                .chain((0..6).map(|j| column(&format!("ref{j}"), ValueKind::Numeric)))
                .collect(),
            primary_key: Some("id".into()),
        })
        .collect();
    let edges = links
        .iter()
        .map(|&(a, b)| FkEdge {
            from: ColumnRef::new(format!("t{a}"), format!("ref{b}")),
            to: ColumnRef::new(format!("t{b}"), "id"),
        })
        .collect();
    SchemaCatalog::new("graph", tables, edges).unwrap()
}

/// Length of the shortest chain by enumerating every simple path.
fn exhaustive_shortest(links: &[(usize, usize)], from: usize, to: usize) -> Option<usize> {
    fn walk(
        links: &[(usize, usize)],
        at: usize,
        to: usize,
        seen: &mut BTreeSet<usize>,
        depth: usize,
        best: &mut Option<usize>,
    ) {
        if at == to {
            *best = Some(best.map_or(depth, |b| b.min(depth)));
            return;
        }
        for &(a, b) in links {
            let next = if a == at {
                b
            } else if b == at {
                a
            } else {
                continue;
            };
            if seen.insert(next) {
                walk(links, next, to, seen, depth + 1, best);
                seen.remove(&next);
            }
        }
    }
    let mut best = None;
    walk(links, from, to, &mut BTreeSet::from([from]), 0, &mut best);
    best
}

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..=6).prop_flat_map(|n| {
        let link = (0..n, 0..n).prop_filter("no self link", |(a, b)| a != b);
        (
            Just(n),
            prop::collection::btree_set(link, 0..=8).prop_map(|s| s.into_iter().collect()),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn join_path_is_minimal((n, links) in graph(), from in 0usize..6, to in 0usize..6) {
        let (from, to) = (from % n, to % n);
        let catalog = graph_catalog(n, &links);
        let (a, b) = (format!("t{from}"), format!("t{to}"));
        match (catalog.join_path(&a, &b), exhaustive_shortest(&links, from, to)) {
            (Ok(path), Some(len)) => {
                prop_assert_eq!(path.len(), len);
                let mut at = a.clone();
                for e in &path {
                    prop_assert!(catalog.fk_edges().contains(e));
                    at = if e.from.table == at {
                        e.to.table.clone()
                    } else {
                        prop_assert_eq!(&e.to.table, &at);
                        e.from.table.clone()
                    };
                }
                prop_assert_eq!(at, b);
            }
            (Err(SchemaError::NoJoinPath { .. }), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn spider_round_trip(
        (n, links) in graph(),
        drawn in prop::collection::vec(0usize..4, 7 * 6),
        label in "[a-z]{1,6}( [a-z]{1,6}){0,2}",
    ) {
        let kinds = [ValueKind::Numeric, ValueKind::Text, ValueKind::Datetime, ValueKind::Boolean];
        let mut catalog = graph_catalog(n, &links);
        let tables: Vec<TableDef> = catalog
            .tables()
            .iter()
            .enumerate()
            .map(|(i, t)| TableDef {
                columns: t
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(j, c)| ColumnDef {
                        value_kind: if c.name == "id" {
                            ValueKind::Numeric
                        } else {
                            kinds[drawn[i * 7 + j]]
                        },
                        ..c.clone()
                    })
                    .collect(),
                ..t.clone()
            })
            .collect();
        catalog = SchemaCatalog::new(label.clone(), tables, catalog.fk_edges().to_vec()).unwrap();
        let db_id = label.replace(' ', "_");
        let entry = catalog.to_spider_entry(&db_id);
        let back = SchemaCatalog::from_spider_entry(&entry).unwrap();
        prop_assert_eq!(back, catalog);
    }
}

#[test]
fn direct_and_two_hop_paths_on_fixture() {
    let catalog = load_sqlite_schema(fixture("toy.sqlite")).unwrap();
    let direct = catalog.join_path("order_items", "products").unwrap();
    assert_eq!(
        direct,
        vec![FkEdge {
            from: ColumnRef::new("order_items", "product_id"),
            to: ColumnRef::new("products", "product_id"),
        }]
    );
    let two = catalog.join_path("products", "customer_orders").unwrap();
    assert_eq!(two.len(), 2);
    assert_eq!(
        catalog.join_path("customers", "order_items").unwrap().len(),
        2
    );
    assert!(catalog.join_path("orders", "products").is_err());
    assert!(catalog
        .join_path("products", "products")
        .unwrap()
        .is_empty());
}

#[test]
fn disconnected_tables_have_no_path() {
    let catalog = graph_catalog(3, &[(0, 1)]);
    assert!(matches!(
        catalog.join_path("t0", "t2"),
        Err(SchemaError::NoJoinPath { .. })
    ));
}

#[test]
fn sqlite_fixture_schema() {
    let catalog = load_sqlite_schema(fixture("toy.sqlite")).unwrap();
    assert_eq!(catalog.tables().len(), 7);
    assert_eq!(catalog.column_count(), 32);
    assert_eq!(catalog.fk_edges().len(), 6);
    let kind = |t: &str, c: &str| catalog.value_kind(&ColumnRef::new(t, c)).unwrap();
    assert_eq!(kind("order_items", "order_quantity"), ValueKind::Numeric);
    assert_eq!(kind("customer_orders", "order_status"), ValueKind::Text);
    assert_eq!(kind("customer_orders", "order_date"), ValueKind::Datetime);
    assert_eq!(
        catalog.display_text(&ColumnRef::new("order_items", "order_quantity")),
        Some("order quantity")
    );
    assert!(catalog.is_key_column(&ColumnRef::new("order_items", "order_id")));
    assert!(catalog.is_key_column(&ColumnRef::new("products", "product_id")));
    assert!(!catalog.is_key_column(&ColumnRef::new("products", "product_details")));
}

#[test]
fn spider_fixture_matches_sqlite_shape() {
    let spider = load_spider_schema(fixture("customers_and_orders.json")).unwrap();
    let sqlite = load_sqlite_schema(fixture("toy.sqlite")).unwrap();
    assert_eq!(spider.column_count(), 32);
    let names = |c: &SchemaCatalog| -> BTreeSet<ColumnRef> { c.columns().collect() };
    assert_eq!(names(&spider), names(&sqlite));
    let edges = |c: &SchemaCatalog| -> BTreeSet<FkEdge> { c.fk_edges().iter().cloned().collect() };
    assert_eq!(edges(&spider), edges(&sqlite));
    let all = load_spider_schemas(fixture("tables.json")).unwrap();
    assert_eq!(all.len(), 6);
    assert_eq!(all["concert_singer"].domain_label, "concert singer");
}

#[test]
fn loader_errors() {
    assert!(matches!(
        load_sqlite_schema(fixture("missing.sqlite")),
        Err(SchemaError::Io { .. })
    ));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert!(matches!(
        load_spider_schema(&bad),
        Err(SchemaError::MalformedFile(_))
    ));
    std::fs::write(&bad, "[]").unwrap();
    assert!(matches!(
        load_spider_schema(&bad),
        Err(SchemaError::EmptyCatalog)
    ));
    let dangling = SchemaCatalog::new(
        "x",
        vec![TableDef {
            name: "a".into(),
            display_text: String::new(),
            columns: vec![column("id", ValueKind::Numeric)],
            primary_key: None,
        }],
        vec![FkEdge {
            from: ColumnRef::new("a", "id"),
            to: ColumnRef::new("b", "id"),
        }],
    );
    assert!(matches!(dangling, Err(SchemaError::DanglingForeignKey(_))));
}
