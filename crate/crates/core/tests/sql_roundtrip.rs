use std::path::PathBuf;

use proptest::prelude::*;
use qrec_core::recommender::assemble_query;
use qrec_core::schema::load_sqlite_schema;
use qrec_core::sql::{action_columns, SqlError};
use qrec_core::{
    parse_sql, render_nl, synthesize_sql, ActionKind, AggregateFn, ColumnRef, QueryIR,
    SchemaCatalog,
};

fn toy() -> SchemaCatalog {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy.sqlite");
    load_sqlite_schema(path).unwrap()
}

const AGGREGATES: [AggregateFn; 5] = [
    AggregateFn::Min,
    AggregateFn::Max,
    AggregateFn::Count,
    AggregateFn::Sum,
    AggregateFn::Avg,
];

/// Random well-formed query over the toy catalog: picked columns, some of
/// them aggregated, the rest grouped, plus optional extra grouping columns.
fn query(catalog: &SchemaCatalog) -> impl Strategy<Value = QueryIR> + '_ {
    let columns: Vec<ColumnRef> = catalog.columns().collect();
    let n = columns.len();
    (
        prop::collection::btree_set(0..n, 1..=4),
        prop::collection::vec(prop::option::weighted(0.4, 0usize..5), 4),
        prop::collection::btree_set(0..n, 0..=1),
    )
        .prop_map(move |(picked, aggs, extra)| {
            let selections: Vec<(ColumnRef, Option<AggregateFn>)> = picked
                .iter()
                .zip(&aggs)
                .map(|(&i, a)| (columns[i].clone(), a.map(|a| AGGREGATES[a])))
                .collect();
            let any_aggregate = selections.iter().any(|s| s.1.is_some());
            let mut grouping: Vec<ColumnRef> = Vec::new();
            if any_aggregate {
                grouping.extend(
                    selections
                        .iter()
                        .filter(|s| s.1.is_none())
                        .map(|s| s.0.clone()),
                );
                for &i in &extra {
                    if !grouping.contains(&columns[i]) {
                        grouping.push(columns[i].clone());
                    }
                }
            }
            (selections, grouping)
        })
        .prop_filter_map("connected", move |(s, g)| {
            assemble_query(&s, &g, catalog).ok()
        })
}

#[test]
fn synthesized_text_round_trips() {
    let catalog = toy();
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(1500));
    runner
        .run(&query(&catalog), |ir| {
            let sql = synthesize_sql(&ir);
            let back = parse_sql(&sql, &catalog)
                .map_err(|e| TestCaseError::fail(format!("{sql}: {e}")))?;
            prop_assert_eq!(&back, &ir, "{}", sql);
            prop_assert!(!back.lossy);
            prop_assert_eq!(synthesize_sql(&back), sql);
            prop_assert!(!render_nl(&ir, &catalog).is_empty());
            Ok(())
        })
        .unwrap();
}

#[test]
fn parser_accepts_aliases_and_case() {
    let catalog = toy();
    let a = parse_sql(
        "select P.Product_Details, Sum(T.order_quantity) FROM Order_Items AS T join products p \
         ON T.product_id = P.product_id GROUP BY p.product_details;",
        &catalog,
    )
    .unwrap();
    let b = parse_sql(
        "SELECT products.product_details, SUM(order_items.order_quantity) FROM order_items \
         JOIN products ON products.product_id = order_items.product_id \
         GROUP BY products.product_details",
        &catalog,
    )
    .unwrap();
    assert_eq!(a, b);
    assert!(!a.lossy);
    assert_eq!(
        action_columns(&a, ActionKind::Aggregation)
            .into_iter()
            .collect::<Vec<_>>(),
        vec![ColumnRef::new("order_items", "order_quantity")]
    );
    assert_eq!(
        render_nl(&a, &catalog),
        "What is the total order quantity for each product details?"
    );
}

#[test]
fn dropped_clauses_mark_lossy() {
    let catalog = toy();
    let plain = "SELECT customer_orders.order_status FROM customer_orders";
    let grouped = "SELECT customer_orders.order_status FROM customer_orders GROUP BY customer_orders.order_status";
    for (sql, want) in [
        ("SELECT order_status FROM customer_orders WHERE order_id > 3", plain),
        ("SELECT order_status FROM customer_orders ORDER BY order_date LIMIT 2", plain),
        ("SELECT DISTINCT order_status FROM customer_orders", plain),
        (
            "SELECT order_status, COUNT(*) FROM customer_orders GROUP BY order_status HAVING COUNT(*) > 1",
            grouped,
        ),
    ] {
        let ir = parse_sql(sql, &catalog).unwrap();
        assert!(ir.lossy, "{sql}");
        assert_eq!(synthesize_sql(&ir), want, "{sql}");
    }
    assert!(parse_sql("SELECT COUNT(*) FROM customer_orders", &catalog).is_err());
}

#[test]
fn parse_errors_carry_positions() {
    let catalog = toy();
    let err = parse_sql("SELECT order_status FROM", &catalog).unwrap_err();
    assert!(matches!(err, SqlError::Syntax { .. }));
    assert_eq!(err.position(), Some(24));
    assert!(matches!(
        parse_sql("SELECT x FROM customer_orders", &catalog),
        Err(SqlError::UnknownColumn(_))
    ));
    assert!(matches!(
        parse_sql("SELECT order_status FROM orders", &catalog),
        Err(SqlError::UnknownTable(_))
    ));
    assert!(matches!(
        parse_sql("SELECT customer_id FROM customers JOIN customer_orders ON customers.customer_id = customer_orders.customer_id", &catalog),
        Err(SqlError::AmbiguousColumn(_))
    ));
    assert!(parse_sql("SELECT order_status FROM customer_orders 'x", &catalog).is_err());
    assert!(parse_sql("", &catalog).is_err());
}

#[test]
fn join_order_is_canonical() {
    let catalog = toy();
    let a = parse_sql(
        "SELECT products.product_details, customer_orders.order_status FROM products \
         JOIN order_items ON order_items.product_id = products.product_id \
         JOIN customer_orders ON customer_orders.order_id = order_items.order_id",
        &catalog,
    )
    .unwrap();
    let b = parse_sql(
        "SELECT products.product_details, customer_orders.order_status FROM customer_orders \
         JOIN order_items ON customer_orders.order_id = order_items.order_id \
         JOIN products ON order_items.product_id = products.product_id",
        &catalog,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_eq!(synthesize_sql(&a), synthesize_sql(&b));
}
