mod common;

use std::collections::BTreeMap;

use common::{col, fixture, query, rule_cases, text, toy};
use proptest::prelude::*;
use qrec_core::exec::{
    classify_fields, execute, recommend_chart, Channel, ExecError, FieldType, Mark, ResultTable,
    Value,
};
use qrec_core::recommender::assemble_query;
use qrec_core::{parse_sql, synthesize_sql, AggregateFn, SchemaCatalog};
use rusqlite::{Connection, OpenFlags};

fn open() -> Connection {
    Connection::open_with_flags(fixture("toy.sqlite"), OpenFlags::SQLITE_OPEN_READ_ONLY).unwrap()
}

/// Writable copy of the fixture database.
fn scratch_copy() -> (tempfile::TempDir, Connection) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.sqlite");
    std::fs::copy(fixture("toy.sqlite"), &path).unwrap();
    let conn = Connection::open(&path).unwrap();
    (dir, conn)
}

fn sorted_rows(t: &ResultTable) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect())
        .collect();
    rows.sort();
    rows
}

#[test]
fn total_quantity_per_product() {
    let catalog = toy();
    let ir = parse_sql(
        "SELECT products.product_details, SUM(order_items.order_quantity) FROM order_items \
         JOIN products ON order_items.product_id = products.product_id \
         GROUP BY products.product_details",
        &catalog,
    )
    .unwrap();
    let table = execute(&ir, &open()).unwrap();
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, vec!["product_details", "sum_order_quantity"]);
    assert_eq!(table.field_types(), vec![FieldType::N, FieldType::Q]);
    // hand totals over the ten order_items rows
    let want: BTreeMap<&str, i64> = [
        ("Americano", 18),
        ("Dove Chocolate", 29),
        ("Espresso", 7),
        ("Latte", 3),
    ]
    .into();
    let got: BTreeMap<&str, i64> = table
        .rows
        .iter()
        .map(|r| match (&r[0], &r[1]) {
            (Value::Text(p), Value::Integer(n)) => (p.as_str(), *n),
            other => panic!("{other:?}"),
        })
        .collect();
    assert_eq!(got, want);
    assert_eq!(recommend_chart(&table).mark, Mark::Bar);
}

#[test]
fn averages_and_status_totals() {
    let catalog = toy();
    let avg = parse_sql(
        "SELECT products.product_details, AVG(order_items.order_quantity) FROM order_items \
         JOIN products ON order_items.product_id = products.product_id GROUP BY products.product_details",
        &catalog,
    )
    .unwrap();
    let rows = sorted_rows(&execute(&avg, &open()).unwrap());
    assert_eq!(
        rows,
        vec![
            vec!["Americano".to_string(), "9".into()],
            vec!["Dove Chocolate".into(), "7.25".into()],
            vec!["Espresso".into(), "3.5".into()],
            vec!["Latte".into(), "1.5".into()],
        ]
    );
    let status = assemble_query(
        &[(col("order_items.order_quantity"), Some(AggregateFn::Sum))],
        &[col("customer_orders.order_status")],
        &catalog,
    )
    .unwrap();
    let table = execute(&status, &open()).unwrap();
    let names: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, vec!["sum_order_quantity", "order_status"]);
    assert_eq!(
        sorted_rows(&table),
        vec![
            vec!["25".to_string(), "Delivered".into()],
            vec!["32".into(), "Cancelled".into()]
        ]
    );
}

#[test]
fn empty_table_gives_no_rows() {
    let catalog = toy();
    let (_dir, conn) = scratch_copy();
    conn.execute("DELETE FROM order_items", []).unwrap();
    let ir = parse_sql("SELECT order_quantity FROM order_items", &catalog).unwrap();
    let table = execute(&ir, &conn).unwrap();
    assert!(table.rows.is_empty());
    assert_eq!(table.columns.len(), 1);
    assert_eq!(table.field_types(), vec![FieldType::N]);
    assert_eq!(recommend_chart(&table).mark, Mark::Bar);
}

#[test]
fn dropped_column_is_schema_drift() {
    let catalog = toy();
    let (_dir, conn) = scratch_copy();
    conn.execute("ALTER TABLE order_items DROP COLUMN order_quantity", [])
        .unwrap();
    let ir = parse_sql("SELECT order_quantity FROM order_items", &catalog).unwrap();
    assert!(matches!(
        execute(&ir, &conn),
        Err(ExecError::SchemaDrift(_))
    ));
    conn.execute_batch("PRAGMA foreign_keys = OFF; DROP TABLE products;")
        .unwrap();
    let ir = parse_sql("SELECT product_details FROM products", &catalog).unwrap();
    assert!(matches!(
        execute(&ir, &conn),
        Err(ExecError::SchemaDrift(_))
    ));
}

fn catalog() -> &'static SchemaCatalog {
    Box::leak(Box::new(toy()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn execution_agrees_with_reparsed_text(ir in query(catalog())) {
        let conn = open();
        let direct = execute(&ir, &conn).unwrap();
        let reparsed = parse_sql(&synthesize_sql(&ir), catalog()).unwrap();
        let again = execute(&reparsed, &conn).unwrap();
        prop_assert_eq!(&direct.columns, &again.columns);
        prop_assert_eq!(sorted_rows(&direct), sorted_rows(&again));
        for row in &direct.rows {
            prop_assert_eq!(row.len(), direct.columns.len());
        }
        let spec = recommend_chart(&direct);
        prop_assert_eq!(spec.mark, recommend_chart(&direct).mark);
        prop_assert_eq!(spec.data.len(), direct.rows.len());
    }
}

#[test]
fn every_chart_rule() {
    for (name, t, mark) in rule_cases() {
        let spec = recommend_chart(&t);
        assert_eq!(spec.mark, mark, "{name}");
        if !matches!(mark, Mark::Table | Mark::ValueCard) {
            assert!(spec.encodings.contains_key(&Channel::X), "{name}");
            assert!(spec.encodings.contains_key(&Channel::Y), "{name}");
        }
    }
    let cases = rule_cases();
    let enc = |i: usize| recommend_chart(&cases[i].1).encodings;
    assert_eq!(
        enc(1)[&Channel::X].field.as_deref(),
        Some("product_details")
    );
    assert_eq!(enc(1)[&Channel::Y].field.as_deref(), Some("total_quantity"));
    assert_eq!(enc(2)[&Channel::X].field_type, FieldType::T);
    assert!(enc(5)[&Channel::X].bin);
    assert_eq!(enc(4)[&Channel::Color].field, None);
    assert_eq!(enc(7)[&Channel::Color].field.as_deref(), Some("product"));
}

#[test]
fn vega_lite_documents_are_well_formed() {
    let allowed_marks = ["bar", "line", "point", "rect", "text"];
    let allowed_types = ["quantitative", "nominal", "temporal", "ordinal"];
    for (name, t, mark) in rule_cases() {
        let doc = recommend_chart(&t).to_vega_lite();
        assert_eq!(
            doc["$schema"],
            "https://vega.github.io/schema/vega-lite/v5.json"
        );
        let vl_mark = doc["mark"]
            .as_str()
            .or_else(|| doc["mark"]["type"].as_str())
            .unwrap();
        assert!(allowed_marks.contains(&vl_mark), "{name}");
        assert_eq!(doc["usermeta"]["mark"], serde_json::to_value(mark).unwrap());
        let values = doc["data"]["values"].as_array().unwrap();
        assert_eq!(values.len(), t.rows.len());
        let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
        let derived = ["column", "row", "value"];
        for (channel, e) in doc["encoding"].as_object().unwrap() {
            assert!(
                allowed_types.contains(&e["type"].as_str().unwrap()),
                "{name} {channel}"
            );
            match e.get("field").and_then(|f| f.as_str()) {
                Some(f) => assert!(names.contains(&f) || derived.contains(&f), "{name} {f}"),
                None => assert_eq!(e["aggregate"], "count"),
            }
        }
    }
    let doc = recommend_chart(&rule_cases()[5].1).to_vega_lite();
    assert_eq!(doc["mark"], "bar");
    assert_eq!(doc["encoding"]["x"]["bin"], true);
}

proptest! {
    #[test]
    fn equal_signatures_give_equal_marks(
        kinds in prop::collection::vec(0usize..3, 1..6),
        rows_a in 2usize..6,
        rows_b in 2usize..6,
    ) {
        let value = |k: usize, r: usize| match k {
            0 => Value::Integer(r as i64),
            1 => text(&format!("v{r}")),
            _ => text(&format!("2018-03-{:02}", r + 1)),
        };
        let make = |rows: usize| {
            let names: Vec<String> = (0..kinds.len()).map(|i| format!("c{i}")).collect();
            let data = (0..rows).map(|r| kinds.iter().map(|&k| value(k, r)).collect()).collect();
            classify_fields(names, data)
        };
        let (a, b) = (make(rows_a), make(rows_b));
        prop_assert_eq!(a.field_types(), b.field_types());
        prop_assert_eq!(recommend_chart(&a).mark, recommend_chart(&b).mark);
    }
}
