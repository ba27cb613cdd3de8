use super::{QueryIR, SelectItem};

fn item(s: &SelectItem) -> String {
    match s.aggregate {
        Some(agg) => format!("{}({})", agg.keyword(), s.column),
        None => s.column.to_string(),
    }
}

/// Canonical SQL text for a valid query: fully qualified columns, one
/// `JOIN ... ON` per join edge in edge order, GROUP BY in grouping order.
pub fn synthesize_sql(ir: &QueryIR) -> String {
    let mut sql = String::from("SELECT ");
    sql.push_str(
        &ir.selections
            .iter()
            .map(item)
            .collect::<Vec<_>>()
            .join(", "),
    );
    sql.push_str(" FROM ");
    sql.push_str(ir.base_table());
    for edge in &ir.join_edges {
        sql.push_str(&format!(
            " JOIN {} ON {} = {}",
            edge.right.table, edge.left, edge.right
        ));
    }
    if !ir.grouping.is_empty() {
        sql.push_str(" GROUP BY ");
        sql.push_str(
            &ir.grouping
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        );
    }
    sql
}
