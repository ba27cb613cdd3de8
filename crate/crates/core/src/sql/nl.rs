use super::QueryIR;
use crate::schema::{humanize, ColumnRef, SchemaCatalog};

fn text(catalog: &SchemaCatalog, c: &ColumnRef) -> String {
    catalog
        .display_text(c)
        .map(str::to_owned)
        .unwrap_or_else(|| humanize(&c.column))
}

fn pluralize_word(word: &str) -> String {
    let lower = word.to_lowercase();
    if lower.ends_with('s') {
        return word.to_string();
    }
    if ["x", "z", "ch", "sh"].iter().any(|s| lower.ends_with(s)) {
        return format!("{word}es");
    }
    let mut chars = lower.chars().rev();
    if let (Some('y'), Some(prev)) = (chars.next(), chars.next()) {
        if !"aeiou".contains(prev) {
            return format!("{}ies", &word[..word.len() - 1]);
        }
    }
    format!("{word}s")
}

/// Pluralizes the last word of a phrase.
fn pluralize(phrase: &str) -> String {
    match phrase.rsplit_once(' ') {
        Some((head, last)) => format!("{head} {}", pluralize_word(last)),
        None => pluralize_word(phrase),
    }
}

fn join_list(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// English question for a query.
///
/// Aggregates read as "total", "average", ...; grouping columns become
/// "for each ..."; a query without aggregates asks "What are the ...?" with
/// pluralized column phrases.
pub fn render_nl(ir: &QueryIR, catalog: &SchemaCatalog) -> String {
    let aggregated = ir.has_aggregate();
    let mut items = Vec::new();
    for s in &ir.selections {
        let t = text(catalog, &s.column);
        match s.aggregate {
            Some(agg) => items.push(format!("{} {t}", agg.phrase())),
            None if ir.grouping.contains(&s.column) => {}
            None if aggregated => items.push(t),
            None => items.push(pluralize(&t)),
        }
    }
    let groups: Vec<String> = ir.grouping.iter().map(|g| text(catalog, g)).collect();
    if items.is_empty() {
        let plural: Vec<String> = groups.iter().map(|g| pluralize(g)).collect();
        return format!("What are the different {}?", join_list(&plural));
    }
    let verb = if aggregated { "is" } else { "are" };
    let mut out = format!("What {verb} the {}", join_list(&items));
    if !groups.is_empty() {
        out.push_str(" for each ");
        out.push_str(&join_list(&groups));
    }
    out.push('?');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plural_rules() {
        assert_eq!(pluralize("customer name"), "customer names");
        assert_eq!(pluralize("order id"), "order ids");
        assert_eq!(pluralize("product details"), "product details");
        assert_eq!(pluralize("city"), "cities");
        assert_eq!(pluralize("day"), "days");
        assert_eq!(pluralize("zip box"), "zip boxes");
    }

    #[test]
    fn list_join() {
        let v = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(join_list(&v(&["a"])), "a");
        assert_eq!(join_list(&v(&["a", "b"])), "a and b");
        assert_eq!(join_list(&v(&["a", "b", "c"])), "a, b and c");
    }
}
