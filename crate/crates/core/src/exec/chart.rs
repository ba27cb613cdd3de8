use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value as Json};

use super::{FieldType, ResultTable, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Bar,
    Line,
    Scatter,
    Heatmap,
    Histogram,
    ValueCard,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Color,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    /// Result column, or `None` for a record count.
    pub field: Option<String>,
    pub field_type: FieldType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bin: bool,
}

impl Encoding {
    fn field(name: &str, field_type: FieldType) -> Self {
        Encoding {
            field: Some(name.to_string()),
            field_type,
            bin: false,
        }
    }

    fn count() -> Self {
        Encoding {
            field: None,
            field_type: FieldType::Q,
            bin: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub mark: Mark,
    pub encodings: BTreeMap<Channel, Encoding>,
    /// Row objects keyed by column name.
    pub data: Vec<Map<String, Json>>,
}

fn to_json(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Integer(i) => json!(i),
        Value::Real(r) => json!(r),
        Value::Text(t) => json!(t),
    }
}

/// Picks a mark from the field-type signature of `table`.
pub fn recommend_chart(table: &ResultTable) -> ChartSpec {
    use FieldType::{N, Q, T};
    let types = table.field_types();
    let name = |i: usize| table.columns[i].name.as_str();
    let find = |t: FieldType, nth: usize| {
        types
            .iter()
            .enumerate()
            .filter(|(_, x)| **x == t)
            .nth(nth)
            .map(|(i, _)| i)
    };
    let count = |t: FieldType| types.iter().filter(|x| **x == t).count();
    let mut enc = BTreeMap::new();
    let mark = if table.rows.len() == 1 && types.len() == 1 {
        Mark::ValueCard
    } else {
        match (types.len(), count(Q), count(N), count(T)) {
            (1, 1, _, _) => {
                let q = name(0);
                enc.insert(
                    Channel::X,
                    Encoding {
                        bin: true,
                        ..Encoding::field(q, Q)
                    },
                );
                enc.insert(Channel::Y, Encoding::count());
                Mark::Histogram
            }
            (1, _, 1, _) => {
                enc.insert(Channel::X, Encoding::field(name(0), N));
                enc.insert(Channel::Y, Encoding::count());
                Mark::Bar
            }
            (2, 1, 1, _) => {
                enc.insert(Channel::X, Encoding::field(name(find(N, 0).unwrap()), N));
                enc.insert(Channel::Y, Encoding::field(name(find(Q, 0).unwrap()), Q));
                Mark::Bar
            }
            (2, 1, _, 1) => {
                enc.insert(Channel::X, Encoding::field(name(find(T, 0).unwrap()), T));
                enc.insert(Channel::Y, Encoding::field(name(find(Q, 0).unwrap()), Q));
                Mark::Line
            }
            (2, 2, _, _) => {
                enc.insert(Channel::X, Encoding::field(name(0), Q));
                enc.insert(Channel::Y, Encoding::field(name(1), Q));
                Mark::Scatter
            }
            (2, _, 2, _) => {
                enc.insert(Channel::X, Encoding::field(name(0), N));
                enc.insert(Channel::Y, Encoding::field(name(1), N));
                enc.insert(Channel::Color, Encoding::count());
                Mark::Heatmap
            }
            (3, 1, 2, _) => {
                enc.insert(Channel::X, Encoding::field(name(find(N, 0).unwrap()), N));
                enc.insert(Channel::Y, Encoding::field(name(find(Q, 0).unwrap()), Q));
                enc.insert(
                    Channel::Color,
                    Encoding::field(name(find(N, 1).unwrap()), N),
                );
                Mark::Bar
            }
            _ => Mark::Table,
        }
    };
    let data = table
        .rows
        .iter()
        .map(|row| {
            table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.name.clone(), to_json(v)))
                .collect()
        })
        .collect();
    ChartSpec {
        mark,
        encodings: enc,
        data,
    }
}

fn vl_type(t: FieldType) -> &'static str {
    match t {
        FieldType::Q => "quantitative",
        FieldType::N => "nominal",
        FieldType::T => "temporal",
    }
}

fn vl_encoding(e: &Encoding) -> Json {
    let mut m = Map::new();
    match &e.field {
        Some(f) => {
            m.insert("field".into(), json!(f));
        }
        None => {
            m.insert("aggregate".into(), json!("count"));
        }
    }
    m.insert("type".into(), json!(vl_type(e.field_type)));
    if e.bin {
        m.insert("bin".into(), json!(true));
    }
    Json::Object(m)
}

impl ChartSpec {
    /// A vega-lite v5 document; the chosen mark is kept under `usermeta`.
    pub fn to_vega_lite(&self) -> Json {
        let mut doc = Map::new();
        doc.insert(
            "$schema".into(),
            json!("https://vega.github.io/schema/vega-lite/v5.json"),
        );
        doc.insert("data".into(), json!({ "values": self.data }));
        doc.insert("usermeta".into(), json!({ "mark": self.mark }));
        let mut encoding = Map::new();
        for (ch, e) in &self.encodings {
            let key = match ch {
                Channel::X => "x",
                Channel::Y => "y",
                Channel::Color => "color",
            };
            encoding.insert(key.into(), vl_encoding(e));
        }
        let mark = match self.mark {
            Mark::Bar | Mark::Histogram => "bar",
            Mark::Line => "line",
            Mark::Scatter => "point",
            Mark::Heatmap => "rect",
            Mark::ValueCard | Mark::Table => "text",
        };
        doc.insert("mark".into(), json!(mark));
        match self.mark {
            Mark::ValueCard => {
                let field = self
                    .data
                    .first()
                    .and_then(|r| r.keys().next().cloned())
                    .unwrap_or_default();
                encoding.insert("text".into(), json!({ "field": field, "type": "nominal" }));
                doc.insert("mark".into(), json!({ "type": "text", "fontSize": 32 }));
            }
            Mark::Table => {
                let fields: Vec<String> = self
                    .data
                    .first()
                    .map(|r| r.keys().cloned().collect())
                    .unwrap_or_default();
                doc.insert(
                    "transform".into(),
                    json!([
                        { "window": [{ "op": "row_number", "as": "row" }] },
                        { "fold": fields, "as": ["column", "value"] }
                    ]),
                );
                encoding.insert(
                    "x".into(),
                    json!({ "field": "column", "type": "nominal", "axis": { "orient": "top" } }),
                );
                encoding.insert(
                    "y".into(),
                    json!({ "field": "row", "type": "ordinal", "axis": null }),
                );
                encoding.insert(
                    "text".into(),
                    json!({ "field": "value", "type": "nominal" }),
                );
            }
            _ => {}
        }
        doc.insert("encoding".into(), Json::Object(encoding));
        Json::Object(doc)
    }
}
