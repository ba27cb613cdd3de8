use std::collections::HashMap;

use super::lexer::{tokenize, Tok, Token};
use super::{AggregateFn, JoinEdge, QueryIR, SelectItem, SqlError};
use crate::schema::{ColumnRef, SchemaCatalog};

const RESERVED: &[&str] = &[
    "select",
    "from",
    "where",
    "group",
    "order",
    "having",
    "limit",
    "join",
    "inner",
    "left",
    "right",
    "full",
    "outer",
    "cross",
    "natural",
    "on",
    "and",
    "or",
    "not",
    "union",
    "intersect",
    "except",
    "as",
    "by",
    "asc",
    "desc",
    "distinct",
    "all",
];

/// Clauses that end a dropped WHERE and may be followed by GROUP BY.
const WHERE_STOP: &[&str] = &[
    "group",
    "having",
    "order",
    "limit",
    "union",
    "intersect",
    "except",
];

/// Clauses after which everything is dropped.
const TAIL: &[&str] = &["having", "order", "limit", "union", "intersect", "except"];

#[derive(Debug, Clone)]
struct RawCol {
    qualifier: Option<String>,
    name: String,
}

#[derive(Debug)]
struct RawTable {
    name: String,
    alias: Option<String>,
    pos: usize,
}

#[derive(Debug)]
struct RawJoin {
    table: RawTable,
    conditions: Vec<(RawCol, RawCol)>,
}

struct Parser<'a> {
    toks: &'a [Token],
    i: usize,
    end: usize,
    lossy: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.i)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.keyword(kw))
    }

    fn at_any_kw(&self, kws: &[&str]) -> bool {
        kws.iter().any(|k| self.at_kw(k))
    }

    fn at_sym(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.sym(s))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.at_kw(kw);
        if hit {
            self.i += 1;
        }
        hit
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.at_sym(s);
        if hit {
            self.i += 1;
        }
        hit
    }

    fn syntax(&self, message: impl Into<String>) -> SqlError {
        SqlError::Syntax {
            position: self.pos(),
            message: message.into(),
        }
    }

    fn unsupported(&self, message: impl Into<String>) -> SqlError {
        SqlError::Unsupported {
            position: self.pos(),
            message: message.into(),
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected {}", kw.to_uppercase())))
        }
    }

    /// Identifier that is not a reserved word (quoted identifiers always qualify).
    fn ident(&mut self) -> Result<(String, usize), SqlError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident { text, quoted },
                pos,
            }) if *quoted || !RESERVED.contains(&text.to_lowercase().as_str()) => {
                self.i += 1;
                Ok((text.clone(), *pos))
            }
            Some(Token {
                tok: Tok::Str(text),
                pos,
            }) => {
                // "double quoted" names; single-quoted strings arrive here too
                // and fail later at resolution
                self.i += 1;
                Ok((text.clone(), *pos))
            }
            _ => Err(self.syntax("expected identifier")),
        }
    }

    fn optional_alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("as") {
            return Ok(Some(self.ident()?.0));
        }
        match self.peek() {
            Some(Token {
                tok: Tok::Ident { text, quoted },
                ..
            }) if *quoted || !RESERVED.contains(&text.to_lowercase().as_str()) => {
                self.i += 1;
                Ok(Some(text.clone()))
            }
            _ => Ok(None),
        }
    }

    /// `name` or `qualifier.name`; `None` for `*` / `t.*`.
    fn column(&mut self) -> Result<Option<RawCol>, SqlError> {
        if self.eat_sym("*") {
            return Ok(None);
        }
        let (first, _) = self.ident()?;
        if self.eat_sym(".") {
            if self.eat_sym("*") {
                return Ok(None);
            }
            let (name, _) = self.ident()?;
            return Ok(Some(RawCol {
                qualifier: Some(first),
                name,
            }));
        }
        Ok(Some(RawCol {
            qualifier: None,
            name: first,
        }))
    }

    fn select_item(&mut self) -> Result<Option<(RawCol, Option<AggregateFn>)>, SqlError> {
        let is_call = matches!(
            self.peek(),
            Some(Token {
                tok: Tok::Ident { quoted: false, .. },
                ..
            })
        ) && self.toks.get(self.i + 1).is_some_and(|t| t.sym("("));
        let item = if is_call {
            let Some(Token {
                tok: Tok::Ident { text, .. },
                ..
            }) = self.peek()
            else {
                unreachable!()
            };
            let Some(agg) = AggregateFn::from_keyword(text) else {
                return Err(self.unsupported(format!("function `{text}`")));
            };
            self.i += 2;
            if self.eat_kw("distinct") {
                self.lossy = true;
            }
            let col = self.column()?;
            if !self.eat_sym(")") {
                return Err(self.unsupported("expression inside aggregate"));
            }
            col.map(|c| (c, Some(agg)))
        } else {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Number(_)) | Some(Tok::Sym("(")) | Some(Tok::Sym("-")) => {
                    return Err(self.unsupported("expression in select list"))
                }
                _ => {}
            }
            self.column()?.map(|c| (c, None))
        };
        self.optional_alias()?;
        if item.is_none() {
            // `*` carries no column signal
            self.lossy = true;
        }
        if !(self.at_sym(",") || self.at_kw("from")) {
            return Err(match self.peek().map(|t| &t.tok) {
                Some(Tok::Sym(_)) => self.unsupported("expression in select list"),
                _ => self.syntax("expected `,` or FROM"),
            });
        }
        Ok(item)
    }

    fn table_ref(&mut self) -> Result<RawTable, SqlError> {
        if self.at_sym("(") {
            return Err(self.unsupported("subquery in FROM"));
        }
        let (name, pos) = self.ident()?;
        let alias = self.optional_alias()?;
        Ok(RawTable { name, alias, pos })
    }

    fn condition(&mut self) -> Result<(RawCol, RawCol), SqlError> {
        let l = self
            .column()?
            .ok_or_else(|| self.syntax("expected column"))?;
        if !self.eat_sym("=") {
            return Err(self.unsupported("non-equality join condition"));
        }
        let r = self
            .column()?
            .ok_or_else(|| self.syntax("expected column"))?;
        Ok((l, r))
    }

    fn table_list(&mut self) -> Result<(RawTable, Vec<RawJoin>), SqlError> {
        let first = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.eat_sym(",") {
                joins.push(RawJoin {
                    table: self.table_ref()?,
                    conditions: Vec::new(),
                });
                continue;
            }
            if self.at_any_kw(&["left", "right", "full", "natural", "outer"]) {
                return Err(self.unsupported("only inner joins are supported"));
            }
            let cross = self.eat_kw("cross");
            let inner = !cross && self.eat_kw("inner");
            if !self.eat_kw("join") {
                if cross || inner {
                    return Err(self.syntax("expected JOIN"));
                }
                break;
            }
            let table = self.table_ref()?;
            let mut conditions = Vec::new();
            if self.eat_kw("on") {
                loop {
                    let paren = self.eat_sym("(");
                    conditions.push(self.condition()?);
                    if paren && !self.eat_sym(")") {
                        return Err(self.syntax("expected `)`"));
                    }
                    if self.at_kw("or") {
                        return Err(self.unsupported("OR in join condition"));
                    }
                    if !self.eat_kw("and") {
                        break;
                    }
                }
            }
            joins.push(RawJoin { table, conditions });
        }
        Ok((first, joins))
    }

    fn skip_where(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if t.sym("(") {
                depth += 1;
            } else if t.sym(")") {
                depth = depth.saturating_sub(1);
            } else if depth == 0 && (t.sym(";") || WHERE_STOP.iter().any(|k| t.keyword(k))) {
                return;
            }
            self.i += 1;
        }
    }
}

struct Scope<'c> {
    catalog: &'c SchemaCatalog,
    /// FROM tables in order, canonical names
    tables: Vec<String>,
    aliases: HashMap<String, String>,
}

impl<'c> Scope<'c> {
    fn add(&mut self, t: &RawTable) -> Result<String, SqlError> {
        let def = self
            .catalog
            .table(&t.name)
            .ok_or_else(|| SqlError::UnknownTable(t.name.clone()))?;
        if self.tables.contains(&def.name) {
            return Err(SqlError::Unsupported {
                position: t.pos,
                message: format!("table `{}` joined twice", def.name),
            });
        }
        self.tables.push(def.name.clone());
        self.aliases.insert(def.name.clone(), def.name.clone());
        if let Some(a) = &t.alias {
            self.aliases.insert(a.to_lowercase(), def.name.clone());
        }
        Ok(def.name.clone())
    }

    fn resolve(&self, c: &RawCol) -> Result<ColumnRef, SqlError> {
        match &c.qualifier {
            Some(q) => {
                let table = self
                    .aliases
                    .get(&q.to_lowercase())
                    .ok_or_else(|| SqlError::UnknownTable(q.clone()))?;
                let def = self.catalog.table(table).expect("scope tables exist");
                let col = def
                    .column(&c.name)
                    .ok_or_else(|| SqlError::UnknownColumn(format!("{q}.{}", c.name)))?;
                Ok(ColumnRef::new(table.clone(), col.name.clone()))
            }
            None => {
                let mut hits = self.tables.iter().filter_map(|t| {
                    let def = self.catalog.table(t)?;
                    def.column(&c.name)
                        .map(|col| ColumnRef::new(t.clone(), col.name.clone()))
                });
                match (hits.next(), hits.next()) {
                    (Some(hit), None) => Ok(hit),
                    (Some(_), Some(_)) => Err(SqlError::AmbiguousColumn(c.name.clone())),
                    _ => Err(SqlError::UnknownColumn(c.name.clone())),
                }
            }
        }
    }
}

/// Parses a query of the supported subset against `catalog`.
///
/// WHERE, HAVING, ORDER BY, LIMIT, set operations, `*` items and DISTINCT
/// are dropped and mark the result `lossy`. Non-aggregated selections missing
/// from a non-empty GROUP BY are appended to it, also marking it `lossy`.
pub fn parse_sql(text: &str, catalog: &SchemaCatalog) -> Result<QueryIR, SqlError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks: &toks,
        i: 0,
        end: text.len(),
        lossy: false,
    };
    p.expect_kw("select")?;
    if p.eat_kw("distinct") {
        p.lossy = true;
    } else {
        p.eat_kw("all");
    }
    let mut items = Vec::new();
    loop {
        if let Some(item) = p.select_item()? {
            items.push(item);
        }
        if !p.eat_sym(",") {
            break;
        }
    }
    p.expect_kw("from")?;
    let (first, joins) = p.table_list()?;
    let mut group_cols = Vec::new();
    loop {
        if p.eat_kw("where") {
            p.lossy = true;
            p.skip_where();
        } else if p.at_kw("group") {
            p.i += 1;
            p.expect_kw("by")?;
            loop {
                let c = p
                    .column()?
                    .ok_or_else(|| p.syntax("expected column in GROUP BY"))?;
                group_cols.push(c);
                if !p.eat_sym(",") {
                    break;
                }
            }
        } else if p.at_any_kw(TAIL) {
            p.lossy = true;
            p.i = toks.len();
        } else if p.eat_sym(";") {
            if p.peek().is_some() {
                return Err(p.syntax("unexpected text after `;`"));
            }
        } else if p.peek().is_none() {
            break;
        } else {
            return Err(p.syntax("unexpected token"));
        }
    }

    let mut scope = Scope {
        catalog,
        tables: Vec::new(),
        aliases: HashMap::new(),
    };
    scope.add(&first)?;
    let mut edges = Vec::new();
    for join in &joins {
        let name = scope.add(&join.table)?;
        if join.conditions.is_empty() {
            edges.push(infer_join(catalog, &scope.tables, &name).ok_or_else(|| {
                SqlError::Unsupported {
                    position: join.table.pos,
                    message: format!("no join condition for `{name}`"),
                }
            })?);
            p.lossy = true;
        }
        for (l, r) in &join.conditions {
            edges.push(JoinEdge {
                left: scope.resolve(l)?,
                right: scope.resolve(r)?,
            });
        }
    }
    let mut selections = Vec::with_capacity(items.len());
    for (raw, agg) in &items {
        selections.push(SelectItem {
            column: scope.resolve(raw)?,
            aggregate: *agg,
        });
    }
    let mut grouping: Vec<ColumnRef> = Vec::new();
    for g in &group_cols {
        let c = scope.resolve(g)?;
        if !grouping.contains(&c) {
            grouping.push(c);
        }
    }
    if !grouping.is_empty() {
        for s in &selections {
            if s.aggregate.is_none() && !grouping.contains(&s.column) {
                grouping.push(s.column.clone());
                p.lossy = true;
            }
        }
    }
    let mut ir = QueryIR::new(selections, grouping, edges, scope.tables.clone())?;
    ir.lossy |= p.lossy;
    Ok(ir)
}

/// A direct FK edge between `new_table` and a table already in FROM.
fn infer_join(catalog: &SchemaCatalog, tables: &[String], new_table: &str) -> Option<JoinEdge> {
    catalog
        .fk_edges()
        .iter()
        .filter_map(|e| {
            if e.from.table == new_table && tables.contains(&e.to.table) && e.to.table != new_table
            {
                Some(JoinEdge {
                    left: e.to.clone(),
                    right: e.from.clone(),
                })
            } else if e.to.table == new_table
                && tables.contains(&e.from.table)
                && e.from.table != new_table
            {
                Some(JoinEdge {
                    left: e.from.clone(),
                    right: e.to.clone(),
                })
            } else {
                None
            }
        })
        .min()
}
