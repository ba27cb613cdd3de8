//! Query recommendation from reference logs and session context.

mod aggregation;
mod assemble;
pub mod fpmax;
mod relevance;
mod scoring;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, SemanticSpace};
use crate::reference::{reference_queries, ReferenceRepository};
use crate::schema::{ColumnRef, SchemaCatalog, SchemaError, ValueKind};
use crate::sql::{
    action_columns, render_nl, synthesize_sql, ActionKind, AggregateFn, BoundQuery, QueryIR,
    SqlError,
};

pub use aggregation::suggest_aggregations;
pub use assemble::assemble_query;
pub use relevance::{column_relevance_vector, occurrences, Occurrence, RelevanceVector};
pub use scoring::{action_similarity, best_reference_similarity, contextual_score, relevance};

use relevance::relevance_against;
use scoring::HistoryContext;

const MAX_SINGLES: usize = 200;
const MAX_ITEMSETS: usize = 100;
const MAX_PAIRS: usize = 200;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("relevance vectors differ in length ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("history is empty")]
    EmptyHistory,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid recommender configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommenderConfig {
    /// Per-step recency decay.
    pub alpha: f64,
    /// Weight of the reference pool against the candidate itself.
    pub beta: f64,
    pub binarization_threshold: f64,
    /// Relative support for itemset mining.
    pub min_support: f64,
    pub top_k: usize,
    pub reference_domain_k: usize,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            alpha: 0.8,
            beta: 0.5,
            binarization_threshold: 0.5,
            min_support: 0.1,
            top_k: 5,
            reference_domain_k: 5,
        }
    }
}

impl RecommenderConfig {
    pub fn validate(&self) -> Result<(), RecommendError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let fail = |m: &str| Err(RecommendError::InvalidConfig(m.to_string()));
        if !unit(self.alpha) {
            return fail("alpha must lie in [0, 1]");
        }
        if !unit(self.beta) {
            return fail("beta must lie in [0, 1]");
        }
        if !self.binarization_threshold.is_finite() {
            return fail("binarization_threshold must be finite");
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return fail("min_support must lie in (0, 1]");
        }
        if self.top_k == 0 {
            return fail("top_k must be positive");
        }
        if self.reference_domain_k == 0 {
            return fail("reference_domain_k must be positive");
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, RecommendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RecommendError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RecommenderConfig = serde_json::from_str(&text)
            .map_err(|e| RecommendError::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

/// A maximal frequent set of catalog columns.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeSet {
    pub columns: Vec<ColumnRef>,
    /// Number of reference occurrences relevant to every column of the set.
    pub support: usize,
}

/// Maximal sets of columns that are jointly relevant to at least
/// `min_support` of the reference occurrences.
pub fn mine_frequent_attribute_sets(
    vectors: &[RelevanceVector],
    min_support: f64,
) -> Result<Vec<AttributeSet>, RecommendError> {
    let Some(first) = vectors.first() else {
        return Ok(Vec::new());
    };
    let n = first.bits.len();
    if let Some(v) = vectors.iter().find(|v| v.bits.len() != n) {
        return Err(RecommendError::DimensionMismatch {
            expected: n,
            found: v.bits.len(),
        });
    }
    let transactions: Vec<Vec<usize>> = (0..n)
        .map(|pos| {
            vectors
                .iter()
                .enumerate()
                .filter(|(_, v)| v.bits[pos] == 1)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let sets = fpmax::fpmax(&transactions, fpmax::min_count_for(min_support, n));
    Ok(sets
        .into_iter()
        .map(|s| AttributeSet {
            columns: s.items.iter().map(|&i| vectors[i].column.clone()).collect(),
            support: s.support,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub query: QueryIR,
    pub sql: String,
    pub nl_text: String,
    pub score: f64,
    pub action_breakdown: BTreeMap<ActionKind, f64>,
}

impl Recommendation {
    /// `breakdown` is in [`ActionKind::ALL`] order.
    pub fn new(query: QueryIR, breakdown: [f64; 3], catalog: &SchemaCatalog) -> Self {
        let action_breakdown: BTreeMap<ActionKind, f64> =
            ActionKind::ALL.into_iter().zip(breakdown).collect();
        Recommendation {
            sql: synthesize_sql(&query),
            nl_text: render_nl(&query, catalog),
            score: action_breakdown.values().sum(),
            action_breakdown,
            query,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainMatch {
    pub domain_label: String,
    pub db_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSet {
    pub items: Vec<Recommendation>,
    /// No column was relevant to any reference; ranked by raw similarity.
    #[serde(default)]
    pub fallback: bool,
    /// Every column was already explored; ranked by reference frequency.
    #[serde(default)]
    pub exhausted: bool,
    #[serde(default)]
    pub reference_domains: Vec<DomainMatch>,
}

/// Sorts by score (descending, ties by SQL text), drops duplicates and
/// anything in `exclude`, and keeps `top_k`.
pub fn rank_recommendations(
    mut items: Vec<Recommendation>,
    exclude: &[QueryIR],
    top_k: usize,
) -> Vec<Recommendation> {
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.sql.cmp(&b.sql)));
    let mut seen: HashSet<QueryIR> = exclude.iter().cloned().collect();
    items
        .into_iter()
        .filter(|r| seen.insert(r.query.clone()))
        .take(top_k)
        .collect()
}

/// Text used to retrieve reference domains for a catalog: its label followed
/// by its table names.
pub fn domain_description(catalog: &SchemaCatalog) -> String {
    let mut parts = vec![catalog.domain_label.clone()];
    parts.extend(catalog.tables().iter().map(|t| t.display_text.clone()));
    parts.retain(|p| !p.trim().is_empty());
    parts.join(" ")
}

/// Recommendation state for one target catalog against the reference pool.
pub struct Recommender<'a> {
    space: &'a SemanticSpace,
    catalog: &'a SchemaCatalog,
    config: RecommenderConfig,
    refs: Vec<BoundQuery<'a>>,
    domains: Vec<DomainMatch>,
    columns: Vec<ColumnRef>,
    /// Indices of the columns offered in recommendations.
    offered: Vec<usize>,
    position: HashMap<ColumnRef, usize>,
    selection: Vec<RelevanceVector>,
    grouping: Vec<RelevanceVector>,
    selection_occurrences: Vec<Occurrence>,
    itemsets: Vec<AttributeSet>,
}

impl<'a> Recommender<'a> {
    pub fn new(
        space: &'a SemanticSpace,
        catalog: &'a SchemaCatalog,
        repository: &'a ReferenceRepository,
        config: RecommenderConfig,
    ) -> Result<Self, RecommendError> {
        config.validate()?;
        let retrieved = if repository.is_empty() {
            Vec::new()
        } else {
            repository.retrieve_relevant_domains(
                space,
                &domain_description(catalog),
                config.reference_domain_k,
            )?
        };
        let domains = retrieved
            .iter()
            .map(|(g, s)| DomainMatch {
                domain_label: g.domain_label.clone(),
                db_id: g.db_id.clone(),
                score: *s,
            })
            .collect();
        let refs = reference_queries(retrieved.into_iter().map(|(g, _)| g));
        Self::with_references(space, catalog, refs, domains, config)
    }

    /// Uses `refs` as the reference pool without domain retrieval.
    pub fn with_references(
        space: &'a SemanticSpace,
        catalog: &'a SchemaCatalog,
        refs: Vec<BoundQuery<'a>>,
        domains: Vec<DomainMatch>,
        config: RecommenderConfig,
    ) -> Result<Self, RecommendError> {
        config.validate()?;
        let columns: Vec<ColumnRef> = catalog.columns().collect();
        let position = columns
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let selection_occurrences = occurrences(&refs, ActionKind::Selection);
        let grouping_occurrences = occurrences(&refs, ActionKind::Grouping);
        space.prefetch(
            columns
                .iter()
                .filter_map(|c| catalog.display_text(c))
                .chain(selection_occurrences.iter().map(|o| o.text.as_str()))
                .chain(grouping_occurrences.iter().map(|o| o.text.as_str())),
        )?;
        let threshold = config.binarization_threshold;
        let vectors = |occ: &[Occurrence]| {
            columns
                .iter()
                .map(|c| relevance_against(space, c, catalog, occ, threshold))
                .collect::<Result<Vec<_>, EmbedError>>()
        };
        let selection = vectors(&selection_occurrences)?;
        let grouping = vectors(&grouping_occurrences)?;
        // key columns only serve joins, unless nothing else exists
        let mut offered: Vec<usize> = (0..columns.len())
            .filter(|&i| !catalog.is_key_column(&columns[i]))
            .collect();
        if offered.is_empty() {
            offered = (0..columns.len()).collect();
        }
        let offered_vectors: Vec<RelevanceVector> =
            offered.iter().map(|&i| selection[i].clone()).collect();
        let itemsets = mine_frequent_attribute_sets(&offered_vectors, config.min_support)?;
        Ok(Recommender {
            space,
            catalog,
            config,
            refs,
            domains,
            columns,
            offered,
            position,
            selection,
            grouping,
            selection_occurrences,
            itemsets,
        })
    }

    pub fn config(&self) -> &RecommenderConfig {
        &self.config
    }

    pub fn catalog(&self) -> &'a SchemaCatalog {
        self.catalog
    }

    pub fn references(&self) -> &[BoundQuery<'a>] {
        &self.refs
    }

    pub fn reference_domains(&self) -> &[DomainMatch] {
        &self.domains
    }

    /// Selection relevance of every catalog column, in catalog order.
    pub fn selection_vectors(&self) -> &[RelevanceVector] {
        &self.selection
    }

    /// Grouping relevance of every catalog column, in catalog order.
    pub fn grouping_vectors(&self) -> &[RelevanceVector] {
        &self.grouping
    }

    /// Maximal frequent sets over the offered columns.
    pub fn itemsets(&self) -> &[AttributeSet] {
        &self.itemsets
    }

    /// Columns that may appear in recommendations: every non-key column.
    pub fn offered_columns(&self) -> impl Iterator<Item = &ColumnRef> + '_ {
        self.offered.iter().map(|&i| &self.columns[i])
    }

    fn frequency(
        vectors: &[RelevanceVector],
        position: &HashMap<ColumnRef, usize>,
        cols: &BTreeSet<ColumnRef>,
    ) -> f64 {
        if cols.is_empty() {
            return 0.0;
        }
        let total: f64 = cols
            .iter()
            .map(|c| {
                position
                    .get(c)
                    .map_or(0.0, |&i| vectors[i].relative_frequency())
            })
            .sum();
        total / cols.len() as f64
    }

    /// Mean relative reference frequency of each action's columns, in
    /// [`ActionKind::ALL`] order.
    pub fn frequency_breakdown(&self, ir: &QueryIR) -> [f64; 3] {
        let p = &self.position;
        [
            Self::frequency(
                &self.selection,
                p,
                &action_columns(ir, ActionKind::Selection),
            ),
            Self::frequency(&self.grouping, p, &action_columns(ir, ActionKind::Grouping)),
            Self::frequency(
                &self.selection,
                p,
                &action_columns(ir, ActionKind::Aggregation),
            ),
        ]
    }

    fn is_measure(&self, c: &ColumnRef) -> bool {
        self.catalog.value_kind(c) == Some(ValueKind::Numeric) && !self.catalog.is_key_column(c)
    }

    fn top_aggregation(&self, c: &ColumnRef) -> Result<AggregateFn, RecommendError> {
        let ranked = aggregation::suggest_from(
            self.space,
            c,
            self.catalog,
            &self.selection_occurrences,
            self.config.binarization_threshold,
        )?;
        Ok(ranked[0])
    }

    /// Categorical columns with grouping evidence, strongest first.
    fn grouping_candidates(&self) -> Vec<&ColumnRef> {
        let mut ranked: Vec<(usize, usize)> = self
            .grouping
            .iter()
            .enumerate()
            .filter(|(i, v)| {
                v.frequency > 0
                    && matches!(
                        self.catalog.value_kind(&self.columns[*i]),
                        Some(ValueKind::Text | ValueKind::Boolean)
                    )
            })
            .map(|(i, v)| (i, v.frequency))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.into_iter().map(|(i, _)| &self.columns[i]).collect()
    }

    /// Turns a column set into a full query: measures get their top
    /// aggregation, the remaining columns become the grouping, and a lone
    /// aggregate gets the strongest joinable categorical grouping column.
    /// `None` when the columns cannot be joined.
    pub fn assemble_candidate(
        &self,
        columns: &[ColumnRef],
    ) -> Result<Option<QueryIR>, RecommendError> {
        let mut cols: Vec<&ColumnRef> = columns.iter().collect();
        cols.sort_by_key(|c| self.position.get(*c).copied().unwrap_or(usize::MAX));
        cols.dedup();
        let (measures, plain): (Vec<&ColumnRef>, Vec<&ColumnRef>) =
            cols.into_iter().partition(|c| self.is_measure(c));
        let mut aggregated = Vec::with_capacity(measures.len());
        for m in measures {
            aggregated.push(((*m).clone(), Some(self.top_aggregation(m)?)));
        }
        let plain: Vec<ColumnRef> = plain.into_iter().cloned().collect();
        let attempt = |group: &[ColumnRef]| {
            let mut sel: Vec<(ColumnRef, Option<AggregateFn>)> =
                group.iter().map(|c| (c.clone(), None)).collect();
            sel.extend(aggregated.iter().cloned());
            let grouping = if aggregated.is_empty() {
                Vec::new()
            } else {
                group.to_vec()
            };
            match assemble_query(&sel, &grouping, self.catalog) {
                Ok(ir) => Ok(Some(ir)),
                Err(RecommendError::Schema(SchemaError::NoJoinPath { .. })) => Ok(None),
                Err(e) => Err(e),
            }
        };
        if aggregated.is_empty() || !plain.is_empty() {
            return attempt(&plain);
        }
        for g in self.grouping_candidates() {
            if let Some(ir) = attempt(std::slice::from_ref(g))? {
                return Ok(Some(ir));
            }
        }
        attempt(&[])
    }

    fn assemble_all<I>(&self, sets: I) -> Result<Vec<QueryIR>, RecommendError>
    where
        I: IntoIterator<Item = Vec<ColumnRef>>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for set in sets {
            if let Some(ir) = self.assemble_candidate(&set)? {
                if seen.insert(ir.clone()) {
                    out.push(ir);
                }
            }
        }
        Ok(out)
    }

    /// Every first-step candidate: each column alone, then each mined set.
    pub fn initial_pool(&self) -> Result<Vec<QueryIR>, RecommendError> {
        let singles = self
            .offered_columns()
            .take(MAX_SINGLES)
            .map(|c| vec![c.clone()]);
        let sets = self
            .itemsets
            .iter()
            .take(MAX_ITEMSETS)
            .map(|s| s.columns.clone());
        self.assemble_all(singles.chain(sets))
    }

    fn explored(history: &[QueryIR]) -> BTreeSet<ColumnRef> {
        history
            .iter()
            .flat_map(|q| {
                ActionKind::ALL
                    .into_iter()
                    .flat_map(move |a| action_columns(q, a))
            })
            .collect()
    }

    /// Unexplored columns, most frequently relevant first.
    fn unexplored(&self, explored: &BTreeSet<ColumnRef>) -> Vec<ColumnRef> {
        let mut ranked: Vec<(usize, &ColumnRef)> = self
            .offered
            .iter()
            .map(|&i| (i, &self.columns[i]))
            .filter(|(_, c)| !explored.contains(*c))
            .collect();
        ranked.sort_by(|a, b| {
            self.selection[b.0]
                .frequency
                .cmp(&self.selection[a.0].frequency)
                .then(a.0.cmp(&b.0))
        });
        ranked
            .into_iter()
            .take(MAX_SINGLES)
            .map(|(_, c)| c.clone())
            .collect()
    }

    /// Next-step candidates for `history`; `None` when every column has
    /// already been explored.
    pub fn next_pool(&self, history: &[QueryIR]) -> Result<Option<Vec<QueryIR>>, RecommendError> {
        let explored = Self::explored(history);
        let unexplored = self.unexplored(&explored);
        if unexplored.is_empty() {
            return Ok(None);
        }
        let fresh: BTreeSet<&ColumnRef> = unexplored.iter().collect();
        let singles = unexplored.iter().map(|c| vec![c.clone()]);
        let sets = self
            .itemsets
            .iter()
            .filter(|s| s.columns.iter().any(|c| fresh.contains(c)))
            .take(MAX_ITEMSETS)
            .map(|s| s.columns.clone());
        let pairs = unexplored
            .iter()
            .flat_map(|u| explored.iter().map(move |e| vec![u.clone(), e.clone()]))
            .take(MAX_PAIRS);
        self.assemble_all(singles.chain(sets).chain(pairs))
            .map(Some)
    }

    fn frequency_ranked(&self, pool: Vec<QueryIR>, exclude: &[QueryIR]) -> Vec<Recommendation> {
        let items = pool
            .into_iter()
            .map(|q| {
                let b = self.frequency_breakdown(&q);
                Recommendation::new(q, b, self.catalog)
            })
            .collect();
        rank_recommendations(items, exclude, self.config.top_k)
    }

    fn base_set(&self) -> RecommendationSet {
        RecommendationSet {
            reference_domains: self.domains.clone(),
            ..Default::default()
        }
    }

    /// First-step recommendations ranked by reference frequency.
    pub fn recommend_initial(&self) -> Result<RecommendationSet, RecommendError> {
        let mut set = self.base_set();
        if self
            .offered
            .iter()
            .all(|&i| self.selection[i].frequency == 0)
        {
            set.fallback = true;
            set.items = self.similarity_fallback()?;
            return Ok(set);
        }
        set.items = self.frequency_ranked(self.initial_pool()?, &[]);
        Ok(set)
    }

    /// Single columns ranked by their best similarity to any reference column.
    fn similarity_fallback(&self) -> Result<Vec<Recommendation>, RecommendError> {
        let mut items = Vec::new();
        for c in self.offered_columns().take(MAX_SINGLES) {
            let text = relevance::column_text(self.catalog, c);
            let mut best: f64 = 0.0;
            for o in &self.selection_occurrences {
                best = best.max(self.space.text_similarity(&text, &o.text)?);
            }
            let ir = assemble_query(&[(c.clone(), None)], &[], self.catalog)?;
            items.push(Recommendation::new(ir, [best, 0.0, 0.0], self.catalog));
        }
        Ok(rank_recommendations(items, &[], self.config.top_k))
    }

    /// Next-step recommendations for a history ordered newest first.
    pub fn recommend_next(&self, history: &[QueryIR]) -> Result<RecommendationSet, RecommendError> {
        if history.is_empty() {
            return self.recommend_initial();
        }
        let mut set = self.base_set();
        let Some(pool) = self.next_pool(history)? else {
            set.exhausted = true;
            set.items = self.frequency_ranked(self.initial_pool()?, history);
            return Ok(set);
        };
        let bound: Vec<BoundQuery<'_>> = history
            .iter()
            .map(|q| BoundQuery::new(q, self.catalog))
            .collect();
        let context = HistoryContext::new(self.space, &bound, &self.refs)?;
        let mut items = Vec::with_capacity(pool.len());
        for q in pool {
            let b = context.scores(self.space, BoundQuery::new(&q, self.catalog), &self.config)?;
            items.push(Recommendation::new(q, b, self.catalog));
        }
        set.items = rank_recommendations(items, history, self.config.top_k);
        Ok(set)
    }

    /// Next-step scores computed term by term through [`contextual_score`].
    pub fn contextual_breakdown(
        &self,
        history: &[QueryIR],
        candidate: &QueryIR,
    ) -> Result<[f64; 3], RecommendError> {
        let bound: Vec<BoundQuery<'_>> = history
            .iter()
            .map(|q| BoundQuery::new(q, self.catalog))
            .collect();
        let cand = BoundQuery::new(candidate, self.catalog);
        let mut out = [0.0; 3];
        for (i, a) in ActionKind::ALL.into_iter().enumerate() {
            out[i] = contextual_score(self.space, &bound, &self.refs, cand, a, &self.config)?;
        }
        Ok(out)
    }
}

pub fn recommend_initial(
    space: &SemanticSpace,
    catalog: &SchemaCatalog,
    repository: &ReferenceRepository,
    config: &RecommenderConfig,
) -> Result<RecommendationSet, RecommendError> {
    Recommender::new(space, catalog, repository, config.clone())?.recommend_initial()
}

/// `history` is ordered newest first.
pub fn recommend_next(
    space: &SemanticSpace,
    history: &[QueryIR],
    catalog: &SchemaCatalog,
    repository: &ReferenceRepository,
    config: &RecommenderConfig,
) -> Result<RecommendationSet, RecommendError> {
    Recommender::new(space, catalog, repository, config.clone())?.recommend_next(history)
}
