use crate::embedding::{EmbedError, SemanticSpace};
use crate::scalar::{blend, clamp, decayed_sum, mean_of_max};
use crate::sql::{ActionKind, BoundQuery};

use super::{RecommendError, RecommenderConfig};

/// Mean over the columns of `a` of the best match among the columns of `b`.
///
/// 1 when neither query has columns for the action, 0 when exactly one does.
pub fn action_similarity(
    space: &SemanticSpace,
    a: BoundQuery<'_>,
    b: BoundQuery<'_>,
    action: ActionKind,
) -> Result<f64, EmbedError> {
    texts_similarity(space, &a.texts(action), &b.texts(action))
}

pub(crate) fn texts_similarity(
    space: &SemanticSpace,
    a: &[String],
    b: &[String],
) -> Result<f64, EmbedError> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let rows = a
        .iter()
        .map(|x| {
            b.iter()
                .map(|y| space.text_similarity(x, y))
                .collect::<Result<Vec<f64>, EmbedError>>()
        })
        .collect::<Result<Vec<_>, EmbedError>>()?;
    let m = mean_of_max::<f64, _, _>(rows).unwrap_or(0.0);
    Ok(clamp(m, 0.0, 1.0))
}

/// Best similarity between `q` and any reference query; 0 without references.
pub fn best_reference_similarity(
    space: &SemanticSpace,
    q: BoundQuery<'_>,
    refs: &[BoundQuery<'_>],
    action: ActionKind,
) -> Result<f64, EmbedError> {
    let texts = q.texts(action);
    let mut best: f64 = 0.0;
    for r in refs {
        best = best.max(texts_similarity(space, &texts, &r.texts(action))?);
    }
    Ok(best)
}

/// Similarity of a prior query to a candidate, plus `beta` times its best
/// similarity to the reference pool.
pub fn relevance(
    space: &SemanticSpace,
    q: BoundQuery<'_>,
    refs: &[BoundQuery<'_>],
    candidate: BoundQuery<'_>,
    action: ActionKind,
    beta: f64,
) -> Result<f64, EmbedError> {
    let to_candidate = action_similarity(space, q, candidate, action)?;
    let to_refs = best_reference_similarity(space, q, refs, action)?;
    Ok(blend(to_candidate, to_refs, beta))
}

/// Recency-decayed relevance of `candidate` to a history ordered newest first.
pub fn contextual_score(
    space: &SemanticSpace,
    history: &[BoundQuery<'_>],
    refs: &[BoundQuery<'_>],
    candidate: BoundQuery<'_>,
    action: ActionKind,
    config: &RecommenderConfig,
) -> Result<f64, RecommendError> {
    if history.is_empty() {
        return Err(RecommendError::EmptyHistory);
    }
    let terms = history
        .iter()
        .map(|q| relevance(space, *q, refs, candidate, action, config.beta))
        .collect::<Result<Vec<f64>, EmbedError>>()?;
    Ok(decayed_sum(terms, config.alpha))
}

/// Per-history, per-action reference terms, reusable across candidates.
#[derive(Debug, Clone)]
pub(crate) struct HistoryContext {
    /// `[history index][action index]`
    texts: Vec<[Vec<String>; 3]>,
    reference_terms: Vec<[f64; 3]>,
}

impl HistoryContext {
    pub fn new(
        space: &SemanticSpace,
        history: &[BoundQuery<'_>],
        refs: &[BoundQuery<'_>],
    ) -> Result<Self, EmbedError> {
        let mut texts = Vec::with_capacity(history.len());
        let mut reference_terms = Vec::with_capacity(history.len());
        for q in history {
            let mut t: [Vec<String>; 3] = Default::default();
            let mut r = [0.0; 3];
            for (i, action) in ActionKind::ALL.into_iter().enumerate() {
                t[i] = q.texts(action);
                r[i] = best_reference_similarity(space, *q, refs, action)?;
            }
            texts.push(t);
            reference_terms.push(r);
        }
        Ok(HistoryContext {
            texts,
            reference_terms,
        })
    }

    /// Same value as [`contextual_score`] for every action, in
    /// [`ActionKind::ALL`] order.
    pub fn scores(
        &self,
        space: &SemanticSpace,
        candidate: BoundQuery<'_>,
        config: &RecommenderConfig,
    ) -> Result<[f64; 3], EmbedError> {
        let mut out = [0.0; 3];
        for (i, action) in ActionKind::ALL.into_iter().enumerate() {
            let cand = candidate.texts(action);
            let terms = self
                .texts
                .iter()
                .zip(&self.reference_terms)
                .map(|(t, r)| {
                    Ok(blend(
                        texts_similarity(space, &t[i], &cand)?,
                        r[i],
                        config.beta,
                    ))
                })
                .collect::<Result<Vec<f64>, EmbedError>>()?;
            out[i] = decayed_sum(terms, config.alpha);
        }
        Ok(out)
    }
}
