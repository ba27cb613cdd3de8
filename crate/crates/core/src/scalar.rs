//! Scalar abstraction for the numeric kernels.
//!
//! Embedding arithmetic needs square roots, so it is bounded on [`Real`]
//! (`f32`/`f64`). The scoring kernels only add, multiply and compare, so they
//! accept any [`num_traits::Num`] type, including exact rationals.

use num_traits::{Float, FromPrimitive, Num};
use std::fmt::{Debug, Display};

/// Floating point type usable for embeddings and similarity.
pub trait Real: 'static + Float + FromPrimitive + Default + Debug + Display + Send + Sync {}

impl Real for f32 {}
impl Real for f64 {}

/// Recency-decayed sum `terms[0] + alpha * terms[1] + alpha^2 * terms[2] + ...`.
///
/// `terms` is ordered newest first.
pub fn decayed_sum<T, I>(terms: I, alpha: T) -> T
where
    T: Num + Copy,
    I: IntoIterator<Item = T>,
{
    let mut weight = T::one();
    let mut total = T::zero();
    for term in terms {
        total = total + weight * term;
        weight = weight * alpha;
    }
    total
}

/// Linear blend of the similarity to a candidate and the best similarity to
/// the reference pool.
pub fn blend<T: Num + Copy>(candidate_similarity: T, reference_similarity: T, beta: T) -> T {
    candidate_similarity + beta * reference_similarity
}

/// Mean over the rows of the row maximum. `rows` must be non-empty and every
/// row non-empty; returns `None` otherwise.
pub fn mean_of_max<T, R, I>(rows: R) -> Option<T>
where
    T: Num + Copy + PartialOrd + FromPrimitive,
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = T>,
{
    let mut sum = T::zero();
    let mut count = 0usize;
    for row in rows {
        let mut best: Option<T> = None;
        for v in row {
            best = match best {
                Some(b) if b >= v => Some(b),
                _ => Some(v),
            };
        }
        sum = sum + best?;
        count += 1;
    }
    if count == 0 {
        return None;
    }
    Some(sum / T::from_usize(count)?)
}

/// Clamp into `[lo, hi]`.
pub fn clamp<T: PartialOrd>(v: T, lo: T, hi: T) -> T {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}
