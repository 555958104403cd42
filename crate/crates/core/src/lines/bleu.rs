//! Sentence-level BLEU over token sequences.
//!
//! Modified n-gram precision clips each candidate n-gram count by its largest
//! count in any single reference. Orders for which the candidate has no
//! n-grams are left out of the geometric mean; an order with no matches
//! contributes `EPSILON / total` instead of zero. The brevity penalty uses the
//! reference length closest to the candidate's, preferring the shorter one on
//! ties.

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

pub const EPSILON: f64 = 1e-9;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum BleuError {
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("max order must be at least 1")]
    ZeroOrder,
}

fn ngram_counts<T: Eq + Hash + Clone>(tokens: &[T], n: usize) -> HashMap<Vec<T>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// References preprocessed for scoring many candidates against them.
#[derive(Debug, Clone)]
pub struct ReferenceSet<T> {
    max_order: usize,
    /// Per order, the largest count of each n-gram in any one reference.
    max_counts: Vec<HashMap<Vec<T>, usize>>,
    lengths: Vec<usize>,
}

impl<T: Eq + Hash + Clone> ReferenceSet<T> {
    pub fn new<R: AsRef<[T]>>(references: &[R], max_order: usize) -> Result<Self, BleuError> {
        if max_order == 0 {
            return Err(BleuError::ZeroOrder);
        }
        let mut max_counts = vec![HashMap::new(); max_order];
        let mut lengths = Vec::with_capacity(references.len());
        for reference in references {
            let reference = reference.as_ref();
            lengths.push(reference.len());
            for (n, table) in (1..=max_order).zip(max_counts.iter_mut()) {
                for (gram, count) in ngram_counts(reference, n) {
                    let slot = table.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
        }
        lengths.sort_unstable();
        lengths.dedup();
        Ok(Self { max_order, max_counts, lengths })
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    fn closest_length(&self, len: usize) -> Option<usize> {
        self.lengths.iter().copied().min_by_key(|&r| (r.abs_diff(len), r))
    }

    /// BLEU of `candidate` against the whole set. Zero when there are no
    /// references.
    pub fn score(&self, candidate: &[T]) -> Result<f64, BleuError> {
        if candidate.is_empty() {
            return Err(BleuError::EmptyCandidate);
        }
        let Some(ref_len) = self.closest_length(candidate.len()) else {
            return Ok(0.0);
        };
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        for n in 1..=self.max_order {
            if candidate.len() < n {
                break;
            }
            let total = candidate.len() - n + 1;
            let table = &self.max_counts[n - 1];
            let clipped: usize = ngram_counts(candidate, n)
                .iter()
                .map(|(gram, &count)| count.min(table.get(gram).copied().unwrap_or(0)))
                .sum();
            let precision = if clipped == 0 { EPSILON / total as f64 } else { clipped as f64 / total as f64 };
            log_sum += precision.ln();
            orders += 1;
        }
        let c = candidate.len() as f64;
        let r = ref_len as f64;
        let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        Ok((brevity * (log_sum / orders as f64).exp()).clamp(0.0, 1.0))
    }
}

pub fn bleu<T, R>(candidate: &[T], references: &[R], max_order: usize) -> Result<f64, BleuError>
where
    T: Eq + Hash + Clone,
    R: AsRef<[T]>,
{
    if candidate.is_empty() {
        return Err(BleuError::EmptyCandidate);
    }
    ReferenceSet::new(references, max_order)?.score(candidate)
}
