//! Leave-one-out ranking metrics with compensated aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::graph::NodeId;

use super::split::EvalQuery;
use super::EvalError;

/// The cutoffs reported by default: HR@1/5/10, NDCG@5/10, MRR.
pub const DEFAULT_CUTOFFS: [usize; 3] = [1, 5, 10];

/// Aggregated ranking quality over a query set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Hit ratio per cutoff: fraction of queries ranked within k.
    pub hr: BTreeMap<usize, f64>,
    /// Discounted gain per cutoff (single relevant item form).
    pub ndcg: BTreeMap<usize, f64>,
    /// Mean reciprocal rank.
    pub mrr: f64,
    /// Optional slice tag, e.g. "cold-start".
    pub slice: Option<String>,
    /// Number of queries aggregated.
    pub n_queries: usize,
}

impl EvalReport {
    /// Aligned human-readable table, one metric per row.
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        if let Some(slice) = &self.slice {
            let _ = writeln!(out, "slice: {slice}");
        }
        for (k, v) in &self.hr {
            let _ = writeln!(out, "HR@{k:<6} {v:.4}");
        }
        for (k, v) in &self.ndcg {
            if *k > 1 {
                let _ = writeln!(out, "NDCG@{k:<4} {v:.4}");
            }
        }
        let _ = writeln!(out, "MRR      {:.4}", self.mrr);
        let _ = writeln!(out, "queries  {}", self.n_queries);
        out
    }

    /// Machine-readable `key=value` lines with full float precision.
    pub fn key_value_lines(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.hr {
            let _ = writeln!(out, "hr@{k}={v}");
        }
        for (k, v) in &self.ndcg {
            let _ = writeln!(out, "ndcg@{k}={v}");
        }
        let _ = writeln!(out, "mrr={}", self.mrr);
        let _ = writeln!(out, "n_queries={}", self.n_queries);
        if let Some(slice) = &self.slice {
            let _ = writeln!(out, "slice={slice}");
        }
        out
    }
}

/// Kahan–Babuška compensated accumulator, so aggregation order cannot
/// perturb reported means.
#[derive(Debug, Default, Clone, Copy)]
pub(super) struct Kahan {
    sum: f64,
    compensation: f64,
}

impl Kahan {
    pub(super) fn add(&mut self, x: f64) {
        let y = x - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub(super) fn value(self) -> f64 {
        self.sum
    }
}

pub(super) fn kahan_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Kahan::default();
    let mut n = 0usize;
    for v in values {
        acc.add(v);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc.value() / n as f64
    }
}

/// 1-based rank of the positive among its negatives, pessimistic on ties:
/// every negative scoring at least as high counts ahead of it.
pub fn rank_of_positive(positive_score: f64, negative_scores: &[f64]) -> usize {
    1 + negative_scores
        .iter()
        .filter(|s| **s >= positive_score)
        .count()
}

/// Aggregate per-query ground-truth ranks into a report.
///
/// HR@k = mean 1[rank ≤ k]; NDCG@k = mean 1[rank ≤ k] / log₂(rank + 1)
/// (single relevant item); MRR = mean 1/rank.
pub fn compute_metrics(
    ranks: &[usize],
    cutoffs: &[usize],
    slice: Option<String>,
) -> Result<EvalReport, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    if ranks.iter().any(|r| *r == 0) {
        return Err(EvalError::InvalidRank);
    }
    let mut hr = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    for &k in cutoffs {
        hr.insert(
            k,
            kahan_mean(ranks.iter().map(|&r| if r <= k { 1.0 } else { 0.0 })),
        );
        ndcg.insert(
            k,
            kahan_mean(ranks.iter().map(|&r| {
                if r <= k {
                    1.0 / ((r + 1) as f64).log2()
                } else {
                    0.0
                }
            })),
        );
    }
    let mrr = kahan_mean(ranks.iter().map(|&r| 1.0 / r as f64));
    Ok(EvalReport {
        hr,
        ndcg,
        mrr,
        slice,
        n_queries: ranks.len(),
    })
}

/// Score every query's candidates in parallel against frozen parameters and
/// aggregate the resulting ranks. The scoring closure reports failures as
/// strings; any failure aborts the evaluation.
pub fn evaluate_queries<F>(
    queries: &[EvalQuery],
    cutoffs: &[usize],
    slice: Option<String>,
    score: F,
) -> Result<EvalReport, EvalError>
where
    F: Fn(NodeId, NodeId) -> Result<f64, String> + Sync,
{
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let ranks: Result<Vec<usize>, EvalError> = queries
        .par_iter()
        .map(|q| {
            let positive = score(q.user, q.positive).map_err(EvalError::Scoring)?;
            let negatives: Result<Vec<f64>, EvalError> = q
                .negatives
                .iter()
                .map(|item| score(q.user, *item).map_err(EvalError::Scoring))
                .collect();
            Ok(rank_of_positive(positive, &negatives?))
        })
        .collect();
    compute_metrics(&ranks?, cutoffs, slice)
}
