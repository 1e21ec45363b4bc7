//! Paired significance testing and label-set similarity.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::label;

use super::metrics::{kahan_mean, Kahan};
use super::EvalError;

/// Bootstrap resample count used throughout.
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// Result of a paired comparison between two runs of the same metric.
#[derive(Debug, Clone, PartialEq)]
pub struct StatComparison {
    /// Two-tailed paired t-test p-value.
    pub p_value: f64,
    /// The t statistic behind it (0 when both runs are identical).
    pub t_statistic: f64,
    /// Degrees of freedom (n − 1).
    pub degrees: usize,
    /// Mean of the first run's values.
    pub mean_a: f64,
    /// Mean paired difference a − b.
    pub mean_diff: f64,
    /// Percentile bootstrap 95% confidence interval for `mean_a`.
    pub ci: (f64, f64),
    /// Resamples drawn for the interval.
    pub resamples: usize,
}

/// Two-tailed paired t-test of `runs_a` against `runs_b`, plus a percentile
/// bootstrap confidence interval for the mean of `runs_a`.
///
/// Identical runs short-circuit to p = 1 (no evidence of difference);
/// identical non-zero differences are an error, since the statistic would
/// divide by zero variance while the runs plainly differ.
pub fn stat_compare(
    runs_a: &[f64],
    runs_b: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<StatComparison, EvalError> {
    if runs_a.len() != runs_b.len() {
        return Err(EvalError::LengthMismatch(runs_a.len(), runs_b.len()));
    }
    let n = runs_a.len();
    if n < 2 {
        return Err(EvalError::TooFewRuns(n));
    }
    if resamples == 0 {
        return Err(EvalError::InvalidSpec("resamples must be at least 1".into()));
    }

    let diffs: Vec<f64> = runs_a.iter().zip(runs_b).map(|(a, b)| a - b).collect();
    let mean_diff = kahan_mean(diffs.iter().copied());
    let mut ss = Kahan::default();
    for d in &diffs {
        ss.add((d - mean_diff) * (d - mean_diff));
    }
    let sd = (ss.value() / (n - 1) as f64).sqrt();

    let (t_statistic, p_value) = if sd == 0.0 {
        if mean_diff == 0.0 {
            (0.0, 1.0)
        } else {
            return Err(EvalError::DegenerateVariance(diffs[0]));
        }
    } else {
        let t = mean_diff / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("degrees of freedom are positive");
        (t, 2.0 * dist.cdf(-t.abs()))
    };

    let mean_a = kahan_mean(runs_a.iter().copied());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| kahan_mean((0..n).map(|_| runs_a[rng.gen_range(0..n)])))
        .collect();
    means.sort_by(f64::total_cmp);
    let percentile = |q: f64| -> f64 {
        let idx = ((q * resamples as f64).ceil() as usize)
            .saturating_sub(1)
            .min(resamples - 1);
        means[idx]
    };
    let ci = (percentile(0.025), percentile(0.975));

    Ok(StatComparison {
        p_value,
        t_statistic,
        degrees: n - 1,
        mean_a,
        mean_diff,
        ci,
        resamples,
    })
}

fn canonical_set(labels: &[String]) -> HashSet<String> {
    labels
        .iter()
        .map(|l| label::canonical(l))
        .filter(|c| !c.is_empty())
        .collect()
}

/// Jaccard similarity |A∩B| / |A∪B| over canonical label sets.
pub fn jaccard(a: &[String], b: &[String]) -> Result<f64, EvalError> {
    let sa = canonical_set(a);
    let sb = canonical_set(b);
    let union = sa.union(&sb).count();
    if union == 0 {
        return Err(EvalError::BothEmpty);
    }
    let intersection = sa.intersection(&sb).count();
    Ok(intersection as f64 / union as f64)
}

/// Corpus-level Jaccard comparison of paired label sets (e.g. extraction
/// with and without the knowledge base): the mean coefficient next to the
/// mean set sizes on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct JaccardReport {
    pub mean_jaccard: f64,
    pub mean_size_a: f64,
    pub mean_size_b: f64,
    pub pairs: usize,
}

/// Aggregate [`jaccard`] over paired label sets.
pub fn jaccard_report(pairs: &[(Vec<String>, Vec<String>)]) -> Result<JaccardReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let mut coeffs = Vec::with_capacity(pairs.len());
    let mut sizes_a = Vec::with_capacity(pairs.len());
    let mut sizes_b = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        coeffs.push(jaccard(a, b)?);
        sizes_a.push(canonical_set(a).len() as f64);
        sizes_b.push(canonical_set(b).len() as f64);
    }
    Ok(JaccardReport {
        mean_jaccard: kahan_mean(coeffs),
        mean_size_a: kahan_mean(sizes_a),
        mean_size_b: kahan_mean(sizes_b),
        pairs: pairs.len(),
    })
}
