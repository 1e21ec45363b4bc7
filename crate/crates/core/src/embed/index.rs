//! Exact k-nearest-neighbor index over labeled unit vectors.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{norm, normalize, EmbedError, TextEncoder};

/// How far a stored vector's norm may drift from 1.
const UNIT_TOLERANCE: f64 = 1e-6;

/// Immutable label → unit-vector index searched by brute-force cosine scan.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    labels: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

/// Encode every label once and build an index. Labels must be unique
/// (case-sensitively exact; callers pass canonical labels). The encode phase
/// runs in parallel; output order follows input order.
pub fn build_index<E: TextEncoder>(labels: &[String], encoder: E) -> Result<VectorIndex, EmbedError> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(EmbedError::DuplicateLabel(l.clone()));
        }
    }
    let dim = encoder.dimension();
    let encoder_ref = &encoder;
    let chunks: Vec<Vec<Vec<f64>>> = labels
        .par_chunks(64)
        .map(|chunk| {
            let texts: Vec<&str> = chunk.iter().map(String::as_str).collect();
            encoder_ref.encode_batch(&texts)
        })
        .collect::<Result<_, _>>()?;
    let mut vectors = Vec::with_capacity(labels.len());
    for (vector, label) in chunks.into_iter().flatten().zip(labels) {
        let mut vector = vector;
        if vector.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) || !normalize(&mut vector) {
            return Err(EmbedError::BadVector {
                text: label.clone(),
            });
        }
        vectors.push(vector);
    }
    Ok(VectorIndex {
        labels: labels.to_vec(),
        vectors,
        dim,
    })
}

impl VectorIndex {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vector(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.vectors[i].as_slice())
    }

    /// The `min(k, remaining)` labels most cosine-similar to `query`,
    /// descending by score with ties broken by ascending label. Excluded
    /// labels never appear. A zero query scores everything 0, which reduces
    /// to plain ascending-label order.
    pub fn knn(&self, query: &[f64], k: usize, exclude: &HashSet<String>) -> Vec<(String, f64)> {
        if k == 0 || self.is_empty() {
            return Vec::new();
        }
        let mut q = query.to_vec();
        let qn = norm(&q);
        if qn > 0.0 && qn.is_finite() {
            for x in q.iter_mut() {
                *x /= qn;
            }
        }
        let mut scored: Vec<(usize, f64)> = (0..self.labels.len())
            .into_par_iter()
            .filter(|&i| !exclude.contains(&self.labels[i]))
            .map(|i| {
                let dot = self.vectors[i].iter().zip(&q).map(|(a, b)| a * b).sum();
                (i, dot)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite scores")
                .then_with(|| self.labels[a.0].cmp(&self.labels[b.0]))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.labels[i].clone(), s))
            .collect()
    }

    /// Write as `label\tv1,v2,...` lines (labels escaped like graph labels).
    pub fn save<W: Write>(&self, dest: W) -> Result<(), EmbedError> {
        let mut w = BufWriter::new(dest);
        for (label, vector) in self.labels.iter().zip(&self.vectors) {
            let coords = vector
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{}\t{}", escape(label), coords)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> Result<(), EmbedError> {
        self.save(std::fs::File::create(path)?)
    }

    pub fn load<R: std::io::Read>(source: R) -> Result<Self, EmbedError> {
        let violation = |line: usize, message: &str| EmbedError::FormatViolation {
            line,
            message: message.to_string(),
        };
        let mut labels = Vec::new();
        let mut vectors: Vec<Vec<f64>> = Vec::new();
        let mut dim = 0usize;
        let mut seen = HashSet::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let (label, coords) = line
                .split_once('\t')
                .ok_or_else(|| violation(lineno, "expected label\\tv1,v2,..."))?;
            let label =
                unescape(label).ok_or_else(|| violation(lineno, "bad escape in label"))?;
            if !seen.insert(label.clone()) {
                return Err(violation(lineno, "duplicate label"));
            }
            let vector: Vec<f64> = coords
                .split(',')
                .map(|t| t.parse::<f64>().map_err(|_| violation(lineno, "bad float")))
                .collect::<Result<_, _>>()?;
            if vector.is_empty() || vector.iter().any(|x| !x.is_finite()) {
                return Err(violation(lineno, "empty or non-finite vector"));
            }
            if labels.is_empty() {
                dim = vector.len();
            } else if vector.len() != dim {
                return Err(violation(lineno, "inconsistent dimension"));
            }
            if (norm(&vector) - 1.0).abs() > UNIT_TOLERANCE {
                return Err(violation(lineno, "vector is not unit-normalized"));
            }
            labels.push(label);
            vectors.push(vector);
        }
        Ok(Self {
            labels,
            vectors,
            dim,
        })
    }

    pub fn load_from_path(path: &Path) -> Result<Self, EmbedError> {
        Self::load(std::fs::File::open(path)?)
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}
