//! Universal Hopfield networks: retrieval as projection ∘ separation ∘ score.
//!
//! A [`MemoryStore`] holds the memorised points as columns of a `d × N`
//! matrix. Retrieval scores a query against every column, sharpens the score
//! vector with a dataset-independent [`Separation`], and projects the result
//! back through the stored matrix. A one-hot weight vector reproduces the
//! selected column exactly.
//!
//! All arithmetic is `f64`. Inner products over a column are accumulated in
//! index order, so results do not depend on how callers distribute queries
//! across threads.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::vector::{normalize_in_place, DataVector, Shape};

/// Inverse temperature used when softmax stands in for a hard max.
pub const DEFAULT_BETA: f64 = 1e4;

/// Stored dataset: `count` columns of length `dim`, column-contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    dim: usize,
    count: usize,
    data: Vec<f64>,
    shape: Option<Shape>,
}

impl MemoryStore {
    /// Builds a store from column-contiguous data (`data[i * dim + r]` is row
    /// `r` of column `i`).
    pub fn from_flat(dim: usize, count: usize, data: Vec<f64>) -> Result<Self> {
        if count == 0 {
            return Err(Error::Empty("memory store"));
        }
        if dim == 0 {
            return Err(Error::Empty("memory dimension"));
        }
        let expected = dim.checked_mul(count).ok_or(Error::DimensionOverflow)?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            dim,
            count,
            data,
            shape: None,
        })
    }

    pub fn from_columns<I, C>(columns: I) -> Result<Self>
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[f64]>,
    {
        let mut data = Vec::new();
        let mut dim = None;
        let mut count = 0;
        for col in columns {
            let col = col.as_ref();
            match dim {
                None => dim = Some(col.len()),
                Some(d) if d != col.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: col.len(),
                    })
                }
                _ => {}
            }
            data.extend_from_slice(col);
            count += 1;
        }
        Self::from_flat(dim.unwrap_or(0), count, data)
    }

    pub fn with_shape(mut self, shape: Shape) -> Result<Self> {
        if shape.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: shape.len(),
            });
        }
        self.shape = Some(shape);
        Ok(self)
    }

    /// Dimension `d` of each stored point.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored points `N`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn shape(&self) -> Option<Shape> {
        self.shape
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn columns(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Column `i` as a keyed data vector carrying the store's shape tag.
    pub fn item(&self, i: usize) -> DataVector {
        let values = self.column(i).to_vec();
        let v = match self.shape {
            Some(shape) => DataVector::with_shape(values, shape),
            None => DataVector::new(values),
        };
        v.expect("stored columns are non-empty").keyed(i)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Keeps only the first `n` columns.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.count {
            return Err(Error::InvalidParameter(format!(
                "subset of {n} from a store of {}",
                self.count
            )));
        }
        Ok(Self {
            dim: self.dim,
            count: n,
            data: self.data[..n * self.dim].to_vec(),
            shape: self.shape,
        })
    }

    /// Copy with every column scaled to unit Euclidean norm.
    pub fn l2_normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        for col in out.data.chunks_exact_mut(self.dim) {
            normalize_in_place(col)?;
        }
        Ok(out)
    }
}

/// Similarity function `κ(x, x_i)` used by the score map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Similarity {
    Dot,
    Cosine,
    NegL2,
    NegL1,
    NegHamming,
}

impl Similarity {
    pub const ALL: [Similarity; 5] = [
        Similarity::Dot,
        Similarity::Cosine,
        Similarity::NegL2,
        Similarity::NegL1,
        Similarity::NegHamming,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Dot => "dot",
            Similarity::Cosine => "cosine",
            Similarity::NegL2 => "neg_l2",
            Similarity::NegL1 => "neg_l1",
            Similarity::NegHamming => "neg_hamming",
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dot" => Ok(Similarity::Dot),
            "cosine" | "cos" => Ok(Similarity::Cosine),
            "neg_l2" | "l2" => Ok(Similarity::NegL2),
            "neg_l1" | "l1" => Ok(Similarity::NegL1),
            "neg_hamming" | "hamming" => Ok(Similarity::NegHamming),
            other => Err(Error::Parse(format!("unknown similarity `{other}`"))),
        }
    }
}

/// Score vector `κ_D(x)`, one entry per stored point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub kind: Similarity,
}

/// Separation function `α`, applied to a score vector independently of the
/// stored data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Separation {
    Softmax {
        beta: f64,
    },
    Max,
    /// `max(s, 0)^degree`.
    RectPolynomial {
        degree: u32,
    },
    /// Keeps scores at or above `cut`, zeroes the rest.
    Threshold {
        cut: f64,
    },
}

impl Separation {
    pub fn softmax(beta: f64) -> Result<Self> {
        let s = Separation::Softmax { beta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Separation::Softmax { beta } if !(beta > 0.0 && beta.is_finite()) => Err(
                Error::InvalidParameter(format!("softmax beta must be positive, got {beta}")),
            ),
            Separation::RectPolynomial { degree: 0 } => Err(Error::InvalidParameter(
                "polynomial degree must be at least 1".into(),
            )),
            Separation::Threshold { cut } if cut.is_nan() => {
                Err(Error::InvalidParameter("threshold cut is NaN".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Separation {
    fn default() -> Self {
        Separation::Softmax { beta: DEFAULT_BETA }
    }
}

impl fmt::Display for Separation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Separation::Softmax { beta } => write!(f, "softmax:{beta}"),
            Separation::Max => f.write_str("max"),
            Separation::RectPolynomial { degree } => write!(f, "poly:{degree}"),
            Separation::Threshold { cut } => write!(f, "threshold:{cut}"),
        }
    }
}

impl FromStr for Separation {
    type Err = Error;

    /// Parses `softmax[:beta]`, `max`, `poly:degree` or `threshold:cut`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Parse(format!("separation `{name}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("separation parameter: {e}")))
        };
        let sep = match name {
            "softmax" => Separation::Softmax {
                beta: arg.map(|_| num(arg)).transpose()?.unwrap_or(DEFAULT_BETA),
            },
            "max" => Separation::Max,
            "poly" | "rect_polynomial" => {
                let d = num(arg)?;
                if d.fract() != 0.0 || d < 0.0 || d > u32::MAX as f64 {
                    return Err(Error::Parse(format!("polynomial degree `{d}`")));
                }
                Separation::RectPolynomial { degree: d as u32 }
            }
            "threshold" => Separation::Threshold { cut: num(arg)? },
            other => return Err(Error::Parse(format!("unknown separation `{other}`"))),
        };
        sep.validate()?;
        Ok(sep)
    }
}

/// Output of one retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub vector: DataVector,
    pub top_index: usize,
    pub weights: Vec<f64>,
    /// Applications of the memory map needed to reach `vector`.
    pub iterations: usize,
    /// False only when iterated retrieval ran out of iterations.
    pub converged: bool,
}

/// Scores a raw query slice against every column of `store`.
pub fn score_slice(query: &[f64], store: &MemoryStore, kind: Similarity) -> Result<Vec<f64>> {
    if query.len() != store.dim() {
        return Err(Error::DimensionMismatch {
            expected: store.dim(),
            actual: query.len(),
        });
    }
    let values = match kind {
        Similarity::Dot => store.columns().map(|c| dot(query, c)).collect(),
        Similarity::Cosine => {
            let qn = dot(query, query).sqrt();
            if qn == 0.0 {
                return Err(Error::Degenerate("cosine similarity of a zero query".into()));
            }
            let mut out = Vec::with_capacity(store.len());
            for (i, c) in store.columns().enumerate() {
                let cn = dot(c, c).sqrt();
                if cn == 0.0 {
                    return Err(Error::Degenerate(format!(
                        "cosine similarity against zero memory {i}"
                    )));
                }
                out.push(dot(query, c) / (qn * cn));
            }
            out
        }
        Similarity::NegL2 => store
            .columns()
            .map(|c| {
                -query
                    .iter()
                    .zip(c)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
        Similarity::NegL1 => store
            .columns()
            .map(|c| -query.iter().zip(c).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .collect(),
        Similarity::NegHamming => {
            check_binary(query)?;
            for c in store.columns() {
                check_binary(c)?;
            }
            store
                .columns()
                .map(|c| -(query.iter().zip(c).filter(|(a, b)| a != b).count() as f64))
                .collect()
        }
    };
    if let Some(i) = values.iter().position(|v: &f64| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(values)
}

/// Score map `κ_D`.
pub fn score(query: &DataVector, store: &MemoryStore, kind: Similarity) -> Result<ScoreVector> {
    Ok(ScoreVector {
        values: score_slice(query.values(), store, kind)?,
        kind,
    })
}

/// Separation map `α`.
pub fn separate(scores: &[f64], sep: &Separation) -> Result<Vec<f64>> {
    sep.validate()?;
    if scores.is_empty() {
        return Err(Error::Empty("score vector"));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let out = match *sep {
        Separation::Softmax { beta } => {
            let top = scores.iter().map(|s| beta * s).fold(f64::NEG_INFINITY, f64::max);
            let mut w: Vec<f64> = scores.iter().map(|s| (beta * s - top).exp()).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            w
        }
        Separation::Max => {
            let mut w = vec![0.0; scores.len()];
            w[argmax(scores)] = 1.0;
            w
        }
        Separation::RectPolynomial { degree } => {
            scores.iter().map(|&s| s.max(0.0).powi(degree as i32)).collect()
        }
        Separation::Threshold { cut } => scores.iter().map(|&s| if s >= cut { s } else { 0.0 }).collect(),
    };
    Ok(out)
}

/// Projection map `π_D`: `P · weights`.
///
/// Zero weights are skipped and the first contributing column is assigned
/// rather than added, so a one-hot vector returns its column bit-for-bit
/// (signed zeros included).
pub fn project(store: &MemoryStore, weights: &[f64]) -> Result<DataVector> {
    let out = project_slice(store, weights)?;
    Ok(match store.shape() {
        Some(shape) => DataVector::with_shape(out, shape)?,
        None => DataVector::new(out)?,
    })
}

pub(crate) fn project_slice(store: &MemoryStore, weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != store.len() {
        return Err(Error::DimensionMismatch {
            expected: store.len(),
            actual: weights.len(),
        });
    }
    let mut out: Option<Vec<f64>> = None;
    for (&w, col) in weights.iter().zip(store.columns()) {
        if w == 0.0 {
            continue;
        }
        match out.as_mut() {
            None => out = Some(col.iter().map(|v| w * v).collect()),
            Some(acc) => acc.iter_mut().zip(col).for_each(|(a, v)| *a += w * v),
        }
    }
    Ok(out.unwrap_or_else(|| vec![0.0; store.dim()]))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One application of `μ_D = π_D ∘ α ∘ κ_D`.
pub fn uhn_retrieve(
    query: &DataVector,
    store: &MemoryStore,
    kind: Similarity,
    sep: &Separation,
) -> Result<RetrievalResult> {
    let scores = score_slice(query.values(), store, kind)?;
    let weights = separate(&scores, sep)?;
    let vector = project(store, &weights)?;
    Ok(RetrievalResult {
        vector,
        top_index: argmax(&weights),
        weights,
        iterations: 1,
        converged: true,
    })
}

/// Applies `μ_D` until successive states are within `tol` (Euclidean) or
/// `max_iters` applications have been made.
///
/// `iterations` counts the applications needed to reach the returned state;
/// the application that confirms a fixed point is not counted. A hard max
/// therefore reports one iteration.
pub fn iterate_retrieve(
    query: &DataVector,
    store: &MemoryStore,
    kind: Similarity,
    sep: &Separation,
    max_iters: usize,
    tol: f64,
) -> Result<RetrievalResult> {
    if max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} is negative")));
    }
    let mut state = query.clone();
    let mut last = None;
    for t in 1..=max_iters {
        let next = uhn_retrieve(&state, store, kind, sep)?;
        let step = l2_distance(next.vector.values(), state.values());
        if step <= tol {
            // `state` was already a fixed point; keep the result that produced it
            // so weights and top index describe the returned vector.
            let mut result = match last {
                Some(prev) if t > 1 => prev,
                _ => next,
            };
            result.iterations = (t - 1).max(1);
            result.converged = true;
            return Ok(result);
        }
        state = next.vector.clone();
        last = Some(next);
    }
    let mut result = last.expect("max_iters >= 1");
    result.iterations = max_iters;
    result.converged = false;
    Ok(result)
}

/// A retrieval model that may score in a different space than it returns.
///
/// Splitting query encoding from the rest lets benchmarks time the feature
/// map separately from scoring, separation, and projection.
pub trait AssociativeMemory: Sync {
    /// Number of stored items.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimension of the space scores are computed in.
    fn score_dim(&self) -> usize;

    /// Maps a data-space query into the scoring space.
    fn encode_query(&self, query: &DataVector) -> Result<DataVector>;

    /// Score vector of an encoded query, without separation or projection.
    fn score_encoded(&self, encoded: &DataVector, kind: Similarity) -> Result<Vec<f64>>;

    /// Scores an encoded query, separates, and produces the output.
    fn retrieve_encoded(
        &self,
        encoded: &DataVector,
        kind: Similarity,
        sep: &Separation,
    ) -> Result<RetrievalResult>;

    fn retrieve(&self, query: &DataVector, kind: Similarity, sep: &Separation) -> Result<RetrievalResult> {
        let encoded = self.encode_query(query)?;
        self.retrieve_encoded(&encoded, kind, sep)
    }
}

impl AssociativeMemory for MemoryStore {
    fn len(&self) -> usize {
        self.count
    }

    fn score_dim(&self) -> usize {
        self.dim
    }

    fn encode_query(&self, query: &DataVector) -> Result<DataVector> {
        Ok(query.clone())
    }

    fn score_encoded(&self, encoded: &DataVector, kind: Similarity) -> Result<Vec<f64>> {
        score_slice(encoded.values(), self, kind)
    }

    fn retrieve_encoded(
        &self,
        encoded: &DataVector,
        kind: Similarity,
        sep: &Separation,
    ) -> Result<RetrievalResult> {
        uhn_retrieve(encoded, self, kind, sep)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_binary(v: &[f64]) -> Result<()> {
    match v.iter().position(|&x| x != 0.0 && x != 1.0) {
        Some(index) => Err(Error::NonBinary {
            index,
            value: v[index],
        }),
        None => Ok(()),
    }
}
