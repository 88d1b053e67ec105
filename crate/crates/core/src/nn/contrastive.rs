//! NT-Xent contrastive loss with analytic gradients.
//!
//! For `2B` views arranged so that views `2m` and `2m + 1` come from the same
//! data point, the loss of view `i` with positive partner `p(i)` is
//!
//! ```text
//! L_i = -s(i, p(i)) + log Σ_{k ∈ K_i} exp s(i, k),    s(i, k) = sim(z_i, z_k) / τ
//! ```
//!
//! where `K_i` is every view except `i` (or, optionally, every view except
//! `i` and `p(i)`). The reported loss is the mean of `L_i` over all `2B`
//! ordered positive pairs.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContrastiveSimilarity {
    Cosine,
    Dot,
}

impl fmt::Display for ContrastiveSimilarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContrastiveSimilarity::Cosine => "cosine",
            ContrastiveSimilarity::Dot => "dot",
        })
    }
}

impl FromStr for ContrastiveSimilarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" => Ok(ContrastiveSimilarity::Cosine),
            "dot" => Ok(ContrastiveSimilarity::Dot),
            other => Err(Error::Parse(format!("unknown contrastive similarity `{other}`"))),
        }
    }
}

/// Which views enter the denominator of each view's loss term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Denominator {
    /// Every view but the anchor itself (standard NT-Xent).
    #[default]
    AllOthers,
    /// Every view but the anchor and its positive partner.
    NegativesOnly,
}

/// `2B` embedded views; views `2m` and `2m + 1` form a positive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    views: Vec<Vec<f64>>,
}

impl ContrastiveBatch {
    pub fn new(views: Vec<Vec<f64>>) -> Result<Self> {
        if views.len() < 2 || !views.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "contrastive batch needs an even number (>= 2) of views, got {}",
                views.len()
            )));
        }
        let dim = views[0].len();
        if dim == 0 {
            return Err(Error::Empty("contrastive view"));
        }
        if let Some(v) = views.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        Ok(Self { views })
    }

    pub fn views(&self) -> &[Vec<f64>] {
        &self.views
    }

    pub fn pairs(&self) -> usize {
        self.views.len() / 2
    }

    #[inline]
    pub fn partner(i: usize) -> usize {
        i ^ 1
    }
}

/// Loss and per-view gradients of the NT-Xent objective.
pub fn nt_xent_loss_grad(
    batch: &ContrastiveBatch,
    sim: ContrastiveSimilarity,
    temperature: f64,
    denominator: Denominator,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let views = batch.views();
    let n = views.len();
    if denominator == Denominator::NegativesOnly && n < 4 {
        return Err(Error::InvalidParameter(
            "negatives-only denominator needs at least two pairs".into(),
        ));
    }
    let dim = views[0].len();

    let norms: Vec<f64> = views
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if sim == ContrastiveSimilarity::Cosine {
        if let Some(i) = norms.iter().position(|&nrm| nrm == 0.0) {
            return Err(Error::Degenerate(format!("cosine similarity of zero view {i}")));
        }
    }

    // Scaled similarity matrix (diagonal unused).
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for k in (i + 1)..n {
            let d: f64 = views[i].iter().zip(&views[k]).map(|(a, b)| a * b).sum();
            let v = match sim {
                ContrastiveSimilarity::Dot => d,
                ContrastiveSimilarity::Cosine => d / (norms[i] * norms[k]),
            } / temperature;
            s[i * n + k] = v;
            s[k * n + i] = v;
        }
    }

    let in_denominator = |i: usize, k: usize| {
        k != i && (denominator == Denominator::AllOthers || k != ContrastiveBatch::partner(i))
    };

    // coeff[i][k] = ∂loss/∂s(i, k) before the 1/τ and similarity chain rule.
    let mut coeff = vec![0.0; n * n];
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let p = ContrastiveBatch::partner(i);
        let row = &s[i * n..(i + 1) * n];
        let top = (0..n)
            .filter(|&k| in_denominator(i, k))
            .map(|k| row[k])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = (0..n)
            .filter(|&k| in_denominator(i, k))
            .map(|k| (row[k] - top).exp())
            .sum();
        let log_sum = top + total.ln();
        loss += log_sum - row[p];
        for k in 0..n {
            if in_denominator(i, k) {
                coeff[i * n + k] += (row[k] - log_sum).exp() * inv_n;
            }
        }
        coeff[i * n + p] -= inv_n;
    }
    loss *= inv_n;

    let mut grads = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for k in 0..n {
            let c = coeff[i * n + k];
            if k == i || c == 0.0 {
                continue;
            }
            let c = c / temperature;
            match sim {
                ContrastiveSimilarity::Dot => {
                    for r in 0..dim {
                        grads[i][r] += c * views[k][r];
                        grads[k][r] += c * views[i][r];
                    }
                }
                ContrastiveSimilarity::Cosine => {
                    let (ni, nk) = (norms[i], norms[k]);
                    let cos = s[i * n + k] * temperature;
                    for r in 0..dim {
                        let (a, b) = (views[i][r], views[k][r]);
                        grads[i][r] += c * (b / (ni * nk) - cos * a / (ni * ni));
                        grads[k][r] += c * (a / (ni * nk) - cos * b / (nk * nk));
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}
