//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error, so gradients near zero are
    /// compared in absolute terms.
    pub floor: f64,
    /// Above this many parameters only a seeded random subset is probed.
    pub max_probes: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            max_probes: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index with the largest relative error.
    pub worst_index: usize,
    pub checked: usize,
    /// Every probed index whose relative error exceeds the tolerance.
    pub failures: Vec<usize>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl GradCheck {
    /// Compares `analytic` against central differences of `loss` around
    /// `params`.
    pub fn run<F>(&self, params: &[f64], analytic: &[f64], mut loss: F) -> Result<GradCheckReport>
    where
        F: FnMut(&[f64]) -> f64,
    {
        if !(self.step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "step {} must be positive",
                self.step
            )));
        }
        if params.len() != analytic.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: analytic.len(),
            });
        }
        let indices: Vec<usize> = if params.len() > self.max_probes {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut idx = sample(&mut rng, params.len(), self.max_probes).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..params.len()).collect()
        };

        let mut probe = params.to_vec();
        let mut report = GradCheckReport {
            max_rel_error: 0.0,
            worst_index: 0,
            checked: indices.len(),
            failures: Vec::new(),
        };
        for &i in &indices {
            let orig = probe[i];
            probe[i] = orig + self.step;
            let up = loss(&probe);
            probe[i] = orig - self.step;
            let down = loss(&probe);
            probe[i] = orig;
            let numeric = (up - down) / (2.0 * self.step);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(self.floor);
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = rel;
                report.worst_index = i;
            }
            if !(rel <= self.tolerance) {
                report.failures.push(i);
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, v)| (i as f64 + 1.0) * v * v)
            .sum::<f64>()
            + 3.0 * p[0]
    }

    fn quadratic_grad(p: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * (i as f64 + 1.0) * v)
            .collect();
        g[0] += 3.0;
        g
    }

    #[test]
    fn exact_on_quadratics() {
        let p = [0.5, -1.25, 2.0, 0.1];
        let check = GradCheck::default();
        let report = check.run(&p, &quadratic_grad(&p), quadratic).unwrap();
        assert!(report.passed());
        assert!(report.max_rel_error <= 1e-9, "{}", report.max_rel_error);
    }

    #[test]
    fn reports_corrupted_entry() {
        let p = [0.5, -1.25, 2.0, 0.1];
        let mut g = quadratic_grad(&p);
        g[2] *= 2.0;
        let report = GradCheck::default().run(&p, &g, quadratic).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures, vec![2]);
        assert_eq!(report.worst_index, 2);
    }

    #[test]
    fn subsamples_large_parameter_sets() {
        let p = vec![0.25; 50];
        let check = GradCheck {
            max_probes: 10,
            ..GradCheck::default()
        };
        let report = check.run(&p, &quadratic_grad(&p), quadratic).unwrap();
        assert_eq!(report.checked, 10);
        assert!(report.passed());
    }

    #[test]
    fn rejects_nonpositive_step() {
        let check = GradCheck {
            step: 0.0,
            ..GradCheck::default()
        };
        assert!(check.run(&[1.0], &[2.0], quadratic).is_err());
    }
}
