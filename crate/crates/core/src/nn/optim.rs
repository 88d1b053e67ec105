use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::Parse(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Optimizer moments for one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, num_params: usize) -> Self {
        let moments = if kind == Optimizer::Adam { num_params } else { 0 };
        Self {
            kind,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
            steps: 0,
        }
    }

    /// One update. Weight decay is decoupled: every parameter additionally
    /// moves by `-lr · weight_decay · p`, and is skipped entirely when the
    /// decay is zero.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        debug_assert_eq!(params.len(), grads.len());
        self.steps = self.steps.saturating_add(1);
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    let decay = if weight_decay != 0.0 {
                        lr * weight_decay * *p
                    } else {
                        0.0
                    };
                    *p -= lr * g;
                    if weight_decay != 0.0 {
                        *p -= decay;
                    }
                }
            }
            Optimizer::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
                let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(self.first.iter_mut())
                    .zip(self.second.iter_mut())
                {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
                    let decay = if weight_decay != 0.0 {
                        lr * weight_decay * *p
                    } else {
                        0.0
                    };
                    *p -= lr * update;
                    if weight_decay != 0.0 {
                        *p -= decay;
                    }
                }
            }
        }
    }
}
