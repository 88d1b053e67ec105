use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;

/// Mean squared error over every sample and output entry, with gradients for
/// all parameters of `model`.
pub fn mse_loss_grad(model: &Mlp, batch: &[(&[f64], &[f64])]) -> Result<(f64, Vec<f64>)> {
    let mut grads = model.zero_grad();
    let loss = accumulate_mse(model, batch, batch.len() * model.output_dim(), &mut grads)?;
    Ok((loss, grads))
}

/// Adds the MSE gradient of `batch` into `grads`, normalising by `denom`
/// (the total number of output entries in the full mini-batch). Returns the
/// partial loss.
pub(crate) fn accumulate_mse(
    model: &Mlp,
    batch: &[(&[f64], &[f64])],
    denom: usize,
    grads: &mut [f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let scale = 1.0 / denom as f64;
    let mut loss = 0.0;
    for (x, target) in batch {
        if target.len() != model.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: model.output_dim(),
                actual: target.len(),
            });
        }
        let trace = model.forward_traced(x)?;
        let d_out: Vec<f64> = trace
            .output()
            .iter()
            .zip(target.iter())
            .map(|(o, t)| {
                let e = o - t;
                loss += e * e;
                2.0 * e * scale
            })
            .collect();
        model.backward(&trace, &d_out, grads)?;
    }
    Ok(loss * scale)
}
