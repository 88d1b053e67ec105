//! Autoencoder and contrastive training loops.
//!
//! Mini-batch gradients are accumulated over fixed-size chunks that are summed
//! in chunk order, so a run is bit-identical whether or not the chunks are
//! evaluated on the rayon pool.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corrupt::{corrupt, derive_seed, AugmentationPipeline};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::fully_semantic::GenerativeMap;
use crate::memory::MemoryStore;
use crate::nn::contrastive::{nt_xent_loss_grad, ContrastiveBatch, ContrastiveSimilarity, Denominator};
use crate::nn::loss::accumulate_mse;
use crate::nn::mlp::{Activation, Mlp};
use crate::nn::optim::{Optimizer, OptimizerState};

const CHUNK: usize = 16;

/// Layer widths of the MNIST autoencoder.
pub const DEFAULT_AUTOENCODER_DIMS: [usize; 9] = [784, 64, 32, 16, 12, 16, 32, 64, 784];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub weight_decay: f64,
    pub seed: u64,
    /// Contrastive temperature τ.
    pub temperature: f64,
    pub contrastive_similarity: ContrastiveSimilarity,
    pub denominator: Denominator,
    /// Evaluate gradient chunks on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 250,
            epochs: 300,
            optimizer: Optimizer::Sgd,
            weight_decay: 0.0,
            seed: 0,
            temperature: 1.0,
            contrastive_similarity: ContrastiveSimilarity::Cosine,
            denominator: Denominator::AllOthers,
            parallel: false,
        }
    }
}

impl TrainConfig {
    /// MNIST autoencoder schedule: lr 0.001, batch 250, 300 epochs.
    pub fn autoencoder() -> Self {
        Self::default()
    }

    /// Contrastive schedule: batch 256, lr 0.0003, weight decay 1e-4, Adam.
    pub fn contrastive() -> Self {
        Self {
            learning_rate: 3e-4,
            batch_size: 256,
            epochs: 100,
            optimizer: Optimizer::Adam,
            weight_decay: 1e-4,
            ..Self::default()
        }
    }

    pub fn validate(&self, contrastive: bool) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        let min_batch = if contrastive { 2 } else { 1 };
        if self.batch_size < min_batch {
            return Err(Error::InvalidParameter(format!(
                "batch size {} below {min_batch}",
                self.batch_size
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight decay {}",
                self.weight_decay
            )));
        }
        if contrastive && !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Layer activations for an autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AutoencoderOptions {
    pub hidden: Activation,
    /// Activation of the bottleneck layer (the encoder output).
    pub bottleneck: Activation,
    pub output: Activation,
}

impl Default for AutoencoderOptions {
    fn default() -> Self {
        Self {
            hidden: Activation::Relu,
            bottleneck: Activation::Relu,
            output: Activation::Sigmoid,
        }
    }
}

/// Index of the narrowest layer; the first one wins on ties.
pub fn bottleneck_index(dims: &[usize]) -> usize {
    let mut best = 0;
    for (i, &d) in dims.iter().enumerate() {
        if d < dims[best] {
            best = i;
        }
    }
    best
}

fn check_autoencoder_dims(dims: &[usize]) -> Result<usize> {
    if dims.len() < 3 {
        return Err(Error::InvalidParameter(
            "an autoencoder needs input, bottleneck, and output widths".into(),
        ));
    }
    let n = dims.len();
    if (0..n / 2).any(|i| dims[i] != dims[n - 1 - i]) {
        return Err(Error::InvalidParameter(format!(
            "autoencoder widths {dims:?} are not symmetric"
        )));
    }
    let b = bottleneck_index(dims);
    if b == 0 || b == n - 1 {
        return Err(Error::InvalidParameter(format!(
            "autoencoder widths {dims:?} have no interior bottleneck"
        )));
    }
    Ok(b)
}

/// Seeded He-uniform autoencoder with the given layer activations.
pub fn init_autoencoder(dims: &[usize], options: AutoencoderOptions, seed: u64) -> Result<Mlp> {
    let b = check_autoencoder_dims(dims)?;
    let layers = dims.len() - 1;
    let acts: Vec<Activation> = (0..layers)
        .map(|l| {
            if l == layers - 1 {
                options.output
            } else if l + 1 == b {
                options.bottleneck
            } else {
                options.hidden
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::he_uniform(dims, &acts, &mut rng)
}

/// ReLU encoder with a linear output layer.
pub fn init_encoder(dims: &[usize], seed: u64) -> Result<Mlp> {
    let n = dims.len().saturating_sub(1);
    let mut acts = vec![Activation::Relu; n];
    if let Some(last) = acts.last_mut() {
        *last = Activation::Linear;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::he_uniform(dims, &acts, &mut rng)
}

/// Sums chunk results in chunk order.
fn chunked<T, F>(items: &[T], parallel: bool, num_params: usize, f: F) -> Result<(f64, Vec<f64>)>
where
    T: Sync,
    F: Fn(&[T], &mut [f64]) -> Result<f64> + Sync,
{
    let run = |chunk: &[T]| -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; num_params];
        let loss = f(chunk, &mut g)?;
        Ok((loss, g))
    };
    let parts: Vec<Result<(f64, Vec<f64>)>> = if parallel {
        items.par_chunks(CHUNK).map(run).collect()
    } else {
        items.chunks(CHUNK).map(run).collect()
    };
    let mut loss = 0.0;
    let mut grads = vec![0.0; num_params];
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grads.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((loss, grads))
}

/// Trains `model` to reproduce its inputs under mean squared error. Returns
/// the mean loss of each epoch.
pub fn fit_reconstruction(model: &mut Mlp, data: &MemoryStore, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate(false)?;
    if model.input_dim() != data.dim() || model.output_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: model.input_dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1));
    let mut state = OptimizerState::new(config.optimizer, model.num_params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let denom = batch.len() * model.output_dim();
            let net = &*model;
            let (loss, grads) = chunked(batch, config.parallel, net.num_params(), |idx, g| {
                let pairs: Vec<(&[f64], &[f64])> =
                    idx.iter().map(|&i| (data.column(i), data.column(i))).collect();
                accumulate_mse(net, &pairs, denom, g)
            })?;
            epoch_loss += loss * batch.len() as f64;
            state.step(
                model.params_mut(),
                &grads,
                config.learning_rate,
                config.weight_decay,
            );
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct TrainedAutoencoder {
    pub model: Mlp,
    pub encoder: FeatureMap,
    pub decoder: GenerativeMap,
    pub history: Vec<f64>,
}

/// Trains an autoencoder with widths `dims` and splits it at the bottleneck
/// into a feature map and a generative map.
pub fn train_autoencoder(
    data: &MemoryStore,
    dims: &[usize],
    config: &TrainConfig,
    options: AutoencoderOptions,
) -> Result<TrainedAutoencoder> {
    let b = check_autoencoder_dims(dims)?;
    if dims[0] != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: dims[0],
            actual: data.dim(),
        });
    }
    let mut model = init_autoencoder(dims, options, config.seed)?;
    let history = fit_reconstruction(&mut model, data, config)?;
    let (enc, dec) = model.split_at(b)?;
    Ok(TrainedAutoencoder {
        model,
        encoder: FeatureMap::MlpEncoder(enc),
        decoder: GenerativeMap::MlpDecoder(dec),
        history,
    })
}

#[derive(Debug, Clone)]
pub struct TrainedEncoder {
    pub model: Mlp,
    pub encoder: FeatureMap,
    pub history: Vec<f64>,
}

/// Draws two augmented views of every item in `batch`.
pub fn augmented_views(
    data: &MemoryStore,
    batch: &[usize],
    pipeline: &AugmentationPipeline,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let mut views = Vec::with_capacity(2 * batch.len());
    for &i in batch {
        let item = data.item(i);
        for _ in 0..2 {
            let spec = pipeline.draw(rng);
            views.push(corrupt(&item, &spec)?.into_values());
        }
    }
    Ok(views)
}

/// Loss and parameter gradient of NT-Xent for one set of input views.
pub fn contrastive_step(model: &Mlp, inputs: &[Vec<f64>], config: &TrainConfig) -> Result<(f64, Vec<f64>)> {
    let traces = inputs
        .iter()
        .map(|x| model.forward_traced(x))
        .collect::<Result<Vec<_>>>()?;
    let batch = ContrastiveBatch::new(traces.iter().map(|t| t.output().to_vec()).collect())?;
    let (loss, d_views) = nt_xent_loss_grad(
        &batch,
        config.contrastive_similarity,
        config.temperature,
        config.denominator,
    )?;
    let pairs: Vec<(&crate::nn::mlp::Trace, &Vec<f64>)> = traces.iter().zip(&d_views).collect();
    let (_, grads) = chunked(&pairs, config.parallel, model.num_params(), |part, g| {
        for (trace, d) in part {
            model.backward(trace, d, g)?;
        }
        Ok(0.0)
    })?;
    Ok((loss, grads))
}

/// Trains an MLP encoder with the NT-Xent objective over augmented pairs.
/// The encoder uses ReLU hidden layers and a linear output.
pub fn train_contrastive(
    data: &MemoryStore,
    pipeline: &AugmentationPipeline,
    dims: &[usize],
    config: &TrainConfig,
) -> Result<TrainedEncoder> {
    config.validate(true)?;
    if dims.first() != Some(&data.dim()) {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: dims.first().copied().unwrap_or(0),
        });
    }
    if data.len() < 2 {
        return Err(Error::InvalidParameter(
            "contrastive training needs at least two items".into(),
        ));
    }
    let mut model = init_encoder(dims, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let mut state = OptimizerState::new(config.optimizer, model.num_params());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let views = augmented_views(data, batch, pipeline, &mut rng)?;
            let (loss, grads) = contrastive_step(&model, &views, config)?;
            state.step(
                model.params_mut(),
                &grads,
                config.learning_rate,
                config.weight_decay,
            );
            total += loss;
            batches += 1;
        }
        history.push(total / batches.max(1) as f64);
    }
    Ok(TrainedEncoder {
        encoder: FeatureMap::MlpEncoder(model.clone()),
        model,
        history,
    })
}
