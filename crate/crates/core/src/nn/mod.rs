//! Dense multilayer perceptrons with hand-written backpropagation, the MSE and
//! NT-Xent objectives, finite-difference gradient checking, and training loops.

pub mod contrastive;
pub mod gradcheck;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod train;

pub use contrastive::{nt_xent_loss_grad, ContrastiveBatch, ContrastiveSimilarity, Denominator};
pub use gradcheck::{GradCheck, GradCheckReport};
pub use loss::mse_loss_grad;
pub use mlp::{Activation, Mlp, Trace};
pub use optim::{Optimizer, OptimizerState};
pub use train::{
    augmented_views, bottleneck_index, contrastive_step, fit_reconstruction, init_autoencoder, init_encoder,
    train_autoencoder, train_contrastive, AutoencoderOptions, TrainConfig, TrainedAutoencoder,
    TrainedEncoder, DEFAULT_AUTOENCODER_DIMS,
};
