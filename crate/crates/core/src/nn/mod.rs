//! Fixed-architecture MLP encoder, decoder and linear classifier.

pub mod dense;
pub mod model;

pub use dense::{Activation, Dense, DenseGrad, Mlp, MlpTrace};
pub use model::{softmax_rows, ClassifierInput, ForwardPass, Gradients, LossWeights, ModelDims, ModelParams};
