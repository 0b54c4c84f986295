//! A small causal decoder-only transformer whose weights are frozen once
//! trained.
//!
//! The functions at this level are the 32-bit execution path. The generic
//! [`Engine`] runs the same computation in `f64` for gradient verification:
//!
//! ```
//! use pbl::model::{embed_tokens, Engine, ModelConfig, ModelWeights, Params};
//! use rand::SeedableRng;
//!
//! let cfg = ModelConfig { vocab_size: 20, embed_dim: 8, num_layers: 1,
//!                         num_heads: 2, max_seq_len: 8, ff_multiplier: 2 };
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
//! let weights = ModelWeights::new(cfg, Params::init(&cfg, &mut rng)).unwrap();
//! let seq = embed_tokens(&weights, &[1, 2, 3]).unwrap();
//!
//! let wide = weights.to_f64();
//! let logits = Engine::new(&cfg, &wide).logits(&seq.cast::<f64>().vectors).unwrap();
//! assert_eq!(logits.dim(), (3, 20));
//! ```

mod config;
mod params;
mod pretrain;
mod transformer;
mod weights;

use std::path::Path;

use ndarray::Array2;

pub use config::ModelConfig;
pub use params::{LayerParams, Params};
pub use pretrain::{mean_next_token_loss, pretrain_lm, pretrain_with, PretrainOptions};
pub use transformer::{log_softmax, Engine, ForwardCache, LossSpec};
pub use weights::{embed_tokens, EmbeddedSequence, ModelWeights, CHECKPOINT_KIND};

use crate::error::Result;

pub fn load_checkpoint(path: &Path) -> Result<ModelWeights> {
    ModelWeights::load_checkpoint(path)
}

pub fn save_checkpoint(weights: &ModelWeights, path: &Path) -> Result<()> {
    weights.save_checkpoint(path).map(|_| ())
}

/// Next-token logits for every position, `seq_len × vocab_size`.
pub fn forward(weights: &ModelWeights, seq: &EmbeddedSequence) -> Result<Array2<f32>> {
    weights.engine().logits(&seq.vectors)
}

/// Log-softmax values of the final position at the three verbalizer ids, in
/// the order given.
pub fn label_log_probs(
    weights: &ModelWeights,
    seq: &EmbeddedSequence,
    verbalizer_ids: [usize; 3],
) -> Result<[f32; 3]> {
    weights.engine().label_log_probs(&seq.vectors, verbalizer_ids)
}

/// Gradient of the final-position cross-entropy against the target
/// verbalizer, with respect to the input embedding rows only.
pub fn backward_to_embeddings(
    weights: &ModelWeights,
    seq: &EmbeddedSequence,
    loss: &LossSpec,
) -> Result<Array2<f32>> {
    weights
        .engine()
        .label_loss_and_input_grad(&seq.vectors, loss)
        .map(|(_, g)| g)
}

#[cfg(test)]
mod tests;
