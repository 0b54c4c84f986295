use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture hyperparameters of the decoder-only transformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_seq_len: usize,
    pub ff_multiplier: usize,
}

impl ModelConfig {
    /// Two layers, four heads, width 128: trains in minutes on one core.
    pub fn toy(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 128,
            num_layers: 2,
            num_heads: 4,
            max_seq_len: 64,
            ff_multiplier: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("max_seq_len", self.max_seq_len),
            ("ff_multiplier", self.ff_multiplier),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn hidden_dim(&self) -> usize {
        self.ff_multiplier * self.embed_dim
    }

    /// Number of scalar parameters, counted analytically from the shapes.
    /// The output projection is tied to the token embedding and is not
    /// counted twice.
    pub fn parameter_count(&self) -> u64 {
        let d = self.embed_dim as u64;
        let h = self.hidden_dim() as u64;
        let per_layer = 2 * d + 4 * d * d + 2 * d + (d * h + h) + (h * d + d);
        (self.vocab_size as u64) * d
            + (self.max_seq_len as u64) * d
            + (self.num_layers as u64) * per_layer
            + 2 * d
    }

    /// Trainable share of a soft prompt with `n_prompt_tokens` slots:
    /// `n * d / total`.
    pub fn prompt_parameter_fraction(&self, n_prompt_tokens: usize) -> f64 {
        (n_prompt_tokens * self.embed_dim) as f64 / self.parameter_count() as f64
    }
}
