use ndarray::{Array1, Array2, Axis};

use crate::data::BOS_ID;
use crate::error::{Error, Result};
use crate::model::ModelWeights;

/// The trainable soft prompt.
///
/// Slot `i` feeds `base_embedding + perturbation[i]` to the model, where the
/// base is the frozen beginning-of-sequence embedding. Only the perturbation
/// and the optimizer moments change during training.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    pub perturbation: Array2<f32>,
    pub base_embedding: Array1<f32>,
    pub adam_m: Array2<f32>,
    pub adam_v: Array2<f32>,
    pub step_count: u64,
}

impl PromptState {
    pub fn n_tokens(&self) -> usize {
        self.perturbation.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.perturbation.ncols()
    }

    /// Number of trainable scalars (`n × d`).
    pub fn trainable_count(&self) -> usize {
        self.perturbation.len()
    }

    /// Rows actually placed in front of the text.
    pub fn effective(&self) -> Array2<f32> {
        &self.perturbation + &self.base_embedding.view().insert_axis(Axis(0))
    }
}

/// Starts every slot at the BOS embedding with a zero perturbation. The
/// start is the same for every seed; seeds only drive data order.
pub fn init_prompt(weights: &ModelWeights, n: usize, _seed: u64) -> Result<PromptState> {
    if n == 0 {
        return Err(Error::Config("a prompt needs at least one token".into()));
    }
    let cfg = weights.config();
    // One text token plus the scored position must still fit.
    if n + 2 > cfg.max_seq_len {
        return Err(Error::Capacity(format!(
            "{n} prompt tokens leave no room for text within max_seq_len {}",
            cfg.max_seq_len
        )));
    }
    let d = cfg.embed_dim;
    Ok(PromptState {
        perturbation: Array2::zeros((n, d)),
        base_embedding: weights.token_row(BOS_ID)?,
        adam_m: Array2::zeros((n, d)),
        adam_v: Array2::zeros((n, d)),
        step_count: 0,
    })
}
