//! Soft-prompt tuning against a frozen model.

mod prompt;
mod snapshot;
mod stopping;
mod sweep;
mod train;

use serde::{Deserialize, Serialize};

pub use prompt::{init_prompt, PromptState};
pub use snapshot::{
    load_snapshot, read_trace_csv, save_snapshot, trace_csv, PromptSnapshot, SNAPSHOT_KIND,
};
pub use stopping::should_stop;
pub use sweep::{run_sweep, select_top_k, SweepOutcome, SweepPlan};
pub use train::{
    argmax_class, evaluate, predict, prompted_input, training_step, tune_prompt, validate,
    verbalizer_ids, EvalSummary, Prediction, TuningRunRecord,
};

use crate::error::{Error, Result};
use crate::optim::AdamConfig;

/// Hyperparameters of one tuning run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub learning_rate: f64,
    pub n_prompt_tokens: usize,
    pub batch_size: usize,
    /// Steps between evaluation-loss measurements.
    pub eval_interval: u64,
    pub warmup_steps_before_stopping: u64,
    pub stopping_window: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            learning_rate: 1e-3,
            n_prompt_tokens: 8,
            batch_size: 32,
            eval_interval: 100,
            warmup_steps_before_stopping: 2500,
            stopping_window: 5,
            max_steps: 20_000,
            seed: 0,
            weight_decay: 0.0,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.stopping_window == 0 {
            return Err(Error::Config("stopping_window must be at least 1".into()));
        }
        for (name, v) in [
            ("n_prompt_tokens", self.n_prompt_tokens as u64),
            ("batch_size", self.batch_size as u64),
            ("eval_interval", self.eval_interval),
            ("max_steps", self.max_steps),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: self.weight_decay,
            ..AdamConfig::with_learning_rate(self.learning_rate)
        }
    }
}

#[cfg(test)]
mod tests;
