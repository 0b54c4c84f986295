use std::borrow::Borrow;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{init_prompt, PromptState};
use super::stopping::should_stop;
use super::TuningConfig;
use crate::data::{LabeledExample, Sentiment, RESERVED};
use crate::error::{Error, Result};
use crate::model::{LossSpec, ModelWeights};
use crate::optim::adam_update;

/// Verbalizer ids in class order. They are reserved tokens with fixed ids.
pub fn verbalizer_ids() -> [usize; 3] {
    let base = RESERVED.len() - 3;
    Sentiment::ALL.map(|c| base + c.index())
}

/// Outcome of one tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningRunRecord {
    pub seed: u64,
    pub learning_rate: f64,
    pub final_validation_accuracy: f64,
    pub steps_taken: u64,
    pub eval_loss_trace: Vec<(u64, f64)>,
    pub prompt: PromptState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: Sentiment,
    pub log_probs: [f32; 3],
}

/// Class with the highest score; ties go to the earlier class in the order
/// negative, neutral, positive.
pub fn argmax_class(scores: &[f32; 3]) -> Sentiment {
    let mut best = 0;
    for i in 1..3 {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    Sentiment::ALL[best]
}

/// Builds `[prompt ; text]` input rows, enforcing that the prompt, the text
/// and the scored position fit in the context window.
pub fn prompted_input(
    weights: &ModelWeights,
    prompt: &PromptState,
    token_ids: &[usize],
) -> Result<Array2<f32>> {
    let cfg = weights.config();
    let n = prompt.n_tokens();
    if token_ids.is_empty() {
        return Err(Error::Data("example has no tokens".into()));
    }
    if n + token_ids.len() + 1 > cfg.max_seq_len {
        return Err(Error::Capacity(format!(
            "{} prompt + {} text tokens + 1 exceed max_seq_len {}",
            n,
            token_ids.len(),
            cfg.max_seq_len
        )));
    }
    let table = &weights.params().token_embedding;
    let mut rows = Array2::zeros((n + token_ids.len(), cfg.embed_dim));
    rows.slice_mut(s![..n, ..]).assign(&prompt.effective());
    for (i, &id) in token_ids.iter().enumerate() {
        if id >= table.nrows() {
            return Err(Error::Vocabulary {
                id,
                vocab_size: table.nrows(),
            });
        }
        rows.row_mut(n + i).assign(&table.row(id));
    }
    Ok(rows)
}

pub fn predict(weights: &ModelWeights, prompt: &PromptState, token_ids: &[usize]) -> Result<Prediction> {
    let x = prompted_input(weights, prompt, token_ids)?;
    let log_probs = weights.engine().label_log_probs(&x, verbalizer_ids())?;
    Ok(Prediction {
        class: argmax_class(&log_probs),
        log_probs,
    })
}

/// One Adam step on the mean verbalizer cross-entropy of `batch`. Returns
/// the batch loss measured before the update.
pub fn training_step<E: Borrow<LabeledExample>>(
    prompt: &mut PromptState,
    weights: &ModelWeights,
    batch: &[E],
    cfg: &TuningConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Data("training batch is empty".into()));
    }
    let n = prompt.n_tokens();
    let engine = weights.engine();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = Array2::<f32>::zeros(prompt.perturbation.dim());
    let mut loss = 0.0f64;
    for (i, ex) in batch.iter().enumerate() {
        let ex = ex.borrow();
        let x = prompted_input(weights, prompt, &ex.token_ids)
            .map_err(|e| annotate(e, i, &ex.text))?;
        let spec = LossSpec {
            verbalizer_ids: verbalizer_ids(),
            target: ex.label.index(),
            scale,
        };
        let (l, g) = engine.label_loss_and_input_grad(&x, &spec)?;
        loss += l as f64;
        grad += &g.slice(s![..n, ..]);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite batch loss {loss}")));
    }
    prompt.step_count += 1;
    adam_update(
        &cfg.adam(),
        prompt.step_count,
        prompt.perturbation.as_slice_mut().expect("standard layout"),
        grad.as_slice().expect("standard layout"),
        prompt.adam_m.as_slice_mut().expect("standard layout"),
        prompt.adam_v.as_slice_mut().expect("standard layout"),
    );
    Ok(loss)
}

fn annotate(e: Error, index: usize, text: &str) -> Error {
    match e {
        Error::Capacity(msg) => Error::Capacity(format!("example {index} ({text:?}): {msg}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<Sentiment>,
}

/// Mean verbalizer cross-entropy and accuracy over `dataset`.
pub fn evaluate(weights: &ModelWeights, prompt: &PromptState, dataset: &[LabeledExample]) -> Result<EvalSummary> {
    if dataset.is_empty() {
        return Err(Error::Data("evaluation dataset is empty".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(dataset.len());
    for (i, ex) in dataset.iter().enumerate() {
        let p = predict(weights, prompt, &ex.token_ids).map_err(|e| annotate(e, i, &ex.text))?;
        loss -= p.log_probs[ex.label.index()] as f64;
        if p.class == ex.label {
            correct += 1;
        }
        predictions.push(p.class);
    }
    Ok(EvalSummary {
        loss: loss / dataset.len() as f64,
        accuracy: correct as f64 / dataset.len() as f64,
        predictions,
    })
}

/// Fraction of examples whose highest-scoring verbalizer is the gold label.
pub fn validate(prompt: &PromptState, weights: &ModelWeights, dataset: &[LabeledExample]) -> Result<f64> {
    evaluate(weights, prompt, dataset).map(|s| s.accuracy)
}

/// Cycles through per-epoch shuffles of `0..len`, seeded once per run.
struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(len: usize, seed: u64) -> Self {
        let mut s = BatchSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..len).collect(),
            cursor: len,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Trains one prompt until early stopping or `max_steps`.
///
/// The evaluation loss for the stopping rule is measured on `validation`
/// every `eval_interval` steps.
pub fn tune_prompt(
    weights: &ModelWeights,
    train: &[LabeledExample],
    validation: &[LabeledExample],
    cfg: &TuningConfig,
) -> Result<TuningRunRecord> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if validation.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    let mut prompt = init_prompt(weights, cfg.n_prompt_tokens, cfg.seed)?;
    let mut sampler = BatchSampler::new(train.len(), cfg.seed);
    let mut trace = Vec::new();
    let mut last_accuracy = None;
    let mut step = 0u64;
    while step < cfg.max_steps {
        step += 1;
        let batch: Vec<&LabeledExample> = sampler
            .next_batch(cfg.batch_size)
            .into_iter()
            .map(|i| &train[i])
            .collect();
        training_step(&mut prompt, weights, &batch, cfg)?;
        if step % cfg.eval_interval == 0 {
            let eval = evaluate(weights, &prompt, validation)?;
            log::debug!(
                "seed {} step {step}: eval loss {:.4} acc {:.3}",
                cfg.seed,
                eval.loss,
                eval.accuracy
            );
            trace.push((step, eval.loss));
            last_accuracy = Some((step, eval.accuracy));
            if should_stop(&trace, cfg) {
                break;
            }
        }
    }
    let accuracy = match last_accuracy {
        Some((s, acc)) if s == step => acc,
        _ => validate(&prompt, weights, validation)?,
    };
    Ok(TuningRunRecord {
        seed: cfg.seed,
        learning_rate: cfg.learning_rate,
        final_validation_accuracy: accuracy,
        steps_taken: step,
        eval_loss_trace: trace,
        prompt,
    })
}
