use ndarray::{Array2, NdFloat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::Params;
use super::transformer::{log_softmax, Engine};
use super::weights::ModelWeights;
use crate::error::{Error, Result};
use crate::optim::{adam_update, AdamConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainOptions {
    pub steps: usize,
    pub seed: u64,
    /// Sequences per update.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub clip_norm: f64,
}

impl PretrainOptions {
    pub fn new(steps: usize, seed: u64) -> Self {
        PretrainOptions {
            steps,
            seed,
            batch_size: 8,
            learning_rate: 3e-3,
            clip_norm: 1.0,
        }
    }
}

/// Trains a fresh model by next-token cross-entropy. The result is meant to
/// be frozen afterwards; see [`pretrain_with`] for the knobs.
pub fn pretrain_lm(
    config: &ModelConfig,
    corpus: &[Vec<usize>],
    steps: usize,
    seed: u64,
) -> Result<ModelWeights> {
    pretrain_with(config, corpus, &PretrainOptions::new(steps, seed))
}

fn usable_sequences<'c>(config: &ModelConfig, corpus: &'c [Vec<usize>]) -> Result<Vec<&'c [usize]>> {
    if corpus.is_empty() {
        return Err(Error::Data("pretraining corpus is empty".into()));
    }
    let seqs: Vec<&[usize]> = corpus
        .iter()
        .map(|s| &s[..s.len().min(config.max_seq_len)])
        .filter(|s| s.len() >= 2)
        .collect();
    if seqs.is_empty() {
        return Err(Error::Data(
            "pretraining corpus has no sequence with at least two tokens".into(),
        ));
    }
    for s in &seqs {
        if let Some(&id) = s.iter().find(|&&id| id >= config.vocab_size) {
            return Err(Error::Vocabulary {
                id,
                vocab_size: config.vocab_size,
            });
        }
    }
    Ok(seqs)
}

pub fn pretrain_with(
    config: &ModelConfig,
    corpus: &[Vec<usize>],
    opts: &PretrainOptions,
) -> Result<ModelWeights> {
    config.validate()?;
    let seqs = usable_sequences(config, corpus)?;
    if opts.batch_size == 0 {
        return Err(Error::Config("pretraining batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut params = Params::<f32>::init(config, &mut rng);
    let mut m = Params::<f32>::zeros(config);
    let mut v = Params::<f32>::zeros(config);
    let adam = AdamConfig::with_learning_rate(opts.learning_rate);

    for step in 1..=opts.steps {
        let mut grads = Params::<f32>::zeros(config);
        let mut predicted = 0usize;
        let mut loss_sum = 0.0f64;
        for _ in 0..opts.batch_size {
            let seq = seqs[rng.random_range(0..seqs.len())];
            let engine = Engine::new(config, &params);
            loss_sum += sequence_loss_and_grad(&engine, seq, Some(&mut grads))?;
            predicted += seq.len() - 1;
        }
        let inv = 1.0 / predicted as f32;
        let mut sq_norm = 0.0f64;
        for (_, g) in grads.named_slices_mut() {
            for x in g.iter_mut() {
                *x *= inv;
                sq_norm += (*x as f64) * (*x as f64);
            }
        }
        if !sq_norm.is_finite() {
            return Err(Error::Numerical(format!("non-finite gradient at pretraining step {step}")));
        }
        let norm = sq_norm.sqrt();
        if opts.clip_norm > 0.0 && norm > opts.clip_norm {
            let k = (opts.clip_norm / norm) as f32;
            for (_, g) in grads.named_slices_mut() {
                g.iter_mut().for_each(|x| *x *= k);
            }
        }
        let g_slices = grads.named_slices();
        for (((_, p), (_, mm)), ((_, vv), (_, g))) in params
            .named_slices_mut()
            .into_iter()
            .zip(m.named_slices_mut())
            .zip(v.named_slices_mut().into_iter().zip(g_slices))
        {
            adam_update(&adam, step as u64, p, g, mm, vv);
        }
        if step % 200 == 0 || step == opts.steps {
            log::debug!(
                "pretrain step {step}: loss {:.4}",
                loss_sum / predicted as f64
            );
        }
    }
    ModelWeights::new(*config, params)
}

/// Summed next-token cross-entropy of one sequence. With `grads`, the
/// gradient of that sum is accumulated, including the tied embedding's
/// lookup and output-projection contributions.
pub(crate) fn sequence_loss_and_grad<T: NdFloat>(
    engine: &Engine<'_, T>,
    seq: &[usize],
    grads: Option<&mut Params<T>>,
) -> Result<f64> {
    let table = &engine.params.token_embedding;
    let len = seq.len();
    let mut inputs = Array2::zeros((len, engine.cfg.embed_dim));
    for (i, &id) in seq.iter().enumerate() {
        inputs.row_mut(i).assign(&table.row(id));
    }
    let cache = engine.forward(&inputs)?;
    let logits = cache.hidden.dot(&table.t());
    let mut d_logits = Array2::<T>::zeros(logits.dim());
    let mut loss = 0.0f64;
    for pos in 0..len - 1 {
        let lp = log_softmax(logits.row(pos));
        let target = seq[pos + 1];
        loss -= lp[target].to_f64().unwrap();
        let mut row = d_logits.row_mut(pos);
        row.assign(&lp.mapv(|v| v.exp()));
        row[target] -= T::one();
    }
    if let Some(g) = grads {
        g.token_embedding += &d_logits.t().dot(&cache.hidden);
        let d_hidden = d_logits.dot(table);
        let d_inputs = engine.backward(&d_hidden, &cache, Some(g))?;
        for (i, &id) in seq.iter().enumerate() {
            let mut row = g.token_embedding.row_mut(id);
            row += &d_inputs.row(i);
        }
    }
    Ok(loss)
}

/// Mean next-token cross-entropy over every predicted position of the
/// corpus.
pub fn mean_next_token_loss(weights: &ModelWeights, corpus: &[Vec<usize>]) -> Result<f64> {
    let seqs = usable_sequences(weights.config(), corpus)?;
    let engine = weights.engine();
    let mut total = 0.0;
    let mut count = 0usize;
    for seq in seqs {
        total += sequence_loss_and_grad(&engine, seq, None)?;
        count += seq.len() - 1;
    }
    Ok(total / count as f64)
}
