use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{LabeledExample, Sentiment, BOS_ID};
use crate::error::Error;
use crate::model::{embed_tokens, EmbeddedSequence, ModelConfig, ModelWeights, Params};

fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 24,
        embed_dim: 16,
        num_layers: 2,
        num_heads: 4,
        max_seq_len: 16,
        ff_multiplier: 2,
    }
}

fn tiny_weights(seed: u64) -> ModelWeights {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelWeights::new(cfg, Params::init(&cfg, &mut rng)).unwrap()
}

fn example(ids: &[usize], label: Sentiment) -> LabeledExample {
    LabeledExample {
        text: format!("{ids:?}"),
        token_ids: ids.to_vec(),
        label,
    }
}

fn random_examples(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..6);
            let ids: Vec<usize> = (0..len).map(|_| rng.random_range(6..24)).collect();
            example(&ids, Sentiment::ALL[rng.random_range(0..3)])
        })
        .collect()
}

fn small_cfg(seed: u64) -> TuningConfig {
    TuningConfig {
        learning_rate: 1e-2,
        n_prompt_tokens: 4,
        batch_size: 4,
        eval_interval: 5,
        warmup_steps_before_stopping: 10,
        stopping_window: 2,
        max_steps: 20,
        seed,
        weight_decay: 0.0,
    }
}

#[test]
fn fresh_prompt_is_the_bos_embedding_in_every_slot() {
    let w = tiny_weights(1);
    let p = init_prompt(&w, 8, 3).unwrap();
    let bos = w.params().token_embedding.row(BOS_ID);
    for row in p.effective().rows() {
        assert_eq!(row, bos);
    }
    assert_eq!(p.step_count, 0);
    assert!(p.adam_m.iter().chain(p.adam_v.iter()).all(|&x| x == 0.0));
}

#[test]
fn prompt_init_ignores_the_seed() {
    let w = tiny_weights(1);
    assert_eq!(init_prompt(&w, 4, 1).unwrap(), init_prompt(&w, 4, 99).unwrap());
}

#[test]
fn toy_prompt_is_a_tiny_fraction_of_the_model() {
    let cfg = ModelConfig::toy(5000);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let w = ModelWeights::new(cfg, Params::init(&cfg, &mut rng)).unwrap();
    let p = init_prompt(&w, 8, 0).unwrap();
    assert_eq!((p.n_tokens(), p.embed_dim()), (8, 128));
    assert_eq!(p.trainable_count(), 1024);
    let fraction = p.trainable_count() as f64 / cfg.parameter_count() as f64;
    assert!(fraction < 0.01, "prompt fraction {fraction}");
    assert!((fraction - cfg.prompt_parameter_fraction(8)).abs() < 1e-15);
}

#[test]
fn prompt_size_is_checked() {
    let w = tiny_weights(1);
    assert!(matches!(init_prompt(&w, 0, 0), Err(Error::Config(_))));
    assert!(matches!(init_prompt(&w, 15, 0), Err(Error::Capacity(_))));
    assert!(init_prompt(&w, 14, 0).is_ok());
}

#[test]
fn overlong_example_is_named_in_the_error() {
    let w = tiny_weights(1);
    let mut p = init_prompt(&w, 8, 0).unwrap();
    let batch = vec![
        example(&[6, 7], Sentiment::Neutral),
        example(&[6; 8], Sentiment::Positive),
    ];
    match training_step(&mut p, &w, &batch, &small_cfg(0)) {
        Err(Error::Capacity(msg)) => assert!(msg.contains("example 1"), "{msg}"),
        other => panic!("expected capacity error, got {other:?}"),
    }
    // 8 + 7 + 1 = 16 fits exactly.
    let fits = vec![example(&[6; 7], Sentiment::Positive)];
    training_step(&mut p, &w, &fits, &small_cfg(0)).unwrap();
}

#[test]
fn training_step_leaves_the_model_untouched() {
    let w = tiny_weights(2);
    let before = w.content_hash();
    let mut p = init_prompt(&w, 4, 0).unwrap();
    let batch = random_examples(6, 5);
    for _ in 0..3 {
        training_step(&mut p, &w, &batch, &small_cfg(0)).unwrap();
    }
    assert_eq!(w.content_hash(), before);
    assert_eq!(p.step_count, 3);
    assert_eq!(p.base_embedding, w.params().token_embedding.row(BOS_ID));
    assert!(p.perturbation.iter().any(|&x| x != 0.0));
}

#[test]
fn batch_loss_is_the_mean_negative_label_log_probability() {
    let w = tiny_weights(3);
    let mut p = init_prompt(&w, 4, 0).unwrap();
    p.perturbation.mapv_inplace(|_| 0.05);
    let batch = random_examples(5, 8);
    let mut expected = 0.0f64;
    for ex in &batch {
        let text = embed_tokens(&w, &ex.token_ids).unwrap();
        let seq = EmbeddedSequence::with_prompt(&p.effective(), &text);
        let lp = crate::model::label_log_probs(&w, &seq, verbalizer_ids()).unwrap();
        expected -= lp[ex.label.index()] as f64;
    }
    expected /= batch.len() as f64;
    let loss = training_step(&mut p, &w, &batch, &small_cfg(0)).unwrap();
    assert!((loss - expected).abs() < 1e-6, "{loss} vs {expected}");
}

#[test]
fn first_step_matches_the_scalar_adam_formula() {
    let w = tiny_weights(4);
    let batch = random_examples(3, 2);
    let cfg = small_cfg(0);
    let p0 = init_prompt(&w, 2, 0).unwrap();

    // Gradient via the same loss the step uses.
    let n = p0.n_tokens();
    let mut g = Array2::<f32>::zeros(p0.perturbation.dim());
    for ex in &batch {
        let x = prompted_input(&w, &p0, &ex.token_ids).unwrap();
        let spec = crate::model::LossSpec {
            verbalizer_ids: verbalizer_ids(),
            target: ex.label.index(),
            scale: 1.0 / batch.len() as f64,
        };
        let (_, gx) = w.engine().label_loss_and_input_grad(&x, &spec).unwrap();
        g += &gx.slice(s![..n, ..]);
    }

    let mut p = p0.clone();
    training_step(&mut p, &w, &batch, &cfg).unwrap();
    for ((&after, &gi), (&m, &v)) in p
        .perturbation
        .iter()
        .zip(g.iter())
        .zip(p.adam_m.iter().zip(p.adam_v.iter()))
    {
        let gi = gi as f64;
        // m' = 0.1 g, v' = 0.001 g², bias corrections 0.1 and 0.001.
        let m1 = 0.1 * gi;
        let v1 = 0.001 * gi * gi;
        let update = cfg.learning_rate * (m1 / 0.1) / ((v1 / 0.001).sqrt() + 1e-8);
        assert!((after as f64 + update).abs() < 1e-7, "{after} vs {}", -update);
        assert!((m as f64 - m1).abs() < 1e-7 * m1.abs().max(1e-3));
        assert!((v as f64 - v1).abs() < 1e-6 * v1.abs().max(1e-9));
    }
}

#[test]
fn zero_gradient_is_a_fixed_point() {
    // With an all-zero model every logit is zero whatever the input, so the
    // prompt receives no gradient.
    let cfg = tiny_config();
    let w = ModelWeights::new(cfg, Params::zeros(&cfg)).unwrap();
    let mut p = init_prompt(&w, 3, 0).unwrap();
    let batch = vec![example(&[6, 7], Sentiment::Positive); 4];
    for _ in 0..5 {
        training_step(&mut p, &w, &batch, &small_cfg(0)).unwrap();
    }
    assert!(p.perturbation.iter().all(|&x| (x as f64).abs() < 1e-12));
}

#[test]
fn argmax_ties_follow_class_order() {
    assert_eq!(argmax_class(&[-1.0, -1.0, -1.0]), Sentiment::Negative);
    assert_eq!(argmax_class(&[-2.0, -1.0, -1.0]), Sentiment::Neutral);
    assert_eq!(argmax_class(&[-2.0, -3.0, -1.0]), Sentiment::Positive);
}

#[test]
fn validation_accuracy_counts_argmax_hits() {
    let w = tiny_weights(5);
    let p = init_prompt(&w, 2, 0).unwrap();
    let inputs: Vec<Vec<usize>> = vec![vec![6, 7], vec![9], vec![12, 13, 14]];
    let preds: Vec<Sentiment> = inputs.iter().map(|ids| predict(&w, &p, ids).unwrap().class).collect();
    let wrong = |c: Sentiment| Sentiment::ALL[(c.index() + 1) % 3];

    let all_right: Vec<_> = inputs.iter().zip(&preds).map(|(i, &c)| example(i, c)).collect();
    assert_eq!(validate(&p, &w, &all_right).unwrap(), 1.0);

    let one_wrong = vec![example(&inputs[0], wrong(preds[0]))];
    assert_eq!(validate(&p, &w, &one_wrong).unwrap(), 0.0);

    let mut two_of_three = all_right.clone();
    two_of_three[2].label = wrong(preds[2]);
    assert!((validate(&p, &w, &two_of_three).unwrap() - 2.0 / 3.0).abs() < 1e-12);

    assert!(matches!(validate(&p, &w, &[]), Err(Error::Data(_))));
}

#[test]
fn trace_steps_increase_and_accuracy_is_bounded() {
    let w = tiny_weights(6);
    let train = random_examples(12, 1);
    let val = random_examples(6, 2);
    let run = tune_prompt(&w, &train, &val, &small_cfg(7)).unwrap();
    assert!(run.eval_loss_trace.windows(2).all(|p| p[0].0 < p[1].0));
    assert!((0.0..=1.0).contains(&run.final_validation_accuracy));
    assert_eq!(run.prompt.step_count, run.steps_taken);
    assert!(run.steps_taken <= 20);
}

#[test]
fn sweep_is_deterministic_and_ranked() {
    let w = tiny_weights(7);
    let train = random_examples(12, 3);
    let val = random_examples(9, 4);
    let plan = SweepPlan {
        learning_rates: vec![1e-2, 1e-3],
        seeds: vec![11, 12, 13, 14],
        top_k: 2,
        base: small_cfg(0),
    };
    let a = run_sweep(&w, &train, &val, &plan).unwrap();
    let b = run_sweep(&w, &train, &val, &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.selected.len(), 2);
    assert_eq!(a.runs.len(), 4);
    assert_eq!(a.grid_scores.len(), 2);
    assert!(a.runs.iter().all(|r| r.learning_rate == a.chosen_learning_rate));
    assert!(a.selected[0].final_validation_accuracy >= a.selected[1].final_validation_accuracy);
    let best = a.runs.iter().map(|r| r.final_validation_accuracy).fold(0.0, f64::max);
    assert_eq!(a.selected[0].final_validation_accuracy, best);
}

#[test]
fn sweep_rejects_top_k_above_seed_count() {
    let w = tiny_weights(7);
    let data = random_examples(4, 3);
    let plan = SweepPlan {
        learning_rates: vec![1e-2],
        seeds: vec![1, 2],
        top_k: 3,
        base: small_cfg(0),
    };
    assert!(matches!(run_sweep(&w, &data, &data, &plan), Err(Error::Config(_))));
}

#[test]
fn snapshot_round_trip_and_checkpoint_binding() {
    let dir = tempfile::tempdir().unwrap();
    let w = tiny_weights(8);
    let train = random_examples(8, 5);
    let run = tune_prompt(&w, &train, &train, &small_cfg(3)).unwrap();
    let path = dir.path().join("prompt.bin");
    save_snapshot(&path, &run, &w).unwrap();
    let snap = load_snapshot(&path, &w).unwrap();
    assert_eq!(snap.prompt, run.prompt);
    assert_eq!(snap.metadata.seed, 3);
    assert_eq!(snap.metadata.validation_accuracy, run.final_validation_accuracy);

    let other = tiny_weights(9);
    assert!(matches!(load_snapshot(&path, &other), Err(Error::Compatibility(_))));
}
