use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::tensor_file::TensorFile;

fn tiny_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 24,
        embed_dim: 16,
        num_layers: 2,
        num_heads: 4,
        max_seq_len: 12,
        ff_multiplier: 2,
    }
}

fn tiny_weights(seed: u64) -> ModelWeights {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelWeights::new(cfg, Params::init(&cfg, &mut rng)).unwrap()
}

#[test]
fn repeated_ids_embed_to_identical_rows() {
    let w = tiny_weights(0);
    let seq = embed_tokens(&w, &[7, 7]).unwrap();
    assert_eq!(seq.vectors.row(0), seq.vectors.row(1));
    assert_eq!(seq.vectors.row(0), w.params().token_embedding.row(7));
}

#[test]
fn empty_sequence_embeds_to_empty_matrix() {
    let w = tiny_weights(0);
    let seq = embed_tokens(&w, &[]).unwrap();
    assert_eq!(seq.vectors.nrows(), 0);
    assert!(seq.is_empty());
}

#[test]
fn out_of_range_id_is_a_vocabulary_error() {
    let w = tiny_weights(0);
    let err = embed_tokens(&w, &[1, 24]).unwrap_err();
    assert!(matches!(err, Error::Vocabulary { id: 24, vocab_size: 24 }));
}

#[test]
fn softmax_rows_sum_to_one() {
    let w = tiny_weights(1);
    let seq = embed_tokens(&w, &[0, 5, 9, 3, 11]).unwrap();
    let logits = forward(&w, &seq).unwrap();
    for row in logits.rows() {
        let lp = log_softmax(row);
        let total: f32 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-6, "row sums to {total}");
    }
}

#[test]
fn later_positions_do_not_influence_earlier_logits() {
    let w = tiny_weights(2);
    let base = embed_tokens(&w, &[0, 4, 8, 12, 16, 20]).unwrap();
    let reference = forward(&w, &base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for j in 0..base.len() {
        let mut perturbed = base.clone();
        for v in perturbed.vectors.row_mut(j).iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        let out = forward(&w, &perturbed).unwrap();
        for i in 0..j {
            for (a, b) in out.row(i).iter().zip(reference.row(i)) {
                assert!((a - b).abs() <= 1e-6, "position {i} moved after perturbing {j}");
            }
        }
    }
}

#[test]
fn forward_is_bit_deterministic() {
    let w = tiny_weights(3);
    let seq = embed_tokens(&w, &[1, 2, 3, 4]).unwrap();
    let a = forward(&w, &seq).unwrap();
    let b = forward(&w, &seq).unwrap();
    let bits = |m: &Array2<f32>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn overlong_sequence_is_a_capacity_error() {
    let w = tiny_weights(0);
    let seq = embed_tokens(&w, &[1; 13]).unwrap();
    assert!(matches!(forward(&w, &seq), Err(Error::Capacity(_))));
}

#[test]
fn label_log_probs_are_probabilities() {
    let w = tiny_weights(4);
    let seq = embed_tokens(&w, &[0, 6, 7]).unwrap();
    let lp = label_log_probs(&w, &seq, [3, 4, 5]).unwrap();
    for v in lp {
        assert!(v <= 0.0);
        let p = v.exp();
        assert!(p > 0.0 && p <= 1.0);
    }
}

#[test]
fn all_zero_model_scores_labels_equally() {
    let cfg = tiny_config();
    let w = ModelWeights::new(cfg, Params::zeros(&cfg)).unwrap();
    let seq = embed_tokens(&w, &[0, 6, 7]).unwrap();
    let lp = label_log_probs(&w, &seq, [3, 4, 5]).unwrap();
    assert_eq!(lp[0], lp[1]);
    assert_eq!(lp[1], lp[2]);
}

#[test]
fn empty_sequence_cannot_be_scored() {
    let w = tiny_weights(0);
    let seq = embed_tokens(&w, &[]).unwrap();
    assert!(label_log_probs(&w, &seq, [3, 4, 5]).is_err());
}

fn f64_loss(cfg: &ModelConfig, params: &Params<f64>, x: &Array2<f64>, loss: &LossSpec) -> f64 {
    Engine::new(cfg, params)
        .label_loss_and_input_grad(x, loss)
        .unwrap()
        .0
}

#[test]
fn input_gradient_matches_central_differences() {
    let w = tiny_weights(5);
    let cfg = *w.config();
    let params = w.to_f64();
    let seq = embed_tokens(&w, &[0, 9, 13, 2, 17]).unwrap().cast::<f64>();
    let loss = LossSpec::new([3, 4, 5], 2);
    let (_, grad) = Engine::new(&cfg, &params)
        .label_loss_and_input_grad(&seq.vectors, &loss)
        .unwrap();
    let h = 1e-3;
    let mut worst = 0.0f64;
    for i in 0..seq.len() {
        for k in 0..cfg.embed_dim {
            let mut plus = seq.vectors.clone();
            plus[[i, k]] += h;
            let mut minus = seq.vectors.clone();
            minus[[i, k]] -= h;
            let fd = (f64_loss(&cfg, &params, &plus, &loss) - f64_loss(&cfg, &params, &minus, &loss))
                / (2.0 * h);
            let a = grad[[i, k]];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-10);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn single_position_gradient_is_the_whole_gradient() {
    let w = tiny_weights(6);
    let seq = embed_tokens(&w, &[0]).unwrap();
    let g = backward_to_embeddings(&w, &seq, &LossSpec::new([3, 4, 5], 0)).unwrap();
    assert_eq!(g.dim(), (1, 16));
    assert!(g.iter().any(|v| *v != 0.0));
}

#[test]
fn doubling_the_loss_doubles_the_gradient() {
    let w = tiny_weights(7);
    let seq = embed_tokens(&w, &[0, 3, 8, 1]).unwrap();
    let single = LossSpec::new([3, 4, 5], 1);
    let double = LossSpec { scale: 2.0, ..single };
    let g1 = backward_to_embeddings(&w, &seq, &single).unwrap();
    let g2 = backward_to_embeddings(&w, &seq, &double).unwrap();
    for (a, b) in g1.iter().zip(g2.iter()) {
        assert!((2.0 * a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
    }
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let w = tiny_weights(8).with_metadata(serde_json::json!({"note": "x"}));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let written = w.save_checkpoint(&path).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(written, w.content_hash());
    assert_eq!(back.recorded_hash(), w.recorded_hash());
    assert_eq!(back.params(), w.params());
    assert_eq!(back.metadata(), w.metadata());
}

#[test]
fn truncated_checkpoint_is_an_integrity_error() {
    let w = tiny_weights(0);
    let mut bytes = w.to_tensor_file().to_bytes().unwrap();
    bytes.truncate(bytes.len() - 40);
    let err = TensorFile::from_bytes(&bytes).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)));
}

#[test]
fn checkpoint_with_indivisible_heads_is_a_config_error() {
    let w = tiny_weights(0);
    let mut file = w.to_tensor_file();
    file.config["embed_dim"] = serde_json::json!(130);
    file.config["num_heads"] = serde_json::json!(4);
    let bytes = file.to_bytes().unwrap();
    let (file, hash) = TensorFile::from_bytes(&bytes).unwrap();
    let err = ModelWeights::from_tensor_file(file, hash).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn checkpoint_with_wrong_shape_is_an_integrity_error() {
    let w = tiny_weights(0);
    let mut file = w.to_tensor_file();
    file.config["ff_multiplier"] = serde_json::json!(3);
    let bytes = file.to_bytes().unwrap();
    let (file, hash) = TensorFile::from_bytes(&bytes).unwrap();
    let err = ModelWeights::from_tensor_file(file, hash).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
}

fn toy_corpus() -> Vec<Vec<usize>> {
    (0..20)
        .map(|i| (0..8).map(|j| 6 + (i + j) % 10).collect())
        .collect()
}

#[test]
fn zero_steps_returns_the_seeded_initialization() {
    let cfg = tiny_config();
    let w = pretrain_lm(&cfg, &toy_corpus(), 0, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let init = Params::<f32>::init(&cfg, &mut rng);
    assert_eq!(w.params(), &init);
}

#[test]
fn pretraining_is_deterministic_and_reduces_loss() {
    let cfg = tiny_config();
    let corpus = toy_corpus();
    let a = pretrain_lm(&cfg, &corpus, 60, 3).unwrap();
    let b = pretrain_lm(&cfg, &corpus, 60, 3).unwrap();
    assert_eq!(a.content_hash(), b.content_hash());
    let start = mean_next_token_loss(&pretrain_lm(&cfg, &corpus, 0, 3).unwrap(), &corpus).unwrap();
    let end = mean_next_token_loss(&a, &corpus).unwrap();
    assert!(end < start, "loss {start} -> {end}");
}

#[test]
fn empty_corpus_is_a_data_error() {
    assert!(matches!(
        pretrain_lm(&tiny_config(), &[], 1, 0),
        Err(Error::Data(_))
    ));
}

#[test]
fn weight_gradients_match_central_differences() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = Params::<f64>::init(&cfg, &mut rng);
    let seq = [0usize, 7, 3, 19, 5, 11];
    let mut grads = Params::<f64>::zeros(&cfg);
    pretrain::sequence_loss_and_grad(&Engine::new(&cfg, &params), &seq, Some(&mut grads)).unwrap();

    let names: Vec<String> = params.named_slices().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grads.named_slices().into_iter().map(|(_, s)| s.to_vec()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (t, name) in names.iter().enumerate() {
        for probe in 0..3 {
            let len = analytic[t].len();
            let idx = rng.random_range(0..len);
            let shifted = |delta: f64| {
                let mut p = params.clone();
                p.named_slices_mut()[t].1[idx] += delta;
                pretrain::sequence_loss_and_grad(&Engine::new(&cfg, &p), &seq, None).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let a = analytic[t][idx];
            let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            assert!(err < 1e-4, "{name}[{idx}] probe {probe}: analytic {a} vs fd {fd}");
            worst = worst.max(err);
        }
    }
    assert!(worst.is_finite());
}
