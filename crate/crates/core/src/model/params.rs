use ndarray::{Array1, Array2, NdFloat};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;

/// Parameters of one pre-norm transformer block. Matrices act on row
/// vectors: `y = x · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub ln1_gain: Array1<T>,
    pub ln1_bias: Array1<T>,
    pub query: Array2<T>,
    pub key: Array2<T>,
    pub value: Array2<T>,
    pub output: Array2<T>,
    pub ln2_gain: Array1<T>,
    pub ln2_bias: Array1<T>,
    pub ff_in: Array2<T>,
    pub ff_in_bias: Array1<T>,
    pub ff_out: Array2<T>,
    pub ff_out_bias: Array1<T>,
}

/// The full parameter set. Also used as the gradient accumulator during
/// pretraining, since gradients have exactly the same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub token_embedding: Array2<T>,
    pub position_embedding: Array2<T>,
    pub layers: Vec<LayerParams<T>>,
    pub final_gain: Array1<T>,
    pub final_bias: Array1<T>,
}

pub(crate) const EMBEDDING_INIT_STD: f64 = 0.1;
pub(crate) const LINEAR_INIT_STD: f64 = 0.02;

impl<T: NdFloat> Params<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.embed_dim;
        let h = cfg.hidden_dim();
        let layer = || LayerParams {
            ln1_gain: Array1::zeros(d),
            ln1_bias: Array1::zeros(d),
            query: Array2::zeros((d, d)),
            key: Array2::zeros((d, d)),
            value: Array2::zeros((d, d)),
            output: Array2::zeros((d, d)),
            ln2_gain: Array1::zeros(d),
            ln2_bias: Array1::zeros(d),
            ff_in: Array2::zeros((d, h)),
            ff_in_bias: Array1::zeros(h),
            ff_out: Array2::zeros((h, d)),
            ff_out_bias: Array1::zeros(d),
        };
        Params {
            token_embedding: Array2::zeros((cfg.vocab_size, d)),
            position_embedding: Array2::zeros((cfg.max_seq_len, d)),
            layers: (0..cfg.num_layers).map(|_| layer()).collect(),
            final_gain: Array1::zeros(d),
            final_bias: Array1::zeros(d),
        }
    }

    /// Gaussian initialization: embeddings with std 0.1, projections with
    /// std 0.02, layer-norm gains one and all biases zero. Values are drawn
    /// in manifest order, so the result depends only on the RNG state.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(cfg);
        let one = T::one();
        let emb = Normal::new(0.0, EMBEDDING_INIT_STD).unwrap();
        let lin = Normal::new(0.0, LINEAR_INIT_STD).unwrap();
        for (name, slice) in p.named_slices_mut() {
            let leaf = name.rsplit('.').next().unwrap_or(&name);
            match leaf {
                "token_embedding" | "position_embedding" => {
                    for v in slice {
                        *v = T::from(emb.sample(rng)).unwrap();
                    }
                }
                "gain" => slice.fill(one),
                "bias" => {}
                _ => {
                    for v in slice {
                        *v = T::from(lin.sample(rng)).unwrap();
                    }
                }
            }
        }
        p
    }

    /// Canonical tensor names and shapes, in manifest order.
    pub fn manifest(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let d = cfg.embed_dim;
        let h = cfg.hidden_dim();
        let mut out = vec![
            ("token_embedding".to_string(), vec![cfg.vocab_size, d]),
            ("position_embedding".to_string(), vec![cfg.max_seq_len, d]),
        ];
        for i in 0..cfg.num_layers {
            let shapes: [(&str, Vec<usize>); 12] = [
                ("ln1.gain", vec![d]),
                ("ln1.bias", vec![d]),
                ("attn.query", vec![d, d]),
                ("attn.key", vec![d, d]),
                ("attn.value", vec![d, d]),
                ("attn.output", vec![d, d]),
                ("ln2.gain", vec![d]),
                ("ln2.bias", vec![d]),
                ("ff.in", vec![d, h]),
                ("ff.in.bias", vec![h]),
                ("ff.out", vec![h, d]),
                ("ff.out.bias", vec![d]),
            ];
            for (name, shape) in shapes {
                out.push((format!("layers.{i}.{name}"), shape));
            }
        }
        out.push(("final_norm.gain".to_string(), vec![d]));
        out.push(("final_norm.bias".to_string(), vec![d]));
        out
    }

    pub fn named_slices(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![
            ("token_embedding".into(), self.token_embedding.as_slice().unwrap()),
            ("position_embedding".into(), self.position_embedding.as_slice().unwrap()),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let items: [(&str, &[T]); 12] = [
                ("ln1.gain", l.ln1_gain.as_slice().unwrap()),
                ("ln1.bias", l.ln1_bias.as_slice().unwrap()),
                ("attn.query", l.query.as_slice().unwrap()),
                ("attn.key", l.key.as_slice().unwrap()),
                ("attn.value", l.value.as_slice().unwrap()),
                ("attn.output", l.output.as_slice().unwrap()),
                ("ln2.gain", l.ln2_gain.as_slice().unwrap()),
                ("ln2.bias", l.ln2_bias.as_slice().unwrap()),
                ("ff.in", l.ff_in.as_slice().unwrap()),
                ("ff.in.bias", l.ff_in_bias.as_slice().unwrap()),
                ("ff.out", l.ff_out.as_slice().unwrap()),
                ("ff.out.bias", l.ff_out_bias.as_slice().unwrap()),
            ];
            for (name, s) in items {
                out.push((format!("layers.{i}.{name}"), s));
            }
        }
        out.push(("final_norm.gain".into(), self.final_gain.as_slice().unwrap()));
        out.push(("final_norm.bias".into(), self.final_bias.as_slice().unwrap()));
        out
    }

    pub fn named_slices_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = vec![
            ("token_embedding".into(), self.token_embedding.as_slice_mut().unwrap()),
            ("position_embedding".into(), self.position_embedding.as_slice_mut().unwrap()),
        ];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let items: [(&str, &mut [T]); 12] = [
                ("ln1.gain", l.ln1_gain.as_slice_mut().unwrap()),
                ("ln1.bias", l.ln1_bias.as_slice_mut().unwrap()),
                ("attn.query", l.query.as_slice_mut().unwrap()),
                ("attn.key", l.key.as_slice_mut().unwrap()),
                ("attn.value", l.value.as_slice_mut().unwrap()),
                ("attn.output", l.output.as_slice_mut().unwrap()),
                ("ln2.gain", l.ln2_gain.as_slice_mut().unwrap()),
                ("ln2.bias", l.ln2_bias.as_slice_mut().unwrap()),
                ("ff.in", l.ff_in.as_slice_mut().unwrap()),
                ("ff.in.bias", l.ff_in_bias.as_slice_mut().unwrap()),
                ("ff.out", l.ff_out.as_slice_mut().unwrap()),
                ("ff.out.bias", l.ff_out_bias.as_slice_mut().unwrap()),
            ];
            for (name, s) in items {
                out.push((format!("layers.{i}.{name}"), s));
            }
        }
        out.push(("final_norm.gain".into(), self.final_gain.as_slice_mut().unwrap()));
        out.push(("final_norm.bias".into(), self.final_bias.as_slice_mut().unwrap()));
        out
    }

    /// Elementwise conversion to another float type (used for the 64-bit
    /// verification mode).
    pub fn cast<U: NdFloat>(&self) -> Params<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::from(v).unwrap());
        let c2 = |a: &Array2<T>| a.mapv(|v| U::from(v).unwrap());
        Params {
            token_embedding: c2(&self.token_embedding),
            position_embedding: c2(&self.position_embedding),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    ln1_gain: c1(&l.ln1_gain),
                    ln1_bias: c1(&l.ln1_bias),
                    query: c2(&l.query),
                    key: c2(&l.key),
                    value: c2(&l.value),
                    output: c2(&l.output),
                    ln2_gain: c1(&l.ln2_gain),
                    ln2_bias: c1(&l.ln2_bias),
                    ff_in: c2(&l.ff_in),
                    ff_in_bias: c1(&l.ff_in_bias),
                    ff_out: c2(&l.ff_out),
                    ff_out_bias: c1(&l.ff_out_bias),
                })
                .collect(),
            final_gain: c1(&self.final_gain),
            final_bias: c1(&self.final_bias),
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.named_slices().iter().map(|(_, s)| s.len()).sum()
    }
}
