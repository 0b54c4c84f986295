use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, NdFloat};
use serde_json::Value;

use super::config::ModelConfig;
use super::params::Params;
use super::transformer::Engine;
use crate::error::{Error, Result};
use crate::tensor_file::{encode_payload, ContentHash, NamedTensor, TensorFile};

pub const CHECKPOINT_KIND: &str = "pbl-checkpoint";

/// Frozen transformer parameters in 32-bit precision.
///
/// There is no mutable access to the tensors; the hash recorded at
/// construction can be compared against [`ModelWeights::content_hash`] at
/// any later point to prove nothing changed.
#[derive(Debug, Clone)]
pub struct ModelWeights {
    config: ModelConfig,
    params: Params<f32>,
    recorded_hash: ContentHash,
    metadata: Value,
}

impl ModelWeights {
    pub fn new(config: ModelConfig, params: Params<f32>) -> Result<Self> {
        config.validate()?;
        check_shapes(&config, &params)?;
        for (name, slice) in params.named_slices() {
            if slice.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!("tensor {name} holds non-finite values")));
            }
        }
        let recorded_hash = hash_params(&config, &params);
        Ok(ModelWeights {
            config,
            params,
            recorded_hash,
            metadata: Value::Null,
        })
    }

    pub fn with_metadata(mut self, metadata: Value) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params<f32> {
        &self.params
    }

    pub fn metadata(&self) -> &Value {
        &self.metadata
    }

    /// Hash taken when these weights were created or loaded.
    pub fn recorded_hash(&self) -> ContentHash {
        self.recorded_hash
    }

    /// Recomputes SHA-256 over the serialized payload.
    pub fn content_hash(&self) -> ContentHash {
        hash_params(&self.config, &self.params)
    }

    pub fn engine(&self) -> Engine<'_, f32> {
        Engine::new(&self.config, &self.params)
    }

    /// 64-bit copy of the parameters for gradient verification.
    pub fn to_f64(&self) -> Params<f64> {
        self.params.cast()
    }

    pub fn token_row(&self, id: usize) -> Result<Array1<f32>> {
        if id >= self.config.vocab_size {
            return Err(Error::Vocabulary {
                id,
                vocab_size: self.config.vocab_size,
            });
        }
        Ok(self.params.token_embedding.row(id).to_owned())
    }

    pub fn to_tensor_file(&self) -> TensorFile {
        TensorFile {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(self.config).expect("config serializes"),
            metadata: self.metadata.clone(),
            tensors: named_tensors(&self.config, &self.params),
        }
    }

    pub fn from_tensor_file(file: TensorFile, payload_hash: ContentHash) -> Result<Self> {
        if file.kind != CHECKPOINT_KIND {
            return Err(Error::Format(format!(
                "expected a {CHECKPOINT_KIND} file, found kind {:?}",
                file.kind
            )));
        }
        let config: ModelConfig = serde_json::from_value(file.config)
            .map_err(|e| Error::Format(format!("bad model config in header: {e}")))?;
        config.validate()?;
        let mut params = Params::<f32>::zeros(&config);
        let expected = Params::<f32>::manifest(&config);
        if expected.len() != file.tensors.len() {
            return Err(Error::Integrity(format!(
                "checkpoint has {} tensors, config implies {}",
                file.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), tensor) in expected.iter().zip(&file.tensors) {
            if *name != tensor.name || *shape != tensor.shape {
                return Err(Error::Integrity(format!(
                    "expected tensor {name} with shape {shape:?}, found {} with shape {:?}",
                    tensor.name, tensor.shape
                )));
            }
        }
        for ((_, dst), tensor) in params.named_slices_mut().into_iter().zip(&file.tensors) {
            dst.copy_from_slice(&tensor.data);
        }
        let weights = ModelWeights::new(config, params)?.with_metadata(file.metadata);
        debug_assert_eq!(weights.recorded_hash, payload_hash);
        Ok(weights)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<ContentHash> {
        self.to_tensor_file().write(path)
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let (file, hash) = TensorFile::read(path)?;
        Self::from_tensor_file(file, hash)
    }
}

fn named_tensors(config: &ModelConfig, params: &Params<f32>) -> Vec<NamedTensor> {
    params
        .named_slices()
        .into_iter()
        .zip(Params::<f32>::manifest(config))
        .map(|((name, data), (_, shape))| NamedTensor::new(name, shape, data.to_vec()))
        .collect()
}

fn hash_params(config: &ModelConfig, params: &Params<f32>) -> ContentHash {
    ContentHash::of_bytes(&encode_payload(&named_tensors(config, params)))
}

fn check_shapes(config: &ModelConfig, params: &Params<f32>) -> Result<()> {
    let expected = Params::<f32>::manifest(config);
    let actual = params.named_slices();
    if expected.len() != actual.len() {
        return Err(Error::Integrity(format!(
            "parameter set has {} tensors, config implies {}",
            actual.len(),
            expected.len()
        )));
    }
    for ((name, shape), (_, slice)) in expected.iter().zip(&actual) {
        let numel: usize = shape.iter().product();
        if numel != slice.len() {
            return Err(Error::Integrity(format!(
                "tensor {name} has {} values, expected shape {shape:?}",
                slice.len()
            )));
        }
    }
    Ok(())
}

/// Input embedding rows fed to the decoder: an optional soft-prompt block
/// followed by looked-up text tokens. Positional embeddings are added inside
/// the forward pass, not stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSequence<T = f32> {
    pub vectors: Array2<T>,
    pub prompt_span: Range<usize>,
    pub text_span: Range<usize>,
}

impl<T: NdFloat> EmbeddedSequence<T> {
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }

    /// Places `prompt` rows in front of `text`.
    pub fn with_prompt(prompt: &Array2<T>, text: &EmbeddedSequence<T>) -> Self {
        let n = prompt.nrows();
        let len = n + text.len();
        let mut vectors = Array2::zeros((len, text.vectors.ncols().max(prompt.ncols())));
        vectors.slice_mut(ndarray::s![..n, ..]).assign(prompt);
        vectors.slice_mut(ndarray::s![n.., ..]).assign(&text.vectors);
        EmbeddedSequence {
            vectors,
            prompt_span: 0..n,
            text_span: n..len,
        }
    }

    pub fn cast<U: NdFloat>(&self) -> EmbeddedSequence<U> {
        EmbeddedSequence {
            vectors: self.vectors.mapv(|v| U::from(v).unwrap()),
            prompt_span: self.prompt_span.clone(),
            text_span: self.text_span.clone(),
        }
    }
}

/// Looks up token embedding rows. Row `i` is exactly
/// `token_embedding[token_ids[i]]`.
pub fn embed_tokens(weights: &ModelWeights, token_ids: &[usize]) -> Result<EmbeddedSequence> {
    let table = &weights.params().token_embedding;
    let d = weights.config().embed_dim;
    let mut vectors = Array2::zeros((token_ids.len(), d));
    for (i, &id) in token_ids.iter().enumerate() {
        if id >= table.nrows() {
            return Err(Error::Vocabulary {
                id,
                vocab_size: table.nrows(),
            });
        }
        vectors.row_mut(i).assign(&table.row(id));
    }
    Ok(EmbeddedSequence {
        vectors,
        prompt_span: 0..0,
        text_span: 0..token_ids.len(),
    })
}
