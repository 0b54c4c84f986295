//! Prompt snapshots and loss-trace files.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::prompt::PromptState;
use super::train::TuningRunRecord;
use crate::data::BOS_ID;
use crate::error::{Error, Result};
use crate::model::ModelWeights;
use crate::tensor_file::{ContentHash, NamedTensor, TensorFile};

pub const SNAPSHOT_KIND: &str = "pbl-prompt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetadata {
    pub seed: u64,
    pub step: u64,
    pub validation_accuracy: f64,
    pub learning_rate: f64,
    /// Content hash of the checkpoint the prompt was tuned against.
    pub checkpoint: String,
}

/// A prompt reloaded from disk together with its run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSnapshot {
    pub prompt: PromptState,
    pub metadata: SnapshotMetadata,
}

fn tensor(name: &str, a: &Array2<f32>) -> NamedTensor {
    NamedTensor::new(name, a.shape().to_vec(), a.iter().copied().collect())
}

pub fn save_snapshot(path: &Path, run: &TuningRunRecord, weights: &ModelWeights) -> Result<ContentHash> {
    let p = &run.prompt;
    let metadata = SnapshotMetadata {
        seed: run.seed,
        step: p.step_count,
        validation_accuracy: run.final_validation_accuracy,
        learning_rate: run.learning_rate,
        checkpoint: weights.content_hash().to_hex(),
    };
    let file = TensorFile {
        kind: SNAPSHOT_KIND.into(),
        config: json!({ "n_tokens": p.n_tokens(), "embed_dim": p.embed_dim() }),
        metadata: serde_json::to_value(&metadata).expect("metadata serializes"),
        tensors: vec![
            tensor("perturbation", &p.perturbation),
            tensor("adam_m", &p.adam_m),
            tensor("adam_v", &p.adam_v),
        ],
    };
    file.write(path)
}

/// Loads a snapshot tuned against `weights`. The base embedding is taken
/// from the checkpoint, so a snapshot recorded against different weights is
/// rejected.
pub fn load_snapshot(path: &Path, weights: &ModelWeights) -> Result<PromptSnapshot> {
    let (file, _) = TensorFile::read(path)?;
    if file.kind != SNAPSHOT_KIND {
        return Err(Error::Format(format!(
            "{}: expected a prompt snapshot, found kind {:?}",
            path.display(),
            file.kind
        )));
    }
    let metadata: SnapshotMetadata = serde_json::from_value(file.metadata.clone())
        .map_err(|e| Error::Format(format!("{}: snapshot metadata: {e}", path.display())))?;
    let expected = weights.content_hash().to_hex();
    if metadata.checkpoint != expected {
        return Err(Error::Compatibility(format!(
            "{} was tuned against checkpoint {}, loaded checkpoint is {}",
            path.display(),
            metadata.checkpoint,
            expected
        )));
    }
    let d = weights.config().embed_dim;
    let matrix = |name: &str| -> Result<Array2<f32>> {
        let t = file
            .get(name)
            .ok_or_else(|| Error::Integrity(format!("{}: missing tensor {name}", path.display())))?;
        match t.shape[..] {
            [n, cols] if cols == d && n > 0 => Ok(Array2::from_shape_vec((n, d), t.data.clone())
                .expect("shape matches payload length")),
            _ => Err(Error::Integrity(format!(
                "{}: tensor {name} has shape {:?}, expected [n, {d}]",
                path.display(),
                t.shape
            ))),
        }
    };
    let perturbation = matrix("perturbation")?;
    let adam_m = matrix("adam_m")?;
    let adam_v = matrix("adam_v")?;
    if adam_m.dim() != perturbation.dim() || adam_v.dim() != perturbation.dim() {
        return Err(Error::Integrity(format!(
            "{}: moment shapes differ from the perturbation",
            path.display()
        )));
    }
    Ok(PromptSnapshot {
        prompt: PromptState {
            perturbation,
            base_embedding: weights.token_row(BOS_ID)?,
            adam_m,
            adam_v,
            step_count: metadata.step,
        },
        metadata,
    })
}

/// Renders a trace as CSV with header `step,eval_loss`.
pub fn trace_csv(trace: &[(u64, f64)]) -> String {
    let mut out = String::from("step,eval_loss\n");
    for (step, loss) in trace {
        writeln!(out, "{step},{loss}").expect("writing to a String");
    }
    out
}

pub fn read_trace_csv(text: &str) -> Result<Vec<(u64, f64)>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("step,eval_loss") {
        return Err(Error::Format("trace CSV must start with `step,eval_loss`".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Format(format!("trace CSV line {}: {line:?}", i + 2));
            let (s, l) = line.split_once(',').ok_or_else(bad)?;
            Ok((
                s.trim().parse().map_err(|_| bad())?,
                l.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trip() {
        let t = vec![(100, 1.25), (200, 0.875), (300, 1.0e-3)];
        let csv = trace_csv(&t);
        assert!(csv.starts_with("step,eval_loss\n100,1.25\n"));
        assert_eq!(read_trace_csv(&csv).unwrap(), t);
    }

    #[test]
    fn trace_rejects_garbage() {
        assert!(read_trace_csv("step,loss\n").is_err());
        assert!(read_trace_csv("step,eval_loss\n1;2\n").is_err());
    }
}
