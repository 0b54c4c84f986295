use std::path::Path;

use crate::data::synthetic::{pretraining_corpus, task_rows};
use crate::data::{bundled_packs, format_task_rows, LabelFormat, Split};
use crate::error::{Error, Result};

/// Size of a generated example experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    pub seed: u64,
    pub corpus_lines: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub pretrain_steps: usize,
    pub embed_dim: usize,
    pub max_seq_len: usize,
    pub n_seeds: usize,
    pub top_k: usize,
    pub eval_interval: u64,
    pub warmup_steps_before_stopping: u64,
    pub stopping_window: usize,
    pub max_steps: u64,
    pub learning_rate: f64,
}

impl InitOptions {
    /// Runs in a few minutes on one core.
    pub fn desk() -> Self {
        InitOptions {
            seed: 7,
            corpus_lines: 4000,
            train: 3000,
            validation: 500,
            test: 500,
            pretrain_steps: 2000,
            embed_dim: 128,
            max_seq_len: 48,
            n_seeds: 15,
            top_k: 5,
            eval_interval: 50,
            warmup_steps_before_stopping: 100,
            stopping_window: 2,
            max_steps: 200,
            learning_rate: 1e-2,
        }
    }

    /// Seconds; for smoke tests of the pipeline plumbing.
    pub fn tiny() -> Self {
        InitOptions {
            seed: 7,
            corpus_lines: 300,
            train: 60,
            validation: 30,
            test: 30,
            pretrain_steps: 40,
            embed_dim: 32,
            max_seq_len: 40,
            n_seeds: 3,
            top_k: 2,
            eval_interval: 5,
            warmup_steps_before_stopping: 5,
            stopping_window: 2,
            max_steps: 15,
            learning_rate: 1e-2,
        }
    }
}

pub fn example_config(o: &InitOptions) -> String {
    format!(
        r#"# Example experiment on generated data.
seed = {seed}
output_dir = "run"

[model]
corpus = "data/corpus.txt"
vocab_cap = 5000
embed_dim = {embed_dim}
num_layers = 2
num_heads = 4
max_seq_len = {max_seq_len}
ff_multiplier = 4
pretrain_steps = {pretrain_steps}
pretrain_batch_size = 8
pretrain_learning_rate = 0.003

[task]
name = "synthetic-semeval"
path = "data/task.tsv"
format = "semeval"

[templates]
bundled = true
packs = []

[tuning]
learning_rates = [{lr:?}]
n_prompt_tokens = 8
batch_size = 32
eval_interval = {eval_interval}
warmup_steps_before_stopping = {warmup}
stopping_window = {window}
max_steps = {max_steps}
weight_decay = 0.0
n_seeds = {n_seeds}
top_k = {top_k}

[report]
confidence = 0.95
centre = "median"
model_name = "toy"
"#,
        seed = o.seed,
        embed_dim = o.embed_dim,
        max_seq_len = o.max_seq_len,
        pretrain_steps = o.pretrain_steps,
        lr = o.learning_rate,
        eval_interval = o.eval_interval,
        warmup = o.warmup_steps_before_stopping,
        window = o.stopping_window,
        max_steps = o.max_steps,
        n_seeds = o.n_seeds,
        top_k = o.top_k,
    )
}

/// Writes `experiment.toml`, `data/corpus.txt` and `data/task.tsv` under
/// `dir`. The corpus mentions every bundled group descriptor in neutral
/// contexts so those words get trained embeddings.
pub fn init_example(dir: &Path, o: &InitOptions) -> Result<()> {
    let data = dir.join("data");
    std::fs::create_dir_all(&data).map_err(|e| Error::io(&data, e))?;
    let descriptors: Vec<String> = bundled_packs()
        .into_iter()
        .flat_map(|p| p.groups.into_values().flatten())
        .collect();
    let corpus = pretraining_corpus(o.corpus_lines, &descriptors, o.seed);
    let corpus_path = data.join("corpus.txt");
    std::fs::write(&corpus_path, corpus.join("\n") + "\n").map_err(|e| Error::io(&corpus_path, e))?;
    let rows = task_rows(
        LabelFormat::Semeval,
        [
            (Split::Train, o.train),
            (Split::Validation, o.validation),
            (Split::Test, o.test),
        ],
        o.seed.wrapping_add(1),
    );
    let task_path = data.join("task.tsv");
    std::fs::write(&task_path, format_task_rows(&rows)?).map_err(|e| Error::io(&task_path, e))?;
    let cfg_path = dir.join("experiment.toml");
    std::fs::write(&cfg_path, example_config(o)).map_err(|e| Error::io(&cfg_path, e))
}
