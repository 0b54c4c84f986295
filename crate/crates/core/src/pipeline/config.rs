use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::LabelFormat;
use crate::error::{Error, Result};
use crate::fairness::Centre;
use crate::model::ModelConfig;
use crate::tensor_file::ContentHash;
use crate::tuner::{SweepPlan, TuningConfig};

/// Experiment description read from a TOML file. Relative paths are
/// resolved against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root of every random stream in the run.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub task: TaskSection,
    #[serde(default)]
    pub templates: TemplateSection,
    #[serde(default)]
    pub tuning: TuningSection,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
    #[serde(skip)]
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Use an existing checkpoint instead of pretraining. Requires `vocab`.
    pub checkpoint: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    /// Pretraining text, one sequence per line.
    pub corpus: Option<PathBuf>,
    pub vocab_cap: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub max_seq_len: usize,
    pub ff_multiplier: usize,
    pub pretrain_steps: usize,
    pub pretrain_batch_size: usize,
    pub pretrain_learning_rate: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let toy = ModelConfig::toy(0);
        ModelSection {
            checkpoint: None,
            vocab: None,
            corpus: None,
            vocab_cap: 5000,
            embed_dim: toy.embed_dim,
            num_layers: toy.num_layers,
            num_heads: toy.num_heads,
            max_seq_len: toy.max_seq_len,
            ff_multiplier: toy.ff_multiplier,
            pretrain_steps: 2000,
            pretrain_batch_size: 8,
            pretrain_learning_rate: 3e-3,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            max_seq_len: self.max_seq_len,
            ff_multiplier: self.ff_multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    /// Dataset name used in reports.
    pub name: String,
    pub path: PathBuf,
    pub format: LabelFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemplateSection {
    /// Include the packs shipped with the crate.
    pub bundled: bool,
    pub packs: Vec<PathBuf>,
}

impl Default for TemplateSection {
    fn default() -> Self {
        TemplateSection {
            bundled: true,
            packs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningSection {
    /// Learning-rate grid, searched on the first seed.
    pub learning_rates: Vec<f64>,
    pub n_prompt_tokens: usize,
    pub batch_size: usize,
    pub eval_interval: u64,
    pub warmup_steps_before_stopping: u64,
    pub stopping_window: usize,
    pub max_steps: u64,
    pub weight_decay: f64,
    pub n_seeds: usize,
    pub top_k: usize,
    /// Explicit run seeds; derived from the root seed when absent.
    pub seeds: Option<Vec<u64>>,
}

impl Default for TuningSection {
    fn default() -> Self {
        let d = TuningConfig::default();
        TuningSection {
            learning_rates: vec![d.learning_rate],
            n_prompt_tokens: d.n_prompt_tokens,
            batch_size: d.batch_size,
            eval_interval: d.eval_interval,
            warmup_steps_before_stopping: d.warmup_steps_before_stopping,
            stopping_window: d.stopping_window,
            max_steps: d.max_steps,
            weight_decay: d.weight_decay,
            n_seeds: 15,
            top_k: 5,
            seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub confidence: f64,
    pub centre: Centre,
    /// Model label in the gap report and net counts.
    pub model_name: String,
    /// Gap reports of other models merged into the net counts.
    pub extra_gap_reports: Vec<PathBuf>,
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            confidence: 0.95,
            centre: Centre::Median,
            model_name: "toy".into(),
            extra_gap_reports: Vec::new(),
        }
    }
}

/// Stream tags for [`derive_seed`].
pub const PRETRAIN_STREAM: u64 = 1;
pub const TUNE_STREAM: u64 = 2;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-use seed: splitmix64 applied to the root, then to the stream tag and
/// index mixed into that output.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root) ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ index)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.source_text = text.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("config file {} does not exist", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_toml(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Hash of the effective configuration (the parsed values, including
    /// command-line overrides of the seed, but not the output directory).
    pub fn hash(&self) -> ContentHash {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("output_dir");
        ContentHash::of_bytes(v.to_string().as_bytes())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        match &self.tuning.seeds {
            Some(s) => s.clone(),
            None => (0..self.tuning.n_seeds as u64)
                .map(|i| derive_seed(self.seed, TUNE_STREAM, i))
                .collect(),
        }
    }

    pub fn sweep_plan(&self) -> SweepPlan {
        let t = &self.tuning;
        SweepPlan {
            learning_rates: t.learning_rates.clone(),
            seeds: self.run_seeds(),
            top_k: t.top_k,
            base: TuningConfig {
                learning_rate: t.learning_rates.first().copied().unwrap_or(0.0),
                n_prompt_tokens: t.n_prompt_tokens,
                batch_size: t.batch_size,
                eval_interval: t.eval_interval,
                warmup_steps_before_stopping: t.warmup_steps_before_stopping,
                stopping_window: t.stopping_window,
                max_steps: t.max_steps,
                seed: 0,
                weight_decay: t.weight_decay,
            },
        }
    }

    fn require_file(&self, what: &str, p: &Path) -> Result<()> {
        let full = self.resolve(p);
        if full.is_file() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} {} does not exist", full.display())))
        }
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        match (&m.checkpoint, &m.vocab) {
            (Some(c), Some(v)) => {
                self.require_file("checkpoint", c)?;
                self.require_file("vocabulary", v)?;
            }
            (Some(_), None) => {
                return Err(Error::Config("model.checkpoint needs model.vocab".into()));
            }
            (None, _) => {
                let corpus = m.corpus.as_ref().ok_or_else(|| {
                    Error::Config("model needs either a checkpoint or a pretraining corpus".into())
                })?;
                self.require_file("pretraining corpus", corpus)?;
                // The vocabulary size is only known later; any value works here.
                m.model_config(m.vocab_cap.max(1)).validate()?;
                if m.pretrain_batch_size == 0 {
                    return Err(Error::Config("model.pretrain_batch_size must be positive".into()));
                }
            }
        }
        self.require_file("task dataset", &self.task.path)?;
        for p in &self.templates.packs {
            self.require_file("template pack", p)?;
        }
        if !self.templates.bundled && self.templates.packs.is_empty() {
            return Err(Error::Config("no template packs configured".into()));
        }
        let t = &self.tuning;
        if t.seeds.as_ref().is_some_and(|s| s.len() != t.n_seeds) {
            return Err(Error::Config(format!(
                "tuning.seeds lists {} seeds but n_seeds is {}",
                t.seeds.as_ref().map_or(0, Vec::len),
                t.n_seeds
            )));
        }
        if t.top_k > t.n_seeds {
            return Err(Error::Config(format!(
                "top_k {} exceeds n_seeds {}",
                t.top_k, t.n_seeds
            )));
        }
        self.sweep_plan().validate()?;
        let r = &self.report;
        if !(r.confidence > 0.0 && r.confidence < 1.0) {
            return Err(Error::Config(format!(
                "report.confidence {} must lie strictly between 0 and 1",
                r.confidence
            )));
        }
        for p in &r.extra_gap_reports {
            self.require_file("extra gap report", p)?;
        }
        Ok(())
    }
}
