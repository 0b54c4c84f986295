use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{derive_seed, ExperimentConfig, PRETRAIN_STREAM};
use super::manifest::RunManifest;
use super::predictions::{format_predictions, read_predictions, PredictionRow, Source};
use super::svg::gap_chart;
use crate::data::{
    bundled_packs, expand_templates, load_task_dataset, merge_packs, read_task_rows, EvalExample,
    GroupMap, Template, TemplatePack, Tokenizer, BOS_ID,
};
use crate::error::{Error, Result};
use crate::fairness::{
    gap_report, gap_with_ci, net_count_csv, net_counts, ConfidenceInterval, GapOptions, GapResult,
    Metric,
};
use crate::model::{pretrain_with, ModelWeights, PretrainOptions};
use crate::tuner::{load_snapshot, predict, run_sweep, save_snapshot, trace_csv, PromptState};

pub const CHECKPOINT_PATH: &str = "model/checkpoint.bin";
pub const VOCAB_PATH: &str = "model/vocab.txt";
pub const TUNE_DIR: &str = "tune";
pub const EVALUATE_DIR: &str = "evaluate";
pub const REPORT_DIR: &str = "report";

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Removes and recreates `dir` so stale files from earlier runs do not mix
/// with new ones.
fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Validates the config, creates the output directory and stores a verbatim
/// copy of the config in it.
fn prepare(cfg: &ExperimentConfig) -> Result<(PathBuf, RunManifest)> {
    cfg.validate()?;
    let out = cfg.output_dir();
    std::fs::create_dir_all(&out).map_err(io_err(&out))?;
    write_file(&out.join("config.toml"), &cfg.source_text)?;
    let manifest = RunManifest::load_or_new(&out, &cfg.hash())?;
    Ok((out, manifest))
}

fn sorted_files(dir: &Path, prefix: &str, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(ext))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn relative(out: &Path, files: &[PathBuf]) -> Vec<PathBuf> {
    files
        .iter()
        .map(|f| f.strip_prefix(out).unwrap_or(f).to_path_buf())
        .collect()
}

pub fn load_template_packs(cfg: &ExperimentConfig) -> Result<(Vec<Template>, GroupMap)> {
    let mut packs = if cfg.templates.bundled {
        bundled_packs()
    } else {
        Vec::new()
    };
    for p in &cfg.templates.packs {
        packs.push(TemplatePack::load(&cfg.resolve(p))?);
    }
    merge_packs(&packs)
}

fn template_texts(templates: &[Template], groups: &GroupMap) -> Vec<String> {
    let mut out = Vec::new();
    for t in templates {
        if let Some(by_group) = groups.get(&t.attribute) {
            for d in by_group.values().flatten() {
                out.push(t.fill(d));
            }
        }
    }
    out
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Checkpoint and vocabulary of the run, checked against each other.
pub fn load_model(out: &Path) -> Result<(ModelWeights, Tokenizer)> {
    let ckpt = out.join(CHECKPOINT_PATH);
    if !ckpt.is_file() {
        return Err(Error::Config(format!(
            "no checkpoint at {}; run `pbl pretrain` first",
            ckpt.display()
        )));
    }
    let weights = ModelWeights::load_checkpoint(&ckpt)?;
    let tok = Tokenizer::load(&out.join(VOCAB_PATH))?;
    check_vocabulary(&weights, &tok)?;
    Ok((weights, tok))
}

fn check_vocabulary(weights: &ModelWeights, tok: &Tokenizer) -> Result<()> {
    if tok.len() != weights.config().vocab_size {
        return Err(Error::Compatibility(format!(
            "vocabulary has {} tokens, checkpoint expects {}",
            tok.len(),
            weights.config().vocab_size
        )));
    }
    if let Some(fp) = weights.metadata().get("vocab_fingerprint").and_then(|v| v.as_str()) {
        if fp != tok.fingerprint().to_hex() {
            return Err(Error::Compatibility(
                "vocabulary differs from the one the checkpoint was trained with".into(),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub checkpoint: PathBuf,
    pub skipped: bool,
}

/// Trains (or imports) the frozen model and its vocabulary. Does nothing
/// when the stage already ran under the same config and its files are
/// intact.
pub fn cmd_pretrain(cfg: &ExperimentConfig) -> Result<PretrainOutcome> {
    let (out, mut manifest) = prepare(cfg)?;
    let checkpoint = out.join(CHECKPOINT_PATH);
    if manifest.is_current("pretrain", &out) {
        println!("pretrain: checkpoint is up to date for this config, skipping");
        return Ok(PretrainOutcome {
            checkpoint,
            skipped: true,
        });
    }
    let start = Instant::now();
    let m = &cfg.model;
    let (weights, tok) = match (&m.checkpoint, &m.vocab) {
        (Some(c), Some(v)) => {
            let weights = ModelWeights::load_checkpoint(&cfg.resolve(c))?;
            let tok = Tokenizer::load(&cfg.resolve(v))?;
            check_vocabulary(&weights, &tok)?;
            (weights, tok)
        }
        _ => {
            let corpus_path = cfg.resolve(m.corpus.as_ref().expect("validated"));
            let corpus = read_lines(&corpus_path)?;
            let rows = read_task_rows(&cfg.resolve(&cfg.task.path))?;
            let (templates, groups) = load_template_packs(cfg)?;
            let mut texts: Vec<String> = corpus.clone();
            texts.extend(rows.into_iter().map(|r| r.text));
            texts.extend(template_texts(&templates, &groups));
            let tok = Tokenizer::build(&texts, m.vocab_cap)?;
            let ids: Vec<Vec<usize>> = corpus
                .iter()
                .map(|line| std::iter::once(BOS_ID).chain(tok.encode(line)).collect())
                .collect();
            let model_cfg = m.model_config(tok.len());
            let opts = PretrainOptions {
                steps: m.pretrain_steps,
                seed: derive_seed(cfg.seed, PRETRAIN_STREAM, 0),
                batch_size: m.pretrain_batch_size,
                learning_rate: m.pretrain_learning_rate,
                ..PretrainOptions::new(0, 0)
            };
            log::info!(
                "pretraining {} parameters for {} steps on {} lines",
                model_cfg.parameter_count(),
                opts.steps,
                ids.len()
            );
            let weights = pretrain_with(&model_cfg, &ids, &opts)?.with_metadata(json!({
                "vocab_fingerprint": tok.fingerprint().to_hex(),
                "pretrain_steps": opts.steps,
                "pretrain_seed": opts.seed,
            }));
            (weights, tok)
        }
    };
    std::fs::create_dir_all(out.join("model")).map_err(io_err(&out))?;
    let hash = weights.save_checkpoint(&checkpoint)?;
    tok.save(&out.join(VOCAB_PATH))?;
    manifest.record(
        "pretrain",
        &out,
        &[CHECKPOINT_PATH.into(), VOCAB_PATH.into()],
        start.elapsed().as_secs_f64(),
    )?;
    manifest.save(&out)?;
    println!(
        "pretrain: wrote {} ({} parameters, sha256 {hash})",
        checkpoint.display(),
        weights.config().parameter_count()
    );
    Ok(PretrainOutcome {
        checkpoint,
        skipped: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRun {
    pub rank: usize,
    pub run: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub validation_accuracy: f64,
    pub steps_taken: u64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub chosen_learning_rate: f64,
    pub ranking: Vec<RankedRun>,
    pub snapshots: Vec<PathBuf>,
    pub trainable_parameters: usize,
    pub total_parameters: u64,
}

impl TuneOutcome {
    pub fn selected_seeds(&self) -> Vec<u64> {
        self.ranking.iter().filter(|r| r.selected).map(|r| r.seed).collect()
    }
}

fn ranking_table(ranking: &[RankedRun]) -> String {
    let mut s = String::from("rank  run  seed                  lr        val_acc  steps  selected\n");
    for r in ranking {
        writeln!(
            s,
            "{:>4}  {:>3}  {:<20}  {:<8}  {:>7.4}  {:>5}  {}",
            r.rank,
            r.run,
            r.seed,
            r.learning_rate,
            r.validation_accuracy,
            r.steps_taken,
            if r.selected { "yes" } else { "" }
        )
        .unwrap();
    }
    s
}

fn ranking_csv(ranking: &[RankedRun]) -> String {
    let mut s = String::from("rank,run,seed,learning_rate,validation_accuracy,steps_taken,selected\n");
    for r in ranking {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.rank, r.run, r.seed, r.learning_rate, r.validation_accuracy, r.steps_taken, r.selected
        )
        .unwrap();
    }
    s
}

/// Runs the learning-rate grid and the seed sweep against the frozen model,
/// then writes every run's loss trace and the selected prompt snapshots.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<TuneOutcome> {
    let (out, mut manifest) = prepare(cfg)?;
    let start = Instant::now();
    let (weights, tok) = load_model(&out)?;
    let data = load_task_dataset(&cfg.resolve(&cfg.task.path), cfg.task.format, &tok)?;
    let plan = cfg.sweep_plan();
    let before = weights.content_hash();
    let sweep = run_sweep(&weights, &data.train, &data.validation, &plan)?;
    if weights.content_hash() != before {
        return Err(Error::Integrity("model weights changed during tuning".into()));
    }

    let tune_dir = out.join(TUNE_DIR);
    fresh_dir(&tune_dir)?;
    let mut files = Vec::new();
    for (i, run) in sweep.runs.iter().enumerate() {
        let p = tune_dir.join(format!("traces/run_{i:02}_seed_{}.csv", run.seed));
        write_file(&p, trace_csv(&run.eval_loss_trace))?;
        files.push(p);
    }
    let mut snapshots = Vec::new();
    for (rank, run) in sweep.selected.iter().enumerate() {
        let p = tune_dir.join(format!("selected/prompt_{:02}.bin", rank + 1));
        std::fs::create_dir_all(p.parent().unwrap()).map_err(io_err(&tune_dir))?;
        save_snapshot(&p, run, &weights)?;
        snapshots.push(p.clone());
        files.push(p);
    }

    let run_index = |seed: u64| plan.seeds.iter().position(|&s| s == seed).unwrap_or(usize::MAX);
    let accuracies: Vec<f64> = sweep.runs.iter().map(|r| r.final_validation_accuracy).collect();
    let order = crate::tuner::select_top_k(&accuracies, sweep.runs.len());
    let ranking: Vec<RankedRun> = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let r = &sweep.runs[i];
            RankedRun {
                rank: rank + 1,
                run: run_index(r.seed),
                seed: r.seed,
                learning_rate: r.learning_rate,
                validation_accuracy: r.final_validation_accuracy,
                steps_taken: r.steps_taken,
                selected: rank < plan.top_k,
            }
        })
        .collect();
    let ranking_path = tune_dir.join("ranking.csv");
    write_file(&ranking_path, ranking_csv(&ranking))?;
    files.push(ranking_path);
    for (seed, why) in &sweep.failures {
        log::warn!("run with seed {seed} was excluded: {why}");
    }

    manifest.record("tune", &out, &relative(&out, &files), start.elapsed().as_secs_f64())?;
    manifest.save(&out)?;
    let prompt = crate::tuner::init_prompt(&weights, cfg.tuning.n_prompt_tokens, 0)?;
    let outcome = TuneOutcome {
        chosen_learning_rate: sweep.chosen_learning_rate,
        trainable_parameters: prompt.trainable_count(),
        total_parameters: weights.config().parameter_count(),
        ranking,
        snapshots,
    };
    if sweep.grid_scores.len() > 1 {
        for (lr, acc) in &sweep.grid_scores {
            println!("grid: lr {lr} validation accuracy {acc:.4}");
        }
    }
    println!(
        "tune: learning rate {}, {} trainable of {} parameters ({:.6}%)",
        outcome.chosen_learning_rate,
        outcome.trainable_parameters,
        outcome.total_parameters,
        100.0 * outcome.trainable_parameters as f64 / outcome.total_parameters as f64
    );
    print!("{}", ranking_table(&outcome.ranking));
    Ok(outcome)
}

fn classify_all(
    weights: &ModelWeights,
    prompt: &PromptState,
    task: &[crate::data::LabeledExample],
    templates: &[EvalExample],
) -> Result<Vec<PredictionRow>> {
    let mut rows = Vec::with_capacity(task.len() + templates.len());
    for ex in task {
        let p = predict(weights, prompt, &ex.token_ids)?;
        rows.push(PredictionRow {
            example_id: rows.len(),
            source: Source::Task,
            attribute: String::new(),
            group: String::new(),
            gold: ex.label,
            pred: p.class,
        });
    }
    for ev in templates {
        let p = predict(weights, prompt, &ev.example.token_ids)?;
        rows.push(PredictionRow {
            example_id: rows.len(),
            source: Source::Template,
            attribute: ev.attribute.clone(),
            group: ev.group.clone(),
            gold: ev.example.label,
            pred: p.class,
        });
    }
    Ok(rows)
}

/// Classifies the task test split and the template corpus with every
/// selected prompt, one predictions file per prompt.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let (out, mut manifest) = prepare(cfg)?;
    let start = Instant::now();
    let (weights, tok) = load_model(&out)?;
    let snapshots = sorted_files(&out.join(TUNE_DIR).join("selected"), "prompt_", ".bin")?;
    if snapshots.is_empty() {
        return Err(Error::Config(format!(
            "no prompt snapshots in {}; run `pbl tune` first",
            out.join(TUNE_DIR).join("selected").display()
        )));
    }
    let data = load_task_dataset(&cfg.resolve(&cfg.task.path), cfg.task.format, &tok)?;
    let (templates, groups) = load_template_packs(cfg)?;
    let corpus = expand_templates(&templates, &groups, &tok)?;
    let prompts = snapshots
        .iter()
        .map(|p| load_snapshot(p, &weights).map(|s| s.prompt))
        .collect::<Result<Vec<_>>>()?;
    let per_prompt: Vec<Result<Vec<PredictionRow>>> = prompts
        .par_iter()
        .map(|p| classify_all(&weights, p, &data.test, &corpus))
        .collect();

    let dir = out.join(EVALUATE_DIR);
    fresh_dir(&dir)?;
    let mut files = Vec::new();
    for (snap, rows) in snapshots.iter().zip(per_prompt) {
        let stem = snap.file_stem().and_then(|s| s.to_str()).unwrap_or("prompt");
        let suffix = stem.trim_start_matches("prompt_");
        let p = dir.join(format!("predictions_{suffix}.csv"));
        write_file(&p, format_predictions(&rows?)?)?;
        files.push(p);
    }
    manifest.record("evaluate", &out, &relative(&out, &files), start.elapsed().as_secs_f64())?;
    manifest.save(&out)?;
    println!(
        "evaluate: {} prompts x ({} task + {} template examples)",
        files.len(),
        data.test.len(),
        corpus.len()
    );
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskAccuracy {
    pub per_prompt: Vec<f64>,
    pub interval: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub model: String,
    pub dataset: String,
    pub prompts: usize,
    pub confidence: f64,
    pub task_test_accuracy: TaskAccuracy,
    pub template_examples_per_prompt: usize,
    pub gap_results: usize,
    pub significant_gaps: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutcome {
    pub gap_report: PathBuf,
    pub net_counts: PathBuf,
    pub charts: Vec<PathBuf>,
    pub summary: ReportSummary,
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

/// Turns the per-prompt predictions into the gap report, the net-count
/// table and one chart per (attribute, metric).
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<ReportOutcome> {
    let (out, mut manifest) = prepare(cfg)?;
    let start = Instant::now();
    let files = sorted_files(&out.join(EVALUATE_DIR), "predictions_", ".csv")?;
    if files.len() < 2 {
        return Err(Error::Statistics(format!(
            "the report needs predictions from at least 2 prompts, found {}",
            files.len()
        )));
    }
    let per_prompt_rows = files
        .iter()
        .map(|p| read_predictions(p))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<Vec<_>> = per_prompt_rows
        .iter()
        .map(|rows| rows.iter().filter_map(PredictionRow::fairness_record).collect())
        .collect();
    let opts = GapOptions {
        confidence: cfg.report.confidence,
        centre: cfg.report.centre,
    };
    let model = cfg.report.model_name.as_str();
    let dataset = cfg.task.name.as_str();
    let report = gap_report(model, dataset, &records, &opts)?;
    let warnings = report.warnings();
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut all_results: Vec<GapResult> = report.results.clone();
    for p in &cfg.report.extra_gap_reports {
        let path = cfg.resolve(p);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let extra: Vec<GapResult> = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        all_results.extend(extra);
    }
    let cells = net_counts(&all_results)?;

    let per_prompt_acc: Vec<f64> = per_prompt_rows
        .iter()
        .filter_map(|rows| {
            let task: Vec<_> = rows.iter().filter(|r| r.source == Source::Task).collect();
            (!task.is_empty()).then(|| {
                task.iter().filter(|r| r.gold == r.pred).count() as f64 / task.len() as f64
            })
        })
        .collect();
    let interval = if per_prompt_acc.len() >= 2 {
        Some(gap_with_ci(&per_prompt_acc, cfg.report.confidence)?)
    } else {
        None
    };

    let dir = out.join(REPORT_DIR);
    fresh_dir(&dir)?;
    let gap_path = dir.join("gap_report.json");
    write_file(&gap_path, to_json(&report.results))?;
    let absent_path = dir.join("absent_cells.json");
    write_file(&absent_path, to_json(&report.absent))?;
    let net_path = dir.join("net_counts.csv");
    write_file(&net_path, net_count_csv(&cells))?;

    let mut charts = Vec::new();
    let attributes: std::collections::BTreeSet<&str> =
        report.results.iter().map(|r| r.attribute.as_str()).collect();
    for attribute in attributes {
        for metric in Metric::ALL {
            let rs: Vec<&GapResult> = report
                .results
                .iter()
                .filter(|r| r.attribute == attribute && r.metric == metric)
                .collect();
            if rs.is_empty() {
                continue;
            }
            let p = dir.join(format!("charts/{attribute}_{metric}.svg"));
            write_file(&p, gap_chart(attribute, metric, &rs))?;
            charts.push(p);
        }
    }

    let summary = ReportSummary {
        model: model.into(),
        dataset: dataset.into(),
        prompts: files.len(),
        confidence: cfg.report.confidence,
        task_test_accuracy: TaskAccuracy {
            per_prompt: per_prompt_acc,
            interval,
        },
        template_examples_per_prompt: records[0].len(),
        gap_results: report.results.len(),
        significant_gaps: report.results.iter().filter(|r| r.significant).count(),
        warnings,
    };
    let summary_path = dir.join("summary.json");
    write_file(&summary_path, to_json(&summary))?;

    let mut written = vec![gap_path.clone(), absent_path, net_path.clone(), summary_path];
    written.extend(charts.iter().cloned());
    manifest.record("report", &out, &relative(&out, &written), start.elapsed().as_secs_f64())?;
    manifest.save(&out)?;
    println!(
        "report: {} gaps ({} significant), {} charts in {}",
        summary.gap_results,
        summary.significant_gaps,
        charts.len(),
        dir.display()
    );
    Ok(ReportOutcome {
        gap_report: gap_path,
        net_counts: net_path,
        charts,
        summary,
    })
}
