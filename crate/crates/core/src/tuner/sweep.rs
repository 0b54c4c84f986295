//! Multi-seed sweep and top-k prompt selection.

use rayon::prelude::*;

use super::train::{tune_prompt, TuningRunRecord};
use super::TuningConfig;
use crate::data::LabeledExample;
use crate::error::{Error, Result};
use crate::model::ModelWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Candidate learning rates. With more than one, each is tried on the
    /// first seed and the best validation accuracy wins (earlier entry on
    /// ties) before the seed sweep runs.
    pub learning_rates: Vec<f64>,
    pub seeds: Vec<u64>,
    pub top_k: usize,
    /// Everything except `learning_rate` and `seed`, which the sweep sets.
    pub base: TuningConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub chosen_learning_rate: f64,
    /// `(learning rate, validation accuracy)` for each grid point that
    /// trained successfully; empty when the grid had a single entry.
    pub grid_scores: Vec<(f64, f64)>,
    /// Successful runs in seed-list order.
    pub runs: Vec<TuningRunRecord>,
    pub failures: Vec<(u64, String)>,
    /// Top-k runs, best first.
    pub selected: Vec<TuningRunRecord>,
}

/// Indices of the `k` best runs by validation accuracy, best first. Equal
/// accuracies are ordered by position in `runs`, so the lower seed index
/// wins at the cut.
pub fn select_top_k(accuracies: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..accuracies.len()).collect();
    idx.sort_by(|&a, &b| {
        accuracies[b]
            .partial_cmp(&accuracies[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be at least 1".into()));
        }
        if self.seeds.len() < self.top_k {
            return Err(Error::Config(format!(
                "top_k {} exceeds the number of seeds {}",
                self.top_k,
                self.seeds.len()
            )));
        }
        if self.learning_rates.is_empty() {
            return Err(Error::Config("learning-rate grid is empty".into()));
        }
        for &lr in &self.learning_rates {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be positive")));
            }
        }
        self.base.validate()
    }

    fn config_for(&self, learning_rate: f64, seed: u64) -> TuningConfig {
        TuningConfig {
            learning_rate,
            seed,
            ..self.base
        }
    }
}

fn is_run_failure(e: &Error) -> bool {
    matches!(e, Error::Numerical(_) | Error::NonFiniteGradient { .. })
}

/// Trains one prompt per seed, drops runs that fail numerically and keeps
/// the `top_k` best by validation accuracy. Runs are independent and share
/// only the frozen weights, so they execute in parallel; results are
/// merged in seed order before ranking.
pub fn run_sweep(
    weights: &ModelWeights,
    train: &[LabeledExample],
    validation: &[LabeledExample],
    plan: &SweepPlan,
) -> Result<SweepOutcome> {
    plan.validate()?;
    let mut grid_scores = Vec::new();
    let mut grid_runs: Vec<Option<TuningRunRecord>> = Vec::new();
    let chosen = if plan.learning_rates.len() == 1 {
        plan.learning_rates[0]
    } else {
        let first_seed = plan.seeds[0];
        let results: Vec<Result<TuningRunRecord>> = plan
            .learning_rates
            .par_iter()
            .map(|&lr| tune_prompt(weights, train, validation, &plan.config_for(lr, first_seed)))
            .collect();
        let mut best: Option<(f64, f64)> = None;
        for (&lr, res) in plan.learning_rates.iter().zip(results) {
            match res {
                Ok(run) => {
                    let acc = run.final_validation_accuracy;
                    log::info!("grid: lr {lr} -> validation accuracy {acc:.4}");
                    grid_scores.push((lr, acc));
                    if best.is_none_or(|(_, b)| acc > b) {
                        best = Some((lr, acc));
                    }
                    grid_runs.push(Some(run));
                }
                Err(e) if is_run_failure(&e) => {
                    log::warn!("grid: lr {lr} failed: {e}");
                    grid_runs.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        best.map(|(lr, _)| lr)
            .ok_or_else(|| Error::Sweep("every learning rate in the grid failed".into()))?
    };
    let reuse = plan
        .learning_rates
        .iter()
        .position(|&lr| lr == chosen)
        .and_then(|i| grid_runs.get_mut(i).and_then(Option::take));

    let results: Vec<Result<TuningRunRecord>> = plan
        .seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| match (&reuse, i) {
            (Some(run), 0) => Ok(run.clone()),
            _ => tune_prompt(weights, train, validation, &plan.config_for(chosen, seed)),
        })
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&seed, res) in plan.seeds.iter().zip(results) {
        match res {
            Ok(run) => runs.push(run),
            Err(e) if is_run_failure(&e) => {
                log::warn!("seed {seed} excluded: {e}");
                failures.push((seed, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if runs.len() < plan.top_k {
        return Err(Error::Sweep(format!(
            "only {} of {} runs survived, fewer than top_k {}",
            runs.len(),
            plan.seeds.len(),
            plan.top_k
        )));
    }
    let accuracies: Vec<f64> = runs.iter().map(|r| r.final_validation_accuracy).collect();
    let selected = select_top_k(&accuracies, plan.top_k)
        .into_iter()
        .map(|i| runs[i].clone())
        .collect();
    Ok(SweepOutcome {
        chosen_learning_rate: chosen,
        grid_scores,
        runs,
        failures,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_is_returned_regardless_of_accuracy() {
        assert_eq!(select_top_k(&[0.1], 1), vec![0]);
    }

    #[test]
    fn keeps_the_five_highest_of_fifteen() {
        // 0.50, 0.51, ..., 0.64 in scrambled order.
        let order = [7, 2, 14, 0, 9, 11, 3, 13, 5, 1, 12, 6, 10, 4, 8];
        let acc: Vec<f64> = order.iter().map(|&i| 0.50 + i as f64 / 100.0).collect();
        let top = select_top_k(&acc, 5);
        let mut picked: Vec<f64> = top.iter().map(|&i| acc[i]).collect();
        assert!(picked.windows(2).all(|w| w[0] >= w[1]));
        picked.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.60, 0.61, 0.62, 0.63, 0.64];
        for (a, b) in picked.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_at_the_cut_go_to_the_lower_seed_index() {
        let acc = [0.7, 0.9, 0.8, 0.8, 0.8];
        assert_eq!(select_top_k(&acc, 3), vec![1, 2, 3]);
    }
}
