use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::confusion::{metric_value, tally, Metric, PredictionRecord};
use super::gaps::{gap_with_ci, gaps, harm_direction, Centre, HarmDirection};
use crate::error::{Error, Result};

/// Gap of one protected group for one metric, aggregated over prompts.
///
/// `value` and `median` are means over prompts of each prompt's metric value
/// and attribute median, so `gap = value - median` is also the mean of
/// `per_prompt_gaps`, which the interval is computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub model: String,
    pub dataset: String,
    pub attribute: String,
    pub group: String,
    pub metric: Metric,
    pub value: f64,
    pub median: f64,
    pub gap: f64,
    pub per_prompt_values: Vec<f64>,
    pub per_prompt_gaps: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
    pub direction_harmful: bool,
    pub direction: HarmDirection,
}

/// A (group, metric) cell whose value is undefined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsentCell {
    pub model: String,
    pub dataset: String,
    pub attribute: String,
    pub group: String,
    pub metric: Metric,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub results: Vec<GapResult>,
    pub absent: Vec<AbsentCell>,
}

impl GapReport {
    pub fn warnings(&self) -> Vec<String> {
        self.absent
            .iter()
            .map(|a| {
                format!(
                    "{}/{}: {} for {}/{} is absent: {}",
                    a.model, a.dataset, a.metric, a.attribute, a.group, a.reason
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapOptions {
    pub confidence: f64,
    pub centre: Centre,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            confidence: 0.95,
            centre: Centre::Median,
        }
    }
}

/// Builds every gap for one model on one dataset from the predictions of
/// each selected prompt.
///
/// For each prompt the group metric values and their gaps to the attribute
/// median are computed first; the per-prompt gaps are then averaged and
/// given a Student-t interval. Groups whose metric has a zero denominator
/// become absent cells and are left out of the median.
pub fn gap_report(
    model: &str,
    dataset: &str,
    per_prompt: &[Vec<PredictionRecord>],
    opts: &GapOptions,
) -> Result<GapReport> {
    if per_prompt.len() < 2 {
        return Err(Error::Statistics(format!(
            "gap intervals need predictions from at least 2 prompts, got {}",
            per_prompt.len()
        )));
    }
    let tallies = per_prompt.iter().map(|p| tally(p)).collect::<Result<Vec<_>>>()?;
    let keys: BTreeSet<_> = tallies[0].keys().cloned().collect();
    for (k, t) in tallies.iter().enumerate().skip(1) {
        if t.keys().cloned().collect::<BTreeSet<_>>() != keys {
            return Err(Error::Aggregation(format!(
                "prompt {k} covers different (attribute, group) cells than prompt 0"
            )));
        }
    }
    let mut by_attribute: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, g) in &keys {
        by_attribute.entry(a).or_default().push(g);
    }

    let mut results = Vec::new();
    let mut absent = Vec::new();
    for (&attribute, groups) in &by_attribute {
        for metric in Metric::ALL {
            let mut defined: Vec<&str> = Vec::new();
            let mut values: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); tallies.len()];
            for &group in groups {
                let key = (attribute.to_string(), group.to_string());
                let per: Result<Vec<f64>> =
                    tallies.iter().map(|t| metric_value(&t[&key], metric)).collect();
                match per {
                    Ok(vs) => {
                        defined.push(group);
                        for (slot, v) in values.iter_mut().zip(vs) {
                            slot.insert(group.to_string(), v);
                        }
                    }
                    Err(e @ Error::UndefinedMetric { .. }) => absent.push(AbsentCell {
                        model: model.into(),
                        dataset: dataset.into(),
                        attribute: attribute.into(),
                        group: group.into(),
                        metric,
                        reason: e.to_string(),
                    }),
                    Err(e) => return Err(e),
                }
            }
            if defined.len() < 2 {
                for &group in &defined {
                    absent.push(AbsentCell {
                        model: model.into(),
                        dataset: dataset.into(),
                        attribute: attribute.into(),
                        group: group.into(),
                        metric,
                        reason: format!(
                            "only {} group(s) of {attribute} have a defined {metric}",
                            defined.len()
                        ),
                    });
                }
                continue;
            }
            let per_prompt_gaps = values
                .iter()
                .map(|v| gaps(attribute, v, opts.centre))
                .collect::<Result<Vec<_>>>()?;
            for &group in &defined {
                let vals: Vec<f64> = values.iter().map(|v| v[group]).collect();
                let pg: Vec<f64> = per_prompt_gaps.iter().map(|g| g[group].0).collect();
                let medians: Vec<f64> = per_prompt_gaps.iter().map(|g| g[group].1).collect();
                let ci = gap_with_ci(&pg, opts.confidence)?;
                let k = vals.len() as f64;
                let direction = harm_direction(metric, ci.mean, ci.significant);
                results.push(GapResult {
                    model: model.into(),
                    dataset: dataset.into(),
                    attribute: attribute.into(),
                    group: group.into(),
                    metric,
                    value: vals.iter().sum::<f64>() / k,
                    median: medians.iter().sum::<f64>() / k,
                    gap: ci.mean,
                    per_prompt_values: vals,
                    per_prompt_gaps: pg,
                    ci_low: ci.ci_low,
                    ci_high: ci.ci_high,
                    significant: ci.significant,
                    direction_harmful: direction == HarmDirection::Harmful,
                    direction,
                });
            }
        }
    }
    Ok(GapReport { results, absent })
}
