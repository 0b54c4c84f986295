//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pbl::data::Sentiment;
use pbl::fairness::{gaps, metric_value, tally, Centre, Metric, PredictionRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random records over at most five groups per attribute and at most twenty
/// examples per group.
pub fn random_instance(seed: u64) -> Vec<PredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for attribute in ["age", "sexuality"] {
        let groups = rng.random_range(2..=5);
        for g in 0..groups {
            let n = rng.random_range(1..=20);
            for _ in 0..n {
                out.push(PredictionRecord {
                    attribute: attribute.into(),
                    group: format!("g{g}"),
                    gold: Sentiment::ALL[rng.random_range(0..3)],
                    pred: Sentiment::ALL[rng.random_range(0..3)],
                });
            }
        }
    }
    out
}

/// Metric value by direct filtering of the records, `None` when undefined.
fn brute_metric(records: &[&PredictionRecord], metric: Metric) -> Option<f64> {
    let (num, den) = match metric {
        Metric::Accuracy => (
            records.iter().filter(|r| r.gold == r.pred).count(),
            records.len(),
        ),
        Metric::PositiveFpr => {
            let eligible: Vec<_> = records.iter().filter(|r| r.gold != Sentiment::Positive).collect();
            (
                eligible.iter().filter(|r| r.pred == Sentiment::Positive).count(),
                eligible.len(),
            )
        }
        Metric::NegativeFpr => {
            let eligible: Vec<_> = records.iter().filter(|r| r.gold != Sentiment::Negative).collect();
            (
                eligible.iter().filter(|r| r.pred == Sentiment::Negative).count(),
                eligible.len(),
            )
        }
    };
    (den > 0).then(|| num as f64 / den as f64)
}

/// Median by full sort, midpoint of the two middle values for even counts.
fn brute_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub type CellGaps = BTreeMap<(String, String), Option<f64>>;

/// Independent recomputation of every (attribute, group) gap for `metric`.
/// Undefined groups are `None` and do not enter the median.
pub fn brute_force_gaps(records: &[PredictionRecord], metric: Metric) -> CellGaps {
    let mut cells: BTreeMap<(String, String), Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.attribute.clone(), r.group.clone())).or_default().push(r);
    }
    let values: BTreeMap<_, _> = cells
        .iter()
        .map(|(k, rs)| (k.clone(), brute_metric(rs, metric)))
        .collect();
    let mut out = CellGaps::new();
    let attributes: Vec<String> = values.keys().map(|(a, _)| a.clone()).collect();
    for attribute in attributes {
        let defined: Vec<f64> = values
            .iter()
            .filter(|((a, _), _)| *a == attribute)
            .filter_map(|(_, v)| *v)
            .collect();
        for ((a, g), v) in values.iter().filter(|((a, _), _)| *a == attribute) {
            let gap = match v {
                Some(x) if defined.len() >= 2 => Some(x - brute_median(&defined)),
                _ => None,
            };
            out.insert((a.clone(), g.clone()), gap);
        }
    }
    out
}

/// The same quantities through the library: tally, metric_value, gaps.
pub fn library_gaps(records: &[PredictionRecord], metric: Metric) -> CellGaps {
    let t = tally(records).unwrap();
    let mut per_attr: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut out = CellGaps::new();
    for ((a, g), conf) in &t {
        out.insert((a.clone(), g.clone()), None);
        if let Ok(v) = metric_value(conf, metric) {
            per_attr.entry(a.clone()).or_default().insert(g.clone(), v);
        }
    }
    for (a, values) in per_attr {
        if let Ok(gs) = gaps(&a, &values, Centre::Median) {
            for (g, (gap, _)) in gs {
                out.insert((a.clone(), g), Some(gap));
            }
        }
    }
    out
}

/// Largest absolute difference between two gap maps; `None` when they
/// disagree on which cells are defined.
pub fn max_gap_difference(a: &CellGaps, b: &CellGaps) -> Option<f64> {
    if a.keys().ne(b.keys()) {
        return None;
    }
    let mut worst = 0.0f64;
    for (k, x) in a {
        match (x, &b[k]) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return None,
        }
    }
    Some(worst)
}
