use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::confusion::Metric;
use super::gaps::{harm_direction, HarmDirection};
use super::report::GapResult;
use crate::error::{Error, Result};

pub const NET_COUNT_HEADER: &str = "attribute,group,metric,dataset,net,signs,direction";

/// Net number of models whose gap for one cell is significantly above zero
/// minus those significantly below.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetCountCell {
    pub attribute: String,
    pub group: String,
    pub metric: Metric,
    pub dataset: String,
    pub net: i64,
    pub contributing: Vec<(String, i8)>,
}

impl NetCountCell {
    pub fn direction(&self) -> HarmDirection {
        harm_direction(self.metric, self.net as f64, self.net != 0)
    }
}

pub fn significance_sign(r: &GapResult) -> i8 {
    if !r.significant || r.gap == 0.0 {
        0
    } else if r.gap > 0.0 {
        1
    } else {
        -1
    }
}

/// Cells keyed by (attribute, group, metric, dataset), in that sort order.
pub fn net_counts(results: &[GapResult]) -> Result<Vec<NetCountCell>> {
    let mut cells: BTreeMap<(&str, &str, Metric, &str), BTreeMap<&str, i8>> = BTreeMap::new();
    for r in results {
        let key = (r.attribute.as_str(), r.group.as_str(), r.metric, r.dataset.as_str());
        if cells
            .entry(key)
            .or_default()
            .insert(&r.model, significance_sign(r))
            .is_some()
        {
            return Err(Error::Aggregation(format!(
                "model {:?} contributes twice to {}/{}/{}/{}",
                r.model, r.attribute, r.group, r.metric, r.dataset
            )));
        }
    }
    Ok(cells
        .into_iter()
        .map(|((attribute, group, metric, dataset), signs)| NetCountCell {
            attribute: attribute.into(),
            group: group.into(),
            metric,
            dataset: dataset.into(),
            net: signs.values().map(|&s| s as i64).sum(),
            contributing: signs.into_iter().map(|(m, s)| (m.into(), s)).collect(),
        })
        .collect())
}

fn direction_name(d: HarmDirection) -> &'static str {
    match d {
        HarmDirection::Harmful => "harmful",
        HarmDirection::Favorable => "favorable",
        HarmDirection::Neutral => "neutral",
    }
}

/// CSV with one row per cell. `signs` lists `model:sign` pairs separated by
/// `;`; `direction` marks whether a nonzero net points the harmful way.
pub fn net_count_csv(cells: &[NetCountCell]) -> String {
    let mut out = format!("{NET_COUNT_HEADER}\n");
    for c in cells {
        let signs: Vec<String> = c
            .contributing
            .iter()
            .map(|(m, s)| format!("{m}:{s:+}"))
            .collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.attribute,
            c.group,
            c.metric,
            c.dataset,
            c.net,
            signs.join(";"),
            direction_name(c.direction())
        )
        .expect("writing to a String");
    }
    out
}
