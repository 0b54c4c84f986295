use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::confusion::Metric;
use crate::error::{Error, Result};

/// Reference value the group gaps are measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centre {
    /// Midpoint of the two middle values for an even group count.
    #[default]
    Median,
    Mean,
}

impl Centre {
    pub fn of(self, values: &[f64]) -> f64 {
        match self {
            Centre::Median => {
                let mut v = values.to_vec();
                v.sort_by(f64::total_cmp);
                let mid = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[mid]
                } else {
                    (v[mid - 1] + v[mid]) / 2.0
                }
            }
            Centre::Mean => values.iter().sum::<f64>() / values.len() as f64,
        }
    }
}

/// Gap of every group to the centre of the attribute, as `(gap, centre)`.
pub fn gaps(
    attribute: &str,
    values: &BTreeMap<String, f64>,
    centre: Centre,
) -> Result<BTreeMap<String, (f64, f64)>> {
    if values.len() < 2 {
        return Err(Error::Attribute(format!(
            "attribute {attribute:?} has {} group(s) with a defined value; gaps need at least 2",
            values.len()
        )));
    }
    let v: Vec<f64> = values.values().copied().collect();
    let c = centre.of(&v);
    Ok(values
        .iter()
        .map(|(g, &x)| (g.clone(), (x - c, c)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub significant: bool,
}

/// Two-sided Student-t quantile for `confidence` with `df` degrees of
/// freedom.
pub fn t_quantile(confidence: f64, df: usize) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Statistics(format!(
            "confidence {confidence} must lie strictly between 0 and 1"
        )));
    }
    let t = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Statistics(format!("Student t with {df} df: {e}")))?;
    Ok(t.inverse_cdf(0.5 + confidence / 2.0))
}

/// Mean with a Student-t interval over `samples`, using the sample standard
/// deviation. Significant when the interval excludes zero.
pub fn gap_with_ci(samples: &[f64], confidence: f64) -> Result<ConfidenceInterval> {
    let k = samples.len();
    if k < 2 {
        return Err(Error::Statistics(format!(
            "a confidence interval needs at least 2 samples, got {k}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / k as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let half = t_quantile(confidence, k - 1)? * var.sqrt() / (k as f64).sqrt();
    let (ci_low, ci_high) = (mean - half, mean + half);
    Ok(ConfidenceInterval {
        mean,
        ci_low,
        ci_high,
        significant: !(ci_low <= 0.0 && 0.0 <= ci_high),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmDirection {
    Harmful,
    Favorable,
    Neutral,
}

/// Whether a gap hurts the group. A lower positive FPR means the group
/// profits less from errors, a higher negative FPR means it is cast as
/// negative more often, and lower accuracy is worse service.
pub fn harm_direction(metric: Metric, gap: f64, significant: bool) -> HarmDirection {
    if !significant || gap == 0.0 {
        return HarmDirection::Neutral;
    }
    let harmful = match metric {
        Metric::PositiveFpr | Metric::Accuracy => gap < 0.0,
        Metric::NegativeFpr => gap > 0.0,
    };
    if harmful {
        HarmDirection::Harmful
    } else {
        HarmDirection::Favorable
    }
}
