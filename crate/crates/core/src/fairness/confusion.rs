use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Sentiment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    PositiveFpr,
    NegativeFpr,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Accuracy, Metric::PositiveFpr, Metric::NegativeFpr];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::PositiveFpr => "positive_fpr",
            Metric::NegativeFpr => "negative_fpr",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

/// One classified template example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub attribute: String,
    pub group: String,
    pub gold: Sentiment,
    pub pred: Sentiment,
}

/// Confusion counts of one protected group, indexed by class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub group: String,
    pub true_positive: [u64; 3],
    /// Examples whose gold label is not the class.
    pub fp_eligible: [u64; 3],
    /// Of the eligible examples, those predicted as the class.
    pub false_positive: [u64; 3],
    pub correct: u64,
    pub total: u64,
}

impl GroupConfusion {
    pub fn new(group: impl Into<String>) -> Self {
        GroupConfusion {
            group: group.into(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, gold: Sentiment, pred: Sentiment) {
        self.total += 1;
        if gold == pred {
            self.correct += 1;
            self.true_positive[gold.index()] += 1;
        }
        for c in Sentiment::ALL {
            if c != gold {
                self.fp_eligible[c.index()] += 1;
                if pred == c {
                    self.false_positive[c.index()] += 1;
                }
            }
        }
    }
}

/// `(attribute, group)`.
pub type GroupKey = (String, String);

/// Per-(attribute, group) confusion counts.
pub fn tally(predictions: &[PredictionRecord]) -> Result<BTreeMap<GroupKey, GroupConfusion>> {
    if predictions.is_empty() {
        return Err(Error::Data("no predictions to tally".into()));
    }
    let mut out: BTreeMap<GroupKey, GroupConfusion> = BTreeMap::new();
    for p in predictions {
        out.entry((p.attribute.clone(), p.group.clone()))
            .or_insert_with(|| GroupConfusion::new(&p.group))
            .add(p.gold, p.pred);
    }
    Ok(out)
}

pub fn metric_value(conf: &GroupConfusion, metric: Metric) -> Result<f64> {
    let (num, den) = match metric {
        Metric::Accuracy => (conf.correct, conf.total),
        Metric::PositiveFpr => {
            let i = Sentiment::Positive.index();
            (conf.false_positive[i], conf.fp_eligible[i])
        }
        Metric::NegativeFpr => {
            let i = Sentiment::Negative.index();
            (conf.false_positive[i], conf.fp_eligible[i])
        }
    };
    if den == 0 {
        return Err(Error::UndefinedMetric {
            group: conf.group.clone(),
            metric: metric.name().into(),
        });
    }
    Ok(num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Sentiment::*;

    fn rec(group: &str, gold: Sentiment, pred: Sentiment) -> PredictionRecord {
        PredictionRecord {
            attribute: "age".into(),
            group: group.into(),
            gold,
            pred,
        }
    }

    #[test]
    fn perfect_classifier_has_no_false_positives() {
        let preds: Vec<_> = [Negative, Neutral, Positive, Positive]
            .into_iter()
            .map(|c| rec("old", c, c))
            .collect();
        let t = tally(&preds).unwrap();
        let c = &t[&("age".into(), "old".into())];
        assert_eq!(c.false_positive, [0, 0, 0]);
        assert_eq!(c.correct, c.total);
        assert_eq!(c.true_positive, [1, 1, 2]);
    }

    #[test]
    fn negative_predicted_positive() {
        let t = tally(&[rec("old", Negative, Positive)]).unwrap();
        let c = &t[&("age".into(), "old".into())];
        assert_eq!(c.false_positive[Positive.index()], 1);
        assert_eq!(c.fp_eligible[Positive.index()], 1);
        assert_eq!(metric_value(c, Metric::PositiveFpr).unwrap(), 1.0);
    }

    #[test]
    fn metric_arithmetic() {
        let c = GroupConfusion {
            group: "g".into(),
            correct: 8,
            total: 10,
            fp_eligible: [3, 7, 5],
            false_positive: [1, 0, 0],
            ..Default::default()
        };
        assert_eq!(metric_value(&c, Metric::Accuracy).unwrap(), 0.8);
        assert_eq!(metric_value(&c, Metric::PositiveFpr).unwrap(), 0.0);
        assert!((metric_value(&c, Metric::NegativeFpr).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn all_negative_gold_leaves_negative_fpr_undefined() {
        let t = tally(&[rec("old", Negative, Negative), rec("old", Negative, Positive)]).unwrap();
        let c = &t[&("age".into(), "old".into())];
        match metric_value(c, Metric::NegativeFpr) {
            Err(Error::UndefinedMetric { group, metric }) => {
                assert_eq!((group.as_str(), metric.as_str()), ("old", "negative_fpr"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn group_totals_partition_the_input() {
        let preds = vec![
            rec("old", Negative, Neutral),
            rec("young", Positive, Positive),
            rec("young", Neutral, Negative),
        ];
        let t = tally(&preds).unwrap();
        assert_eq!(t.values().map(|c| c.total).sum::<u64>(), 3);
        assert!(tally(&[]).is_err());
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
    }
}
