use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-way sentiment class. The discriminant is the class index used in
/// files and in the verbalizer order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Label(format!("class index {i} is not in 0..=2")))
    }

    /// Also the verbalizer token for the class.
    pub fn name(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sentiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            other => Err(Error::Label(format!("unknown sentiment {other:?}"))),
        }
    }
}

/// SemEval valence ordinal scale: −3,−2 → negative; −1,0,1 → neutral;
/// 2,3 → positive.
pub fn map_semeval_label(raw: i64) -> Result<Sentiment> {
    match raw {
        -3 | -2 => Ok(Sentiment::Negative),
        -1..=1 => Ok(Sentiment::Neutral),
        2 | 3 => Ok(Sentiment::Positive),
        _ => Err(Error::Label(format!("SemEval valence {raw} is outside [-3, 3]"))),
    }
}

pub const SST5_LABELS: [&str; 5] = [
    "very-negative",
    "negative",
    "neutral",
    "positive",
    "very-positive",
];

/// Five-way treebank labels collapsed by polarity; neutral is kept.
pub fn map_sst5_label(raw: &str) -> Result<Sentiment> {
    match raw {
        "very-negative" | "negative" => Ok(Sentiment::Negative),
        "neutral" => Ok(Sentiment::Neutral),
        "positive" | "very-positive" => Ok(Sentiment::Positive),
        other => Err(Error::Label(format!("unknown SST-5 label {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelFormat {
    Semeval,
    Sst5,
}

impl LabelFormat {
    pub fn map(self, raw: &str) -> Result<Sentiment> {
        match self {
            LabelFormat::Semeval => {
                let v: i64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::Label(format!("SemEval label {raw:?} is not an integer")))?;
                map_semeval_label(v)
            }
            LabelFormat::Sst5 => map_sst5_label(raw.trim()),
        }
    }
}

impl FromStr for LabelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semeval" => Ok(LabelFormat::Semeval),
            "sst5" => Ok(LabelFormat::Sst5),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}
