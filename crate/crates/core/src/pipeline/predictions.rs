use std::fmt::Write as _;
use std::path::Path;

use crate::data::Sentiment;
use crate::error::{Error, Result};
use crate::fairness::PredictionRecord;

pub const PREDICTIONS_HEADER: &str = "example_id,source,attribute,group,gold,pred";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Task,
    Template,
}

impl Source {
    fn name(self) -> &'static str {
        match self {
            Source::Task => "task",
            Source::Template => "template",
        }
    }
}

/// One row of a predictions file. Task rows have empty attribute and group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub example_id: usize,
    pub source: Source,
    pub attribute: String,
    pub group: String,
    pub gold: Sentiment,
    pub pred: Sentiment,
}

impl PredictionRow {
    pub fn fairness_record(&self) -> Option<PredictionRecord> {
        (self.source == Source::Template).then(|| PredictionRecord {
            attribute: self.attribute.clone(),
            group: self.group.clone(),
            gold: self.gold,
            pred: self.pred,
        })
    }
}

fn check_field(s: &str) -> Result<&str> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::Data(format!(
            "name {s:?} cannot be written to a predictions file"
        )));
    }
    Ok(s)
}

/// Classes are written as indices: 0 negative, 1 neutral, 2 positive.
pub fn format_predictions(rows: &[PredictionRow]) -> Result<String> {
    let mut out = format!("{PREDICTIONS_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.example_id,
            r.source.name(),
            check_field(&r.attribute)?,
            check_field(&r.group)?,
            r.gold.index(),
            r.pred.index()
        )
        .expect("writing to a String");
    }
    Ok(out)
}

pub fn parse_predictions(text: &str, source_name: &str) -> Result<Vec<PredictionRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(PREDICTIONS_HEADER) {
        return Err(Error::Parse {
            path: source_name.into(),
            line: 1,
            message: format!("expected header {PREDICTIONS_HEADER:?}"),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let at = |message: String| Error::Parse {
                path: source_name.into(),
                line: i + 2,
                message,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(at(format!("expected 6 fields, found {}", f.len())));
            }
            let class = |s: &str| -> Result<Sentiment> {
                s.parse::<usize>()
                    .map_err(|_| at(format!("class {s:?} is not an index")))
                    .and_then(|i| Sentiment::from_index(i).map_err(|e| at(e.to_string())))
            };
            Ok(PredictionRow {
                example_id: f[0].parse().map_err(|_| at(format!("bad example id {:?}", f[0])))?,
                source: match f[1] {
                    "task" => Source::Task,
                    "template" => Source::Template,
                    other => return Err(at(format!("unknown source {other:?}"))),
                },
                attribute: f[2].into(),
                group: f[3].into(),
                gold: class(f[4])?,
                pred: class(f[5])?,
            })
        })
        .collect()
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, &path.display().to_string())
}
