//! Task datasets in the tab-separated layout `text<TAB>raw_label<TAB>split`
//! with a mandatory header row.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::labels::{LabelFormat, Sentiment};
use super::tokenizer::Tokenizer;
use crate::error::{Error, Result};

pub const TSV_HEADER: &str = "text\traw_label\tsplit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split {other:?}"))),
        }
    }
}

/// One raw row as it appears in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRow {
    pub text: String,
    pub raw_label: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    pub text: String,
    pub token_ids: Vec<usize>,
    pub label: Sentiment,
}

impl LabeledExample {
    pub fn new(text: impl Into<String>, tokenizer: &Tokenizer, label: Sentiment) -> Result<Self> {
        let text = text.into();
        let token_ids = tokenizer.encode(&text);
        if token_ids.is_empty() {
            return Err(Error::Data(format!("text {text:?} tokenizes to nothing")));
        }
        Ok(LabeledExample {
            text,
            token_ids,
            label,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskDataset {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

pub fn parse_task_rows(text: &str, source: &str) -> Result<Vec<TaskRow>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == TSV_HEADER => {}
        Some((_, h)) => {
            return Err(parse_err(1, format!("expected header {TSV_HEADER:?}, found {h:?}")));
        }
        None => return Err(parse_err(1, "missing header row".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(
                i + 1,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let split = cols[2]
            .parse()
            .map_err(|e: Error| parse_err(i + 1, e.to_string()))?;
        rows.push(TaskRow {
            text: cols[0].to_string(),
            raw_label: cols[1].to_string(),
            split,
        });
    }
    Ok(rows)
}

pub fn read_task_rows(path: &Path) -> Result<Vec<TaskRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_task_rows(&text, &path.display().to_string())
}

pub fn format_task_rows(rows: &[TaskRow]) -> Result<String> {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for row in rows {
        for field in [&row.text, &row.raw_label] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(Error::Data(format!(
                    "field {field:?} contains a tab or line break"
                )));
            }
        }
        out.push_str(&format!("{}\t{}\t{}\n", row.text, row.raw_label, row.split));
    }
    Ok(out)
}

pub fn write_task_rows(path: &Path, rows: &[TaskRow]) -> Result<()> {
    std::fs::write(path, format_task_rows(rows)?).map_err(|e| Error::io(path, e))
}

/// Maps labels, tokenizes and partitions rows by their split column,
/// keeping file order within each split.
pub fn build_task_dataset(
    rows: &[TaskRow],
    format: LabelFormat,
    tokenizer: &Tokenizer,
    source: &str,
) -> Result<TaskDataset> {
    let mut ds = TaskDataset::default();
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        let at = |e: Error| Error::Parse {
            path: source.to_string(),
            line,
            message: e.to_string(),
        };
        let label = format.map(&row.raw_label).map_err(at)?;
        let ex = LabeledExample::new(row.text.clone(), tokenizer, label).map_err(at)?;
        match row.split {
            Split::Train => ds.train.push(ex),
            Split::Validation => ds.validation.push(ex),
            Split::Test => ds.test.push(ex),
        }
    }
    if ds.validation.is_empty() {
        return Err(Error::Data(format!(
            "{source}: no validation rows; prompt selection needs a validation split"
        )));
    }
    Ok(ds)
}

pub fn load_task_dataset(path: &Path, format: LabelFormat, tokenizer: &Tokenizer) -> Result<TaskDataset> {
    let rows = read_task_rows(path)?;
    build_task_dataset(&rows, format, tokenizer, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> Tokenizer {
        Tokenizer::build(&["it was great fine awful"], 50).unwrap()
    }

    #[test]
    fn semeval_row_maps_to_positive_train_example() {
        let text = format!("{TSV_HEADER}\nit was great\t3\ttrain\nit was fine\t0\tvalidation\n");
        let rows = parse_task_rows(&text, "mem").unwrap();
        let ds = build_task_dataset(&rows, LabelFormat::Semeval, &tok(), "mem").unwrap();
        assert_eq!(ds.train.len(), 1);
        assert_eq!(ds.train[0].label, Sentiment::Positive);
        assert_eq!(ds.train[0].text, "it was great");
        assert_eq!(ds.validation[0].label, Sentiment::Neutral);
    }

    #[test]
    fn missing_validation_split_is_a_data_error() {
        let text = format!("{TSV_HEADER}\nit was great\t3\ttrain\nit was awful\t-3\ttest\n");
        let rows = parse_task_rows(&text, "mem").unwrap();
        let err = build_task_dataset(&rows, LabelFormat::Semeval, &tok(), "mem").unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn errors_are_row_addressed() {
        let text = format!("{TSV_HEADER}\nok\t1\ttrain\nbroken row\t1\n");
        match parse_task_rows(&text, "f.tsv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let text = format!("{TSV_HEADER}\nit was great\t1\tvalidation\nit was fine\t9\ttrain\n");
        let rows = parse_task_rows(&text, "f.tsv").unwrap();
        match build_task_dataset(&rows, LabelFormat::Semeval, &tok(), "f.tsv").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(parse_task_rows("it was great\t3\ttrain\n", "mem").is_err());
    }

    #[test]
    fn rows_round_trip_through_the_file_format() {
        let rows = vec![
            TaskRow {
                text: "a b".into(),
                raw_label: "very-positive".into(),
                split: Split::Train,
            },
            TaskRow {
                text: "c".into(),
                raw_label: "neutral".into(),
                split: Split::Validation,
            },
            TaskRow {
                text: "d, e.".into(),
                raw_label: "negative".into(),
                split: Split::Test,
            },
        ];
        let text = format_task_rows(&rows).unwrap();
        let back = parse_task_rows(&text, "mem").unwrap();
        assert_eq!(rows, back);
        assert_eq!(format_task_rows(&back).unwrap(), text);
    }
}
