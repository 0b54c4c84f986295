//! Tokenization, task datasets with their three-way label mappings, and
//! template expansion for the bias evaluation corpus.

mod dataset;
mod labels;
pub mod synthetic;
mod templates;
mod tokenizer;

pub use dataset::{
    build_task_dataset, format_task_rows, load_task_dataset, parse_task_rows, read_task_rows,
    write_task_rows, LabeledExample, Split, TaskDataset, TaskRow, TSV_HEADER,
};
pub use labels::{map_semeval_label, map_sst5_label, LabelFormat, Sentiment, SST5_LABELS};
pub use templates::{
    bundled_packs, expand_templates, merge_packs, EvalExample, GroupMap, Template, TemplatePack,
    TemplateSpec, SLOT,
};
pub use tokenizer::{split_words, Tokenizer, BOS, BOS_ID, PAD_ID, RESERVED, UNK, UNK_ID};
