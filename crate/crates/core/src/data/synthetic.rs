//! Generators for stand-in corpora, so the whole pipeline runs without
//! downloading anything.
//!
//! Sentiment comes only from three disjoint word lists; the surrounding
//! frame words are shared. Counting lexicon hits therefore separates the
//! classes linearly.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{Split, TaskRow};
use super::labels::{LabelFormat, Sentiment};

pub const POSITIVE_WORDS: &[&str] = &[
    "great", "good", "wonderful", "excellent", "lovely", "superb", "brilliant", "delightful",
    "enjoyable", "fantastic", "kind", "love",
];
pub const NEGATIVE_WORDS: &[&str] = &[
    "awful", "bad", "terrible", "horrible", "boring", "dreadful", "poor", "dull", "painful",
    "disappointing", "sad", "trap",
];
pub const NEUTRAL_WORDS: &[&str] = &[
    "ordinary", "average", "plain", "typical", "standard", "moderate", "usual", "regular",
    "routine", "adequate", "normal", "fair",
];

const SUBJECTS: &[&str] = &[
    "the movie", "the film", "the story", "the plot", "the acting", "the music", "the ending",
    "this show", "the cast", "the script", "the book", "my day",
];
const VERBS: &[&str] = &["was", "is", "felt", "seemed", "looked"];
const OPENERS: &[&str] = &["", "", "honestly", "i think", "overall", "in my view", "to me"];
const INTENSIFIERS: &[&str] = &["very", "really", "truly", "so"];
const FILLERS: &[&str] = &[
    "we went home after that",
    "the weather was cold",
    "i will tell my friends",
    "people talk about it",
    "the room had many seats",
    "it ran for two hours",
];

pub fn lexicon(class: Sentiment) -> &'static [&'static str] {
    match class {
        Sentiment::Negative => NEGATIVE_WORDS,
        Sentiment::Neutral => NEUTRAL_WORDS,
        Sentiment::Positive => POSITIVE_WORDS,
    }
}

fn pick<'a, R: Rng>(rng: &mut R, items: &'a [&'a str]) -> &'a str {
    items.choose(rng).copied().unwrap_or("")
}

/// One sentence carrying `class` sentiment through one or two lexicon words.
pub fn sentiment_sentence<R: Rng>(rng: &mut R, class: Sentiment, intense: bool) -> String {
    let mut parts: Vec<&str> = Vec::new();
    let opener = pick(rng, OPENERS);
    if !opener.is_empty() {
        parts.push(opener);
    }
    parts.push(pick(rng, SUBJECTS));
    parts.push(pick(rng, VERBS));
    if intense {
        parts.push(pick(rng, INTENSIFIERS));
    }
    parts.push(pick(rng, lexicon(class)));
    if rng.random_bool(0.5) {
        parts.push("and");
        parts.push(pick(rng, SUBJECTS));
        parts.push(pick(rng, VERBS));
        parts.push(pick(rng, lexicon(class)));
    }
    parts.join(" ")
}

fn raw_label<R: Rng>(rng: &mut R, format: LabelFormat, class: Sentiment) -> (String, bool) {
    match format {
        LabelFormat::Semeval => {
            let choices: &[i64] = match class {
                Sentiment::Negative => &[-3, -2],
                Sentiment::Neutral => &[-1, 0, 1],
                Sentiment::Positive => &[2, 3],
            };
            let v = *choices.choose(rng).unwrap();
            (v.to_string(), v.abs() == 3)
        }
        LabelFormat::Sst5 => {
            let choices: &[&str] = match class {
                Sentiment::Negative => &["very-negative", "negative"],
                Sentiment::Neutral => &["neutral"],
                Sentiment::Positive => &["positive", "very-positive"],
            };
            let v = pick(rng, choices);
            (v.to_string(), v.starts_with("very"))
        }
    }
}

/// Task rows with raw labels in the given format, classes drawn uniformly.
pub fn task_rows(format: LabelFormat, counts: [(Split, usize); 3], seed: u64) -> Vec<TaskRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (split, n) in counts {
        for _ in 0..n {
            let class = *Sentiment::ALL.choose(&mut rng).unwrap();
            let (raw, intense) = raw_label(&mut rng, format, class);
            rows.push(TaskRow {
                text: sentiment_sentence(&mut rng, class, intense),
                raw_label: raw,
                split,
            });
        }
    }
    rows
}

/// Language-model pretraining text. Each line is a sentiment sentence that
/// is followed by its verbalizer half of the time and by a neutral filler
/// clause otherwise. `extra_words` (for example identity descriptors) are
/// mixed into filler lines so they receive trained embeddings without any
/// sentiment association.
pub fn pretraining_corpus(n_lines: usize, extra_words: &[String], seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(n_lines);
    for _ in 0..n_lines {
        let mut line = String::new();
        if !extra_words.is_empty() && rng.random_bool(0.2) {
            let w = extra_words.choose(&mut rng).unwrap();
            line.push_str(&format!("{} is {w} . ", pick(&mut rng, &["my neighbour", "the person", "my friend", "the writer"])));
        }
        let class = *Sentiment::ALL.choose(&mut rng).unwrap();
        let intense = rng.random_bool(0.3);
        line.push_str(&sentiment_sentence(&mut rng, class, intense));
        if rng.random_bool(0.5) {
            line.push(' ');
            line.push_str(class.name());
        } else {
            line.push_str(" . ");
            line.push_str(pick(&mut rng, FILLERS));
        }
        lines.push(line);
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenizer::split_words;

    #[test]
    fn lexicons_are_disjoint() {
        for a in POSITIVE_WORDS {
            assert!(!NEGATIVE_WORDS.contains(a) && !NEUTRAL_WORDS.contains(a));
        }
        for a in NEGATIVE_WORDS {
            assert!(!NEUTRAL_WORDS.contains(a));
        }
    }

    #[test]
    fn task_rows_are_separable_by_lexicon_counts() {
        let rows = task_rows(
            LabelFormat::Semeval,
            [(Split::Train, 200), (Split::Validation, 50), (Split::Test, 50)],
            4,
        );
        assert_eq!(rows.len(), 300);
        for row in &rows {
            let class = LabelFormat::Semeval.map(&row.raw_label).unwrap();
            let words = split_words(&row.text);
            for other in Sentiment::ALL {
                let hits = words.iter().filter(|w| lexicon(other).contains(&w.as_str())).count();
                assert_eq!(hits > 0, other == class, "{:?}", row.text);
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = task_rows(LabelFormat::Sst5, [(Split::Train, 10), (Split::Validation, 5), (Split::Test, 0)], 9);
        let b = task_rows(LabelFormat::Sst5, [(Split::Train, 10), (Split::Validation, 5), (Split::Test, 0)], 9);
        assert_eq!(a, b);
        assert_eq!(pretraining_corpus(20, &[], 1), pretraining_corpus(20, &[], 1));
    }
}
