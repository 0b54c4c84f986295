//! Template packs and their Cartesian expansion into a counterfactually
//! balanced evaluation corpus.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::LabeledExample;
use super::labels::Sentiment;
use super::tokenizer::Tokenizer;
use crate::error::{Error, Result};

pub const SLOT: &str = "{identity_adj}";

/// attribute → group → descriptors.
pub type GroupMap = BTreeMap<String, BTreeMap<String, Vec<String>>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpec {
    pub pattern: String,
    pub sentiment: Sentiment,
}

/// On-disk pack: one sensitive attribute, its templates and its groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplatePack {
    pub attribute: String,
    pub templates: Vec<TemplateSpec>,
    pub groups: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub attribute: String,
    pub text_pattern: String,
    pub intended_sentiment: Sentiment,
}

impl Template {
    pub fn new(attribute: impl Into<String>, pattern: impl Into<String>, sentiment: Sentiment) -> Result<Self> {
        let t = Template {
            attribute: attribute.into(),
            text_pattern: pattern.into(),
            intended_sentiment: sentiment,
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        let n = self.text_pattern.matches(SLOT).count();
        if n != 1 {
            return Err(Error::Template(format!(
                "pattern {:?} must contain {SLOT} exactly once, found {n}",
                self.text_pattern
            )));
        }
        Ok(())
    }

    pub fn fill(&self, descriptor: &str) -> String {
        self.text_pattern.replacen(SLOT, descriptor, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalExample {
    pub example: LabeledExample,
    pub attribute: String,
    pub group: String,
    pub descriptor: String,
}

impl TemplatePack {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Template(format!("malformed template pack: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Template(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pack serializes")
    }

    pub fn templates(&self) -> Result<Vec<Template>> {
        self.templates
            .iter()
            .map(|t| Template::new(&self.attribute, &t.pattern, t.sentiment))
            .collect()
    }
}

/// The packs shipped with the crate (age, sexuality). Descriptor lists are
/// illustrative, not canonical.
pub fn bundled_packs() -> Vec<TemplatePack> {
    [
        include_str!("packs/age.json"),
        include_str!("packs/sexuality.json"),
    ]
    .iter()
    .map(|s| TemplatePack::from_json(s).expect("bundled pack is valid"))
    .collect()
}

/// Flattens packs into the template list and group map taken by
/// [`expand_templates`].
pub fn merge_packs(packs: &[TemplatePack]) -> Result<(Vec<Template>, GroupMap)> {
    let mut templates = Vec::new();
    let mut groups = GroupMap::new();
    for pack in packs {
        if groups.insert(pack.attribute.clone(), pack.groups.clone()).is_some() {
            return Err(Error::Template(format!(
                "attribute {:?} is declared by more than one pack",
                pack.attribute
            )));
        }
        templates.extend(pack.templates()?);
    }
    Ok((templates, groups))
}

/// One example per (template, group, descriptor), ordered by template index,
/// then group name, then descriptor index. The label is the template's
/// intended sentiment.
pub fn expand_templates(
    templates: &[Template],
    groups: &GroupMap,
    tokenizer: &Tokenizer,
) -> Result<Vec<EvalExample>> {
    let mut out = Vec::new();
    for t in templates {
        t.check()?;
        let by_group = groups.get(&t.attribute).ok_or_else(|| {
            Error::Template(format!("template attribute {:?} has no group list", t.attribute))
        })?;
        for (group, descriptors) in by_group {
            for d in descriptors {
                let example = LabeledExample::new(t.fill(d), tokenizer, t.intended_sentiment)
                    .map_err(|e| Error::Template(e.to_string()))?;
                out.push(EvalExample {
                    example,
                    attribute: t.attribute.clone(),
                    group: group.clone(),
                    descriptor: d.clone(),
                });
            }
        }
    }
    Ok(out)
}
