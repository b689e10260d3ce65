use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::hash::fnv1a64;

/// Longest knowledge text injected into a prompt, in characters.
pub const MAX_INJECTED_CHARS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateId {
    SummarizeDoc,
    ExtractFacets,
    MakeTaskPlan,
    MakeFeaturePlan,
    MakeSearchConfig,
    ReviewResults,
    CompileReport,
    RerankKnowledge,
}

impl TemplateId {
    pub const ALL: [TemplateId; 8] = [
        TemplateId::SummarizeDoc,
        TemplateId::ExtractFacets,
        TemplateId::MakeTaskPlan,
        TemplateId::MakeFeaturePlan,
        TemplateId::MakeSearchConfig,
        TemplateId::ReviewResults,
        TemplateId::CompileReport,
        TemplateId::RerankKnowledge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SummarizeDoc => "summarize-doc",
            TemplateId::ExtractFacets => "extract-facets",
            TemplateId::MakeTaskPlan => "make-task-plan",
            TemplateId::MakeFeaturePlan => "make-feature-plan",
            TemplateId::MakeSearchConfig => "make-search-config",
            TemplateId::ReviewResults => "review-results",
            TemplateId::CompileReport => "compile-report",
            TemplateId::RerankKnowledge => "rerank-knowledge",
        }
    }

    /// Prompt text shipped with the crate. Placeholders are `{{slot}}`;
    /// `{{knowledge}}` receives the injected items.
    pub fn template_text(self) -> &'static str {
        match self {
            TemplateId::SummarizeDoc => include_str!("../../templates/summarize-doc.txt"),
            TemplateId::ExtractFacets => include_str!("../../templates/extract-facets.txt"),
            TemplateId::MakeTaskPlan => include_str!("../../templates/make-task-plan.txt"),
            TemplateId::MakeFeaturePlan => include_str!("../../templates/make-feature-plan.txt"),
            TemplateId::MakeSearchConfig => include_str!("../../templates/make-search-config.txt"),
            TemplateId::ReviewResults => include_str!("../../templates/review-results.txt"),
            TemplateId::CompileReport => include_str!("../../templates/compile-report.txt"),
            TemplateId::RerankKnowledge => include_str!("../../templates/rerank-knowledge.txt"),
        }
    }

    /// Slots the template text refers to, in order of first appearance.
    pub fn required_slots(self) -> Vec<&'static str> {
        let mut slots = Vec::new();
        for name in placeholders(self.template_text()) {
            if name != KNOWLEDGE_SLOT && !slots.contains(&name) {
                slots.push(name);
            }
        }
        slots
    }
}

const KNOWLEDGE_SLOT: &str = "knowledge";

fn placeholders(text: &str) -> impl Iterator<Item = &str> {
    text.split("{{").skip(1).filter_map(|chunk| {
        let (name, _) = chunk.split_once("}}")?;
        (!name.is_empty() && name.bytes().all(|b| b.is_ascii_lowercase() || b == b'_'))
            .then_some(name)
    })
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedKnowledge {
    pub item_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub template_id: TemplateId,
    pub slots: BTreeMap<String, String>,
    pub injected_knowledge: Vec<InjectedKnowledge>,
}

impl PromptEnvelope {
    pub fn new(template_id: TemplateId) -> Self {
        Self {
            template_id,
            slots: BTreeMap::new(),
            injected_knowledge: Vec::new(),
        }
    }

    pub fn slot(mut self, name: &str, value: impl Into<String>) -> Self {
        self.slots.insert(name.to_string(), value.into());
        self
    }

    /// Adds knowledge, cutting texts longer than the injection limit.
    pub fn inject(mut self, item_id: impl Into<String>, text: &str) -> Self {
        self.injected_knowledge.push(InjectedKnowledge {
            item_id: item_id.into(),
            text: truncate_chars(text, MAX_INJECTED_CHARS),
        });
        self
    }

    pub fn injected_ids(&self) -> impl Iterator<Item = &str> {
        self.injected_knowledge.iter().map(|k| k.item_id.as_str())
    }

    pub fn missing_slots(&self) -> Vec<&'static str> {
        self.template_id
            .required_slots()
            .into_iter()
            .filter(|s| !self.slots.contains_key(*s))
            .collect()
    }

    /// Key used by scripted fixtures: FNV-1a over
    /// `template_id\n` + `name=value\n` per slot (sorted by name) + `ids=` +
    /// comma-joined injected item ids, printed as 16 lowercase hex digits.
    pub fn slot_digest(&self) -> String {
        let mut canonical = format!("{}\n", self.template_id);
        for (name, value) in &self.slots {
            canonical.push_str(name);
            canonical.push('=');
            canonical.push_str(value);
            canonical.push('\n');
        }
        canonical.push_str("ids=");
        let ids: Vec<&str> = self.injected_ids().collect();
        canonical.push_str(&ids.join(","));
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    /// Fills the template text. Unknown placeholders are left as-is.
    pub fn render(&self) -> String {
        let text = self.template_id.template_text();
        let mut out = String::with_capacity(text.len() + 256);
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            match after.split_once("}}") {
                Some((name, tail)) if name == KNOWLEDGE_SLOT => {
                    if self.injected_knowledge.is_empty() {
                        out.push_str("(none)");
                    }
                    for (i, k) in self.injected_knowledge.iter().enumerate() {
                        if i > 0 {
                            out.push('\n');
                        }
                        out.push_str(&format!("- [{}] {}", k.item_id, k.text));
                    }
                    rest = tail;
                }
                Some((name, tail)) if self.slots.contains_key(name) => {
                    out.push_str(&self.slots[name]);
                    rest = tail;
                }
                _ => {
                    out.push_str("{{");
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// Keeps at most `max` characters; a cut text ends with `…`.
pub fn truncate_chars(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut out: String = text.chars().take(max.saturating_sub(1)).collect();
    out.push('…');
    out
}
